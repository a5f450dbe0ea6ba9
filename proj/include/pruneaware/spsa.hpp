#ifndef PRUNEAWARE_SPSA_HPP
#define PRUNEAWARE_SPSA_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "pruneaware/param_space.hpp"

namespace pruneaware
{

/// Fitness to maximize.
using Fitness = std::function<double(const ParamVector&)>;

/// Fitness whose definition depends on the gain index k of the current step.
using ScheduledFitness = std::function<double(const ParamVector&, std::uint64_t k)>;

/// a_k = a / (A + k + 1)^gamma,  c_k = c / (k + 1)^beta.
struct GainSchedule
{
    double a = 1.0;
    double A = 10273.0;
    double gamma = 0.602;
    double c = 0.020765;
    double beta = 0.101;

    void validate() const;
};

struct Gains
{
    double a_k;
    double c_k;
};

Gains gain_at(const GainSchedule& s, std::uint64_t k);

/// Counter-based generator: the n-th output of stream (seed, iteration, slot)
/// is a pure function of those four numbers, so any draw can be reproduced
/// without replaying earlier ones.
class CounterRng
{
  public:
    CounterRng(std::uint64_t seed, std::uint64_t iteration, std::uint64_t slot);

    std::uint64_t next();

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// n iid fair signs in {-1, +1}.
Eigen::VectorXd sample_rademacher(Index n, CounterRng& rng);

struct SpsaStepResult
{
    ParamVector params;
    double y_plus;
    double y_minus;
};

/// One SPSA ascent step at iteration k. Coordinates in `freeze` are left out of
/// the perturbation and set to zero after the update. Throws OptimizerError if
/// either fitness evaluation is not finite.
SpsaStepResult spsa_step(const ParamVector& w, const Fitness& f, const GainSchedule& s, std::uint64_t k,
                         std::uint64_t seed, const PruningMask& freeze = {});

struct TraceRow
{
    std::uint64_t k;
    double fitness;
    double a_k;
    double c_k;
};

struct SpsaOptions
{
    GainSchedule gains;
    std::uint64_t iterations = 0;
    std::uint64_t seed = 0;
    /// Gain index of the first step; lets a run continue an earlier schedule.
    std::uint64_t start_iteration = 0;
    /// Record f(w_k) every `trace_stride` steps (and after the last one); 0 disables tracing.
    std::uint64_t trace_stride = 0;
    PruningMask freeze;
};

struct OptimizeResult
{
    ParamVector params;
    std::vector<TraceRow> trace;
    std::uint64_t steps = 0;
};

OptimizeResult optimize(const ParamVector& w0, const Fitness& f, const SpsaOptions& options);

/// As above; step k optimizes `f(., k)` and the trace records f(w_k, k).
OptimizeResult optimize(const ParamVector& w0, const ScheduledFitness& f, const SpsaOptions& options);

/// CSV with header "k,fitness,a_k,c_k".
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

} // namespace pruneaware

#endif
