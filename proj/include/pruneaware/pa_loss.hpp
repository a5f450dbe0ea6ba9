#ifndef PRUNEAWARE_PA_LOSS_HPP
#define PRUNEAWARE_PA_LOSS_HPP

#include <cstdint>
#include <string_view>

#include "pruneaware/param_space.hpp"
#include "pruneaware/spsa.hpp"

namespace pruneaware
{

/// Perturbation function g: [0, 1] -> [0, 1], g(0) = 0, g(1) = 1.
enum class PerturbationKind
{
    linear,
    square,
    cube,
    sqrt
};

std::string_view to_string(PerturbationKind g);
PerturbationKind parse_perturbation(std::string_view s);

double perturbation_function(PerturbationKind g, double x);

struct PerturbationSchedule
{
    PerturbationKind kind = PerturbationKind::linear;
    /// Total pruning-aware training iterations.
    std::uint64_t n_max = 1000;
    double rate = 0.5;
    Scope scope = Scope::whole_model;
    double lambda = 1.0;

    void validate() const;
};

/// g(n / n_max). Throws ContractError for n > n_max.
double perturbation_scale(const PerturbationSchedule& sched, std::uint64_t n);

/// w + g(n / n_max) * pruning_direction(w, m_n), with the magnitude mask m_n
/// selected on the current weights.
ParamVector perturbed_weights(const ParamVector& w, const WeightPartition& part, const PerturbationSchedule& sched,
                              std::uint64_t n);

/// Pruning-aware fitness for maximization:
///   f(w) - lambda * |f(w) - f(perturbed_weights(w, n))|.
/// Calls `base` exactly twice. Throws OptimizerError(n) on a non-finite base value.
double pa_fitness(const Fitness& base, const ParamVector& w, const WeightPartition& part,
                  const PerturbationSchedule& sched, std::uint64_t n);

} // namespace pruneaware

#endif
