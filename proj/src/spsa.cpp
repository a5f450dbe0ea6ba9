#include "pruneaware/spsa.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

namespace pruneaware
{

namespace
{

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

} // namespace

void GainSchedule::validate() const
{
    if (!(a > 0.0) || !(A >= 0.0) || !(gamma > 0.0) || !(c > 0.0) || !(beta > 0.0))
        throw ConfigError("SPSA gains need a, gamma, c, beta > 0 and A >= 0");
}

Gains gain_at(const GainSchedule& s, std::uint64_t k)
{
    const double kk = static_cast<double>(k);
    return {s.a / std::pow(s.A + kk + 1.0, s.gamma), s.c / std::pow(kk + 1.0, s.beta)};
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t iteration, std::uint64_t slot)
    : key_(splitmix64(splitmix64(splitmix64(seed) ^ iteration) ^ slot))
{
}

std::uint64_t CounterRng::next() { return splitmix64(key_ ^ splitmix64(counter_++)); }

Eigen::VectorXd sample_rademacher(Index n, CounterRng& rng)
{
    if (n < 1)
        throw ContractError("Rademacher vector length must be positive");
    Eigen::VectorXd out(n);
    std::uint64_t bits = 0;
    for (Index i = 0; i < n; ++i)
    {
        if (i % 64 == 0)
            bits = rng.next();
        out[i] = (bits & 1u) ? 1.0 : -1.0;
        bits >>= 1;
    }
    return out;
}

SpsaStepResult spsa_step(const ParamVector& w, const Fitness& f, const GainSchedule& s, std::uint64_t k,
                         std::uint64_t seed, const PruningMask& freeze)
{
    freeze.check_bounds(w.size());
    const Gains g = gain_at(s, k);
    CounterRng rng(seed, k, 0);
    Eigen::VectorXd delta = sample_rademacher(w.size(), rng);
    for (Index i : freeze.indices())
        delta[i] = 0.0;

    const double y_plus = f(w + g.c_k * delta);
    const double y_minus = f(w - g.c_k * delta);
    if (!std::isfinite(y_plus) || !std::isfinite(y_minus))
        throw OptimizerError("non-finite fitness", k);

    SpsaStepResult out{w + (g.a_k * (y_plus - y_minus) / (2.0 * g.c_k)) * delta, y_plus, y_minus};
    for (Index i : freeze.indices())
        out.params[i] = 0.0;
    return out;
}

OptimizeResult optimize(const ParamVector& w0, const Fitness& f, const SpsaOptions& options)
{
    return optimize(w0, ScheduledFitness([&f](const ParamVector& w, std::uint64_t) { return f(w); }), options);
}

OptimizeResult optimize(const ParamVector& w0, const ScheduledFitness& f, const SpsaOptions& options)
{
    options.gains.validate();
    OptimizeResult result{w0, {}, 0};
    auto record = [&](std::uint64_t k) {
        const Gains g = gain_at(options.gains, k);
        const double y = f(result.params, k);
        if (!std::isfinite(y))
            throw OptimizerError("non-finite fitness", k);
        result.trace.push_back({k, y, g.a_k, g.c_k});
    };

    const std::uint64_t end = options.start_iteration + options.iterations;
    for (std::uint64_t k = options.start_iteration; k < end; ++k)
    {
        if (options.trace_stride > 0 && (k - options.start_iteration) % options.trace_stride == 0)
            record(k);
        const Fitness step_fitness = [&f, k](const ParamVector& w) { return f(w, k); };
        result.params = spsa_step(result.params, step_fitness, options.gains, k, options.seed, options.freeze).params;
        ++result.steps;
    }
    if (options.trace_stride > 0)
        record(end);
    return result;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace)
{
    out << "k,fitness,a_k,c_k\n";
    for (const auto& row : trace)
        out << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", row.k, row.fitness, row.a_k, row.c_k);
}

} // namespace pruneaware
