#include "pruneaware/pa_loss.hpp"

#include <cmath>
#include <string>

namespace pruneaware
{

std::string_view to_string(PerturbationKind g)
{
    switch (g)
    {
    case PerturbationKind::linear:
        return "linear";
    case PerturbationKind::square:
        return "square";
    case PerturbationKind::cube:
        return "cube";
    case PerturbationKind::sqrt:
        return "sqrt";
    }
    return "?";
}

PerturbationKind parse_perturbation(std::string_view s)
{
    if (s == "linear")
        return PerturbationKind::linear;
    if (s == "square")
        return PerturbationKind::square;
    if (s == "cube")
        return PerturbationKind::cube;
    if (s == "sqrt")
        return PerturbationKind::sqrt;
    throw ConfigError("unknown perturbation function '" + std::string(s) + "'");
}

double perturbation_function(PerturbationKind g, double x)
{
    switch (g)
    {
    case PerturbationKind::linear:
        return x;
    case PerturbationKind::square:
        return x * x;
    case PerturbationKind::cube:
        return x * x * x;
    case PerturbationKind::sqrt:
        return std::sqrt(x);
    }
    return x;
}

void PerturbationSchedule::validate() const
{
    if (n_max == 0)
        throw ConfigError("perturbation schedule needs n_max > 0");
    if (!(rate >= 0.0 && rate <= 1.0))
        throw ConfigError("pruning rate must lie in [0, 1]");
    if (!(lambda >= 0.0))
        throw ConfigError("lambda must be non-negative");
}

double perturbation_scale(const PerturbationSchedule& sched, std::uint64_t n)
{
    if (n > sched.n_max)
        throw ContractError("iteration " + std::to_string(n) + " beyond schedule horizon " + std::to_string(sched.n_max));
    if (n == sched.n_max)
        return 1.0;
    return perturbation_function(sched.kind, static_cast<double>(n) / static_cast<double>(sched.n_max));
}

ParamVector perturbed_weights(const ParamVector& w, const WeightPartition& part, const PerturbationSchedule& sched,
                              std::uint64_t n)
{
    const double scale = perturbation_scale(sched, n);
    const PruningMask mask = select_pruned_indices(w, part, sched.rate, sched.scope);
    return w + scale * pruning_direction(w, mask);
}

double pa_fitness(const Fitness& base, const ParamVector& w, const WeightPartition& part,
                  const PerturbationSchedule& sched, std::uint64_t n)
{
    const double f_w = base(w);
    const double f_pert = base(perturbed_weights(w, part, sched, n));
    if (!std::isfinite(f_w) || !std::isfinite(f_pert))
        throw OptimizerError("non-finite base fitness in pruning-aware loss", n);
    return f_w - sched.lambda * std::abs(f_w - f_pert);
}

} // namespace pruneaware
