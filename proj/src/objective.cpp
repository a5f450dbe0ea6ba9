#include "pruneaware/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace pruneaware
{

std::string_view to_string(FitnessKind k)
{
    return k == FitnessKind::neg_mse ? "neg_mse" : "envelope_correlation";
}

FitnessKind parse_fitness_kind(std::string_view s)
{
    if (s == "neg_mse")
        return FitnessKind::neg_mse;
    if (s == "envelope_correlation")
        return FitnessKind::envelope_correlation;
    throw ConfigError("unknown fitness kind '" + std::string(s) + "'");
}

void FitnessSpec::validate() const
{
    if (window_frames <= 0)
        throw ConfigError("fitness window must be positive");
    if (!(score_floor <= 1.0))
        throw ConfigError("score floor must not exceed 1");
}

namespace
{

void check_same_shape(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ContractError("reference and reconstruction differ in shape");
}

} // namespace

double neg_mse_fitness(const Eigen::Ref<const Eigen::MatrixXd>& frames, const Eigen::Ref<const Eigen::MatrixXd>& frames_hat)
{
    check_same_shape(frames, frames_hat);
    if (frames.size() == 0)
        return 0.0;
    return -(frames - frames_hat).squaredNorm() / static_cast<double>(frames.size());
}

double envelope_correlation_fitness(const Eigen::Ref<const Eigen::MatrixXd>& frames,
                                    const Eigen::Ref<const Eigen::MatrixXd>& frames_hat, const FitnessSpec& spec)
{
    check_same_shape(frames, frames_hat);
    spec.validate();
    const Index w = spec.window_frames;
    if (frames.cols() < w)
        throw ContractError("sequence of " + std::to_string(frames.cols()) + " frames is shorter than the " +
                            std::to_string(w) + "-frame analysis window");

    double total = 0.0;
    Index scored = 0;
    // Sliding-window moments from prefix sums. A window is constant iff it
    // contains no change between neighbouring frames, which is tracked
    // exactly so silent stretches are never mistaken for low-variance ones.
    const Index frames_n = frames.cols();
    const double inv_w = 1.0 / static_cast<double>(w);
    std::vector<double> sx(frames_n + 1), sy(frames_n + 1), sxx(frames_n + 1), syy(frames_n + 1), sxy(frames_n + 1);
    std::vector<Index> ref_changes(frames_n), hat_changes(frames_n);
    for (Index m = 0; m < frames.rows(); ++m)
    {
        for (Index t = 0; t < frames_n; ++t)
        {
            const double x = frames(m, t);
            const double y = frames_hat(m, t);
            sx[t + 1] = sx[t] + x;
            sy[t + 1] = sy[t] + y;
            sxx[t + 1] = sxx[t] + x * x;
            syy[t + 1] = syy[t] + y * y;
            sxy[t + 1] = sxy[t] + x * y;
            // changes[t] counts t' in [1, t] with value(t') != value(t'-1).
            ref_changes[t] = t == 0 ? 0 : ref_changes[t - 1] + (x != frames(m, t - 1));
            hat_changes[t] = t == 0 ? 0 : hat_changes[t - 1] + (y != frames_hat(m, t - 1));
        }
        for (Index start = 0; start + w <= frames_n; ++start)
        {
            const Index last = start + w - 1;
            if (ref_changes[last] == ref_changes[start])
                continue;
            ++scored;
            if (hat_changes[last] == hat_changes[start])
                continue;
            const double wx = sx[start + w] - sx[start];
            const double wy = sy[start + w] - sy[start];
            const double xx = std::max(sxx[start + w] - sxx[start] - wx * wx * inv_w, 0.0);
            const double yy = std::max(syy[start + w] - syy[start] - wy * wy * inv_w, 0.0);
            const double xy = sxy[start + w] - sxy[start] - wx * wy * inv_w;
            const double denom = std::sqrt(xx * yy);
            if (denom > 0.0)
                total += std::clamp(xy / denom, -1.0, 1.0);
        }
    }
    if (scored == 0)
        return spec.score_floor;
    return std::clamp(total / static_cast<double>(scored), spec.score_floor, 1.0);
}

double sequence_fitness(const Eigen::Ref<const Eigen::MatrixXd>& frames,
                        const Eigen::Ref<const Eigen::MatrixXd>& frames_hat, const FitnessSpec& spec)
{
    return spec.kind == FitnessKind::neg_mse ? neg_mse_fitness(frames, frames_hat)
                                             : envelope_correlation_fitness(frames, frames_hat, spec);
}

double dataset_fitness(const FraeModel& model, const Dataset& data, const FitnessSpec& spec)
{
    if (data.empty())
        throw ContractError("dataset fitness needs at least one sequence");
    const auto coded = code_dataset(model, data);
    double sum = 0.0;
    for (std::size_t s = 0; s < data.size(); ++s)
        sum += sequence_fitness(data[s].frames.cast<double>(), coded[s].frames_hat, spec);
    return sum / static_cast<double>(data.size());
}

Fitness make_dataset_fitness(const FraeModel& architecture, const Dataset& data, const FitnessSpec& spec)
{
    spec.validate();
    if (data.empty())
        throw ContractError("dataset fitness needs at least one sequence");
    return [architecture, &data, spec](const ParamVector& w) {
        return dataset_fitness(architecture.with_params(w), data, spec);
    };
}

} // namespace pruneaware
