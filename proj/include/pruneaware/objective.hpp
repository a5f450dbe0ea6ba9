#ifndef PRUNEAWARE_OBJECTIVE_HPP
#define PRUNEAWARE_OBJECTIVE_HPP

#include <string_view>

#include <Eigen/Core>

#include "pruneaware/data.hpp"
#include "pruneaware/frae.hpp"
#include "pruneaware/spsa.hpp"

namespace pruneaware
{

enum class FitnessKind
{
    neg_mse,
    envelope_correlation
};

std::string_view to_string(FitnessKind k);
FitnessKind parse_fitness_kind(std::string_view s);

struct FitnessSpec
{
    FitnessKind kind = FitnessKind::envelope_correlation;
    Index window_frames = 30;
    double score_floor = 0.0;

    void validate() const;
};

/// -(mean squared error) over every entry. Inputs are channels x frames.
double neg_mse_fitness(const Eigen::Ref<const Eigen::MatrixXd>& frames, const Eigen::Ref<const Eigen::MatrixXd>& frames_hat);

/// Short-time envelope correlation in [score_floor, 1].
///
/// For every channel and every window of `window_frames` consecutive frames
/// (hop of one frame) the mean-removed reference and reconstruction are
/// correlated. Windows whose reference is constant are skipped; a constant
/// reconstruction against a varying reference scores 0. The mean over all
/// scored windows is clipped to [score_floor, 1]; a sequence with no scored
/// window gets score_floor.
double envelope_correlation_fitness(const Eigen::Ref<const Eigen::MatrixXd>& frames,
                                    const Eigen::Ref<const Eigen::MatrixXd>& frames_hat, const FitnessSpec& spec);

/// Dispatches on spec.kind.
double sequence_fitness(const Eigen::Ref<const Eigen::MatrixXd>& frames,
                        const Eigen::Ref<const Eigen::MatrixXd>& frames_hat, const FitnessSpec& spec);

/// Mean per-sequence score of the model's reconstructions.
double dataset_fitness(const FraeModel& model, const Dataset& data, const FitnessSpec& spec);

/// Binds architecture, data and metric into a fitness over raw parameter
/// vectors. The dataset is captured by reference and must outlive the result.
Fitness make_dataset_fitness(const FraeModel& architecture, const Dataset& data, const FitnessSpec& spec);

} // namespace pruneaware

#endif
