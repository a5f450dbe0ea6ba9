#ifndef PRUNEAWARE_DATA_HPP
#define PRUNEAWARE_DATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pruneaware/param_space.hpp"

namespace pruneaware
{

/// Channels per stimulation frame (M).
inline constexpr Index kChannels = 22;
/// Maximum number of active channels per frame (N).
inline constexpr Index kMaxActive = 8;
/// Channel stimulation rate in frames per second.
inline constexpr double kDefaultFrameRate = 900.0;

/// A stimulation-pattern sequence; frames are stored as columns (kChannels x T).
struct PatternSequence
{
    Eigen::MatrixXf frames;
    double frame_rate = kDefaultFrameRate;

    Index length() const noexcept { return frames.cols(); }
};

using Dataset = std::vector<PatternSequence>;

/// Throws ContractError unless every frame has kChannels entries in [0, 1]
/// with at most kMaxActive of them nonzero.
void validate_pattern(const PatternSequence& seq);

/// Synthetic N-of-M patterns: drifting formant-like channel centers and a
/// noise band, driven by low-passed random excitation, with the kMaxActive
/// strongest channels kept per frame. Deterministic in `seed`.
Dataset generate_synthetic(Index num_sequences, Index frames_per_sequence, std::uint64_t seed);

// "STIM" binary format: magic, u32 version, u32 M, u32 N, f64 frame_rate,
// u64 sequence count, then per sequence a u64 frame count followed by the
// frames as little-endian f32, channel-fastest.
void save_patterns(const std::string& path, const Dataset& data);
Dataset load_patterns(const std::string& path);

/// One frame per row with kChannels comma-separated values; a blank line
/// starts a new sequence.
Dataset load_patterns_csv(const std::string& path, double frame_rate = kDefaultFrameRate);

} // namespace pruneaware

#endif
