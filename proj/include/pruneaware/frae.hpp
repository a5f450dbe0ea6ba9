#ifndef PRUNEAWARE_FRAE_HPP
#define PRUNEAWARE_FRAE_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pruneaware/data.hpp"
#include "pruneaware/param_space.hpp"

namespace pruneaware
{

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Layer sizes of the feedback recurrent autoencoder.
///
/// Encoder: a GRU fed with the current frame stacked on the previously
/// decoded frame, followed by a tanh projection to the latent space.
/// Decoder: a GRU fed with the quantized code, followed by a linear output
/// layer. The default sizes give 3376 prunable weights.
struct FraeConfig
{
    Index input_dim = kChannels;
    Index latent_dim = 4;
    Index encoder_hidden = 12;
    Index decoder_hidden = 16;
    Index codebook_size = 64;

    /// Throws ConfigError for non-positive sizes.
    void validate() const;
    std::vector<LayerShape> shape() const;
    Index parameter_count() const;
    /// Prunable weights only (encoder and decoder matrices).
    Index weight_count() const;
    /// log2(codebook_size), rounded up.
    int bits_per_frame() const;

    bool operator==(const FraeConfig&) const = default;
};

/// Parameters plus the (shared, immutable) layout they are read through.
struct FraeModel
{
    FraeConfig config;
    std::shared_ptr<const WeightPartition> partition;
    ParamVector params;

    /// Same architecture, different parameters. Throws ContractError on length mismatch.
    FraeModel with_params(ParamVector p) const;
};

/// Wraps existing parameters; throws ContractError on length mismatch.
FraeModel make_model(const FraeConfig& config, ParamVector params);

/// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); codebook entries
/// ~ U(-1/sqrt(latent_dim), 1/sqrt(latent_dim)).
FraeModel init_model(const FraeConfig& config, std::uint64_t seed);

/// Recurrent state of a batch of independent sequences (one per column).
struct CoderState
{
    Eigen::MatrixXd encoder_hidden;
    Eigen::MatrixXd decoder_hidden;
    Eigen::MatrixXd feedback;

    static CoderState zeros(const FraeConfig& config, Index batch = 1);
    Index batch() const noexcept { return feedback.cols(); }
};

struct Quantized
{
    std::vector<int> indices;
    Eigen::MatrixXd codes;
};

/// One zero-delay encoder step; `frames` is input_dim x batch. Returns the
/// latent_dim x batch pre-quantization latents.
Eigen::MatrixXd encode_step(const FraeModel& model, CoderState& state, const Eigen::Ref<const Eigen::MatrixXd>& frames);

/// Nearest codebook entry per column (squared Euclidean, lowest index on ties).
Quantized quantize(const FraeModel& model, const Eigen::Ref<const Eigen::MatrixXd>& latents);

/// One decoder step; sets state.feedback to the returned reconstruction.
Eigen::MatrixXd decode_step(const FraeModel& model, CoderState& state, const Eigen::Ref<const Eigen::MatrixXd>& codes);

/// Decodes a stream of codebook indices from reset state. Touches only the
/// decoder and codebook parameters.
Eigen::MatrixXd decode_indices(const FraeModel& model, std::span<const int> indices);

struct CodedSequence
{
    std::vector<int> indices;
    Eigen::MatrixXd frames_hat;
};

/// encode -> quantize -> decode per frame from reset state. `frames` is input_dim x T.
CodedSequence code_sequence(const FraeModel& model, const Eigen::Ref<const Eigen::MatrixXd>& frames);

/// Codes every sequence of `data`, batching sequences of equal length.
std::vector<CodedSequence> code_dataset(const FraeModel& model, const Dataset& data);

/// Checkpoint: "FRAE", u32 version, five u32 config fields, then the PAWV block.
void save_model(const std::string& path, const FraeModel& model);
FraeModel load_model(const std::string& path);

} // namespace pruneaware

#endif
