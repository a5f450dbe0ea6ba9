#include "pruneaware/frae.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>

#include "pruneaware/binary_io.hpp"

namespace pruneaware
{

namespace
{

constexpr io::Magic kModelMagic = io::make_magic("FRAE");
constexpr std::uint32_t kModelVersion = 1;
constexpr std::uint64_t kModelHeaderBytes = 4 + 4 + 5 * 4;

using ConstRowMap = Eigen::Map<const RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

struct Dense
{
    ConstRowMap weight;
    ConstVecMap bias;
};

Dense view(const FraeModel& model, const char* name)
{
    const auto& slot = model.partition->layer(name);
    const double* base = model.params.data();
    return {ConstRowMap(base + slot.weight_offset, slot.rows, slot.cols), ConstVecMap(base + slot.bias_offset, slot.bias)};
}

ConstRowMap codebook_view(const FraeModel& model)
{
    const auto& slot = model.partition->layer("codebook");
    return ConstRowMap(model.params.data() + slot.weight_offset, slot.rows, slot.cols);
}

// Both activations go through exp(), which Eigen vectorizes for double.
Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& x) { return 1.0 / (1.0 + (-x).exp()); }

Eigen::ArrayXXd tanh_act(const Eigen::ArrayXXd& x) { return 1.0 - 2.0 / ((2.0 * x).exp() + 1.0); }

// GRU cell over a batch. `input_part` is W_x * x already computed
// (3H x B); the gates are stacked [update; reset; candidate].
void gru_update(const Dense& cell, Eigen::MatrixXd input_part, Eigen::MatrixXd& hidden)
{
    const Index h = hidden.rows();
    const auto recurrent = cell.weight.rightCols(h);
    input_part.colwise() += cell.bias;

    input_part.topRows(2 * h).noalias() += recurrent.topRows(2 * h) * hidden;
    const Eigen::ArrayXXd update = sigmoid(input_part.topRows(h).array());
    const Eigen::ArrayXXd reset = sigmoid(input_part.middleRows(h, h).array());
    const Eigen::MatrixXd gated = (reset * hidden.array()).matrix();
    input_part.bottomRows(h).noalias() += recurrent.bottomRows(h) * gated;
    const Eigen::ArrayXXd candidate = tanh_act(input_part.bottomRows(h).array());

    hidden = ((1.0 - update) * candidate + update * hidden.array()).matrix();
}

void check_rows(const Eigen::Ref<const Eigen::MatrixXd>& m, Index rows, const char* what)
{
    if (m.rows() != rows)
        throw ContractError(std::string(what) + " has " + std::to_string(m.rows()) + " rows, expected " +
                            std::to_string(rows));
}

} // namespace

void FraeConfig::validate() const
{
    if (input_dim <= 0 || latent_dim <= 0 || encoder_hidden <= 0 || decoder_hidden <= 0 || codebook_size <= 0)
        throw ConfigError("FRAE layer sizes must be positive");
}

std::vector<LayerShape> FraeConfig::shape() const
{
    validate();
    return {
        {"enc_gru", SegmentRole::encoder, 3 * encoder_hidden, 2 * input_dim + encoder_hidden, 3 * encoder_hidden},
        {"enc_out", SegmentRole::encoder, latent_dim, encoder_hidden, latent_dim},
        {"dec_gru", SegmentRole::decoder, 3 * decoder_hidden, latent_dim + decoder_hidden, 3 * decoder_hidden},
        {"dec_out", SegmentRole::decoder, input_dim, decoder_hidden, input_dim},
        {"codebook", SegmentRole::codebook, codebook_size, latent_dim, 0},
    };
}

Index FraeConfig::parameter_count() const
{
    Index n = 0;
    for (const auto& l : shape())
        n += l.rows * l.cols + l.bias;
    return n;
}

Index FraeConfig::weight_count() const
{
    Index n = 0;
    for (const auto& l : shape())
        if (l.role != SegmentRole::codebook)
            n += l.rows * l.cols;
    return n;
}

int FraeConfig::bits_per_frame() const
{
    validate();
    return static_cast<int>(std::bit_width(static_cast<std::uint64_t>(codebook_size - 1)));
}

FraeModel FraeModel::with_params(ParamVector p) const
{
    if (p.size() != partition->size())
        throw ContractError("parameter vector has length " + std::to_string(p.size()) + ", model needs " +
                            std::to_string(partition->size()));
    return FraeModel{config, partition, std::move(p)};
}

FraeModel make_model(const FraeConfig& config, ParamVector params)
{
    FraeModel model{config, std::make_shared<const WeightPartition>(build_partition(config.shape())), {}};
    return model.with_params(std::move(params));
}

FraeModel init_model(const FraeConfig& config, std::uint64_t seed)
{
    auto part = std::make_shared<const WeightPartition>(build_partition(config.shape()));
    ParamVector params(part->size());
    std::mt19937_64 rng(seed);
    for (const auto& slot : part->layers)
    {
        const double fan_in = static_cast<double>(slot.cols);
        std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
        for (Index i = 0; i < slot.rows * slot.cols; ++i)
            params[slot.weight_offset + i] = dist(rng);
        for (Index i = 0; i < slot.bias; ++i)
            params[slot.bias_offset + i] = dist(rng);
    }
    return FraeModel{config, std::move(part), std::move(params)};
}

CoderState CoderState::zeros(const FraeConfig& config, Index batch)
{
    return {Eigen::MatrixXd::Zero(config.encoder_hidden, batch), Eigen::MatrixXd::Zero(config.decoder_hidden, batch),
            Eigen::MatrixXd::Zero(config.input_dim, batch)};
}

Eigen::MatrixXd encode_step(const FraeModel& model, CoderState& state, const Eigen::Ref<const Eigen::MatrixXd>& frames)
{
    const auto& cfg = model.config;
    check_rows(frames, cfg.input_dim, "frame batch");
    if (frames.cols() != state.batch())
        throw ContractError("frame batch size does not match coder state");

    const Dense gru = view(model, "enc_gru");
    const Dense out = view(model, "enc_out");
    Eigen::MatrixXd input_part = gru.weight.leftCols(cfg.input_dim) * frames;
    input_part.noalias() += gru.weight.middleCols(cfg.input_dim, cfg.input_dim) * state.feedback;
    gru_update(gru, std::move(input_part), state.encoder_hidden);

    Eigen::MatrixXd latent = out.weight * state.encoder_hidden;
    latent.colwise() += out.bias;
    return tanh_act(latent.array()).matrix();
}

Quantized quantize(const FraeModel& model, const Eigen::Ref<const Eigen::MatrixXd>& latents)
{
    check_rows(latents, model.config.latent_dim, "latent batch");
    const auto book = codebook_view(model);
    Quantized q{std::vector<int>(static_cast<std::size_t>(latents.cols())),
                Eigen::MatrixXd(latents.rows(), latents.cols())};
    const Index dim = book.cols();
    Eigen::VectorXd z(dim);
    for (Index b = 0; b < latents.cols(); ++b)
    {
        z = latents.col(b);
        int best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (Index k = 0; k < book.rows(); ++k)
        {
            const double* entry = book.data() + k * dim;
            double d = 0.0;
            for (Index j = 0; j < dim; ++j)
            {
                const double diff = entry[j] - z[j];
                d += diff * diff;
            }
            if (d < best_dist)
            {
                best_dist = d;
                best = static_cast<int>(k);
            }
        }
        q.indices[static_cast<std::size_t>(b)] = best;
        q.codes.col(b) = book.row(best).transpose();
    }
    return q;
}

Eigen::MatrixXd decode_step(const FraeModel& model, CoderState& state, const Eigen::Ref<const Eigen::MatrixXd>& codes)
{
    const auto& cfg = model.config;
    check_rows(codes, cfg.latent_dim, "code batch");
    if (codes.cols() != state.batch())
        throw ContractError("code batch size does not match coder state");

    const Dense gru = view(model, "dec_gru");
    const Dense out = view(model, "dec_out");
    gru_update(gru, gru.weight.leftCols(cfg.latent_dim) * codes, state.decoder_hidden);

    Eigen::MatrixXd frame_hat = out.weight * state.decoder_hidden;
    frame_hat.colwise() += out.bias;
    state.feedback = frame_hat;
    return frame_hat;
}

Eigen::MatrixXd decode_indices(const FraeModel& model, std::span<const int> indices)
{
    const auto book = codebook_view(model);
    CoderState state = CoderState::zeros(model.config, 1);
    Eigen::MatrixXd frames_hat(model.config.input_dim, static_cast<Index>(indices.size()));
    for (std::size_t t = 0; t < indices.size(); ++t)
    {
        if (indices[t] < 0 || indices[t] >= book.rows())
            throw ContractError("codebook index out of range");
        const Eigen::VectorXd code = book.row(indices[t]).transpose();
        frames_hat.col(static_cast<Index>(t)) = decode_step(model, state, code);
    }
    return frames_hat;
}

CodedSequence code_sequence(const FraeModel& model, const Eigen::Ref<const Eigen::MatrixXd>& frames)
{
    check_rows(frames, model.config.input_dim, "frame sequence");
    CodedSequence out{{}, Eigen::MatrixXd(model.config.input_dim, frames.cols())};
    out.indices.reserve(static_cast<std::size_t>(frames.cols()));
    CoderState state = CoderState::zeros(model.config, 1);
    for (Index t = 0; t < frames.cols(); ++t)
    {
        const Eigen::MatrixXd latent = encode_step(model, state, frames.col(t));
        const Quantized q = quantize(model, latent);
        out.indices.push_back(q.indices.front());
        out.frames_hat.col(t) = decode_step(model, state, q.codes);
    }
    return out;
}

std::vector<CodedSequence> code_dataset(const FraeModel& model, const Dataset& data)
{
    std::vector<CodedSequence> out(data.size());
    std::map<Index, std::vector<std::size_t>> by_length;
    for (std::size_t s = 0; s < data.size(); ++s)
        by_length[data[s].length()].push_back(s);

    for (const auto& [length, members] : by_length)
    {
        const auto batch = static_cast<Index>(members.size());
        for (std::size_t s : members)
        {
            if (data[s].frames.rows() != model.config.input_dim)
                throw ContractError("pattern sequence channel count does not match model input");
            out[s].indices.reserve(static_cast<std::size_t>(length));
            out[s].frames_hat.resize(model.config.input_dim, length);
        }
        CoderState state = CoderState::zeros(model.config, batch);
        Eigen::MatrixXd frames(model.config.input_dim, batch);
        for (Index t = 0; t < length; ++t)
        {
            for (Index b = 0; b < batch; ++b)
                frames.col(b) = data[members[static_cast<std::size_t>(b)]].frames.col(t).cast<double>();
            const Eigen::MatrixXd latent = encode_step(model, state, frames);
            const Quantized q = quantize(model, latent);
            const Eigen::MatrixXd frames_hat = decode_step(model, state, q.codes);
            for (Index b = 0; b < batch; ++b)
            {
                auto& coded = out[members[static_cast<std::size_t>(b)]];
                coded.indices.push_back(q.indices[static_cast<std::size_t>(b)]);
                coded.frames_hat.col(t) = frames_hat.col(b);
            }
        }
    }
    return out;
}

void save_model(const std::string& path, const FraeModel& model)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    io::BinaryWriter wr(out);
    wr.magic(kModelMagic);
    wr.u32(kModelVersion);
    const auto& c = model.config;
    for (Index v : {c.input_dim, c.latent_dim, c.encoder_hidden, c.decoder_hidden, c.codebook_size})
        wr.u32(static_cast<std::uint32_t>(v));
    write_params(out, model.params);
}

FraeModel load_model(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    io::BinaryReader rd(in);
    rd.expect_magic(kModelMagic);
    const auto version_at = rd.offset();
    if (rd.u32() != kModelVersion)
        throw FormatError("unsupported FRAE checkpoint version", version_at);
    FraeConfig c;
    c.input_dim = rd.u32();
    c.latent_dim = rd.u32();
    c.encoder_hidden = rd.u32();
    c.decoder_hidden = rd.u32();
    c.codebook_size = rd.u32();
    try
    {
        c.validate();
    }
    catch (const ConfigError& e)
    {
        throw FormatError(e.what(), 8);
    }
    ParamVector params = read_params(in, kModelHeaderBytes);
    if (params.size() != c.parameter_count())
        throw FormatError("parameter block length does not match checkpoint config", kModelHeaderBytes + 8);
    return make_model(c, std::move(params));
}

} // namespace pruneaware
