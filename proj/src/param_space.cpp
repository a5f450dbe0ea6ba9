#include "pruneaware/param_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "pruneaware/binary_io.hpp"

namespace pruneaware
{

namespace
{
constexpr io::Magic kParamMagic = io::make_magic("PAWV");
constexpr io::Magic kMaskMagic = io::make_magic("PAWM");
constexpr std::uint32_t kFormatVersion = 1;
} // namespace

std::string_view to_string(Scope s)
{
    return s == Scope::whole_model ? "whole_model" : "decoder_only";
}

Scope parse_scope(std::string_view s)
{
    if (s == "whole_model" || s == "whole")
        return Scope::whole_model;
    if (s == "decoder_only" || s == "decoder")
        return Scope::decoder_only;
    throw ConfigError("unknown pruning scope '" + std::string(s) + "'");
}

std::vector<Index> WeightPartition::eligible(Scope scope) const
{
    if (scope == Scope::decoder_only)
        return decoder_weights;
    std::vector<Index> out;
    out.reserve(encoder_weights.size() + decoder_weights.size());
    std::merge(encoder_weights.begin(), encoder_weights.end(), decoder_weights.begin(), decoder_weights.end(),
               std::back_inserter(out));
    return out;
}

const LayerSlot& WeightPartition::layer(std::string_view name) const
{
    for (const auto& l : layers)
        if (l.name == name)
            return l;
    throw ContractError("no layer named '" + std::string(name) + "'");
}

WeightPartition build_partition(const std::vector<LayerShape>& shape)
{
    WeightPartition part;
    Index next = 0;
    for (const auto& layer : shape)
    {
        if (layer.rows <= 0 || layer.cols <= 0 || layer.bias < 0)
            throw ConfigError("layer '" + layer.name + "' has zero or negative size");
        if (layer.role == SegmentRole::codebook && layer.bias != 0)
            throw ConfigError("codebook block '" + layer.name + "' cannot carry biases");

        LayerSlot slot{layer.name, layer.role, layer.rows, layer.cols, next, next + layer.rows * layer.cols, layer.bias};
        auto& weights = layer.role == SegmentRole::encoder   ? part.encoder_weights
                        : layer.role == SegmentRole::decoder ? part.decoder_weights
                                                             : part.codebook;
        for (Index i = 0; i < layer.rows * layer.cols; ++i)
            weights.push_back(next++);
        for (Index i = 0; i < layer.bias; ++i)
            part.biases.push_back(next++);
        part.layers.push_back(std::move(slot));
    }
    if (part.decoder_weights.empty())
        throw ConfigError("model shape has no decoder weights");
    part.total = next;
    return part;
}

PruningMask::PruningMask(std::vector<Index> indices, double rate, Scope scope)
    : indices_(std::move(indices)), rate_(rate), scope_(scope)
{
    std::sort(indices_.begin(), indices_.end());
    indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
}

bool PruningMask::contains(Index i) const { return std::binary_search(indices_.begin(), indices_.end(), i); }

void PruningMask::check_bounds(Index n) const
{
    if (!indices_.empty() && (indices_.front() < 0 || indices_.back() >= n))
        throw ContractError("pruning mask index out of range for vector of length " + std::to_string(n));
}

Index pruned_count(double rate, Index eligible)
{
    if (!(rate >= 0.0 && rate <= 1.0))
        throw ContractError("pruning rate must lie in [0, 1]");
    // The epsilon absorbs representation error of grid rates such as 0.35 so
    // that exact halves round up.
    const auto k = static_cast<Index>(std::floor(rate * static_cast<double>(eligible) + 0.5 + 1e-9));
    return std::clamp<Index>(k, 0, eligible);
}

PruningMask select_pruned_indices(const ParamVector& w, const WeightPartition& part, double rate, Scope scope)
{
    if (w.size() != part.size())
        throw ContractError("parameter vector length does not match partition");
    std::vector<Index> candidates = part.eligible(scope);
    const Index k = pruned_count(rate, static_cast<Index>(candidates.size()));
    auto smaller = [&w](Index a, Index b) {
        const double ma = std::abs(w[a]);
        const double mb = std::abs(w[b]);
        return ma < mb || (ma == mb && a < b);
    };
    if (k < static_cast<Index>(candidates.size()))
        std::nth_element(candidates.begin(), candidates.begin() + k, candidates.end(), smaller);
    candidates.resize(static_cast<std::size_t>(k));
    return PruningMask(std::move(candidates), rate, scope);
}

void write_params(std::ostream& out, const ParamVector& w)
{
    io::BinaryWriter wr(out);
    wr.magic(kParamMagic);
    wr.u32(kFormatVersion);
    wr.u64(static_cast<std::uint64_t>(w.size()));
    for (Index i = 0; i < w.size(); ++i)
        wr.f64(w[i]);
}

ParamVector read_params(std::istream& in, std::uint64_t start_offset)
{
    io::BinaryReader rd(in, start_offset);
    rd.expect_magic(kParamMagic);
    const auto version_at = rd.offset();
    if (rd.u32() != kFormatVersion)
        throw FormatError("unsupported parameter file version", version_at);
    const auto n = rd.u64();
    if (n > (1ull << 32))
        throw FormatError("implausible parameter count", rd.offset() - 8);
    ParamVector w(static_cast<Index>(n));
    for (Index i = 0; i < w.size(); ++i)
    {
        const auto at = rd.offset();
        w[i] = rd.f64();
        if (!std::isfinite(w[i]))
            throw FormatError("non-finite parameter value", at);
    }
    return w;
}

void save_params(const std::string& path, const ParamVector& w)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    write_params(out, w);
}

ParamVector load_params(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    return read_params(in);
}

void save_mask(const std::string& path, const PruningMask& mask)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    io::BinaryWriter wr(out);
    wr.magic(kMaskMagic);
    wr.u32(kFormatVersion);
    wr.u64(static_cast<std::uint64_t>(mask.size()));
    for (Index i : mask.indices())
    {
        if (i > std::numeric_limits<std::uint32_t>::max())
            throw ContractError("mask index does not fit in 32 bits");
        wr.u32(static_cast<std::uint32_t>(i));
    }
}

PruningMask load_mask(const std::string& path, double rate, Scope scope)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    io::BinaryReader rd(in);
    rd.expect_magic(kMaskMagic);
    const auto version_at = rd.offset();
    if (rd.u32() != kFormatVersion)
        throw FormatError("unsupported mask file version", version_at);
    const auto n = rd.u64();
    std::vector<Index> idx;
    std::int64_t prev = -1;
    for (std::uint64_t i = 0; i < n; ++i)
    {
        const auto at = rd.offset();
        const auto v = static_cast<std::int64_t>(rd.u32());
        if (v <= prev)
            throw FormatError("mask indices not strictly increasing", at);
        prev = v;
        idx.push_back(static_cast<Index>(v));
    }
    return PruningMask(std::move(idx), rate, scope);
}

} // namespace pruneaware
