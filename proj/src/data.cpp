#include "pruneaware/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "pruneaware/binary_io.hpp"

namespace pruneaware
{

namespace
{

constexpr io::Magic kStimMagic = io::make_magic("STIM");
constexpr std::uint32_t kStimVersion = 1;

struct Formant
{
    double center;
    double drift;
    double width;
    double gain;
};

PatternSequence synthesize_sequence(Index frames, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<Formant> formants(3);
    for (std::size_t j = 0; j < formants.size(); ++j)
    {
        // Low, mid and high regions of the electrode array.
        formants[j].center = 3.0 + 6.5 * static_cast<double>(j) + 3.0 * unit(rng);
        formants[j].drift = 0.08 * (unit(rng) - 0.5);
        formants[j].width = 1.0 + 1.5 * unit(rng);
        formants[j].gain = 0.6 + 0.4 * unit(rng);
    }
    const double noise_center = 14.0 + 6.0 * unit(rng);
    const double smoothing = 0.85 + 0.1 * unit(rng);

    PatternSequence seq;
    seq.frames = Eigen::MatrixXf::Zero(kChannels, frames);

    double voiced = unit(rng);
    double noise = unit(rng) * 0.5;
    bool voicing = unit(rng) < 0.7;
    Eigen::ArrayXd smoothed = Eigen::ArrayXd::Zero(kChannels);
    Eigen::ArrayXd level(kChannels);

    for (Index t = 0; t < frames; ++t)
    {
        if (unit(rng) < 0.02)
            voicing = !voicing;
        voiced = smoothing * voiced + (1.0 - smoothing) * (voicing ? 0.6 + 0.4 * unit(rng) : 0.05 * unit(rng));
        noise = smoothing * noise + (1.0 - smoothing) * (voicing ? 0.1 * unit(rng) : 0.3 + 0.5 * unit(rng));

        level.setZero();
        for (auto& f : formants)
        {
            f.center += f.drift + 0.05 * gauss(rng);
            if (f.center < 0.0 || f.center > static_cast<double>(kChannels - 1))
            {
                f.drift = -f.drift;
                f.center = std::clamp(f.center, 0.0, static_cast<double>(kChannels - 1));
            }
            for (Index m = 0; m < kChannels; ++m)
            {
                const double d = (static_cast<double>(m) - f.center) / f.width;
                level[m] += voiced * f.gain * std::exp(-0.5 * d * d);
            }
        }
        for (Index m = 0; m < kChannels; ++m)
        {
            const double d = (static_cast<double>(m) - noise_center) / 4.0;
            level[m] += noise * std::exp(-0.5 * d * d) * (0.7 + 0.3 * unit(rng));
        }
        smoothed = 0.5 * smoothed + 0.5 * level;

        // N-of-M: keep the kMaxActive strongest channels.
        std::array<Index, kChannels> order{};
        std::iota(order.begin(), order.end(), Index{0});
        std::partial_sort(order.begin(), order.begin() + kMaxActive, order.end(),
                          [&](Index a, Index b) { return smoothed[a] > smoothed[b] || (smoothed[a] == smoothed[b] && a < b); });
        for (Index r = 0; r < kMaxActive; ++r)
        {
            const Index m = order[static_cast<std::size_t>(r)];
            const double v = std::clamp(smoothed[m], 0.0, 1.0);
            seq.frames(m, t) = v < 0.01 ? 0.0f : static_cast<float>(v);
        }
    }
    return seq;
}

} // namespace

void validate_pattern(const PatternSequence& seq)
{
    if (seq.frames.rows() != kChannels)
        throw ContractError("pattern frames must have " + std::to_string(kChannels) + " channels");
    if (!(seq.frame_rate > 0.0))
        throw ContractError("frame rate must be positive");
    for (Index t = 0; t < seq.frames.cols(); ++t)
    {
        const auto col = seq.frames.col(t);
        if ((col.array() < 0.0f).any() || (col.array() > 1.0f).any() || !col.allFinite())
            throw ContractError("frame " + std::to_string(t) + " has values outside [0, 1]");
        if ((col.array() != 0.0f).count() > kMaxActive)
            throw ContractError("frame " + std::to_string(t) + " has more than " + std::to_string(kMaxActive) +
                                " active channels");
    }
}

Dataset generate_synthetic(Index num_sequences, Index frames_per_sequence, std::uint64_t seed)
{
    if (num_sequences <= 0 || frames_per_sequence <= 0)
        throw ContractError("sequence and frame counts must be positive");
    Dataset data;
    data.reserve(static_cast<std::size_t>(num_sequences));
    for (Index s = 0; s < num_sequences; ++s)
    {
        std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                           static_cast<std::uint32_t>(s)};
        std::mt19937_64 rng(sseq);
        data.push_back(synthesize_sequence(frames_per_sequence, rng));
    }
    return data;
}

void save_patterns(const std::string& path, const Dataset& data)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    io::BinaryWriter wr(out);
    wr.magic(kStimMagic);
    wr.u32(kStimVersion);
    wr.u32(static_cast<std::uint32_t>(kChannels));
    wr.u32(static_cast<std::uint32_t>(kMaxActive));
    wr.f64(data.empty() ? kDefaultFrameRate : data.front().frame_rate);
    wr.u64(data.size());
    for (const auto& seq : data)
    {
        validate_pattern(seq);
        wr.u64(static_cast<std::uint64_t>(seq.length()));
        for (Index t = 0; t < seq.length(); ++t)
            for (Index m = 0; m < kChannels; ++m)
                wr.f32(seq.frames(m, t));
    }
}

Dataset load_patterns(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    io::BinaryReader rd(in);
    rd.expect_magic(kStimMagic);
    auto at = rd.offset();
    if (rd.u32() != kStimVersion)
        throw FormatError("unsupported STIM version", at);
    at = rd.offset();
    if (rd.u32() != kChannels)
        throw FormatError("channel count must be " + std::to_string(kChannels), at);
    at = rd.offset();
    if (rd.u32() != kMaxActive)
        throw FormatError("active channel limit must be " + std::to_string(kMaxActive), at);
    at = rd.offset();
    const double rate = rd.f64();
    if (!(rate > 0.0) || !std::isfinite(rate))
        throw FormatError("frame rate must be positive", at);
    const auto count = rd.u64();

    Dataset data;
    for (std::uint64_t s = 0; s < count; ++s)
    {
        at = rd.offset();
        const auto frames = rd.u64();
        if (frames > (1ull << 31))
            throw FormatError("implausible frame count", at);
        PatternSequence seq;
        seq.frame_rate = rate;
        seq.frames.resize(kChannels, static_cast<Index>(frames));
        for (Index t = 0; t < seq.length(); ++t)
        {
            const auto frame_at = rd.offset();
            int active = 0;
            for (Index m = 0; m < kChannels; ++m)
            {
                const float v = rd.f32();
                if (!(v >= 0.0f && v <= 1.0f))
                    throw FormatError("amplitude outside [0, 1]", rd.offset() - 4);
                active += v != 0.0f;
                seq.frames(m, t) = v;
            }
            if (active > kMaxActive)
                throw FormatError("frame has more than " + std::to_string(kMaxActive) + " active channels", frame_at);
        }
        data.push_back(std::move(seq));
    }
    if (!rd.at_eof())
        throw FormatError("trailing bytes after last sequence", rd.offset());
    return data;
}

Dataset load_patterns_csv(const std::string& path, double frame_rate)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    Dataset data;
    std::vector<float> current;
    std::uint64_t offset = 0;
    auto flush = [&] {
        if (current.empty())
            return;
        PatternSequence seq;
        seq.frame_rate = frame_rate;
        seq.frames = Eigen::Map<Eigen::MatrixXf>(current.data(), kChannels, static_cast<Index>(current.size()) / kChannels);
        validate_pattern(seq);
        data.push_back(std::move(seq));
        current.clear();
    };
    std::string line;
    while (std::getline(in, line))
    {
        const auto line_at = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
        {
            flush();
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        Index n = 0;
        while (std::getline(ss, cell, ','))
        {
            float v = 0.0f;
            try
            {
                v = std::stof(cell);
            }
            catch (const std::exception&)
            {
                throw FormatError("non-numeric CSV cell '" + cell + "'", line_at);
            }
            if (!(v >= 0.0f && v <= 1.0f))
                throw FormatError("amplitude outside [0, 1]", line_at);
            current.push_back(v);
            ++n;
        }
        if (n != kChannels)
            throw FormatError("CSV row has " + std::to_string(n) + " columns, expected " + std::to_string(kChannels),
                              line_at);
        if (std::count_if(current.end() - kChannels, current.end(), [](float v) { return v != 0.0f; }) > kMaxActive)
            throw FormatError("frame has more than " + std::to_string(kMaxActive) + " active channels", line_at);
    }
    flush();
    return data;
}

} // namespace pruneaware
