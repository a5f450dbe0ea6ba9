#include <doctest.h>

#include <fstream>

#include "pruneaware/binary_io.hpp"
#include "pruneaware/data.hpp"
#include "pruneaware/errors.hpp"
#include "support.hpp"

using namespace pruneaware;

namespace
{

bool same_dataset(const Dataset& a, const Dataset& b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t s = 0; s < a.size(); ++s)
    {
        const auto& x = a[s].frames;
        const auto& y = b[s].frames;
        if (x.rows() != y.rows() || x.cols() != y.cols() || a[s].frame_rate != b[s].frame_rate)
            return false;
        if (x.size() && std::memcmp(x.data(), y.data(), sizeof(float) * static_cast<std::size_t>(x.size())) != 0)
            return false;
    }
    return true;
}

void write_header(io::BinaryWriter& w, std::uint32_t m, std::uint32_t n, double rate, std::uint64_t count)
{
    w.magic(io::make_magic("STIM"));
    w.u32(1);
    w.u32(m);
    w.u32(n);
    w.f64(rate);
    w.u64(count);
}

} // namespace

TEST_CASE("synthetic frames are sparse and bounded")
{
    const Dataset data = generate_synthetic(20, 60, 1);
    REQUIRE(data.size() == 20);
    Index active_total = 0;
    for (const auto& seq : data)
    {
        CHECK(seq.frames.rows() == kChannels);
        CHECK(seq.length() == 60);
        CHECK(seq.frame_rate == kDefaultFrameRate);
        CHECK(seq.frames.minCoeff() >= 0.0f);
        CHECK(seq.frames.maxCoeff() <= 1.0f);
        for (Index t = 0; t < seq.length(); ++t)
        {
            const Index active = (seq.frames.col(t).array() != 0.0f).count();
            CHECK(active <= kMaxActive);
            active_total += active;
        }
        CHECK_NOTHROW(validate_pattern(seq));
    }
    // Not degenerate: most frames carry several active channels.
    CHECK(active_total > 20 * 60 * 3);
}

TEST_CASE("generator is deterministic in the seed")
{
    CHECK(same_dataset(generate_synthetic(4, 30, 9), generate_synthetic(4, 30, 9)));
    CHECK_FALSE(same_dataset(generate_synthetic(4, 30, 9), generate_synthetic(4, 30, 10)));
}

TEST_CASE("amplitudes evolve smoothly")
{
    // Mean frame-to-frame change is small relative to the value range.
    const Dataset data = generate_synthetic(10, 100, 4);
    double change = 0.0;
    Index count = 0;
    for (const auto& seq : data)
        for (Index t = 1; t < seq.length(); ++t)
        {
            change += (seq.frames.col(t) - seq.frames.col(t - 1)).cwiseAbs().sum();
            count += kChannels;
        }
    CHECK(change / static_cast<double>(count) < 0.1);
}

TEST_CASE("pattern validation rejects violations")
{
    PatternSequence seq{Eigen::MatrixXf::Zero(kChannels, 2)};
    seq.frames.col(0).head(9).setConstant(0.5f);
    CHECK_THROWS_AS(validate_pattern(seq), ContractError);
    seq.frames.setZero();
    seq.frames(0, 0) = 1.5f;
    CHECK_THROWS_AS(validate_pattern(seq), ContractError);
    CHECK_THROWS_AS(validate_pattern(PatternSequence{Eigen::MatrixXf::Zero(kChannels + 1, 2)}), ContractError);
}

TEST_CASE("pattern files round trip bit-exactly")
{
    testing::TempDir dir("stim");
    Dataset data = generate_synthetic(3, 25, 8);
    data.push_back(generate_synthetic(1, 7, 2).front());
    save_patterns(dir.file("d.stim"), data);
    CHECK(same_dataset(load_patterns(dir.file("d.stim")), data));
    CHECK(std::filesystem::file_size(dir.file("d.stim")) == 32 + 4 * 8 + 4 * kChannels * (3 * 25 + 7));

    save_patterns(dir.file("empty.stim"), {});
    CHECK(load_patterns(dir.file("empty.stim")).empty());
}

TEST_CASE("malformed pattern files are format errors with offsets")
{
    testing::TempDir dir("stim_bad");
    {
        std::ofstream out(dir.file("wide.stim"), std::ios::binary);
        io::BinaryWriter w(out);
        write_header(w, 23, 8, 900.0, 1);
        w.u64(1);
        for (int i = 0; i < 23; ++i)
            w.f32(0.0f);
    }
    CHECK_THROWS_AS(load_patterns(dir.file("wide.stim")), FormatError);

    {
        std::ofstream out(dir.file("dense.stim"), std::ios::binary);
        io::BinaryWriter w(out);
        write_header(w, 22, 8, 900.0, 1);
        w.u64(1);
        for (int i = 0; i < 22; ++i)
            w.f32(0.5f);
    }
    try
    {
        load_patterns(dir.file("dense.stim"));
        FAIL("nine or more active channels accepted");
    }
    catch (const FormatError& e)
    {
        CHECK(e.offset() == 40);
    }

    save_patterns(dir.file("good.stim"), generate_synthetic(2, 10, 3));
    const auto size = std::filesystem::file_size(dir.file("good.stim"));
    std::filesystem::resize_file(dir.file("good.stim"), size - 2);
    CHECK_THROWS_AS(load_patterns(dir.file("good.stim")), FormatError);

    save_patterns(dir.file("trail.stim"), generate_synthetic(1, 10, 3));
    {
        std::ofstream out(dir.file("trail.stim"), std::ios::binary | std::ios::app);
        out.put('x');
    }
    CHECK_THROWS_AS(load_patterns(dir.file("trail.stim")), FormatError);

    {
        std::ofstream out(dir.file("magic.stim"), std::ios::binary);
        out << "NOPE0000000000000000000000000000";
    }
    CHECK_THROWS_AS(load_patterns(dir.file("magic.stim")), FormatError);
}

TEST_CASE("csv import")
{
    testing::TempDir dir("csv");
    const auto row = [](float v, int active) {
        std::string s;
        for (int c = 0; c < kChannels; ++c)
            s += (c ? "," : "") + std::to_string(c < active ? v : 0.0f);
        return s + "\n";
    };
    {
        std::ofstream out(dir.file("p.csv"));
        out << row(0.25f, 3) << row(0.5f, 8) << "\n" << row(1.0f, 1);
    }
    const auto data = load_patterns_csv(dir.file("p.csv"));
    REQUIRE(data.size() == 2);
    CHECK(data[0].length() == 2);
    CHECK(data[1].length() == 1);
    CHECK(data[0].frames(2, 0) == 0.25f);
    CHECK(data[0].frames(7, 1) == 0.5f);
    CHECK(data[1].frames(0, 0) == 1.0f);

    {
        std::ofstream out(dir.file("short.csv"));
        out << "0.1,0.2\n";
    }
    CHECK_THROWS_AS(load_patterns_csv(dir.file("short.csv")), FormatError);
    {
        std::ofstream out(dir.file("dense.csv"));
        out << row(0.5f, 9);
    }
    CHECK_THROWS_AS(load_patterns_csv(dir.file("dense.csv")), FormatError);
}
