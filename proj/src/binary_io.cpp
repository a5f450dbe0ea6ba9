#include "pruneaware/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "pruneaware/errors.hpp"

namespace pruneaware::io
{

namespace
{

template <typename UInt>
void put_le(std::ostream& out, UInt v)
{
    std::array<char, sizeof(UInt)> buf{};
    for (std::size_t i = 0; i < sizeof(UInt); ++i)
        buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out.write(buf.data(), buf.size());
}

template <typename UInt>
UInt get_le(const unsigned char* p)
{
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i)
        v |= static_cast<UInt>(p[i]) << (8 * i);
    return v;
}

} // namespace

void BinaryWriter::magic(const Magic& m) { out_.write(m.data(), m.size()); }
void BinaryWriter::u32(std::uint32_t v) { put_le(out_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(out_, v); }
void BinaryWriter::f32(float v) { put_le(out_, std::bit_cast<std::uint32_t>(v)); }
void BinaryWriter::f64(double v) { put_le(out_, std::bit_cast<std::uint64_t>(v)); }

void BinaryReader::read_bytes(unsigned char* dst, std::size_t n)
{
    in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
        throw FormatError("unexpected end of file", offset_ + static_cast<std::uint64_t>(in_.gcount()));
    offset_ += n;
}

void BinaryReader::expect_magic(const Magic& m)
{
    const auto at = offset_;
    Magic got{};
    read_bytes(reinterpret_cast<unsigned char*>(got.data()), got.size());
    if (got != m)
        throw FormatError("bad magic, expected \"" + std::string(m.data(), m.size()) + "\"", at);
}

std::uint32_t BinaryReader::u32()
{
    unsigned char b[4];
    read_bytes(b, 4);
    return get_le<std::uint32_t>(b);
}

std::uint64_t BinaryReader::u64()
{
    unsigned char b[8];
    read_bytes(b, 8);
    return get_le<std::uint64_t>(b);
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }
double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

bool BinaryReader::at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

Magic peek_magic(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    Magic m{'?', '?', '?', '?'};
    Magic got{};
    if (in.read(got.data(), got.size()))
        m = got;
    return m;
}

} // namespace pruneaware::io
