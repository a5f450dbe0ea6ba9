#ifndef PRUNEAWARE_BINARY_IO_HPP
#define PRUNEAWARE_BINARY_IO_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string_view>

namespace pruneaware::io
{

using Magic = std::array<char, 4>;

// Little-endian primitive writer. All multi-byte values are written byte by
// byte so the files are identical across hosts.
class BinaryWriter
{
  public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void magic(const Magic& m);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void f64(double v);

  private:
    std::ostream& out_;
};

// Little-endian reader that tracks the byte offset for error reporting.
class BinaryReader
{
  public:
    explicit BinaryReader(std::istream& in, std::uint64_t start_offset = 0) : in_(in), offset_(start_offset) {}

    /// Reads four bytes and throws FormatError unless they equal `m`.
    void expect_magic(const Magic& m);
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();

    std::uint64_t offset() const noexcept { return offset_; }
    bool at_eof();

  private:
    void read_bytes(unsigned char* dst, std::size_t n);

    std::istream& in_;
    std::uint64_t offset_;
};

constexpr Magic make_magic(std::string_view s) { return {s[0], s[1], s[2], s[3]}; }

/// Peeks the four-byte magic of a file; returns "????" when shorter.
Magic peek_magic(const std::string& path);

} // namespace pruneaware::io

#endif
