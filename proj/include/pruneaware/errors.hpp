#ifndef PRUNEAWARE_ERRORS_HPP
#define PRUNEAWARE_ERRORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pruneaware
{

/// Invalid model shape or experiment configuration.
class ConfigError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (dimension mismatch, index out of range, ...).
class ContractError : public std::logic_error
{
  public:
    using std::logic_error::logic_error;
};

/// Malformed or truncated binary/text file.
class FormatError : public std::runtime_error
{
  public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset)
    {
    }

    std::uint64_t offset() const noexcept { return offset_; }

  private:
    std::uint64_t offset_;
};

/// The fitness function returned a non-finite value during optimization.
class OptimizerError : public std::runtime_error
{
  public:
    OptimizerError(const std::string& what, std::uint64_t iteration)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration)
    {
    }

    std::uint64_t iteration() const noexcept { return iteration_; }

  private:
    std::uint64_t iteration_;
};

} // namespace pruneaware

#endif
