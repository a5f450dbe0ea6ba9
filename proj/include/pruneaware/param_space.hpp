#ifndef PRUNEAWARE_PARAM_SPACE_HPP
#define PRUNEAWARE_PARAM_SPACE_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "pruneaware/errors.hpp"

namespace pruneaware
{

using Index = Eigen::Index;

/// Flat view of every trainable parameter of a model.
using ParamVector = Eigen::VectorXd;

/// Which weights are eligible for pruning.
enum class Scope
{
    whole_model,
    decoder_only
};

std::string_view to_string(Scope s);
Scope parse_scope(std::string_view s);

enum class SegmentRole
{
    encoder,
    decoder,
    codebook
};

/// One block of parameters: a `rows x cols` weight matrix followed by `bias` bias entries.
/// Codebook blocks carry no bias; their `rows x cols` entries are codebook values.
struct LayerShape
{
    std::string name;
    SegmentRole role;
    Index rows = 0;
    Index cols = 0;
    Index bias = 0;
};

/// Where a layer lives inside the flat parameter vector.
struct LayerSlot
{
    std::string name;
    SegmentRole role;
    Index rows;
    Index cols;
    Index weight_offset;
    Index bias_offset;
    Index bias;
};

/// Disjoint cover of {0, ..., N-1} by parameter kind.
struct WeightPartition
{
    std::vector<Index> encoder_weights;
    std::vector<Index> decoder_weights;
    std::vector<Index> biases;
    std::vector<Index> codebook;
    std::vector<LayerSlot> layers;
    Index total = 0;

    Index size() const noexcept { return total; }

    /// Sorted indices eligible for pruning under `scope`. Biases and codebook
    /// entries are never eligible.
    std::vector<Index> eligible(Scope scope) const;

    const LayerSlot& layer(std::string_view name) const;
};

/// Assigns indices layer by layer in declaration order, row-major within each
/// weight matrix, followed by that layer's biases.
WeightPartition build_partition(const std::vector<LayerShape>& shape);

/// Immutable set of pruned indices with the rate and scope that produced it.
class PruningMask
{
  public:
    PruningMask() = default;
    /// `indices` are sorted and deduplicated on construction.
    PruningMask(std::vector<Index> indices, double rate, Scope scope);

    const std::vector<Index>& indices() const noexcept { return indices_; }
    double rate() const noexcept { return rate_; }
    Scope scope() const noexcept { return scope_; }
    Index size() const noexcept { return static_cast<Index>(indices_.size()); }
    bool empty() const noexcept { return indices_.empty(); }
    bool contains(Index i) const;

    /// Throws ContractError if any index is outside [0, n).
    void check_bounds(Index n) const;

  private:
    std::vector<Index> indices_;
    double rate_ = 0.0;
    Scope scope_ = Scope::whole_model;
};

/// round(rate * eligible) with ties rounding up.
Index pruned_count(double rate, Index eligible);

/// The K eligible indices with the smallest |w_i|; ties go to the lower index.
PruningMask select_pruned_indices(const ParamVector& w, const WeightPartition& part, double rate, Scope scope);

/// Copy of `w` with the masked entries set to exactly zero.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> apply_mask(const Eigen::MatrixBase<Derived>& w,
                                                                       const PruningMask& mask)
{
    mask.check_bounds(w.size());
    Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> out = w;
    for (Index i : mask.indices())
        out[i] = typename Derived::Scalar(0);
    return out;
}

/// The additive pruning direction: -w_i on masked entries, zero elsewhere.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> pruning_direction(const Eigen::MatrixBase<Derived>& w,
                                                                              const PruningMask& mask)
{
    mask.check_bounds(w.size());
    Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> dir =
        Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>::Zero(w.size());
    for (Index i : mask.indices())
        dir[i] = -w[i];
    return dir;
}

// Serialization: 16-byte header (magic, u32 version, u64 count) followed by
// little-endian payload. "PAWV" carries f64 values, "PAWM" sorted u32 indices.
void write_params(std::ostream& out, const ParamVector& w);
ParamVector read_params(std::istream& in, std::uint64_t start_offset = 0);
void save_params(const std::string& path, const ParamVector& w);
ParamVector load_params(const std::string& path);

void save_mask(const std::string& path, const PruningMask& mask);
/// Mask files store indices only; the caller supplies rate and scope.
PruningMask load_mask(const std::string& path, double rate = 0.0, Scope scope = Scope::whole_model);

} // namespace pruneaware

#endif
