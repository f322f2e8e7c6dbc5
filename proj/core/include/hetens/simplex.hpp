#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hetens/data.hpp"
#include "hetens/homogeneous.hpp"

namespace hetens {

/// Number of members drawn from each of the M homogeneous ensembles.
struct Composition {
  std::vector<std::size_t> counts;

  std::size_t total() const noexcept;
  friend bool operator==(const Composition&, const Composition&) = default;
  friend auto operator<=>(const Composition&, const Composition&) = default;
};

/// How a stride that does not divide t is handled.
enum class StrideMode : std::uint8_t {
  /// Coordinates are multiples of the stride; the stride must divide t.
  kExact = 0,
  /// Points of the q = floor(t / stride) lattice scaled by t / q and rounded
  /// back to integers by largest-remainder apportionment. Identical to kExact
  /// whenever the stride divides t; vertices are always included.
  kApportioned = 1,
};

/// All compositions of t into m parts on the stride grid, in lexicographic
/// order. There are C(q + m - 1, m - 1) of them with q = t / stride.
std::vector<Composition> enumerate_compositions(std::size_t t, std::size_t m, std::size_t stride,
                                                StrideMode mode = StrideMode::kExact);

/// Rounds nonnegative shares summing to t onto integers summing to t: floor
/// every coordinate, then hand the deficit to the largest fractional parts
/// (ties to the lowest index).
std::vector<std::size_t> apportion(std::span<const double> shares, std::size_t t);

/// The first counts[j] models of ensemble j, concatenated in ensemble order.
PooledModels pool(std::span<const HomogeneousEnsemble> ensembles, const Composition& comp);

struct OobEstimate {
  double error = 0.0;
  double covered_fraction = 0.0;
};

/// Out-of-bag 0-1 error: every training row is voted on only by the pooled
/// models whose training sample excluded it. Rows with no such voter are left
/// out of the error and counted in covered_fraction.
OobEstimate oob_error(std::span<const BaseModel* const> pooled, const Dataset& train);

/// Per-ensemble prefix sums of out-of-bag votes over the training rows, so
/// any composition's OOB tally costs O(M n K).
class OobVoteCache {
 public:
  OobVoteCache(std::span<const HomogeneousEnsemble> ensembles, const Dataset& train, std::size_t threads = 1);

  OobEstimate evaluate(const Composition& comp) const;
  std::size_t num_ensembles() const noexcept { return sizes_.size(); }

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  std::vector<std::size_t> sizes_;
  std::vector<ClassId> labels_;
  // prefix_[j][(t * n + i) * k + c]: OOB votes for class c on row i among
  // the first t models of ensemble j.
  std::vector<std::vector<std::uint32_t>> prefix_;
};

struct ScanEntry {
  Composition composition;
  double oob_error = 0.0;
  double covered_fraction = 0.0;
};

struct SimplexScan {
  std::vector<LearnerKind> kinds;
  std::size_t total = 0;
  std::size_t stride = 1;
  StrideMode mode = StrideMode::kExact;
  std::vector<ScanEntry> entries;
  std::vector<Composition> minima;
  Composition optimum;
  double min_error = 0.0;
};

/// Exact minimum over entries; a unique minimizer is returned as is, several
/// are averaged coordinate-wise and apportioned back onto t.
Composition select_optimum(std::span<const ScanEntry> entries, std::size_t t);

SimplexScan scan_simplex(std::span<const HomogeneousEnsemble> ensembles, std::size_t t, std::size_t stride,
                         const Dataset& train, StrideMode mode = StrideMode::kExact, std::size_t threads = 1);

/// One row per composition: counts, oob_error, covered_fraction, optimum flag.
void write_scan_csv(const SimplexScan& scan, const std::filesystem::path& path);

/// Columns t_svm, t_mlp, t_tree, x = t_mlp, y = t_svm - t_tree, oob_error,
/// covered_fraction, row_type. One "entry" row per composition, then a
/// "minimum" row per minimizer and one "optimum" row. Requires exactly one
/// ensemble of each kind.
void export_heatmap(const SimplexScan& scan, const std::filesystem::path& path);

}  // namespace hetens
