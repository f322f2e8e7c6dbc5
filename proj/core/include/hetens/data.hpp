#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hetens/rng.hpp"

namespace hetens {

using ClassId = int;

/// Dense row-major feature matrix with class labels.
///
/// Construction validates the invariants (n >= 1, d >= 1, K >= 2, labels in
/// range, finite features, unique class names); a Dataset is immutable
/// afterwards.
class Dataset {
 public:
  Dataset(std::size_t n, std::size_t d, std::vector<double> features, std::vector<ClassId> labels,
          std::vector<std::string> class_names, std::vector<std::string> feature_names = {});

  std::size_t size() const noexcept { return n_; }
  std::size_t dims() const noexcept { return d_; }
  std::size_t num_classes() const noexcept { return class_names_.size(); }

  std::span<const double> row(std::size_t i) const noexcept { return {features_.data() + i * d_, d_}; }
  ClassId label(std::size_t i) const noexcept { return labels_[i]; }

  const std::vector<double>& features() const noexcept { return features_; }
  const std::vector<ClassId>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

  /// Rows in the given order (duplicates allowed). Class names are kept so
  /// label indices stay comparable with the parent.
  Dataset subset(std::span<const std::size_t> indices) const;

  /// Per-class instance counts.
  std::vector<std::size_t> class_counts() const;

 private:
  std::size_t n_;
  std::size_t d_;
  std::vector<double> features_;
  std::vector<ClassId> labels_;
  std::vector<std::string> class_names_;
  std::vector<std::string> feature_names_;
};

/// 64-bit FNV-1a hash of shape, features, labels and class names.
std::uint64_t fingerprint(const Dataset& ds);

struct IndexSample {
  std::vector<std::size_t> indices;
  bool with_replacement = false;

  /// Membership mask over [0, n).
  std::vector<bool> in_bag_mask(std::size_t n) const;
  /// Sorted complement of the distinct drawn indices.
  std::vector<std::size_t> out_of_bag(std::size_t n) const;
};

struct SplitSpec {
  double train_fraction = 2.0 / 3.0;
  bool stratified = true;
  Seed seed = 0;
};

struct Split {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

/// Per class c, round-half-up(n_c * fraction) rows go to train, chosen
/// uniformly at random; the rest go to test. Throws DataError naming any class
/// with fewer than two instances.
Split stratified_split(const Dataset& ds, const SplitSpec& spec);

/// floor(n * rate) distinct indices drawn without replacement.
IndexSample subbag(std::size_t n, double rate, Seed seed);

/// n indices drawn with replacement.
IndexSample bootstrap(std::size_t n, Seed seed);

// Breiman's synthetic benchmarks: d = 20, a = 2 / sqrt(20), classes drawn
// with probability 1/2 each.
Dataset gen_twonorm(std::size_t n, Seed seed);
Dataset gen_threenorm(std::size_t n, Seed seed);
Dataset gen_ringnorm(std::size_t n, Seed seed);

/// Generator lookup for "synthetic:<name>" dataset URIs. Returns nullptr for
/// unknown names.
using Generator = Dataset (*)(std::size_t, Seed);
Generator synthetic_generator(std::string_view name);

struct CsvOptions {
  char delimiter = ',';
  /// Header name or zero-based column index of the class label.
  std::variant<std::string, std::size_t> label_column = std::string("class");
  /// Columns (by header name) to one-hot encode.
  std::vector<std::string> categorical;
  /// One-hot encode any column holding a non-numeric value instead of
  /// reporting it as an error.
  bool auto_categorical = false;
  /// Fixed class order. When empty, classes are numbered in order of first
  /// appearance; otherwise an unlisted label is an error.
  std::vector<std::string> class_names;
};

/// Reads a headered CSV file. Categorical columns are one-hot encoded with
/// levels in first-appearance order; labels are mapped in first-appearance
/// order. Empty cells and "?" are rejected as missing values.
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});

/// Writes a CSV that load_csv reads back bit-exactly (label column "class").
void write_csv(const Dataset& ds, const std::filesystem::path& path);

/// Per-feature z-score parameters estimated on a training set. Features with
/// zero spread pass through unscaled (scale 1, shift 0) and are listed in
/// `degenerate`.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<std::size_t> degenerate;

  static Standardizer fit(const Dataset& ds);

  void apply(std::span<const double> x, std::span<double> out) const;
  Dataset transform(const Dataset& ds) const;
  bool empty() const noexcept { return mean.empty(); }
};

}  // namespace hetens
