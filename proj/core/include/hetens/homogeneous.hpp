#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hetens/data.hpp"
#include "hetens/learners.hpp"

namespace hetens {

struct ParamAxis {
  std::string name;  // "c", "gamma", "hidden" or "mtry"
  std::vector<double> values;

  friend bool operator==(const ParamAxis&, const ParamAxis&) = default;
};

/// Cartesian product of named axes. Nodes are enumerated row-major over the
/// axes in declaration order: the last axis varies fastest.
class ParamGrid {
 public:
  ParamGrid() = default;
  explicit ParamGrid(std::vector<ParamAxis> axes);

  /// C = 2^q for q = -5..15 and gamma = 2^p for p = -15..3 (399 nodes).
  static ParamGrid svm_default();
  /// hidden in {3, ..., 10}.
  static ParamGrid mlp_default();
  static ParamGrid for_kind(LearnerKind kind);

  std::size_t size() const noexcept;
  bool empty() const noexcept { return axes_.empty(); }
  const std::vector<ParamAxis>& axes() const noexcept { return axes_; }

  std::vector<double> node(std::size_t index) const;
  /// Hyperparameters for `kind` at node `index`. Axes not relevant to `kind`
  /// are ignored; a missing relevant axis is a ConfigError.
  HyperParams hyper(LearnerKind kind, std::size_t index) const;

  friend bool operator==(const ParamGrid&, const ParamGrid&) = default;

 private:
  std::vector<ParamAxis> axes_;
};

struct EnsembleOptions {
  double subbag_rate = 0.5;
  MlpOptions mlp;
  SvmOptions svm;
  std::size_t threads = 1;
};

/// Trains any base learner with the given hyperparameters.
BaseModel train_model(LearnerKind kind, const Dataset& ds, const IndexSample& sample, const HyperParams& hp,
                      Seed seed, const EnsembleOptions& options = {});

struct GridSelection {
  HyperParams params;
  std::size_t node = 0;
  double error = 0.0;
  std::vector<double> node_errors;  // NaN for nodes whose model failed to train
};

/// One subbag at the configured rate; one model per grid node trained on it
/// and scored by 0-1 loss on the left-out rows. Lowest error wins, ties go to
/// the lowest node index.
GridSelection partial_optimize(LearnerKind kind, const Dataset& ds, const ParamGrid& grid, Seed seed,
                               const EnsembleOptions& options = {});

/// Equal-as-possible batch sizes; the first t % b batches get one extra model.
std::vector<std::size_t> batch_sizes(std::size_t t, std::size_t b);

struct HomogeneousEnsemble {
  LearnerKind kind = LearnerKind::kTree;
  std::vector<BaseModel> models;
  std::vector<HyperParams> batch_params;  // empty for random forests
  std::vector<std::size_t> batch_sizes;
  ParamGrid grid;
  std::uint64_t train_fingerprint = 0;
  std::size_t train_size = 0;
  std::vector<std::string> class_names;
  Seed master_seed = 0;
  double subbag_rate = 0.0;
  std::shared_ptr<const Standardizer> scaler;  // null for trees
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return models.size(); }
  /// Index into batch_params for model j.
  std::size_t batch_of(std::size_t j) const;
  ClassId predict(std::span<const double> x) const;
};

/// Partially optimized ensemble of SVMs or MLPs: b grid selections, then t
/// models each trained on a fresh subbag with its batch's parameters.
/// Features are z-scored with training-set statistics stored in the ensemble.
HomogeneousEnsemble build_batched_ensemble(LearnerKind kind, const Dataset& ds, std::size_t t, std::size_t b,
                                           const ParamGrid& grid, Seed master_seed,
                                           const EnsembleOptions& options = {});

/// t unpruned trees on bootstrap samples with mtry = floor(sqrt(d)).
HomogeneousEnsemble build_random_forest(const Dataset& ds, std::size_t t, Seed master_seed,
                                        const EnsembleOptions& options = {});

/// A single model tuned by stratified k-fold cross-validated grid search and
/// refit on all of `ds` (the single SVM / single MLP baselines).
struct CvSelection {
  BaseModel model;
  GridSelection selection;
};
CvSelection grid_search_cv(LearnerKind kind, const Dataset& ds, const ParamGrid& grid, std::size_t folds, Seed seed,
                           const EnsembleOptions& options = {});

/// Majority vote over class ids; ties go to the lowest class.
ClassId majority_vote(std::span<const ClassId> votes, std::size_t num_classes);

using PooledModels = std::vector<const BaseModel*>;

ClassId ensemble_predict(std::span<const BaseModel* const> models, std::span<const double> x);
ClassId ensemble_predict(const HomogeneousEnsemble& ens, std::span<const double> x);

// Container format: see docs/FORMAT.md.
std::vector<std::uint8_t> serialize_ensemble(const HomogeneousEnsemble& ens);
HomogeneousEnsemble deserialize_ensemble(std::span<const std::uint8_t> bytes);
void save_ensemble(const HomogeneousEnsemble& ens, const std::filesystem::path& path);
HomogeneousEnsemble load_ensemble(const std::filesystem::path& path);

}  // namespace hetens
