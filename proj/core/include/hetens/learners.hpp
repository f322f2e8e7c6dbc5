#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hetens/data.hpp"
#include "hetens/rng.hpp"

namespace hetens {

enum class LearnerKind : std::uint8_t { kTree = 0, kMlp = 1, kSvm = 2 };

std::string_view to_string(LearnerKind kind) noexcept;
/// Accepts "tree", "mlp", "svm" (any case). Throws ConfigError otherwise.
LearnerKind parse_learner_kind(std::string_view name);

/// Hyperparameters of one base model. Only the fields of the owning kind are
/// meaningful; the others keep their defaults.
struct HyperParams {
  double svm_c = 1.0;
  double svm_gamma = 1.0;
  std::size_t mlp_hidden = 0;
  std::size_t tree_mtry = 0;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

// ---------------------------------------------------------------------------
// Payloads

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  ClassId label = 0;          // majority class of the node
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  ClassId predict(std::span<const double> x) const noexcept;
  std::size_t depth() const;
};

/// One hidden layer of logistic units and K logistic outputs. Weight rows
/// carry the bias in their last slot.
struct MlpModel {
  std::size_t inputs = 0;
  std::size_t hidden = 0;
  std::size_t outputs = 0;
  std::vector<double> w_hidden;  // hidden x (inputs + 1)
  std::vector<double> w_output;  // outputs x (hidden + 1)

  void forward(std::span<const double> x, std::span<double> hidden_out, std::span<double> out) const;
  ClassId predict(std::span<const double> x) const;
};

/// Binary RBF machine separating `positive` (decision >= 0) from `negative`.
struct SvmMachine {
  ClassId positive = 0;
  ClassId negative = 1;
  std::vector<double> support;  // rows of length dims
  std::vector<double> coef;     // alpha_i * y_i per support vector
  double bias = 0.0;

  double decision(std::span<const double> x, double gamma) const;
};

struct SvmModel {
  double gamma = 1.0;
  double c = 1.0;
  std::size_t dims = 0;
  std::vector<SvmMachine> machines;  // one-vs-one, pairs in ascending order
  bool converged = true;
  std::uint64_t iterations = 0;

  ClassId predict(std::span<const double> x, std::size_t num_classes) const;
};

// ---------------------------------------------------------------------------

/// A trained classifier plus the bookkeeping needed for out-of-bag estimates.
///
/// When `scaler` is set, `predict` standardizes its input first; use
/// `predict_scaled` for inputs that were standardized by the same scaler.
struct BaseModel {
  LearnerKind kind = LearnerKind::kTree;
  HyperParams hyper;
  IndexSample train_indices;
  std::size_t dims = 0;
  std::size_t num_classes = 0;
  std::variant<TreeModel, MlpModel, SvmModel> payload;
  std::shared_ptr<const Standardizer> scaler;

  ClassId predict(std::span<const double> x) const;
  ClassId predict_scaled(std::span<const double> x) const;
};

struct MlpOptions {
  std::size_t epochs = 500;
  double learning_rate = 0.1;
};

struct SvmOptions {
  double tolerance = 1e-3;
  /// Stop after this many consecutive iterations without objective progress,
  /// expressed as a multiple of the sample size.
  std::size_t stall_factor = 10;
  std::uint64_t max_iterations = 10'000'000;
};

/// Sentinel for train_tree: use floor(sqrt(d)).
inline constexpr std::size_t kDefaultMtry = 0;

std::size_t default_mtry(std::size_t dims) noexcept;

BaseModel train_tree(const Dataset& ds, const IndexSample& sample, std::size_t mtry, Seed seed);
BaseModel train_mlp(const Dataset& ds, const IndexSample& sample, std::size_t hidden, Seed seed,
                    const MlpOptions& options = {});
BaseModel train_svm(const Dataset& ds, const IndexSample& sample, double c, double gamma,
                    const SvmOptions& options = {});

// ---------------------------------------------------------------------------
// Lower-level pieces, exposed for verification.

/// Squared error summed over the sample and the outputs,
/// sum_n sum_k (o_k - t_k)^2 with one-vs-all 0/1 targets, and its gradient
/// laid out like the weights. Full-batch gradient descent on this loss is the
/// MLP training rule.
struct MlpLossGradient {
  double loss = 0.0;
  std::vector<double> d_hidden;
  std::vector<double> d_output;
};
MlpLossGradient mlp_loss_gradient(const MlpModel& net, const Dataset& ds, std::span<const std::size_t> sample);

/// Initial weights, uniform in [-0.5, 0.5].
MlpModel mlp_init(std::size_t inputs, std::size_t hidden, std::size_t outputs, Seed seed);

/// exp(-gamma * |a - b|^2)
double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) noexcept;

struct SmoResult {
  std::vector<double> alpha;
  double bias = 0.0;  // decision = sum alpha_i y_i K(x_i, x) + bias
  double objective = 0.0;
  double violation = 0.0;
  std::uint64_t iterations = 0;
  bool converged = true;
};

/// Solves max_a sum a_i - 1/2 sum_ij a_i a_j y_i y_j K_ij subject to
/// 0 <= a_i <= c and sum a_i y_i = 0, by SMO with second-order working set
/// selection. `kernel` is the dense row-major n x n Gram matrix; labels are +1/-1.
SmoResult solve_smo(std::span<const double> kernel, std::span<const int> y, double c, const SvmOptions& options = {});

/// The dual objective being maximized by solve_smo.
double svm_dual_objective(std::span<const double> kernel, std::span<const int> y, std::span<const double> alpha);

}  // namespace hetens
