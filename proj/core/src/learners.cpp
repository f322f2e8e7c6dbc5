#include "hetens/learners.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "hetens/error.hpp"

namespace hetens {

std::string_view to_string(LearnerKind kind) noexcept {
  switch (kind) {
    case LearnerKind::kTree:
      return "tree";
    case LearnerKind::kMlp:
      return "mlp";
    case LearnerKind::kSvm:
      return "svm";
  }
  return "unknown";
}

LearnerKind parse_learner_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "tree" || lower == "rf") return LearnerKind::kTree;
  if (lower == "mlp") return LearnerKind::kMlp;
  if (lower == "svm") return LearnerKind::kSvm;
  throw ConfigError("unknown learner kind '" + std::string(name) + "'");
}

std::size_t default_mtry(std::size_t dims) noexcept {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(dims)))));
}

namespace {

ClassId argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return static_cast<ClassId>(best);
}

template <typename Count>
ClassId argmax_lowest_count(const std::vector<Count>& v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return static_cast<ClassId>(best);
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

// ---------------------------------------------------------------------------
// Tree

ClassId TreeModel::predict(std::span<const double> x) const noexcept {
  std::int32_t node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(node)];
    node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(node)].label;
}

std::size_t TreeModel::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

namespace {

struct SplitCandidate {
  bool valid = false;
  std::int32_t feature = -1;
  double threshold = 0.0;
  double score = -1.0;  // sum_children sum_k n_ck^2 / n_child; larger is purer
};

class TreeGrower {
 public:
  TreeGrower(const Dataset& ds, std::size_t mtry, Seed seed)
      : ds_(ds), k_(ds.num_classes()), mtry_(mtry), rng_(seed), order_(ds.dims()) {}

  TreeModel grow(std::vector<std::size_t> samples) {
    TreeModel tree;
    struct Pending {
      std::size_t node;
      std::vector<std::size_t> samples;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, std::move(samples)});
    while (!stack.empty()) {
      Pending p = std::move(stack.back());
      stack.pop_back();
      std::vector<std::size_t> counts(k_, 0);
      for (std::size_t s : p.samples) ++counts[static_cast<std::size_t>(ds_.label(s))];
      tree.nodes[p.node].label = argmax_lowest_count(counts);
      const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
      if (pure || p.samples.size() < 2) continue;

      const SplitCandidate best = find_split(p.samples);
      if (!best.valid) continue;

      std::vector<std::size_t> left, right;
      for (std::size_t s : p.samples) {
        (ds_.row(s)[static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(s);
      }
      const auto l = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[p.node];
      node.feature = best.feature;
      node.threshold = best.threshold;
      node.left = l;
      node.right = l + 1;
      // Right child pushed first so the left subtree is expanded first.
      stack.push_back({static_cast<std::size_t>(l + 1), std::move(right)});
      stack.push_back({static_cast<std::size_t>(l), std::move(left)});
    }
    return tree;
  }

 private:
  // Features are visited in a fresh random order; the search stops once mtry
  // non-constant features have been evaluated, so a node is only left
  // unsplit when every feature is constant on it.
  SplitCandidate find_split(const std::vector<std::size_t>& samples) {
    std::iota(order_.begin(), order_.end(), 0);
    SplitCandidate best;
    std::size_t evaluated = 0;
    for (std::size_t i = 0; i < order_.size() && evaluated < mtry_; ++i) {
      const std::size_t j = i + rng_.uniform_index(order_.size() - i);
      std::swap(order_[i], order_[j]);
      const std::size_t f = order_[i];
      if (evaluate_feature(samples, f, best)) ++evaluated;
    }
    return best;
  }

  bool evaluate_feature(const std::vector<std::size_t>& samples, std::size_t f, SplitCandidate& best) {
    values_.clear();
    for (std::size_t s : samples) values_.emplace_back(ds_.row(s)[f], ds_.label(s));
    std::sort(values_.begin(), values_.end());
    if (values_.front().first == values_.back().first) return false;

    const std::size_t n = values_.size();
    left_.assign(k_, 0.0);
    right_.assign(k_, 0.0);
    for (const auto& [v, y] : values_) right_[static_cast<std::size_t>(y)] += 1.0;
    double left_sq = 0.0, right_sq = 0.0;
    for (double c : right_) right_sq += c * c;

    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto y = static_cast<std::size_t>(values_[i].second);
      // Incremental update of sum of squared class counts.
      left_sq += 2.0 * left_[y] + 1.0;
      left_[y] += 1.0;
      right_sq -= 2.0 * right_[y] - 1.0;
      right_[y] -= 1.0;
      const double a = values_[i].first, b = values_[i + 1].first;
      if (a == b) continue;
      const double nl = static_cast<double>(i + 1), nr = static_cast<double>(n - i - 1);
      const double score = left_sq / nl + right_sq / nr;
      if (!best.valid || score > best.score) {
        double mid = a + (b - a) / 2.0;
        if (!(mid < b)) mid = a;
        best = {true, static_cast<std::int32_t>(f), mid, score};
      }
    }
    return true;
  }

  const Dataset& ds_;
  std::size_t k_;
  std::size_t mtry_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::vector<std::pair<double, ClassId>> values_;
  std::vector<double> left_, right_;
};

}  // namespace

BaseModel train_tree(const Dataset& ds, const IndexSample& sample, std::size_t mtry, Seed seed) {
  if (sample.indices.empty()) throw ComputeError("train_tree: empty sample");
  if (mtry == kDefaultMtry) mtry = default_mtry(ds.dims());
  if (mtry < 1 || mtry > ds.dims()) throw ConfigError("train_tree: mtry must lie in [1, d]");
  for (std::size_t i : sample.indices) {
    if (i >= ds.size()) throw DataError("train_tree: sample index out of range");
  }
  TreeGrower grower(ds, mtry, seed);
  BaseModel m;
  m.kind = LearnerKind::kTree;
  m.hyper.tree_mtry = mtry;
  m.train_indices = sample;
  m.dims = ds.dims();
  m.num_classes = ds.num_classes();
  m.payload = grower.grow(sample.indices);
  return m;
}

// ---------------------------------------------------------------------------
// MLP

void MlpModel::forward(std::span<const double> x, std::span<double> hidden_out, std::span<double> out) const {
  const std::size_t stride_h = inputs + 1;
  for (std::size_t h = 0; h < hidden; ++h) {
    const double* w = w_hidden.data() + h * stride_h;
    double z = w[inputs];
    for (std::size_t i = 0; i < inputs; ++i) z += w[i] * x[i];
    hidden_out[h] = logistic(z);
  }
  const std::size_t stride_o = hidden + 1;
  for (std::size_t k = 0; k < outputs; ++k) {
    const double* w = w_output.data() + k * stride_o;
    double z = w[hidden];
    for (std::size_t h = 0; h < hidden; ++h) z += w[h] * hidden_out[h];
    out[k] = logistic(z);
  }
}

ClassId MlpModel::predict(std::span<const double> x) const {
  std::vector<double> buf(hidden + outputs);
  forward(x, std::span<double>(buf.data(), hidden), std::span<double>(buf.data() + hidden, outputs));
  return argmax_lowest(std::span<const double>(buf.data() + hidden, outputs));
}

MlpModel mlp_init(std::size_t inputs, std::size_t hidden, std::size_t outputs, Seed seed) {
  MlpModel net{inputs, hidden, outputs, std::vector<double>(hidden * (inputs + 1)),
               std::vector<double>(outputs * (hidden + 1))};
  Rng rng(seed);
  for (double& w : net.w_hidden) w = rng.uniform(-0.5, 0.5);
  for (double& w : net.w_output) w = rng.uniform(-0.5, 0.5);
  return net;
}

MlpLossGradient mlp_loss_gradient(const MlpModel& net, const Dataset& ds, std::span<const std::size_t> sample) {
  MlpLossGradient g;
  g.d_hidden.assign(net.w_hidden.size(), 0.0);
  g.d_output.assign(net.w_output.size(), 0.0);
  const std::size_t in = net.inputs, hid = net.hidden, out = net.outputs;
  std::vector<double> h(hid), o(out), delta_o(out), delta_h(hid);
  for (std::size_t s : sample) {
    const auto x = ds.row(s);
    const auto y = static_cast<std::size_t>(ds.label(s));
    net.forward(x, h, o);
    for (std::size_t k = 0; k < out; ++k) {
      const double err = o[k] - (k == y ? 1.0 : 0.0);
      g.loss += err * err;
      delta_o[k] = 2.0 * err * o[k] * (1.0 - o[k]);
    }
    std::fill(delta_h.begin(), delta_h.end(), 0.0);
    for (std::size_t k = 0; k < out; ++k) {
      const double* w = net.w_output.data() + k * (hid + 1);
      double* dw = g.d_output.data() + k * (hid + 1);
      for (std::size_t j = 0; j < hid; ++j) {
        dw[j] += delta_o[k] * h[j];
        delta_h[j] += delta_o[k] * w[j];
      }
      dw[hid] += delta_o[k];
    }
    for (std::size_t j = 0; j < hid; ++j) {
      const double dz = delta_h[j] * h[j] * (1.0 - h[j]);
      double* dw = g.d_hidden.data() + j * (in + 1);
      for (std::size_t i = 0; i < in; ++i) dw[i] += dz * x[i];
      dw[in] += dz;
    }
  }
  return g;
}

BaseModel train_mlp(const Dataset& ds, const IndexSample& sample, std::size_t hidden, Seed seed,
                    const MlpOptions& options) {
  if (sample.indices.empty()) throw ComputeError("train_mlp: empty sample");
  if (hidden < 1) throw ConfigError("train_mlp: hidden must be >= 1");
  for (std::size_t i : sample.indices) {
    if (i >= ds.size()) throw DataError("train_mlp: sample index out of range");
  }
  MlpModel net = mlp_init(ds.dims(), hidden, ds.num_classes(), seed);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const auto g = mlp_loss_gradient(net, ds, sample.indices);
    for (std::size_t i = 0; i < net.w_hidden.size(); ++i) net.w_hidden[i] -= options.learning_rate * g.d_hidden[i];
    for (std::size_t i = 0; i < net.w_output.size(); ++i) net.w_output[i] -= options.learning_rate * g.d_output[i];
  }
  BaseModel m;
  m.kind = LearnerKind::kMlp;
  m.hyper.mlp_hidden = hidden;
  m.train_indices = sample;
  m.dims = ds.dims();
  m.num_classes = ds.num_classes();
  m.payload = std::move(net);
  return m;
}

// ---------------------------------------------------------------------------
// SVM

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) noexcept {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d2 += t * t;
  }
  return std::exp(-gamma * d2);
}

double svm_dual_objective(std::span<const double> kernel, std::span<const int> y, std::span<const double> alpha) {
  const std::size_t n = y.size();
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lin += alpha[i];
    if (alpha[i] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel[i * n + j];
    }
  }
  return lin - 0.5 * quad;
}

SmoResult solve_smo(std::span<const double> kernel, std::span<const int> y, double c, const SvmOptions& options) {
  const std::size_t n = y.size();
  if (kernel.size() != n * n) throw ComputeError("solve_smo: kernel matrix size mismatch");
  if (!(c > 0.0)) throw ConfigError("solve_smo: C must be positive");
  constexpr double kTau = 1e-12;
  const auto K = [&](std::size_t i, std::size_t j) { return kernel[i * n + j]; };

  // Minimizes f(a) = 1/2 a'Qa - e'a with Q_ij = y_i y_j K_ij; G = Qa - e.
  std::vector<double> alpha(n, 0.0), grad(n, -1.0);
  SmoResult res;
  double f = 0.0;
  std::uint64_t stall = 0;
  const std::uint64_t stall_limit = std::max<std::uint64_t>(1, options.stall_factor * n);

  for (;;) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (alpha[t] < c && -grad[t] >= gmax) {
          gmax = -grad[t];
          i = static_cast<std::ptrdiff_t>(t);
        }
      } else if (alpha[t] > 0.0 && grad[t] >= gmax) {
        gmax = grad[t];
        i = static_cast<std::ptrdiff_t>(t);
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t j = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    if (i >= 0) {
      const auto ui = static_cast<std::size_t>(i);
      for (std::size_t t = 0; t < n; ++t) {
        double grad_diff;
        if (y[t] == 1) {
          if (!(alpha[t] > 0.0)) continue;
          gmax2 = std::max(gmax2, grad[t]);
          grad_diff = gmax + grad[t];
        } else {
          if (!(alpha[t] < c)) continue;
          gmax2 = std::max(gmax2, -grad[t]);
          grad_diff = gmax - grad[t];
        }
        if (grad_diff > 0.0) {
          double quad = K(ui, ui) + K(t, t) - 2.0 * K(ui, t);
          if (quad <= 0.0) quad = kTau;
          const double obj = -(grad_diff * grad_diff) / quad;
          if (obj <= best_obj) {
            best_obj = obj;
            j = static_cast<std::ptrdiff_t>(t);
          }
        }
      }
    }
    res.violation = (i >= 0 && gmax2 > -std::numeric_limits<double>::infinity()) ? gmax + gmax2 : 0.0;
    if (j < 0 || gmax + gmax2 < options.tolerance) break;
    if (res.iterations >= options.max_iterations || stall >= stall_limit) {
      res.converged = false;
      break;
    }
    ++res.iterations;

    const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
    const double old_a = alpha[a], old_b = alpha[b];
    double quad = K(a, a) + K(b, b) - 2.0 * K(a, b);
    if (quad <= 0.0) quad = kTau;
    if (y[a] != y[b]) {
      const double delta = (-grad[a] - grad[b]) / quad;
      const double diff = alpha[a] - alpha[b];
      alpha[a] += delta;
      alpha[b] += delta;
      if (diff > 0.0) {
        if (alpha[b] < 0.0) {
          alpha[b] = 0.0;
          alpha[a] = diff;
        }
      } else if (alpha[a] < 0.0) {
        alpha[a] = 0.0;
        alpha[b] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[a] > c) {
          alpha[a] = c;
          alpha[b] = c - diff;
        }
      } else if (alpha[b] > c) {
        alpha[b] = c;
        alpha[a] = c + diff;
      }
    } else {
      const double delta = (grad[a] - grad[b]) / quad;
      const double sum = alpha[a] + alpha[b];
      alpha[a] -= delta;
      alpha[b] += delta;
      if (sum > c) {
        if (alpha[a] > c) {
          alpha[a] = c;
          alpha[b] = sum - c;
        }
      } else if (alpha[b] < 0.0) {
        alpha[b] = 0.0;
        alpha[a] = sum;
      }
      if (sum > c) {
        if (alpha[b] > c) {
          alpha[b] = c;
          alpha[a] = sum - c;
        }
      } else if (alpha[a] < 0.0) {
        alpha[a] = 0.0;
        alpha[b] = sum;
      }
    }

    const double da = alpha[a] - old_a, db = alpha[b] - old_b;
    const double qab = y[a] * y[b] * K(a, b);
    const double df = grad[a] * da + grad[b] * db + 0.5 * (da * da * K(a, a) + db * db * K(b, b)) + da * db * qab;
    f += df;
    stall = std::abs(df) <= 1e-15 * std::max(1.0, std::abs(f)) ? stall + 1 : 0;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (y[a] * K(t, a) * da + y[b] * K(t, b) * db);
    }
  }

  // Offset: average of y_t G_t over free vectors, else midpoint of the
  // feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  double rho;
  if (n_free > 0) rho = sum_free / static_cast<double>(n_free);
  else if (std::isfinite(ub) && std::isfinite(lb)) rho = (ub + lb) / 2.0;
  else rho = std::isfinite(ub) ? ub : (std::isfinite(lb) ? lb : 0.0);

  res.alpha = std::move(alpha);
  res.bias = -rho;
  res.objective = svm_dual_objective(kernel, y, res.alpha);
  return res;
}

double SvmMachine::decision(std::span<const double> x, double gamma) const {
  const std::size_t d = x.size();
  double f = bias;
  for (std::size_t s = 0; s < coef.size(); ++s) {
    f += coef[s] * rbf_kernel(std::span<const double>(support.data() + s * d, d), x, gamma);
  }
  return f;
}

ClassId SvmModel::predict(std::span<const double> x, std::size_t num_classes) const {
  if (machines.size() == 1) {
    const auto& m = machines.front();
    return m.decision(x, gamma) >= 0.0 ? m.positive : m.negative;
  }
  std::vector<double> votes(num_classes, 0.0);
  for (const auto& m : machines) {
    votes[static_cast<std::size_t>(m.decision(x, gamma) >= 0.0 ? m.positive : m.negative)] += 1.0;
  }
  return argmax_lowest(votes);
}

BaseModel train_svm(const Dataset& ds, const IndexSample& sample, double c, double gamma,
                    const SvmOptions& options) {
  if (!(c > 0.0) || !(gamma > 0.0)) throw ConfigError("train_svm: C and gamma must be positive");
  const std::size_t k = ds.num_classes(), d = ds.dims();
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i : sample.indices) {
    if (i >= ds.size()) throw DataError("train_svm: sample index out of range");
    by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);
  }
  std::vector<std::size_t> present;
  for (std::size_t cls = 0; cls < k; ++cls) {
    if (!by_class[cls].empty()) present.push_back(cls);
  }
  if (present.size() < 2) throw ComputeError("train_svm: sample contains a single class");

  SvmModel svm;
  svm.gamma = gamma;
  svm.c = c;
  svm.dims = d;
  for (std::size_t p = 0; p < present.size(); ++p) {
    for (std::size_t q = p + 1; q < present.size(); ++q) {
      std::vector<std::size_t> rows;
      std::vector<int> y;
      // Keep rows in sample order for reproducibility.
      for (std::size_t i : sample.indices) {
        const auto cls = static_cast<std::size_t>(ds.label(i));
        if (cls == present[p] || cls == present[q]) {
          rows.push_back(i);
          y.push_back(cls == present[p] ? 1 : -1);
        }
      }
      const std::size_t n = rows.size();
      std::vector<double> gram(n * n);
      for (std::size_t a = 0; a < n; ++a) {
        gram[a * n + a] = 1.0;
        for (std::size_t b = a + 1; b < n; ++b) {
          const double v = rbf_kernel(ds.row(rows[a]), ds.row(rows[b]), gamma);
          gram[a * n + b] = v;
          gram[b * n + a] = v;
        }
      }
      const SmoResult r = solve_smo(gram, y, c, options);
      SvmMachine m;
      m.positive = static_cast<ClassId>(present[p]);
      m.negative = static_cast<ClassId>(present[q]);
      m.bias = r.bias;
      for (std::size_t a = 0; a < n; ++a) {
        if (r.alpha[a] > 0.0) {
          const auto row = ds.row(rows[a]);
          m.support.insert(m.support.end(), row.begin(), row.end());
          m.coef.push_back(r.alpha[a] * y[a]);
        }
      }
      svm.machines.push_back(std::move(m));
      svm.converged = svm.converged && r.converged;
      svm.iterations += r.iterations;
    }
  }
  BaseModel m;
  m.kind = LearnerKind::kSvm;
  m.hyper.svm_c = c;
  m.hyper.svm_gamma = gamma;
  m.train_indices = sample;
  m.dims = d;
  m.num_classes = k;
  m.payload = std::move(svm);
  return m;
}

// ---------------------------------------------------------------------------

ClassId BaseModel::predict_scaled(std::span<const double> x) const {
  if (x.size() != dims) {
    throw DataError("predict: expected " + std::to_string(dims) + " features, got " + std::to_string(x.size()));
  }
  return std::visit(
      [&](const auto& p) -> ClassId {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SvmModel>) {
          return p.predict(x, num_classes);
        } else {
          return p.predict(x);
        }
      },
      payload);
}

ClassId BaseModel::predict(std::span<const double> x) const {
  if (!scaler) return predict_scaled(x);
  if (x.size() != dims) {
    throw DataError("predict: expected " + std::to_string(dims) + " features, got " + std::to_string(x.size()));
  }
  std::vector<double> z(x.size());
  scaler->apply(x, z);
  return predict_scaled(z);
}

}  // namespace hetens
