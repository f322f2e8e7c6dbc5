#pragma once

// Reference computations the library is checked against. Deliberately naive.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hetens/data.hpp"
#include "hetens/learners.hpp"

namespace oracle {

/// Binomial coefficients from Pascal's triangle.
inline std::uint64_t binomial(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::uint64_t>> tri(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    tri[i].assign(i + 1, 1);
    for (std::size_t j = 1; j < i; ++j) tri[i][j] = tri[i - 1][j - 1] + tri[i - 1][j];
  }
  return k > n ? 0 : tri[n][k];
}

/// Euclidean projection onto {0 <= a <= c, sum a_i y_i = 0}: a = clip(v - lambda y),
/// with lambda found by bisection (the constraint is monotone in lambda).
inline std::vector<double> project_box_hyperplane(const std::vector<double>& v, std::span<const int> y, double c) {
  auto at = [&](double lambda) {
    std::vector<double> a(v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      a[i] = std::clamp(v[i] - lambda * y[i], 0.0, c);
      s += a[i] * y[i];
    }
    return std::pair{a, s};
  };
  double lo = -1e6, hi = 1e6;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (at(mid).second > 0.0) lo = mid;
    else hi = mid;
  }
  return at(0.5 * (lo + hi)).first;
}

/// Dual SVM optimum by projected gradient ascent with a fixed 1/L step.
inline std::vector<double> qp_projected_gradient(std::span<const double> k, std::span<const int> y, double c,
                                                 std::size_t iterations = 20000) {
  const std::size_t n = y.size();
  double lip = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::abs(k[i * n + j]);
    lip = std::max(lip, row);
  }
  const double step = 1.0 / std::max(lip, 1e-12);
  std::vector<double> a(n, 0.0), g(n);
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += y[i] * y[j] * k[i * n + j] * a[j];
      g[i] = 1.0 - s;
    }
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = a[i] + step * g[i];
    a = project_box_hyperplane(v, y, c);
  }
  return a;
}

inline double dual_objective(std::span<const double> k, std::span<const int> y, std::span<const double> a) {
  const std::size_t n = y.size();
  double lin = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lin += a[i];
    for (std::size_t j = 0; j < n; ++j) quad += a[i] * a[j] * y[i] * y[j] * k[i * n + j];
  }
  return lin - 0.5 * quad;
}

/// Sum of squared errors of the network over `rows`, one-vs-all 0/1 targets,
/// with its own forward pass.
inline double mlp_sse(const hetens::MlpModel& net, const hetens::Dataset& ds, std::span<const std::size_t> rows) {
  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  double loss = 0.0;
  for (std::size_t r : rows) {
    const auto x = ds.row(r);
    std::vector<double> h(net.hidden);
    for (std::size_t j = 0; j < net.hidden; ++j) {
      double z = net.w_hidden[j * (net.inputs + 1) + net.inputs];
      for (std::size_t i = 0; i < net.inputs; ++i) z += net.w_hidden[j * (net.inputs + 1) + i] * x[i];
      h[j] = sigmoid(z);
    }
    for (std::size_t k = 0; k < net.outputs; ++k) {
      double z = net.w_output[k * (net.hidden + 1) + net.hidden];
      for (std::size_t j = 0; j < net.hidden; ++j) z += net.w_output[k * (net.hidden + 1) + j] * h[j];
      const double target = static_cast<int>(k) == ds.label(r) ? 1.0 : 0.0;
      loss += (sigmoid(z) - target) * (sigmoid(z) - target);
    }
  }
  return loss;
}

/// Majority vote by explicit counting; ties to the lowest class.
inline int tally(const std::vector<int>& votes, std::size_t k) {
  std::vector<std::size_t> counts(k, 0);
  for (int v : votes) ++counts[static_cast<std::size_t>(v)];
  int best = 0;
  for (std::size_t c = 1; c < k; ++c) {
    if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  }
  return best;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 gen(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() / ("hetens_" + tag + "_" + std::to_string(gen()));
  std::filesystem::create_directories(dir);
  return dir;
}

/// Removes the directory when the test scope ends.
struct ScopedDir {
  std::filesystem::path path;
  explicit ScopedDir(const std::string& tag) : path(temp_dir(tag)) {}
  ~ScopedDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace oracle
