#include "hetens/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "hetens/error.hpp"
#include "hetens/format.hpp"
#include "hetens/parallel.hpp"

namespace hetens {

std::size_t Composition::total() const noexcept { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

namespace {

// Lexicographic enumeration of nonnegative m-vectors summing to q.
void lattice(std::size_t q, std::size_t m, std::vector<std::size_t>& cur, std::vector<std::vector<std::size_t>>& out) {
  const std::size_t used = std::accumulate(cur.begin(), cur.end(), std::size_t{0});
  if (cur.size() + 1 == m) {
    cur.push_back(q - used);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (std::size_t v = 0; v <= q - used; ++v) {
    cur.push_back(v);
    lattice(q, m, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::vector<std::size_t> apportion(std::span<const double> shares, std::size_t t) {
  std::vector<std::size_t> counts(shares.size());
  std::vector<double> frac(shares.size());
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < shares.size(); ++j) {
    if (!(shares[j] >= 0.0)) throw ComputeError("apportion: negative share");
    const double fl = std::floor(shares[j]);
    counts[j] = static_cast<std::size_t>(fl);
    frac[j] = shares[j] - fl;
    assigned += counts[j];
  }
  if (assigned > t) throw ComputeError("apportion: shares exceed the total");
  std::vector<std::size_t> order(shares.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t r = 0; assigned < t; ++r) {
    ++counts[order[r % order.size()]];
    ++assigned;
  }
  return counts;
}

std::vector<Composition> enumerate_compositions(std::size_t t, std::size_t m, std::size_t stride, StrideMode mode) {
  if (m < 1) throw ConfigError("need at least one ensemble type");
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (stride > t && t > 0) throw ConfigError("stride exceeds t");
  const bool divides = t % stride == 0;
  if (!divides && mode == StrideMode::kExact) {
    throw ConfigError("stride " + std::to_string(stride) + " does not divide t = " + std::to_string(t));
  }
  const std::size_t q = t / stride;
  std::vector<std::vector<std::size_t>> points;
  std::vector<std::size_t> cur;
  lattice(q, m, cur, points);

  std::vector<Composition> out;
  out.reserve(points.size());
  std::vector<double> shares(m);
  for (auto& p : points) {
    if (divides) {
      for (auto& v : p) v *= stride;
      out.push_back(Composition{std::move(p)});
    } else {
      for (std::size_t j = 0; j < m; ++j) {
        shares[j] = static_cast<double>(p[j]) * static_cast<double>(t) / static_cast<double>(q);
      }
      out.push_back(Composition{apportion(shares, t)});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

PooledModels pool(std::span<const HomogeneousEnsemble> ensembles, const Composition& comp) {
  if (comp.counts.size() != ensembles.size()) throw ConfigError("composition length differs from ensemble count");
  for (std::size_t j = 1; j < ensembles.size(); ++j) {
    if (ensembles[j].train_fingerprint != ensembles[0].train_fingerprint) {
      throw DataError("ensembles were trained on different datasets (fingerprint mismatch)");
    }
  }
  PooledModels out;
  for (std::size_t j = 0; j < ensembles.size(); ++j) {
    if (comp.counts[j] > ensembles[j].size()) {
      throw ConfigError("composition asks for " + std::to_string(comp.counts[j]) + " models from ensemble " +
                        std::to_string(j) + " of size " + std::to_string(ensembles[j].size()));
    }
    for (std::size_t i = 0; i < comp.counts[j]; ++i) out.push_back(&ensembles[j].models[i]);
  }
  return out;
}

OobEstimate oob_error(std::span<const BaseModel* const> pooled, const Dataset& train) {
  if (pooled.empty()) throw ComputeError("oob_error: pooled list is empty");
  const std::size_t n = train.size(), k = train.num_classes();
  std::vector<std::vector<std::size_t>> votes(n, std::vector<std::size_t>(k, 0));
  for (const BaseModel* m : pooled) {
    const auto in_bag = m->train_indices.in_bag_mask(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_bag[i]) ++votes[i][static_cast<std::size_t>(m->predict(train.row(i)))];
    }
  }
  std::size_t covered = 0, wrong = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = votes[i];
    if (std::accumulate(v.begin(), v.end(), std::size_t{0}) == 0) continue;
    ++covered;
    const auto best = static_cast<ClassId>(std::max_element(v.begin(), v.end()) - v.begin());
    if (best != train.label(i)) ++wrong;
  }
  OobEstimate e;
  e.covered_fraction = static_cast<double>(covered) / static_cast<double>(n);
  e.error = covered == 0 ? 0.0 : static_cast<double>(wrong) / static_cast<double>(covered);
  return e;
}

OobVoteCache::OobVoteCache(std::span<const HomogeneousEnsemble> ensembles, const Dataset& train, std::size_t threads)
    : n_(train.size()), k_(train.num_classes()), labels_(train.labels()) {
  if (ensembles.empty()) throw ConfigError("OOB cache needs at least one ensemble");
  const std::uint64_t fp = fingerprint(train);
  for (const auto& e : ensembles) {
    if (e.train_fingerprint != fp) throw DataError("ensemble was not trained on this dataset (fingerprint mismatch)");
    sizes_.push_back(e.size());
  }
  prefix_.resize(ensembles.size());
  for (std::size_t j = 0; j < ensembles.size(); ++j) {
    const auto& ens = ensembles[j];
    const Dataset scaled = ens.scaler ? ens.scaler->transform(train) : train;
    // Votes of each model, computed independently, then prefix-summed.
    std::vector<std::vector<ClassId>> predictions(ens.size());
    parallel_for(ens.size(), threads, [&](std::size_t t) {
      const auto& m = ens.models[t];
      const auto in_bag = m.train_indices.in_bag_mask(n_);
      auto& p = predictions[t];
      p.assign(n_, -1);
      for (std::size_t i = 0; i < n_; ++i) {
        if (!in_bag[i]) p[i] = m.predict_scaled(scaled.row(i));
      }
    });
    auto& pre = prefix_[j];
    pre.assign((ens.size() + 1) * n_ * k_, 0);
    for (std::size_t t = 0; t < ens.size(); ++t) {
      const std::size_t base = t * n_ * k_, next = (t + 1) * n_ * k_;
      std::copy(pre.begin() + static_cast<std::ptrdiff_t>(base), pre.begin() + static_cast<std::ptrdiff_t>(next),
                pre.begin() + static_cast<std::ptrdiff_t>(next));
      for (std::size_t i = 0; i < n_; ++i) {
        const ClassId c = predictions[t][i];
        if (c >= 0) ++pre[next + i * k_ + static_cast<std::size_t>(c)];
      }
    }
  }
}

OobEstimate OobVoteCache::evaluate(const Composition& comp) const {
  if (comp.counts.size() != sizes_.size()) throw ConfigError("composition length differs from ensemble count");
  for (std::size_t j = 0; j < sizes_.size(); ++j) {
    if (comp.counts[j] > sizes_[j]) throw ConfigError("composition exceeds ensemble size");
  }
  if (comp.total() == 0) throw ComputeError("oob_error: pooled list is empty");
  std::size_t covered = 0, wrong = 0;
  std::vector<std::uint32_t> tally(k_);
  for (std::size_t i = 0; i < n_; ++i) {
    std::fill(tally.begin(), tally.end(), 0);
    for (std::size_t j = 0; j < sizes_.size(); ++j) {
      const std::uint32_t* row = prefix_[j].data() + (comp.counts[j] * n_ + i) * k_;
      for (std::size_t c = 0; c < k_; ++c) tally[c] += row[c];
    }
    std::size_t best = 0;
    std::uint32_t total = tally[0];
    for (std::size_t c = 1; c < k_; ++c) {
      total += tally[c];
      if (tally[c] > tally[best]) best = c;
    }
    if (total == 0) continue;
    ++covered;
    if (static_cast<ClassId>(best) != labels_[i]) ++wrong;
  }
  OobEstimate e;
  e.covered_fraction = static_cast<double>(covered) / static_cast<double>(n_);
  e.error = covered == 0 ? 0.0 : static_cast<double>(wrong) / static_cast<double>(covered);
  return e;
}

Composition select_optimum(std::span<const ScanEntry> entries, std::size_t t) {
  if (entries.empty()) throw ComputeError("select_optimum: no scan entries");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : entries) best = std::min(best, e.oob_error);
  std::vector<const Composition*> minima;
  for (const auto& e : entries) {
    if (e.oob_error == best) minima.push_back(&e.composition);
  }
  if (minima.size() == 1) return *minima.front();
  const std::size_t m = minima.front()->counts.size();
  std::vector<double> mean(m, 0.0);
  for (const auto* c : minima) {
    for (std::size_t j = 0; j < m; ++j) mean[j] += static_cast<double>(c->counts[j]);
  }
  for (auto& v : mean) v /= static_cast<double>(minima.size());
  return Composition{apportion(mean, t)};
}

SimplexScan scan_simplex(std::span<const HomogeneousEnsemble> ensembles, std::size_t t, std::size_t stride,
                         const Dataset& train, StrideMode mode, std::size_t threads) {
  if (ensembles.empty()) throw ConfigError("scan_simplex: no ensembles");
  SimplexScan scan;
  scan.total = t;
  scan.stride = stride;
  scan.mode = mode;
  for (const auto& e : ensembles) scan.kinds.push_back(e.kind);
  const auto comps = enumerate_compositions(t, ensembles.size(), stride, mode);
  const OobVoteCache cache(ensembles, train, threads);
  scan.entries.resize(comps.size());
  parallel_for(comps.size(), threads, [&](std::size_t i) {
    const OobEstimate est = cache.evaluate(comps[i]);
    scan.entries[i] = ScanEntry{comps[i], est.error, est.covered_fraction};
  });
  scan.min_error = std::numeric_limits<double>::infinity();
  for (const auto& e : scan.entries) scan.min_error = std::min(scan.min_error, e.oob_error);
  for (const auto& e : scan.entries) {
    if (e.oob_error == scan.min_error) scan.minima.push_back(e.composition);
  }
  scan.optimum = select_optimum(scan.entries, t);
  return scan;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

void write_scan_csv(const SimplexScan& scan, const std::filesystem::path& path) {
  auto out = open_out(path);
  for (std::size_t j = 0; j < scan.kinds.size(); ++j) out << "t_" << to_string(scan.kinds[j]) << ',';
  out << "oob_error,covered_fraction,is_minimum,is_optimum\n";
  for (const auto& e : scan.entries) {
    for (std::size_t c : e.composition.counts) out << c << ',';
    const bool is_min = e.oob_error == scan.min_error;
    const bool is_opt = e.composition == scan.optimum;
    out << format_real(e.oob_error) << ',' << format_real(e.covered_fraction) << ',' << (is_min ? 1 : 0) << ','
        << (is_opt ? 1 : 0) << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void export_heatmap(const SimplexScan& scan, const std::filesystem::path& path) {
  if (scan.kinds.size() != 3) throw ConfigError("heatmap export requires 3 ensemble types");
  std::size_t pos[3] = {3, 3, 3};  // svm, mlp, tree
  for (std::size_t j = 0; j < 3; ++j) {
    const std::size_t slot = scan.kinds[j] == LearnerKind::kSvm ? 0 : scan.kinds[j] == LearnerKind::kMlp ? 1 : 2;
    if (pos[slot] != 3) throw ConfigError("heatmap export requires one SVM, one MLP and one tree ensemble");
    pos[slot] = j;
  }
  auto out = open_out(path);
  out << "t_svm,t_mlp,t_tree,x,y,oob_error,covered_fraction,row_type\n";
  auto row = [&](const Composition& c, const std::string& err, const std::string& cov, const char* type) {
    const auto svm = static_cast<long long>(c.counts[pos[0]]);
    const auto mlp = static_cast<long long>(c.counts[pos[1]]);
    const auto tree = static_cast<long long>(c.counts[pos[2]]);
    out << svm << ',' << mlp << ',' << tree << ',' << mlp << ',' << (svm - tree) << ',' << err << ',' << cov << ','
        << type << '\n';
  };
  for (const auto& e : scan.entries) row(e.composition, format_real(e.oob_error), format_real(e.covered_fraction), "entry");
  for (const auto& c : scan.minima) row(c, format_real(scan.min_error), "", "minimum");
  // The optimum may be an averaged point that is not on the grid.
  std::string opt_err, opt_cov;
  for (const auto& e : scan.entries) {
    if (e.composition == scan.optimum) {
      opt_err = format_real(e.oob_error);
      opt_cov = format_real(e.covered_fraction);
    }
  }
  row(scan.optimum, opt_err, opt_cov, "optimum");
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace hetens
