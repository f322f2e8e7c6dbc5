#include "hetens/homogeneous.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

#include "hetens/error.hpp"
#include "hetens/parallel.hpp"
#include "hetens/serialize.hpp"

namespace hetens {

namespace {

// Seed streams. Each stochastic step draws from its own stream so adding or
// reordering work never shifts another step's randomness.
enum Stream : std::uint64_t {
  kOptimizeStream = 1,
  kSampleStream = 2,
  kInitStream = 3,
  kFoldStream = 4,
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<double> powers_of_two(int lo, int hi) {
  std::vector<double> v;
  for (int e = lo; e <= hi; ++e) v.push_back(std::ldexp(1.0, e));
  return v;
}

double zero_one_error(const BaseModel& m, const Dataset& ds, std::span<const std::size_t> rows) {
  std::size_t wrong = 0;
  for (std::size_t i : rows) {
    if (m.predict_scaled(ds.row(i)) != ds.label(i)) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(rows.size());
}

std::size_t argmin_finite(const std::vector<double>& v) {
  std::size_t best = v.size();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::isnan(v[i])) continue;
    if (best == v.size() || v[i] < v[best]) best = i;
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// ParamGrid

ParamGrid::ParamGrid(std::vector<ParamAxis> axes) : axes_(std::move(axes)) {
  for (const auto& a : axes_) {
    if (a.values.empty()) throw ConfigError("parameter axis '" + a.name + "' has no values");
    for (double v : a.values) {
      if (!std::isfinite(v)) throw ConfigError("parameter axis '" + a.name + "' has a non-finite value");
    }
  }
}

ParamGrid ParamGrid::svm_default() {
  return ParamGrid({{"c", powers_of_two(-5, 15)}, {"gamma", powers_of_two(-15, 3)}});
}

ParamGrid ParamGrid::mlp_default() { return ParamGrid({{"hidden", {3, 4, 5, 6, 7, 8, 9, 10}}}); }

ParamGrid ParamGrid::for_kind(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kSvm:
      return svm_default();
    case LearnerKind::kMlp:
      return mlp_default();
    case LearnerKind::kTree:
      break;
  }
  return ParamGrid();
}

std::size_t ParamGrid::size() const noexcept {
  if (axes_.empty()) return 0;
  std::size_t n = 1;
  for (const auto& a : axes_) n *= a.values.size();
  return n;
}

std::vector<double> ParamGrid::node(std::size_t index) const {
  if (index >= size()) throw ConfigError("grid node index out of range");
  std::vector<double> v(axes_.size());
  for (std::size_t a = axes_.size(); a-- > 0;) {
    const std::size_t len = axes_[a].values.size();
    v[a] = axes_[a].values[index % len];
    index /= len;
  }
  return v;
}

HyperParams ParamGrid::hyper(LearnerKind kind, std::size_t index) const {
  const auto values = node(index);
  HyperParams h;
  bool has_c = false, has_gamma = false, has_hidden = false;
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    const auto name = lower(axes_[a].name);
    const double v = values[a];
    if (name == "c") {
      h.svm_c = v;
      has_c = true;
    } else if (name == "gamma") {
      h.svm_gamma = v;
      has_gamma = true;
    } else if (name == "hidden") {
      if (v < 1 || v != std::floor(v)) throw ConfigError("grid axis 'hidden' needs positive integers");
      h.mlp_hidden = static_cast<std::size_t>(v);
      has_hidden = true;
    } else if (name == "mtry") {
      if (v < 1 || v != std::floor(v)) throw ConfigError("grid axis 'mtry' needs positive integers");
      h.tree_mtry = static_cast<std::size_t>(v);
    } else {
      throw ConfigError("unknown grid axis '" + axes_[a].name + "'");
    }
  }
  if (kind == LearnerKind::kSvm && !(has_c && has_gamma)) throw ConfigError("SVM grid needs axes 'c' and 'gamma'");
  if (kind == LearnerKind::kMlp && !has_hidden) throw ConfigError("MLP grid needs axis 'hidden'");
  return h;
}

// ---------------------------------------------------------------------------

BaseModel train_model(LearnerKind kind, const Dataset& ds, const IndexSample& sample, const HyperParams& hp,
                      Seed seed, const EnsembleOptions& options) {
  switch (kind) {
    case LearnerKind::kTree:
      return train_tree(ds, sample, hp.tree_mtry, seed);
    case LearnerKind::kMlp:
      return train_mlp(ds, sample, hp.mlp_hidden, seed, options.mlp);
    case LearnerKind::kSvm:
      return train_svm(ds, sample, hp.svm_c, hp.svm_gamma, options.svm);
  }
  throw ConfigError("unknown learner kind");
}

GridSelection partial_optimize(LearnerKind kind, const Dataset& ds, const ParamGrid& grid, Seed seed,
                               const EnsembleOptions& options) {
  if (grid.size() == 0) throw ConfigError("partial_optimize: empty parameter grid");
  if (ds.size() < 4) throw DataError("partial_optimize: need at least 4 instances");
  const IndexSample sample = subbag(ds.size(), options.subbag_rate, derive_seed(seed, 0));
  const auto held_out = sample.out_of_bag(ds.size());
  if (held_out.empty()) throw ConfigError("partial_optimize: subbag rate leaves no validation rows");

  GridSelection sel;
  sel.node_errors.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<std::exception_ptr> failures(grid.size());
  parallel_for(grid.size(), options.threads, [&](std::size_t node) {
    try {
      const BaseModel m = train_model(kind, ds, sample, grid.hyper(kind, node), derive_seed(seed, 1, node), options);
      sel.node_errors[node] = zero_one_error(m, ds, held_out);
    } catch (const ConfigError&) {
      throw;
    } catch (...) {
      failures[node] = std::current_exception();
    }
  });
  sel.node = argmin_finite(sel.node_errors);
  if (sel.node == grid.size()) {
    for (const auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
  }
  sel.error = sel.node_errors[sel.node];
  sel.params = grid.hyper(kind, sel.node);
  return sel;
}

std::vector<std::size_t> batch_sizes(std::size_t t, std::size_t b) {
  if (b < 1 || b > t) throw ConfigError("batch count must lie in [1, t]");
  std::vector<std::size_t> sizes(b, t / b);
  for (std::size_t i = 0; i < t % b; ++i) ++sizes[i];
  return sizes;
}

std::size_t HomogeneousEnsemble::batch_of(std::size_t j) const {
  std::size_t end = 0;
  for (std::size_t b = 0; b < batch_sizes.size(); ++b) {
    end += batch_sizes[b];
    if (j < end) return b;
  }
  throw ConfigError("model index beyond the last batch");
}

ClassId HomogeneousEnsemble::predict(std::span<const double> x) const { return ensemble_predict(*this, x); }

HomogeneousEnsemble build_batched_ensemble(LearnerKind kind, const Dataset& ds, std::size_t t, std::size_t b,
                                           const ParamGrid& grid, Seed master_seed, const EnsembleOptions& options) {
  if (kind == LearnerKind::kTree) throw ConfigError("batched ensembles are built from SVMs or MLPs");
  if (t < 1) throw ConfigError("ensemble size must be >= 1");
  HomogeneousEnsemble ens;
  ens.kind = kind;
  ens.batch_sizes = hetens::batch_sizes(t, b);
  ens.grid = grid;
  ens.train_fingerprint = fingerprint(ds);
  ens.train_size = ds.size();
  ens.class_names = ds.class_names();
  ens.master_seed = master_seed;
  ens.subbag_rate = options.subbag_rate;

  auto scaler = std::make_shared<Standardizer>(Standardizer::fit(ds));
  for (std::size_t f : scaler->degenerate) {
    ens.warnings.push_back("feature '" + ds.feature_names()[f] + "' has zero variance; left unscaled");
  }
  ens.scaler = scaler;
  const Dataset z = scaler->transform(ds);

  EnsembleOptions inner = options;
  inner.threads = 1;
  std::vector<GridSelection> selections(b);
  parallel_for(b, options.threads, [&](std::size_t i) {
    selections[i] = partial_optimize(kind, z, grid, derive_seed(master_seed, kOptimizeStream, i), inner);
  });
  for (const auto& s : selections) ens.batch_params.push_back(s.params);

  ens.models.resize(t);
  parallel_for(t, options.threads, [&](std::size_t j) {
    const IndexSample sample = subbag(z.size(), options.subbag_rate, derive_seed(master_seed, kSampleStream, j));
    ens.models[j] = train_model(kind, z, sample, ens.batch_params[ens.batch_of(j)],
                                derive_seed(master_seed, kInitStream, j), inner);
    ens.models[j].scaler = ens.scaler;
  });
  return ens;
}

HomogeneousEnsemble build_random_forest(const Dataset& ds, std::size_t t, Seed master_seed,
                                        const EnsembleOptions& options) {
  if (t < 1) throw ConfigError("ensemble size must be >= 1");
  HomogeneousEnsemble ens;
  ens.kind = LearnerKind::kTree;
  ens.batch_sizes = {t};
  ens.train_fingerprint = fingerprint(ds);
  ens.train_size = ds.size();
  ens.class_names = ds.class_names();
  ens.master_seed = master_seed;
  ens.subbag_rate = 1.0;
  ens.models.resize(t);
  const std::size_t mtry = default_mtry(ds.dims());
  parallel_for(t, options.threads, [&](std::size_t j) {
    const IndexSample sample = bootstrap(ds.size(), derive_seed(master_seed, kSampleStream, j));
    ens.models[j] = train_tree(ds, sample, mtry, derive_seed(master_seed, kInitStream, j));
  });
  return ens;
}

CvSelection grid_search_cv(LearnerKind kind, const Dataset& ds, const ParamGrid& grid, std::size_t folds, Seed seed,
                           const EnsembleOptions& options) {
  if (grid.size() == 0) throw ConfigError("grid_search_cv: empty parameter grid");
  if (folds < 2 || folds > ds.size()) throw ConfigError("grid_search_cv: folds must lie in [2, n]");

  std::shared_ptr<const Standardizer> scaler;
  if (kind != LearnerKind::kTree) scaler = std::make_shared<Standardizer>(Standardizer::fit(ds));
  const Dataset z = scaler ? scaler->transform(ds) : ds;

  // Stratified fold assignment: shuffle each class, deal rows round-robin.
  std::vector<std::size_t> fold_of(ds.size());
  {
    Rng rng(derive_seed(seed, kFoldStream));
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes());
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.label(i))].push_back(i);
    std::size_t next = 0;
    for (auto& members : by_class) {
      for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.uniform_index(i)]);
      for (std::size_t i : members) fold_of[i] = next++ % folds;
    }
  }
  std::vector<IndexSample> train_parts(folds);
  std::vector<std::vector<std::size_t>> test_parts(folds);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t f = 0; f < folds; ++f) {
      if (fold_of[i] == f) test_parts[f].push_back(i);
      else train_parts[f].indices.push_back(i);
    }
  }

  CvSelection out;
  auto& sel = out.selection;
  sel.node_errors.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  EnsembleOptions inner = options;
  inner.threads = 1;
  parallel_for(grid.size(), options.threads, [&](std::size_t node) {
    const HyperParams hp = grid.hyper(kind, node);
    std::size_t wrong = 0;
    try {
      for (std::size_t f = 0; f < folds; ++f) {
        const BaseModel m = train_model(kind, z, train_parts[f], hp, derive_seed(seed, 1, node), inner);
        for (std::size_t i : test_parts[f]) {
          if (m.predict_scaled(z.row(i)) != z.label(i)) ++wrong;
        }
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const Error&) {
      return;
    }
    sel.node_errors[node] = static_cast<double>(wrong) / static_cast<double>(ds.size());
  });
  sel.node = argmin_finite(sel.node_errors);
  if (sel.node == grid.size()) throw ComputeError("grid_search_cv: no grid node could be trained");
  sel.error = sel.node_errors[sel.node];
  sel.params = grid.hyper(kind, sel.node);

  IndexSample all;
  all.indices.resize(ds.size());
  std::iota(all.indices.begin(), all.indices.end(), 0);
  out.model = train_model(kind, z, all, sel.params, derive_seed(seed, kInitStream), inner);
  out.model.scaler = scaler;
  return out;
}

// ---------------------------------------------------------------------------

ClassId majority_vote(std::span<const ClassId> votes, std::size_t num_classes) {
  std::vector<std::size_t> tally(num_classes, 0);
  for (ClassId v : votes) ++tally[static_cast<std::size_t>(v)];
  std::size_t best = 0;
  for (std::size_t k = 1; k < num_classes; ++k) {
    if (tally[k] > tally[best]) best = k;
  }
  return static_cast<ClassId>(best);
}

ClassId ensemble_predict(std::span<const BaseModel* const> models, std::span<const double> x) {
  if (models.empty()) throw ComputeError("ensemble_predict: no models");
  std::size_t k = 0;
  for (const auto* m : models) k = std::max(k, m->num_classes);
  std::vector<std::size_t> tally(k, 0);
  for (const auto* m : models) ++tally[static_cast<std::size_t>(m->predict(x))];
  std::size_t best = 0;
  for (std::size_t c = 1; c < k; ++c) {
    if (tally[c] > tally[best]) best = c;
  }
  return static_cast<ClassId>(best);
}

ClassId ensemble_predict(const HomogeneousEnsemble& ens, std::span<const double> x) {
  if (ens.models.empty()) throw ComputeError("ensemble_predict: no models");
  const std::size_t d = ens.models.front().dims;
  if (x.size() != d) {
    throw DataError("predict: expected " + std::to_string(d) + " features, got " + std::to_string(x.size()));
  }
  std::vector<double> z(x.begin(), x.end());
  if (ens.scaler) ens.scaler->apply(x, z);
  std::vector<std::size_t> tally(ens.models.front().num_classes, 0);
  for (const auto& m : ens.models) ++tally[static_cast<std::size_t>(m.predict_scaled(z))];
  std::size_t best = 0;
  for (std::size_t c = 1; c < tally.size(); ++c) {
    if (tally[c] > tally[best]) best = c;
  }
  return static_cast<ClassId>(best);
}

// ---------------------------------------------------------------------------
// Container

namespace {
constexpr char kMagic[8] = {'H', 'E', 'T', 'E', 'N', 'S', 'E', '\0'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::vector<std::uint8_t> serialize_ensemble(const HomogeneousEnsemble& ens) {
  ByteWriter w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kVersion);
  w.u8(static_cast<std::uint8_t>(ens.kind));
  w.u64(ens.train_fingerprint);
  w.u64(ens.train_size);
  w.u64(ens.class_names.size());
  for (const auto& c : ens.class_names) w.str(c);
  w.u64(ens.master_seed);
  w.f64(ens.subbag_rate);
  w.u64(ens.grid.axes().size());
  for (const auto& a : ens.grid.axes()) {
    w.str(a.name);
    w.f64s(a.values);
  }
  w.u64(ens.batch_params.size());
  for (const auto& h : ens.batch_params) write_hyper(w, h);
  w.sizes(ens.batch_sizes);
  w.u8(ens.scaler ? 1 : 0);
  if (ens.scaler) write_standardizer(w, *ens.scaler);
  w.u64(ens.warnings.size());
  for (const auto& s : ens.warnings) w.str(s);
  w.u64(ens.models.size());
  for (const auto& m : ens.models) write_model(w, m);
  return std::move(w).take();
}

HomogeneousEnsemble deserialize_ensemble(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  for (char c : kMagic) {
    if (r.remaining() == 0 || r.u8() != static_cast<std::uint8_t>(c)) throw DataError("not an ensemble container");
  }
  const auto version = r.u32();
  if (version != kVersion) throw DataError("unsupported container version " + std::to_string(version));
  HomogeneousEnsemble ens;
  const auto kind = r.u8();
  if (kind > static_cast<std::uint8_t>(LearnerKind::kSvm)) throw DataError("corrupt container: unknown kind");
  ens.kind = static_cast<LearnerKind>(kind);
  ens.train_fingerprint = r.u64();
  ens.train_size = r.u64();
  ens.class_names.resize(r.length(8));
  for (auto& c : ens.class_names) c = r.str();
  ens.master_seed = r.u64();
  ens.subbag_rate = r.f64();
  std::vector<ParamAxis> axes(r.length(16));
  for (auto& a : axes) {
    a.name = r.str();
    a.values = r.f64s();
  }
  ens.grid = ParamGrid(std::move(axes));
  ens.batch_params.resize(r.length(32));
  for (auto& h : ens.batch_params) h = read_hyper(r);
  ens.batch_sizes = r.sizes();
  if (r.u8() != 0) ens.scaler = std::make_shared<Standardizer>(read_standardizer(r));
  ens.warnings.resize(r.length(8));
  for (auto& s : ens.warnings) s = r.str();
  ens.models.resize(r.length(8));
  for (auto& m : ens.models) {
    m = read_model(r);
    if (m.kind != ens.kind) throw DataError("corrupt container: model kind differs from ensemble kind");
    if (ens.scaler && ens.scaler->mean.size() != m.dims) throw DataError("corrupt container: scaler dims");
    m.scaler = ens.scaler;
  }
  if (!r.done()) throw DataError("corrupt container: trailing bytes");
  if (std::accumulate(ens.batch_sizes.begin(), ens.batch_sizes.end(), std::size_t{0}) != ens.models.size()) {
    throw DataError("corrupt container: batch sizes do not sum to the model count");
  }
  return ens;
}

void save_ensemble(const HomogeneousEnsemble& ens, const std::filesystem::path& path) {
  const auto bytes = serialize_ensemble(ens);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

HomogeneousEnsemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_ensemble(bytes);
}

}  // namespace hetens
