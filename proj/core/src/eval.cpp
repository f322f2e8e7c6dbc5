#include "hetens/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>

#include "hetens/error.hpp"
#include "hetens/format.hpp"
#include "hetens/parallel.hpp"

namespace hetens {

std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::kSvm:
      return "SVM";
    case Method::kMlp:
      return "MLP";
    case Method::kEsvm:
      return "E-SVM";
    case Method::kEmlp:
      return "E-MLP";
    case Method::kRf:
      return "RF";
    case Method::kSim:
      return "SIM";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  std::string u(name);
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  for (Method m : {Method::kSvm, Method::kMlp, Method::kEsvm, Method::kEmlp, Method::kRf, Method::kSim}) {
    if (u == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

namespace {
constexpr std::string_view kSyntheticPrefix = "synthetic:";
}

bool DatasetSpec::synthetic() const { return uri.rfind(kSyntheticPrefix, 0) == 0; }

std::string DatasetSpec::name() const {
  if (synthetic()) return uri.substr(kSyntheticPrefix.size());
  return std::filesystem::path(uri).stem().string();
}

void ExperimentConfig::validate() const {
  if (datasets.empty()) throw ConfigError("no datasets configured");
  if (methods.empty()) throw ConfigError("no methods configured");
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (t < 1) throw ConfigError("t must be >= 1");
  if (b < 1 || b > t) throw ConfigError("b must lie in [1, t]");
  if (stride < 1 || stride > t) throw ConfigError("stride must lie in [1, t]");
  if (stride_mode == StrideMode::kExact && t % stride != 0) {
    throw ConfigError("stride " + std::to_string(stride) + " does not divide t = " + std::to_string(t));
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (!(ensemble.subbag_rate > 0.0 && ensemble.subbag_rate < 1.0)) {
    throw ConfigError("subbag_rate must lie in (0, 1) so every model has out-of-bag rows");
  }
  if (train_n < 4 || test_n < 1) throw ConfigError("synthetic sizes need train_n >= 4 and test_n >= 1");
  if (cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
  if (ensemble.mlp.epochs < 1 || !(ensemble.mlp.learning_rate > 0.0)) {
    throw ConfigError("MLP epochs and learning rate must be positive");
  }
  for (std::size_t i = 0; i < methods.size(); ++i) {
    for (std::size_t j = i + 1; j < methods.size(); ++j) {
      if (methods[i] == methods[j]) throw ConfigError("method '" + std::string(to_string(methods[i])) + "' repeated");
    }
  }
  for (const auto& d : datasets) {
    if (d.synthetic() && !synthetic_generator(d.name())) {
      throw ConfigError("unknown synthetic dataset '" + d.uri + "'");
    }
  }
  auto uses = [&](Method m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
  const bool sim = uses(Method::kSim);
  // Probe the grids so a bad axis fails before any training.
  if (sim || uses(Method::kEsvm) || uses(Method::kSvm)) {
    if (svm_grid.size() == 0) throw ConfigError("SVM grid is empty");
    svm_grid.hyper(LearnerKind::kSvm, 0);
  }
  if (sim || uses(Method::kEmlp) || uses(Method::kMlp)) {
    if (mlp_grid.size() == 0) throw ConfigError("MLP grid is empty");
    mlp_grid.hyper(LearnerKind::kMlp, 0);
  }
}

std::vector<Dataset> load_datasets(const ExperimentConfig& cfg) {
  std::vector<Dataset> out;
  for (const auto& d : cfg.datasets) {
    if (d.synthetic()) {
      out.push_back(gen_twonorm(2, 0));  // placeholder, regenerated per cell
    } else {
      try {
        out.push_back(load_csv(d.uri, d.csv));
      } catch (const DataError& e) {
        throw DataError(d.uri + ": " + e.what());
      }
    }
  }
  return out;
}

std::filesystem::path cell_artifact_dir(const ExperimentConfig& cfg, std::size_t dataset, std::size_t repetition) {
  return cfg.artifact_dir / (cfg.datasets.at(dataset).name() + "_r" + std::to_string(repetition));
}

namespace {

enum CellStream : std::uint64_t {
  kTrainData = 10,
  kTestData = 11,
  kSplit = 12,
  kEsvmSeed = 20,
  kEmlpSeed = 21,
  kRfSeed = 22,
  kSvmSeed = 23,
  kMlpSeed = 24,
};

/// predictions[model][row] of every member of an ensemble on a test set.
std::vector<std::vector<ClassId>> member_predictions(const HomogeneousEnsemble& ens, const Dataset& test) {
  const Dataset scaled = ens.scaler ? ens.scaler->transform(test) : test;
  std::vector<std::vector<ClassId>> out(ens.size(), std::vector<ClassId>(test.size()));
  for (std::size_t m = 0; m < ens.size(); ++m) {
    for (std::size_t i = 0; i < test.size(); ++i) out[m][i] = ens.models[m].predict_scaled(scaled.row(i));
  }
  return out;
}

/// Test error of the pool taking the first counts[j] members of set j.
double pooled_error(std::span<const std::vector<std::vector<ClassId>>* const> sets,
                    std::span<const std::size_t> counts, const Dataset& test) {
  const std::size_t k = test.num_classes();
  std::size_t wrong = 0;
  std::vector<std::size_t> tally(k);
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::fill(tally.begin(), tally.end(), 0);
    for (std::size_t j = 0; j < sets.size(); ++j) {
      for (std::size_t m = 0; m < counts[j]; ++m) ++tally[static_cast<std::size_t>((*sets[j])[m][i])];
    }
    const auto best = static_cast<ClassId>(std::max_element(tally.begin(), tally.end()) - tally.begin());
    if (best != test.label(i)) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(test.size());
}

double model_error(const BaseModel& m, const Dataset& test) {
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (m.predict(test.row(i)) != test.label(i)) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(test.size());
}

}  // namespace

CellData cell_data(const ExperimentConfig& cfg, std::size_t dataset, std::size_t repetition,
                   const std::vector<Dataset>& loaded) {
  const Seed seed = derive_seed(cfg.master_seed, dataset, repetition);
  const auto& spec = cfg.datasets.at(dataset);
  if (spec.synthetic()) {
    const auto gen = synthetic_generator(spec.name());
    return {gen(cfg.train_n, derive_seed(seed, kTrainData)), gen(cfg.test_n, derive_seed(seed, kTestData))};
  }
  auto split = stratified_split(loaded.at(dataset), SplitSpec{cfg.train_fraction, true, derive_seed(seed, kSplit)});
  return {std::move(split.train), std::move(split.test)};
}

std::vector<HomogeneousEnsemble> cell_ensembles(const ExperimentConfig& cfg, std::size_t dataset,
                                                std::size_t repetition, const Dataset& train) {
  const Seed seed = derive_seed(cfg.master_seed, dataset, repetition);
  std::vector<HomogeneousEnsemble> out;
  out.push_back(build_batched_ensemble(LearnerKind::kSvm, train, cfg.t, cfg.b, cfg.svm_grid,
                                       derive_seed(seed, kEsvmSeed), cfg.ensemble));
  out.push_back(build_batched_ensemble(LearnerKind::kMlp, train, cfg.t, cfg.b, cfg.mlp_grid,
                                       derive_seed(seed, kEmlpSeed), cfg.ensemble));
  out.push_back(build_random_forest(train, cfg.t, derive_seed(seed, kRfSeed), cfg.ensemble));
  return out;
}

CellResult run_cell(const ExperimentConfig& cfg, std::size_t dataset, std::size_t repetition,
                    const std::vector<Dataset>& loaded) {
  CellResult cell;
  cell.dataset = dataset;
  cell.repetition = repetition;
  const Seed seed = derive_seed(cfg.master_seed, dataset, repetition);
  try {
    std::optional<Dataset> train, test;
    {
      auto data = cell_data(cfg, dataset, repetition, loaded);
      train.emplace(std::move(data.train));
      test.emplace(std::move(data.test));
    }

    auto uses = [&](Method m) { return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end(); };
    const bool sim = uses(Method::kSim);
    EnsembleOptions opts = cfg.ensemble;
    opts.threads = 1;

    std::optional<HomogeneousEnsemble> esvm, emlp, rf;
    if (sim || uses(Method::kEsvm)) {
      esvm = build_batched_ensemble(LearnerKind::kSvm, *train, cfg.t, cfg.b, cfg.svm_grid, derive_seed(seed, kEsvmSeed), opts);
    }
    if (sim || uses(Method::kEmlp)) {
      emlp = build_batched_ensemble(LearnerKind::kMlp, *train, cfg.t, cfg.b, cfg.mlp_grid, derive_seed(seed, kEmlpSeed), opts);
    }
    if (sim || uses(Method::kRf)) rf = build_random_forest(*train, cfg.t, derive_seed(seed, kRfSeed), opts);

    if (!cfg.artifact_dir.empty()) {
      const auto dir = cell_artifact_dir(cfg, dataset, repetition);
      std::filesystem::create_directories(dir);
      write_csv(*train, dir / "train.csv");
      write_csv(*test, dir / "test.csv");
      if (esvm) save_ensemble(*esvm, dir / "svm.hse");
      if (emlp) save_ensemble(*emlp, dir / "mlp.hse");
      if (rf) save_ensemble(*rf, dir / "tree.hse");
    }

    std::vector<std::vector<ClassId>> p_svm, p_mlp, p_rf;
    if (esvm) p_svm = member_predictions(*esvm, *test);
    if (emlp) p_mlp = member_predictions(*emlp, *test);
    if (rf) p_rf = member_predictions(*rf, *test);
    auto vertex_error = [&](const std::vector<std::vector<ClassId>>& p) {
      const std::vector<std::vector<ClassId>>* sets[] = {&p};
      const std::size_t counts[] = {p.size()};
      return pooled_error(sets, counts, *test);
    };

    for (Method m : cfg.methods) {
      switch (m) {
        case Method::kSvm:
          cell.errors.push_back(model_error(
              grid_search_cv(LearnerKind::kSvm, *train, cfg.svm_grid, cfg.cv_folds, derive_seed(seed, kSvmSeed), opts).model,
              *test));
          break;
        case Method::kMlp:
          cell.errors.push_back(model_error(
              grid_search_cv(LearnerKind::kMlp, *train, cfg.mlp_grid, cfg.cv_folds, derive_seed(seed, kMlpSeed), opts).model,
              *test));
          break;
        case Method::kEsvm:
          cell.errors.push_back(vertex_error(p_svm));
          break;
        case Method::kEmlp:
          cell.errors.push_back(vertex_error(p_mlp));
          break;
        case Method::kRf:
          cell.errors.push_back(vertex_error(p_rf));
          break;
        case Method::kSim: {
          std::vector<HomogeneousEnsemble> pools;
          pools.push_back(std::move(*esvm));
          pools.push_back(std::move(*emlp));
          pools.push_back(std::move(*rf));
          const SimplexScan scan = scan_simplex(pools, cfg.t, cfg.stride, *train, cfg.stride_mode, 1);
          SimOutcome out;
          out.composition = scan.optimum;
          const auto on_grid = std::find_if(scan.entries.begin(), scan.entries.end(),
                                            [&](const ScanEntry& e) { return e.composition == scan.optimum; });
          if (on_grid != scan.entries.end()) {
            out.oob_error = on_grid->oob_error;
            out.covered_fraction = on_grid->covered_fraction;
          } else {
            // Averaged optimum off the grid: evaluate it directly.
            const auto est = OobVoteCache(pools, *train).evaluate(scan.optimum);
            out.oob_error = est.error;
            out.covered_fraction = est.covered_fraction;
          }
          for (std::size_t c : scan.optimum.counts) {
            out.percentages.push_back(static_cast<double>(c) / static_cast<double>(cfg.t));
          }
          out.entropy = composition_entropy(out.percentages);
          const std::vector<std::vector<ClassId>>* sets[] = {&p_svm, &p_mlp, &p_rf};
          cell.errors.push_back(pooled_error(sets, scan.optimum.counts, *test));
          cell.sim = std::move(out);
          break;
        }
      }
    }
  } catch (const std::exception& e) {
    cell.errors.clear();
    cell.sim.reset();
    cell.failure = e.what();
    if (cell.failure.empty()) cell.failure = "unknown failure";
  }
  return cell;
}

ResultsTable run_experiment(const ExperimentConfig& cfg, const ExperimentHooks& hooks) {
  cfg.validate();
  const auto loaded = load_datasets(cfg);
  ResultsTable table;
  for (const auto& d : cfg.datasets) table.datasets.push_back(d.name());
  table.methods = cfg.methods;
  const std::size_t total = cfg.datasets.size() * cfg.repetitions;
  table.cells.resize(total);
  std::mutex mu;
  std::size_t done = 0;
  parallel_for(total, cfg.threads, [&](std::size_t idx) {
    const std::size_t ds = idx / cfg.repetitions, rep = idx % cfg.repetitions;
    std::optional<CellResult> prior;
    if (hooks.lookup) prior = hooks.lookup(ds, rep);
    const bool fresh = !prior;
    CellResult cell = prior ? std::move(*prior) : run_cell(cfg, ds, rep, loaded);
    cell.dataset = ds;
    cell.repetition = rep;
    if (cell.ok() && cell.errors.size() != cfg.methods.size()) {
      throw ComputeError("stored cell " + std::to_string(ds) + "/" + std::to_string(rep) + " does not match the config");
    }
    table.cells[idx] = std::move(cell);
    std::lock_guard lock(mu);
    ++done;
    if (hooks.on_cell && fresh) hooks.on_cell(table.cells[idx], done, total);
  });
  summarize(table);
  return table;
}

void summarize(ResultsTable& table) {
  const std::size_t nd = table.datasets.size(), nm = table.methods.size();
  table.summary.assign(nd, std::vector<MethodSummary>(nm));
  table.sim_percentages.assign(nd, {});
  table.sim_entropy.assign(nd, 0.0);
  std::vector<std::size_t> sim_runs(nd, 0);
  for (const auto& cell : table.cells) {
    for (std::size_t m = 0; m < nm; ++m) {
      auto& s = table.summary[cell.dataset][m];
      if (cell.ok()) s.runs.push_back(cell.errors[m]);
      else ++s.missing;
    }
    if (cell.ok() && cell.sim) {
      auto& acc = table.sim_percentages[cell.dataset];
      if (acc.empty()) acc.assign(cell.sim->percentages.size(), 0.0);
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += cell.sim->percentages[j];
      ++sim_runs[cell.dataset];
    }
  }
  for (std::size_t d = 0; d < nd; ++d) {
    for (auto& s : table.summary[d]) {
      if (s.runs.empty()) continue;
      const double n = static_cast<double>(s.runs.size());
      s.mean = std::accumulate(s.runs.begin(), s.runs.end(), 0.0) / n;
      double ss = 0.0;
      for (double v : s.runs) ss += (v - s.mean) * (v - s.mean);
      s.sd = s.runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
    if (sim_runs[d] > 0) {
      for (auto& p : table.sim_percentages[d]) p /= static_cast<double>(sim_runs[d]);
      table.sim_entropy[d] = composition_entropy(table.sim_percentages[d]);
    }
  }
}

const MethodSummary& ResultsTable::at(std::size_t dataset, Method m) const {
  const auto it = std::find(methods.begin(), methods.end(), m);
  if (it == methods.end()) throw ConfigError("method '" + std::string(to_string(m)) + "' not in results");
  return summary.at(dataset)[static_cast<std::size_t>(it - methods.begin())];
}

bool ResultsTable::complete() const {
  return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok(); });
}

double composition_entropy(std::span<const double> fractions) {
  double sum = 0.0, h = 0.0;
  for (double p : fractions) {
    if (p < 0.0) throw ConfigError("composition_entropy: negative proportion");
    sum += p;
    if (p > 0.0) h -= p * std::log2(p);
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("composition_entropy: proportions do not sum to 1");
  return h;
}

std::vector<double> average_ranks(std::span<const std::vector<double>> errors) {
  if (errors.empty()) throw ComputeError("average_ranks: no datasets");
  const std::size_t k = errors.front().size();
  std::vector<double> ranks(k, 0.0);
  for (const auto& row : errors) {
    if (row.size() != k) throw ComputeError("average_ranks: ragged error matrix");
    for (double v : row) {
      if (std::isnan(v)) throw ComputeError("average_ranks: missing cell");
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] < row[b]; });
    for (std::size_t i = 0; i < k;) {
      std::size_t j = i;
      while (j + 1 < k && row[order[j + 1]] == row[order[i]]) ++j;
      const double shared = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
      for (std::size_t r = i; r <= j; ++r) ranks[order[r]] += shared;
      i = j + 1;
    }
  }
  for (auto& r : ranks) r /= static_cast<double>(errors.size());
  return ranks;
}

std::vector<double> average_ranks(const ResultsTable& table, std::span<const Method> methods) {
  std::vector<std::vector<double>> errors;
  for (std::size_t d = 0; d < table.datasets.size(); ++d) {
    std::vector<double> row;
    for (Method m : methods) {
      const auto& s = table.at(d, m);
      if (s.missing > 0 || s.runs.empty()) {
        throw ComputeError("average_ranks: missing cells for " + std::string(to_string(m)) + " on " +
                           table.datasets[d]);
      }
      row.push_back(s.mean);
    }
    errors.push_back(std::move(row));
  }
  return average_ranks(errors);
}

double nemenyi_q(std::size_t k, double alpha) {
  // Studentized range statistic divided by sqrt(2), infinite degrees of
  // freedom, k = 2..10.
  static constexpr double q05[] = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
  static constexpr double q10[] = {1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920};
  if (k < 2 || k > 10) throw ConfigError("nemenyi: k must lie in [2, 10]");
  if (alpha == 0.05) return q05[k - 2];
  if (alpha == 0.10) return q10[k - 2];
  throw ConfigError("nemenyi: alpha must be 0.05 or 0.10");
}

double nemenyi_cd(std::size_t k, std::size_t n, double alpha) {
  if (n < 1) throw ConfigError("nemenyi: need at least one dataset");
  const double kk = static_cast<double>(k);
  return nemenyi_q(k, alpha) * std::sqrt(kk * (kk + 1.0) / (6.0 * static_cast<double>(n)));
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

void write_summary_csv(const ResultsTable& table, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "dataset,method,mean,sd,runs,missing\n";
  for (std::size_t d = 0; d < table.datasets.size(); ++d) {
    for (std::size_t m = 0; m < table.methods.size(); ++m) {
      const auto& s = table.summary[d][m];
      out << table.datasets[d] << ',' << to_string(table.methods[m]) << ',';
      if (s.runs.empty()) out << ",,";
      else out << format_real(s.mean) << ',' << format_real(s.sd) << ',';
      out << s.runs.size() << ',' << s.missing << '\n';
    }
  }
}

void write_runs_csv(const ResultsTable& table, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "dataset,repetition,method,test_error,status\n";
  for (const auto& cell : table.cells) {
    for (std::size_t m = 0; m < table.methods.size(); ++m) {
      out << table.datasets[cell.dataset] << ',' << cell.repetition << ',' << to_string(table.methods[m]) << ',';
      if (cell.ok()) {
        out << format_real(cell.errors[m]) << ",ok\n";
      } else {
        std::string reason = cell.failure;
        std::replace(reason.begin(), reason.end(), ',', ';');
        std::replace(reason.begin(), reason.end(), '\n', ' ');
        out << ",failed: " << reason << '\n';
      }
    }
  }
}

void write_sim_csv(const ResultsTable& table, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "dataset,repetition,t_svm,t_mlp,t_tree,pct_svm,pct_mlp,pct_tree,entropy,oob_error,covered_fraction\n";
  for (const auto& cell : table.cells) {
    if (!cell.ok() || !cell.sim) continue;
    const auto& s = *cell.sim;
    out << table.datasets[cell.dataset] << ',' << cell.repetition;
    for (std::size_t c : s.composition.counts) out << ',' << c;
    for (double p : s.percentages) out << ',' << format_real(100.0 * p);
    out << ',' << format_real(s.entropy) << ',' << format_real(s.oob_error) << ',' << format_real(s.covered_fraction)
        << '\n';
  }
  for (std::size_t d = 0; d < table.datasets.size(); ++d) {
    if (table.sim_percentages[d].empty()) continue;
    out << table.datasets[d] << ",mean,,,";
    for (double p : table.sim_percentages[d]) out << ',' << format_real(100.0 * p);
    out << ',' << format_real(table.sim_entropy[d]) << ",,\n";
  }
}

void write_ranks_csv(const ResultsTable& table, std::span<const Method> methods, double alpha,
                     const std::filesystem::path& path) {
  const auto ranks = average_ranks(table, methods);
  const double cd = nemenyi_cd(methods.size(), table.datasets.size(), alpha);
  auto out = open_out(path);
  out << "method,avg_rank,cd,alpha\n";
  for (std::size_t m = 0; m < methods.size(); ++m) {
    out << to_string(methods[m]) << ',' << format_real(ranks[m]) << ',' << format_real(cd) << ','
        << format_real(alpha) << '\n';
  }
}

}  // namespace hetens
