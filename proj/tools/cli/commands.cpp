#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"
#include "hetens/error.hpp"
#include "hetens/eval.hpp"
#include "hetens/format.hpp"
#include "hetens/simplex.hpp"

#ifndef HETENS_VERSION
#define HETENS_VERSION "0.0.0"
#endif

namespace hetens::cli {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out_dir = "hetens_out";
  std::optional<std::string> profile;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void write_json(const Json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

/// Run record written next to the outputs: tool, command, seed, config and
/// the hash of every file produced.
class Manifest {
 public:
  Manifest(fs::path dir, std::string command) : dir_(std::move(dir)) {
    doc_["tool"] = "hetens";
    doc_["version"] = HETENS_VERSION;
    doc_["command"] = std::move(command);
    doc_["started"] = utc_now();
  }

  void set(const std::string& key, Json value) { doc_[key] = std::move(value); }

  void add(const fs::path& file, const std::string& stage) {
    Json a;
    a["path"] = fs::relative(file, dir_).generic_string();
    a["stage"] = stage;
    a["bytes"] = fs::file_size(file);
    a["fnv1a64"] = hex64(file_hash(file));
    artifacts_.push_back(std::move(a));
  }

  fs::path write(const std::string& status) {
    doc_["status"] = status;
    doc_["finished"] = utc_now();
    auto sorted = artifacts_;
    std::sort(sorted.begin(), sorted.end(), [](const Json& a, const Json& b) { return a["path"] < b["path"]; });
    doc_["artifacts"] = sorted;
    const auto path = dir_ / "manifest.json";
    write_json(doc_, path);
    return path;
  }

 private:
  fs::path dir_;
  Json doc_ = Json::object();
  std::vector<Json> artifacts_;
};

RunConfig resolve_config(const GlobalOptions& g) {
  const Overrides ov{g.profile, g.seed, g.threads};
  if (g.config.empty()) throw ConfigError("--config is required for this command");
  return load_config(g.config, ov);
}

/// Stride settings and thread count for commands that may run without a
/// config file.
RunConfig resolve_light_config(const GlobalOptions& g) {
  if (!g.config.empty()) return resolve_config(g);
  RunConfig rc;
  rc.profile = g.profile.value_or("desk");
  rc.experiment = profile_defaults(rc.profile);
  if (g.seed) rc.experiment.master_seed = *g.seed;
  rc.experiment.threads = resolve_threads(g.threads, 1);
  refresh_snapshot(rc);
  return rc;
}

void check_unique_names(const ExperimentConfig& cfg) {
  std::map<std::string, std::size_t> seen;
  for (const auto& d : cfg.datasets) {
    if (++seen[d.name()] > 1) throw ConfigError("dataset name '" + d.name() + "' appears twice");
  }
}

const char* kind_file(LearnerKind k) {
  switch (k) {
    case LearnerKind::kSvm:
      return "svm.hse";
    case LearnerKind::kMlp:
      return "mlp.hse";
    case LearnerKind::kTree:
      return "tree.hse";
  }
  return "model.hse";
}

std::vector<HomogeneousEnsemble> load_ensembles(const std::vector<std::string>& paths) {
  std::vector<HomogeneousEnsemble> out;
  for (const auto& p : paths) {
    try {
      out.push_back(load_ensemble(p));
    } catch (const Error& e) {
      throw DataError(p + ": " + e.what());
    }
  }
  if (out.empty()) throw ConfigError("no ensembles given");
  return out;
}

Dataset load_labelled(const std::string& path, const std::string& label_column, const HomogeneousEnsemble& ref) {
  CsvOptions opts;
  opts.label_column = label_column;
  opts.class_names = ref.class_names;
  try {
    return load_csv(path, opts);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

Composition parse_composition(const std::string& text, std::size_t m) {
  Composition c;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(part, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != part.size()) throw ConfigError("bad composition entry '" + part + "'");
    c.counts.push_back(static_cast<std::size_t>(v));
  }
  if (c.counts.size() != m) {
    throw ConfigError("composition has " + std::to_string(c.counts.size()) + " entries for " + std::to_string(m) +
                      " ensembles");
  }
  return c;
}

Json hyper_json(LearnerKind kind, const HyperParams& hp) {
  switch (kind) {
    case LearnerKind::kSvm:
      return {{"c", hp.svm_c}, {"gamma", hp.svm_gamma}};
    case LearnerKind::kMlp:
      return {{"hidden", hp.mlp_hidden}};
    case LearnerKind::kTree:
      return {{"mtry", hp.tree_mtry}};
  }
  return Json::object();
}

// ---- train ----------------------------------------------------------------

int cmd_train(const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  RunConfig rc = resolve_config(g);
  auto cfg = rc.experiment;
  check_unique_names(cfg);
  cfg.ensemble.threads = cfg.threads;
  const fs::path dir = g.out_dir;
  fs::create_directories(dir);
  Manifest manifest(dir, "train");
  manifest.set("seed", cfg.master_seed);
  manifest.set("config", rc.snapshot);

  const auto loaded = load_datasets(cfg);
  for (std::size_t d = 0; d < cfg.datasets.size(); ++d) {
    const auto name = cfg.datasets[d].name();
    err << "train: " << name << '\n';
    auto data = cell_data(cfg, d, 0, loaded);
    std::vector<HomogeneousEnsemble> ensembles;
    try {
      ensembles = cell_ensembles(cfg, d, 0, data.train);
    } catch (const ComputeError& e) {
      throw ComputeError(name + ": " + e.what());
    }
    const fs::path sub = dir / name;
    fs::create_directories(sub);
    write_csv(data.train, sub / "train.csv");
    write_csv(data.test, sub / "test.csv");
    manifest.add(sub / "train.csv", "data");
    manifest.add(sub / "test.csv", "data");
    for (const auto& e : ensembles) {
      save_ensemble(e, sub / kind_file(e.kind));
      manifest.add(sub / kind_file(e.kind), "ensemble");
      for (const auto& w : e.warnings) err << "warning: " << name << '/' << to_string(e.kind) << ": " << w << '\n';
    }
    out << name << ": " << (sub / "svm.hse").string() << ' ' << (sub / "mlp.hse").string() << ' '
        << (sub / "tree.hse").string() << '\n';
  }
  manifest.write("complete");
  return kExitOk;
}

// ---- scan -----------------------------------------------------------------

struct ScanOptions {
  std::vector<std::string> ensembles;
  std::string train;
  std::string label_column = "class";
  std::optional<std::size_t> stride;
  std::optional<std::string> stride_mode;
  std::optional<std::size_t> t;
};

int cmd_scan(const GlobalOptions& g, const ScanOptions& o, std::ostream& out, std::ostream& err) {
  RunConfig rc = resolve_light_config(g);
  auto& cfg = rc.experiment;
  if (o.stride) cfg.stride = *o.stride;
  if (o.stride_mode) {
    if (*o.stride_mode == "exact") cfg.stride_mode = StrideMode::kExact;
    else if (*o.stride_mode == "apportioned") cfg.stride_mode = StrideMode::kApportioned;
    else throw ConfigError("--stride-mode must be 'exact' or 'apportioned'");
  }
  const auto ensembles = load_ensembles(o.ensembles);
  std::size_t t = ensembles.front().size();
  for (const auto& e : ensembles) t = std::min(t, e.size());
  if (o.t) {
    if (*o.t > t) throw ConfigError("--t " + std::to_string(*o.t) + " exceeds the smallest ensemble (" +
                                    std::to_string(t) + ")");
    t = *o.t;
  }
  if (cfg.stride < 1 || cfg.stride > t) throw ConfigError("stride must lie in [1, t]");
  if (cfg.stride_mode == StrideMode::kExact && t % cfg.stride != 0) {
    throw ConfigError("stride " + std::to_string(cfg.stride) + " does not divide t = " + std::to_string(t));
  }
  const Dataset train = load_labelled(o.train, o.label_column, ensembles.front());

  const fs::path dir = g.out_dir;
  fs::create_directories(dir);
  Manifest manifest(dir, "scan");
  rc.snapshot["simplex"] = {{"stride", cfg.stride},
                            {"stride_mode", cfg.stride_mode == StrideMode::kExact ? "exact" : "apportioned"}};
  manifest.set("config", rc.snapshot);
  manifest.set("inputs", {{"ensembles", o.ensembles}, {"train", o.train}, {"t", t}});

  err << "scan: t=" << t << " stride=" << cfg.stride << '\n';
  const SimplexScan scan = scan_simplex(ensembles, t, cfg.stride, train, cfg.stride_mode, cfg.threads);
  write_scan_csv(scan, dir / "scan.csv");
  manifest.add(dir / "scan.csv", "scan");

  const bool one_of_each = scan.kinds.size() == 3 && std::is_permutation(
      scan.kinds.begin(), scan.kinds.end(),
      std::begin({LearnerKind::kSvm, LearnerKind::kMlp, LearnerKind::kTree}));
  if (one_of_each) {
    export_heatmap(scan, dir / "heatmap.csv");
    manifest.add(dir / "heatmap.csv", "scan");
  } else {
    err << "note: heatmap needs one SVM, one MLP and one tree ensemble; skipped\n";
  }

  OobEstimate at_opt;
  const auto on_grid = std::find_if(scan.entries.begin(), scan.entries.end(),
                                    [&](const ScanEntry& e) { return e.composition == scan.optimum; });
  if (on_grid != scan.entries.end()) {
    at_opt = {on_grid->oob_error, on_grid->covered_fraction};
  } else {
    at_opt = OobVoteCache(ensembles, train, cfg.threads).evaluate(scan.optimum);
  }
  Json opt;
  Json kinds = Json::array();
  for (auto k : scan.kinds) kinds.push_back(std::string(to_string(k)));
  opt["kinds"] = kinds;
  opt["total"] = scan.total;
  opt["stride"] = scan.stride;
  opt["stride_mode"] = scan.mode == StrideMode::kExact ? "exact" : "apportioned";
  opt["entries"] = scan.entries.size();
  opt["min_error"] = scan.min_error;
  Json minima = Json::array();
  for (const auto& m : scan.minima) minima.push_back(m.counts);
  opt["minima"] = minima;
  opt["optimum"] = scan.optimum.counts;
  opt["optimum_oob_error"] = at_opt.error;
  opt["optimum_covered_fraction"] = at_opt.covered_fraction;
  write_json(opt, dir / "optimum.json");
  manifest.add(dir / "optimum.json", "scan");
  manifest.write("complete");

  out << "optimum";
  for (std::size_t j = 0; j < scan.kinds.size(); ++j) {
    out << ' ' << to_string(scan.kinds[j]) << '=' << scan.optimum.counts[j];
  }
  out << " oob_error=" << format_real(at_opt.error) << '\n';
  return kExitOk;
}

// ---- experiment -----------------------------------------------------------

struct ExperimentOptions {
  bool resume = false;
  bool save_artifacts = false;
};

Json cell_json(const CellResult& c, const std::string& name, std::uint64_t hash) {
  Json j;
  j["config_hash"] = hex64(hash);
  j["dataset"] = c.dataset;
  j["dataset_name"] = name;
  j["repetition"] = c.repetition;
  j["errors"] = c.errors;
  if (c.sim) {
    j["sim"] = {{"composition", c.sim->composition.counts},
                {"percentages", c.sim->percentages},
                {"entropy", c.sim->entropy},
                {"oob_error", c.sim->oob_error},
                {"covered_fraction", c.sim->covered_fraction}};
  } else {
    j["sim"] = nullptr;
  }
  return j;
}

std::optional<CellResult> cell_from_json(const Json& j, std::uint64_t hash) {
  if (!j.is_object() || j.value("config_hash", std::string()) != hex64(hash)) return std::nullopt;
  CellResult c;
  c.dataset = j.at("dataset").get<std::size_t>();
  c.repetition = j.at("repetition").get<std::size_t>();
  c.errors = j.at("errors").get<std::vector<double>>();
  if (!j.at("sim").is_null()) {
    const auto& s = j.at("sim");
    SimOutcome sim;
    sim.composition.counts = s.at("composition").get<std::vector<std::size_t>>();
    sim.percentages = s.at("percentages").get<std::vector<double>>();
    sim.entropy = s.at("entropy").get<double>();
    sim.oob_error = s.at("oob_error").get<double>();
    sim.covered_fraction = s.at("covered_fraction").get<double>();
    c.sim = std::move(sim);
  }
  return c;
}

fs::path cell_path(const fs::path& dir, std::size_t d, std::size_t r) {
  return dir / "cells" / ("d" + std::to_string(d) + "_r" + std::to_string(r) + ".json");
}

int cmd_experiment(const GlobalOptions& g, const ExperimentOptions& o, std::ostream& out, std::ostream& err) {
  RunConfig rc = resolve_config(g);
  auto cfg = rc.experiment;
  check_unique_names(cfg);
  const fs::path dir = g.out_dir;
  fs::create_directories(dir / "cells");
  if (o.save_artifacts) cfg.artifact_dir = dir / "artifacts";
  // Surface unreadable CSVs as data errors before any cell runs.
  load_datasets(cfg);

  Manifest manifest(dir, "experiment");
  manifest.set("seed", cfg.master_seed);
  manifest.set("config", rc.snapshot);
  manifest.set("config_hash", hex64(rc.hash));
  manifest.write("running");

  std::size_t reused = 0;
  std::mutex reuse_mu;
  ExperimentHooks hooks;
  if (o.resume) {
    hooks.lookup = [&](std::size_t d, std::size_t r) -> std::optional<CellResult> {
      const auto path = cell_path(dir, d, r);
      if (!fs::exists(path)) return std::nullopt;
      try {
        std::ifstream in(path);
        auto cell = cell_from_json(Json::parse(in), rc.hash);
        if (cell && cell->dataset == d && cell->repetition == r && cell->errors.size() == cfg.methods.size()) {
          std::lock_guard lock(reuse_mu);
          ++reused;
          return cell;
        }
      } catch (const std::exception&) {
      }
      return std::nullopt;
    };
  }
  hooks.on_cell = [&](const CellResult& c, std::size_t done, std::size_t total) {
    const auto& name = cfg.datasets[c.dataset].name();
    if (c.ok()) {
      write_json(cell_json(c, name, rc.hash), cell_path(dir, c.dataset, c.repetition));
      err << "[" << done << '/' << total << "] " << name << " r" << c.repetition << '\n';
    } else {
      err << "[" << done << '/' << total << "] " << name << " r" << c.repetition << " FAILED: " << c.failure << '\n';
    }
  };

  const ResultsTable table = run_experiment(cfg, hooks);
  if (reused > 0) err << "resumed " << reused << " cells\n";

  write_summary_csv(table, dir / "summary.csv");
  manifest.add(dir / "summary.csv", "results");
  write_runs_csv(table, dir / "runs.csv");
  manifest.add(dir / "runs.csv", "results");
  if (std::find(cfg.methods.begin(), cfg.methods.end(), Method::kSim) != cfg.methods.end()) {
    write_sim_csv(table, dir / "sim.csv");
    manifest.add(dir / "sim.csv", "results");
  }
  const std::size_t k = cfg.methods.size();
  if (table.complete() && k >= 2 && k <= 10) {
    write_ranks_csv(table, cfg.methods, rc.alpha, dir / "ranks.csv");
    manifest.add(dir / "ranks.csv", "results");
  } else if (k < 2 || k > 10) {
    err << "note: ranks need between 2 and 10 methods; ranks.csv skipped\n";
  }
  for (const auto& c : table.cells) {
    const auto path = cell_path(dir, c.dataset, c.repetition);
    if (c.ok() && fs::exists(path)) manifest.add(path, "cell");
  }
  if (!cfg.artifact_dir.empty() && fs::exists(cfg.artifact_dir)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(cfg.artifact_dir)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    for (const auto& f : files) manifest.add(f, "artifact");
  }

  for (std::size_t d = 0; d < table.datasets.size(); ++d) {
    out << table.datasets[d];
    for (std::size_t m = 0; m < table.methods.size(); ++m) {
      const auto& s = table.summary[d][m];
      out << ' ' << to_string(table.methods[m]) << '=' << format_real(s.mean);
    }
    out << '\n';
  }
  if (!table.complete()) {
    manifest.write("incomplete");
    err << "error: some cells failed; rerun with --resume to retry them\n";
    return kExitCompute;
  }
  manifest.write("complete");
  return kExitOk;
}

// ---- predict --------------------------------------------------------------

struct PredictOptions {
  std::vector<std::string> ensembles;
  std::string composition;
  std::string data;
  std::string label_column = "class";
};

int cmd_predict(const GlobalOptions& g, const PredictOptions& o, std::ostream& out, std::ostream&) {
  const auto ensembles = load_ensembles(o.ensembles);
  Composition comp;
  if (o.composition.empty()) {
    for (const auto& e : ensembles) comp.counts.push_back(e.size());
  } else {
    comp = parse_composition(o.composition, ensembles.size());
  }
  if (comp.total() == 0) throw ConfigError("composition selects no models");
  const PooledModels pooled = pool(ensembles, comp);
  const Dataset data = load_labelled(o.data, o.label_column, ensembles.front());
  if (data.dims() != ensembles.front().models.front().dims) {
    throw DataError(o.data + ": has " + std::to_string(data.dims()) + " features, the ensembles expect " +
                    std::to_string(ensembles.front().models.front().dims));
  }

  const fs::path dir = g.out_dir;
  fs::create_directories(dir);
  const auto& names = ensembles.front().class_names;
  std::size_t wrong = 0;
  {
    std::ofstream csv(dir / "predictions.csv", std::ios::binary);
    if (!csv) throw DataError("cannot write predictions.csv");
    csv << "row,predicted,actual\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
      const ClassId p = ensemble_predict(pooled, data.row(i));
      if (p != data.label(i)) ++wrong;
      csv << i << ',' << names.at(p) << ',' << names.at(data.label(i)) << '\n';
    }
  }
  const double error = static_cast<double>(wrong) / static_cast<double>(data.size());
  Manifest manifest(dir, "predict");
  manifest.set("inputs", {{"ensembles", o.ensembles}, {"data", o.data}, {"composition", comp.counts}});
  manifest.set("error", error);
  manifest.add(dir / "predictions.csv", "predict");
  manifest.write("complete");
  out << "rows=" << data.size() << " error=" << format_real(error) << '\n';
  return kExitOk;
}

// ---- inspect --------------------------------------------------------------

struct InspectOptions {
  std::string ensemble;
  std::string train;
  std::string label_column = "class";
};

int cmd_inspect(const InspectOptions& o, std::ostream& out) {
  const auto ensembles = load_ensembles({o.ensemble});
  const auto& e = ensembles.front();
  Json j;
  j["kind"] = std::string(to_string(e.kind));
  j["size"] = e.size();
  j["batch_sizes"] = e.batch_sizes;
  Json params = Json::array();
  for (const auto& hp : e.batch_params) params.push_back(hyper_json(e.kind, hp));
  j["batch_params"] = params;
  Json grid = Json::object();
  for (const auto& a : e.grid.axes()) grid[a.name] = a.values.size();
  j["grid_axes"] = grid;
  j["train_fingerprint"] = hex64(e.train_fingerprint);
  j["train_size"] = e.train_size;
  j["class_names"] = e.class_names;
  j["master_seed"] = e.master_seed;
  j["subbag_rate"] = e.subbag_rate;
  j["standardized"] = e.scaler != nullptr;
  j["dims"] = e.models.empty() ? 0 : e.models.front().dims;
  j["warnings"] = e.warnings;
  if (!o.train.empty()) {
    const Dataset train = load_labelled(o.train, o.label_column, e);
    PooledModels pooled;
    for (const auto& m : e.models) pooled.push_back(&m);
    if (fingerprint(train) != e.train_fingerprint) {
      throw DataError(o.train + ": ensemble was not trained on this dataset (fingerprint mismatch)");
    }
    const auto est = oob_error(pooled, train);
    j["oob_error"] = est.error;
    j["oob_covered_fraction"] = est.covered_fraction;
  }
  out << j.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"hetens: heterogeneous ensembles from pooled homogeneous ensembles", "hetens"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string("hetens ") + HETENS_VERSION);

  GlobalOptions g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--threads", g.threads, "Worker threads (overrides HETENS_THREADS and the config)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--profile", g.profile, "Default profile")->check(CLI::IsMember({"paper", "desk"}));

  auto* train = app.add_subcommand("train", "Build the SVM, MLP and tree ensembles of every dataset");

  ScanOptions so;
  auto* scan = app.add_subcommand("scan", "Out-of-bag error over the composition simplex");
  scan->add_option("--ensembles", so.ensembles, "Ensemble files (.hse)")->required()->expected(1, -1);
  scan->add_option("--train", so.train, "Training CSV the ensembles were built on")->required();
  scan->add_option("--label-column", so.label_column, "Label column of the CSV")->capture_default_str();
  scan->add_option("--stride", so.stride, "Composition stride")->check(CLI::PositiveNumber);
  scan->add_option("--stride-mode", so.stride_mode, "exact or apportioned")
      ->check(CLI::IsMember({"exact", "apportioned"}));
  scan->add_option("--t", so.t, "Pool size (default: smallest ensemble)")->check(CLI::PositiveNumber);

  ExperimentOptions eo;
  auto* experiment = app.add_subcommand("experiment", "Run the comparison protocol");
  experiment->add_flag("--resume", eo.resume, "Reuse cells finished by an earlier run with the same config");
  experiment->add_flag("--save-artifacts", eo.save_artifacts, "Keep every cell's data and ensembles");

  PredictOptions po;
  auto* predict = app.add_subcommand("predict", "Classify a CSV with a pooled ensemble");
  predict->add_option("--ensembles", po.ensembles, "Ensemble files (.hse)")->required()->expected(1, -1);
  predict->add_option("--composition", po.composition, "Members per ensemble, e.g. 26,13,62 (default: all)");
  predict->add_option("--data", po.data, "Labelled CSV")->required();
  predict->add_option("--label-column", po.label_column, "Label column of the CSV")->capture_default_str();

  InspectOptions io;
  auto* inspect = app.add_subcommand("inspect", "Print ensemble metadata as JSON");
  inspect->add_option("ensemble", io.ensemble, "Ensemble file (.hse)")->required();
  inspect->add_option("--train", io.train, "Training CSV; adds the out-of-bag error");
  inspect->add_option("--label-column", io.label_column, "Label column of the CSV")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "hetens " << HETENS_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*train) return cmd_train(g, out, err);
    if (*scan) return cmd_scan(g, so, out, err);
    if (*experiment) return cmd_experiment(g, eo, out, err);
    if (*predict) return cmd_predict(g, po, out, err);
    if (*inspect) return cmd_inspect(io, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "compute error: " << e.what() << '\n';
    return kExitCompute;
  }
  return kExitConfig;
}

}  // namespace hetens::cli
