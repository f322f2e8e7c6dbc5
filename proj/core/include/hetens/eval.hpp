#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hetens/data.hpp"
#include "hetens/homogeneous.hpp"
#include "hetens/simplex.hpp"

namespace hetens {

enum class Method : std::uint8_t {
  kSvm,   // single SVM, cross-validated grid search
  kMlp,   // single MLP, cross-validated grid search
  kEsvm,  // partially optimized SVM ensemble
  kEmlp,  // partially optimized MLP ensemble
  kRf,    // random forest
  kSim,   // OOB-optimal heterogeneous pool of E-SVM, E-MLP and RF
};

std::string_view to_string(Method m) noexcept;
/// "SVM", "MLP", "E-SVM", "E-MLP", "RF", "SIM" (case-insensitive).
Method parse_method(std::string_view name);

struct DatasetSpec {
  /// "synthetic:twonorm" | "synthetic:threenorm" | "synthetic:ringnorm" | CSV path.
  std::string uri;
  CsvOptions csv;

  std::string name() const;
  bool synthetic() const;
};

struct ExperimentConfig {
  std::vector<DatasetSpec> datasets;
  std::vector<Method> methods;
  std::size_t repetitions = 100;
  std::size_t t = 1001;
  std::size_t b = 10;
  std::size_t stride = 13;
  StrideMode stride_mode = StrideMode::kExact;
  ParamGrid svm_grid = ParamGrid::svm_default();
  ParamGrid mlp_grid = ParamGrid::mlp_default();
  Seed master_seed = 0;
  std::size_t train_n = 300;   // synthetic problems
  std::size_t test_n = 2000;   // synthetic problems
  double train_fraction = 2.0 / 3.0;  // CSV datasets
  std::size_t cv_folds = 10;   // single-model baselines
  EnsembleOptions ensemble;
  std::size_t threads = 1;
  /// When set, each cell writes its train/test CSVs and ensembles to
  /// <artifact_dir>/<dataset>_r<repetition>/.
  std::filesystem::path artifact_dir;

  /// Throws ConfigError on the first violated constraint.
  void validate() const;
};

/// Member-type proportions in ensemble order (SVM, MLP, tree).
struct SimOutcome {
  Composition composition;
  std::vector<double> percentages;  // fractions summing to 1
  double entropy = 0.0;             // bits
  double oob_error = 0.0;
  double covered_fraction = 0.0;
};

struct CellResult {
  std::size_t dataset = 0;
  std::size_t repetition = 0;
  std::vector<double> errors;  // aligned with ExperimentConfig::methods
  std::optional<SimOutcome> sim;
  std::string failure;         // nonempty if the cell could not be computed

  bool ok() const noexcept { return failure.empty(); }
};

struct MethodSummary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for a single run
  std::vector<double> runs;
  std::size_t missing = 0;
};

struct ResultsTable {
  std::vector<std::string> datasets;
  std::vector<Method> methods;
  std::vector<CellResult> cells;                   // dataset-major, repetition-minor
  std::vector<std::vector<MethodSummary>> summary;  // [dataset][method]
  /// Mean SIM proportions per dataset and their entropy (empty without SIM).
  std::vector<std::vector<double>> sim_percentages;
  std::vector<double> sim_entropy;

  const MethodSummary& at(std::size_t dataset, Method m) const;
  bool complete() const;
};

/// Hooks for persisting and resuming cells. `lookup` may return a previously
/// computed cell; `on_cell` is called (serialized) after each cell finishes.
struct ExperimentHooks {
  std::function<std::optional<CellResult>(std::size_t dataset, std::size_t repetition)> lookup;
  std::function<void(const CellResult&, std::size_t done, std::size_t total)> on_cell;
};

ResultsTable run_experiment(const ExperimentConfig& cfg, const ExperimentHooks& hooks = {});

struct CellData {
  Dataset train;
  Dataset test;
};

/// Train/test data of a cell: fresh synthetic samples, or a stratified split
/// of the loaded CSV.
CellData cell_data(const ExperimentConfig& cfg, std::size_t dataset, std::size_t repetition,
                   const std::vector<Dataset>& loaded);

/// The cell's E-SVM, E-MLP and random forest, in that order, trained on
/// `train` with the cell's seeds.
std::vector<HomogeneousEnsemble> cell_ensembles(const ExperimentConfig& cfg, std::size_t dataset,
                                                std::size_t repetition, const Dataset& train);

/// One (dataset, repetition) cell; exposed for tests and resumable runners.
/// Errors are caught and reported through CellResult::failure.
CellResult run_cell(const ExperimentConfig& cfg, std::size_t dataset, std::size_t repetition,
                    const std::vector<Dataset>& loaded);

/// Loads every CSV dataset of the config; synthetic entries get placeholders.
std::vector<Dataset> load_datasets(const ExperimentConfig& cfg);

std::filesystem::path cell_artifact_dir(const ExperimentConfig& cfg, std::size_t dataset, std::size_t repetition);

/// Recomputes means and deviations from per-cell errors.
void summarize(ResultsTable& table);

/// Shannon entropy in bits, 0 log 0 = 0.
double composition_entropy(std::span<const double> fractions);

/// Average ranks (1 = lowest error, ties share the mean rank) of the columns
/// of an errors[dataset][method] matrix.
std::vector<double> average_ranks(std::span<const std::vector<double>> errors);
/// Same, on the mean errors of the given methods of a complete table.
std::vector<double> average_ranks(const ResultsTable& table, std::span<const Method> methods);

/// Critical difference q_alpha(k) * sqrt(k (k + 1) / (6 n)) of the Nemenyi
/// post-hoc test. alpha must be 0.05 or 0.10 and 2 <= k <= 10.
double nemenyi_q(std::size_t k, double alpha);
double nemenyi_cd(std::size_t k, std::size_t n, double alpha);

// Result files.
void write_summary_csv(const ResultsTable& table, const std::filesystem::path& path);
void write_runs_csv(const ResultsTable& table, const std::filesystem::path& path);
void write_sim_csv(const ResultsTable& table, const std::filesystem::path& path);
void write_ranks_csv(const ResultsTable& table, std::span<const Method> methods, double alpha,
                     const std::filesystem::path& path);

}  // namespace hetens
