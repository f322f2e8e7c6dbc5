#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hetens/error.hpp"
#include "hetens/eval.hpp"
#include "oracles.hpp"

using namespace hetens;

namespace {

ExperimentConfig reduced(std::vector<Method> methods) {
  ExperimentConfig c;
  c.datasets = {DatasetSpec{"synthetic:twonorm", {}}};
  c.methods = std::move(methods);
  c.repetitions = 2;
  c.t = 9;
  c.b = 3;
  c.stride = 3;
  c.train_n = 60;
  c.test_n = 300;
  c.cv_folds = 3;
  c.svm_grid = ParamGrid({{"c", {1.0, 8.0}}, {"gamma", {0.02, 0.1}}});
  c.mlp_grid = ParamGrid({{"hidden", {3, 5}}});
  c.ensemble.mlp.epochs = 60;
  c.master_seed = 5;
  return c;
}

/// Axis-aligned stripes on one feature among noise features: trivial for
/// trees, hard for RBF machines and small networks.
std::filesystem::path write_striped(const std::filesystem::path& dir) {
  Rng rng(123);
  const auto p = dir / "striped.csv";
  std::ofstream out(p);
  out << "x0";
  for (int j = 1; j <= 4; ++j) out << ",n" << j;
  out << ",class\n";
  for (int i = 0; i < 450; ++i) {
    const double x0 = rng.uniform01();
    out << x0;
    for (int j = 1; j <= 4; ++j) out << ',' << rng.normal();
    out << ',' << (static_cast<int>(std::floor(x0 * 6.0)) % 2 == 0 ? "even" : "odd") << '\n';
  }
  return p;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(parse_method("e-svm") == Method::kEsvm);
  CHECK(to_string(Method::kSim) == "SIM");
  CHECK_THROWS_AS(parse_method("boost"), ConfigError);
  CHECK(DatasetSpec{"synthetic:ringnorm", {}}.name() == "ringnorm");
  CHECK(DatasetSpec{"/data/colic.csv", {}}.name() == "colic");
}

TEST_CASE("entropy") {
  CHECK(composition_entropy(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}) == doctest::Approx(std::log2(3.0)));
  CHECK(composition_entropy(std::vector<double>{1.0, 0.0, 0.0}) == 0.0);
  CHECK(composition_entropy(std::vector<double>{0.245, 0.167, 0.588}) == doctest::Approx(1.38).epsilon(0.01 / 1.38));
  CHECK_THROWS(composition_entropy(std::vector<double>{0.5, 0.2}));
}

TEST_CASE("average ranks") {
  std::vector<std::vector<double>> errs{{0.1, 0.2}, {0.05, 0.3}, {0.2, 0.25}};
  CHECK(average_ranks(errs) == std::vector<double>{1.0, 2.0});
  errs = {{0.1, 0.1}, {0.1, 0.2}};
  CHECK(average_ranks(errs) == std::vector<double>{1.25, 1.75});

  Rng rng(3);
  std::vector<std::vector<double>> random(7, std::vector<double>(5));
  for (auto& row : random) {
    for (auto& v : row) v = std::round(rng.uniform01() * 4.0) / 4.0;
  }
  const auto r = average_ranks(random);
  CHECK(std::accumulate(r.begin(), r.end(), 0.0) == doctest::Approx(5.0 * 6.0 / 2.0));
  for (const auto& row : random) {
    const std::vector<std::vector<double>> one{row};
    const auto single = average_ranks(one);
    CHECK(std::accumulate(single.begin(), single.end(), 0.0) == doctest::Approx(15.0));
  }
}

TEST_CASE("Nemenyi critical difference") {
  CHECK(nemenyi_q(4, 0.05) == 2.569);
  CHECK(nemenyi_cd(4, 19, 0.05) == doctest::Approx(2.569 * std::sqrt(20.0 / 114.0)));
  CHECK(std::abs(nemenyi_cd(4, 19, 0.05) - 1.077) <= 0.002);
  for (std::size_t n : {5, 19, 40}) CHECK(nemenyi_cd(2, n, 0.05) == doctest::Approx(1.960 / std::sqrt(double(n))));
  CHECK(nemenyi_cd(4, 10, 0.05) > nemenyi_cd(4, 100, 0.05));
  CHECK(nemenyi_cd(4, 100, 0.05) > nemenyi_cd(4, 1000, 0.05));
  CHECK(nemenyi_q(3, 0.10) == 2.052);
  CHECK_THROWS_AS(nemenyi_q(11, 0.05), ConfigError);
  CHECK_THROWS_AS(nemenyi_q(3, 0.01), ConfigError);
}

TEST_CASE("config validation") {
  ExperimentConfig c = reduced({Method::kRf});
  CHECK_NOTHROW(c.validate());
  c.stride = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = reduced({Method::kRf});
  c.b = 10;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = reduced({Method::kRf});
  c.train_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = reduced({Method::kRf, Method::kRf});
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = reduced({Method::kRf});
  c.datasets = {DatasetSpec{"synthetic:fournorm", {}}};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = reduced({Method::kRf});
  c.stride = 4;
  c.stride_mode = StrideMode::kApportioned;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("synthetic cell sizes") {
  ExperimentConfig c = reduced({Method::kRf});
  c.train_n = 300;
  c.test_n = 2000;
  const CellData d = cell_data(c, 0, 0, load_datasets(c));
  CHECK(d.train.size() == 300);
  CHECK(d.test.size() == 2000);
  CHECK(d.train.dims() == 20);
}

TEST_CASE("single repetition reports zero deviation") {
  ExperimentConfig c = reduced({Method::kRf});
  c.repetitions = 1;
  const ResultsTable t = run_experiment(c);
  REQUIRE(t.summary.size() == 1);
  CHECK(t.summary[0][0].runs.size() == 1);
  CHECK(t.summary[0][0].sd == 0.0);
  CHECK(t.summary[0][0].mean == t.cells[0].errors[0]);
}

TEST_CASE("E-SVM and SVM give two mean rows") {
  const ExperimentConfig c = reduced({Method::kEsvm, Method::kSvm});
  const ResultsTable t = run_experiment(c);
  CHECK(t.complete());
  oracle::ScopedDir dir("eval");
  write_summary_csv(t, dir.path / "summary.csv");
  std::ifstream in(dir.path / "summary.csv");
  std::vector<std::string> rows;
  for (std::string l; std::getline(in, l);) rows.push_back(l);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].starts_with("twonorm,E-SVM,"));
  CHECK(rows[2].starts_with("twonorm,SVM,"));
  for (double e : t.summary[0][0].runs) CHECK(e < 0.2);
}

TEST_CASE("SIM cell bookkeeping") {
  const ExperimentConfig c = reduced({Method::kEsvm, Method::kEmlp, Method::kRf, Method::kSim});
  const CellResult cell = run_cell(c, 0, 0, load_datasets(c));
  REQUIRE(cell.ok());
  REQUIRE(cell.sim.has_value());
  CHECK(cell.sim->composition.total() == 9);
  CHECK(std::accumulate(cell.sim->percentages.begin(), cell.sim->percentages.end(), 0.0) == doctest::Approx(1.0));
  CHECK(cell.sim->entropy == doctest::Approx(composition_entropy(cell.sim->percentages)));
  const auto& comp = cell.sim->composition.counts;
  for (std::size_t j = 0; j < 3; ++j) {
    if (comp[j] == 9) CHECK(cell.errors[3] == cell.errors[j]);
  }

  const CellResult again = run_cell(c, 0, 0, load_datasets(c));
  CHECK(again.errors == cell.errors);
}

TEST_CASE("results are independent of the worker count") {
  ExperimentConfig c = reduced({Method::kEsvm, Method::kRf, Method::kSim, Method::kEmlp});
  c.datasets.push_back(DatasetSpec{"synthetic:threenorm", {}});
  c.threads = 1;
  const ResultsTable a = run_experiment(c);
  c.threads = 3;
  const ResultsTable b = run_experiment(c);
  oracle::ScopedDir dir("eval");
  for (const auto* t : {&a, &b}) {
    const auto tag = t == &a ? std::string("a") : std::string("b");
    write_runs_csv(*t, dir.path / (tag + "_runs.csv"));
    write_sim_csv(*t, dir.path / (tag + "_sim.csv"));
    write_ranks_csv(*t, t->methods, 0.05, dir.path / (tag + "_ranks.csv"));
  }
  for (const std::string f : {"_runs.csv", "_sim.csv", "_ranks.csv"}) {
    std::ifstream fa(dir.path / ("a" + f)), fb(dir.path / ("b" + f));
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK_FALSE(sa.str().empty());
  }
}

TEST_CASE("failed cells are reported, not fatal") {
  oracle::ScopedDir dir("eval");
  const auto p = dir.path / "tiny.csv";
  std::ofstream(p) << "x,class\n1,a\n2,a\n3,b\n4,b\n5,c\n";
  ExperimentConfig c = reduced({Method::kRf});
  c.datasets = {DatasetSpec{p.string(), {}}};
  const ResultsTable t = run_experiment(c);
  CHECK_FALSE(t.complete());
  CHECK(t.cells[0].failure.find("fewer than 2") != std::string::npos);
  CHECK(t.summary[0][0].missing == 2);
  CHECK_THROWS(average_ranks(t, t.methods));
}

TEST_CASE("tree-dominant data pulls SIM toward trees") {
  oracle::ScopedDir dir("eval");
  ExperimentConfig c = reduced({Method::kEsvm, Method::kEmlp, Method::kRf, Method::kSim});
  c.datasets = {DatasetSpec{write_striped(dir.path).string(), {}}};
  c.t = 21;
  c.b = 1;
  c.stride = 1;
  c.repetitions = 3;
  c.ensemble.mlp.epochs = 200;
  const ResultsTable t = run_experiment(c);
  REQUIRE(t.complete());
  REQUIRE(t.sim_percentages[0].size() == 3);
  MESSAGE("errors E-SVM/E-MLP/RF/SIM: " << t.summary[0][0].mean << " " << t.summary[0][1].mean << " "
                                       << t.summary[0][2].mean << " " << t.summary[0][3].mean);
  MESSAGE("SIM percentages: " << t.sim_percentages[0][0] << " " << t.sim_percentages[0][1] << " "
                              << t.sim_percentages[0][2]);
  CHECK(t.summary[0][2].mean < t.summary[0][0].mean);
  CHECK(t.sim_percentages[0][2] > 0.5);
}
