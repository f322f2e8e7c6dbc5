#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "hetens/data.hpp"
#include "hetens/error.hpp"
#include "oracles.hpp"

using namespace hetens;

namespace {

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name, const std::string& body) {
  const auto p = dir / name;
  std::ofstream(p) << body;
  return p;
}

Dataset labelled(std::vector<ClassId> labels) {
  std::vector<double> x(labels.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  std::size_t k = 0;
  for (auto l : labels) k = std::max<std::size_t>(k, static_cast<std::size_t>(l) + 1);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < k; ++c) names.push_back("c" + std::to_string(c));
  const std::size_t n = labels.size();
  return Dataset(n, 1, std::move(x), std::move(labels), names);
}

}  // namespace

TEST_CASE("dataset rejects broken invariants") {
  CHECK_THROWS_AS(Dataset(2, 1, {1.0, 2.0}, {0, 0}, {"a"}), DataError);
  CHECK_THROWS_AS(Dataset(2, 1, {1.0, 2.0}, {0, 2}, {"a", "b"}), DataError);
  CHECK_THROWS_AS(Dataset(2, 1, {1.0, NAN}, {0, 1}, {"a", "b"}), DataError);
  CHECK_THROWS_AS(Dataset(2, 1, {1.0}, {0, 1}, {"a", "b"}), DataError);
  CHECK_THROWS_AS(Dataset(2, 1, {1.0, 2.0}, {0, 1}, {"a", "a"}), DataError);
}

TEST_CASE("csv labels are numbered by first appearance") {
  oracle::ScopedDir dir("csv");
  const auto p = write_file(dir.path, "a.csv", "x,class\n1,yes\n2,no\n3,yes\n4,no\n");
  const Dataset ds = load_csv(p);
  CHECK(ds.size() == 4);
  CHECK(ds.num_classes() == 2);
  CHECK(ds.class_names() == std::vector<std::string>{"yes", "no"});
  CHECK(ds.label(0) == 0);
  CHECK(ds.label(1) == 1);
}

TEST_CASE("csv with a single class is rejected") {
  oracle::ScopedDir dir("csv");
  const auto p = write_file(dir.path, "a.csv", "x,class\n1,yes\n2,yes\n");
  try {
    load_csv(p);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("single-class dataset") != std::string::npos);
  }
}

TEST_CASE("categorical column becomes one-hot") {
  oracle::ScopedDir dir("csv");
  const auto p = write_file(dir.path, "a.csv", "num,col,class\n1,a,p\n2,b,q\n3,a,p\n4,c,q\n");
  CsvOptions opts;
  opts.categorical = {"col"};
  const Dataset ds = load_csv(p, opts);
  CHECK(ds.dims() == 4);
  CHECK(ds.feature_names() == std::vector<std::string>{"num", "col=a", "col=b", "col=c"});
  CHECK(ds.row(3)[3] == 1.0);
  CHECK(ds.row(3)[1] == 0.0);

  CHECK_THROWS_AS(load_csv(p), DataError);
  opts.categorical.clear();
  opts.auto_categorical = true;
  CHECK(load_csv(p, opts).dims() == 4);
}

TEST_CASE("csv errors carry a location") {
  oracle::ScopedDir dir("csv");
  auto message = [&](const std::string& body, CsvOptions opts = {}) {
    const auto p = write_file(dir.path, "e.csv", body);
    try {
      load_csv(p, opts);
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("x,class\n1,a\n?,b\n").find("line 3") != std::string::npos);
  CHECK(message("x,class\n1,a\n,b\n").find("line 3") != std::string::npos);
  CHECK(message("x,class\n1,a\n2\n").find("line 3") != std::string::npos);
  CHECK(message("x,class\n1,a\ninf,b\n").find("line 3") != std::string::npos);
  CHECK(message("x,y\n1,a\n2,b\n").find("class") != std::string::npos);
  CHECK_FALSE(message("").empty());
}

TEST_CASE("csv label column by index, delimiter and fixed class order") {
  oracle::ScopedDir dir("csv");
  const auto p = write_file(dir.path, "a.csv", "lab;x\nb;1\na;2\nb;3\n");
  CsvOptions opts;
  opts.delimiter = ';';
  opts.label_column = std::size_t{0};
  Dataset ds = load_csv(p, opts);
  CHECK(ds.class_names() == std::vector<std::string>{"b", "a"});
  opts.class_names = {"a", "b"};
  ds = load_csv(p, opts);
  CHECK(ds.label(0) == 1);
  opts.class_names = {"a", "c"};
  CHECK_THROWS_AS(load_csv(p, opts), DataError);
}

TEST_CASE("write_csv round-trips bit-exactly") {
  oracle::ScopedDir dir("csv");
  const Dataset ds = gen_threenorm(37, 5);
  write_csv(ds, dir.path / "t.csv");
  const Dataset back = load_csv(dir.path / "t.csv", CsvOptions{.class_names = ds.class_names()});
  CHECK(back.features() == ds.features());
  CHECK(back.labels() == ds.labels());
  CHECK(fingerprint(back) == fingerprint(ds));
}

TEST_CASE("stratified split sizes") {
  std::vector<ClassId> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(i % 2);
  Split s = stratified_split(labelled(labels), {2.0 / 3.0, true, 3});
  CHECK(s.train.class_counts() == std::vector<std::size_t>{20, 20});
  CHECK(s.test.class_counts() == std::vector<std::size_t>{10, 10});

  s = stratified_split(labelled({0, 0, 0, 0, 0, 0, 1, 1, 1}), {2.0 / 3.0, true, 3});
  CHECK(s.train.class_counts() == std::vector<std::size_t>{4, 2});
  CHECK(s.test.class_counts() == std::vector<std::size_t>{2, 1});

  std::set<std::size_t> all(s.train_indices.begin(), s.train_indices.end());
  all.insert(s.test_indices.begin(), s.test_indices.end());
  CHECK(all.size() == 9);
}

TEST_CASE("stratified split is seed-deterministic") {
  const Dataset ds = gen_twonorm(50, 1);
  const Split a = stratified_split(ds, {2.0 / 3.0, true, 11});
  const Split b = stratified_split(ds, {2.0 / 3.0, true, 11});
  const Split c = stratified_split(ds, {2.0 / 3.0, true, 12});
  CHECK(a.train_indices == b.train_indices);
  CHECK(a.test_indices == b.test_indices);
  CHECK(a.train_indices != c.train_indices);
}

TEST_CASE("stratified split rejects tiny classes and bad fractions") {
  CHECK_THROWS_AS(stratified_split(labelled({0, 0, 0, 1}), {2.0 / 3.0, true, 0}), DataError);
  CHECK_THROWS(stratified_split(labelled({0, 0, 1, 1}), {1.0, true, 0}));
}

TEST_CASE("subbag sizes") {
  IndexSample s = subbag(10, 0.5, 1);
  CHECK(s.indices.size() == 5);
  CHECK(std::set<std::size_t>(s.indices.begin(), s.indices.end()).size() == 5);
  for (auto i : s.indices) CHECK(i < 10);
  CHECK(subbag(7, 0.5, 1).indices.size() == 3);
  s = subbag(4, 1.0, 9);
  CHECK(std::set<std::size_t>(s.indices.begin(), s.indices.end()) == std::set<std::size_t>{0, 1, 2, 3});
  CHECK(subbag(10, 0.5, 4).indices == subbag(10, 0.5, 4).indices);
  CHECK_FALSE(s.with_replacement);
}

TEST_CASE("bootstrap") {
  CHECK(bootstrap(1, 5).indices == std::vector<std::size_t>{0});
  CHECK(bootstrap(100, 5).indices == bootstrap(100, 5).indices);
  double mean_distinct = 0.0;
  for (Seed seed = 0; seed < 200; ++seed) {
    const IndexSample s = bootstrap(100, seed);
    CHECK(s.indices.size() == 100);
    CHECK(s.with_replacement);
    const auto distinct = std::set<std::size_t>(s.indices.begin(), s.indices.end()).size();
    CHECK(distinct >= 50);
    CHECK(distinct <= 80);
    CHECK(s.out_of_bag(100).size() == 100 - distinct);
    mean_distinct += static_cast<double>(distinct) / 200.0;
  }
  CHECK(mean_distinct / 100.0 == doctest::Approx(1.0 - std::pow(0.99, 100)).epsilon(0.02));
}

TEST_CASE("synthetic generators") {
  const Dataset ds = gen_twonorm(300, 4);
  CHECK(ds.size() == 300);
  CHECK(ds.dims() == 20);
  CHECK(gen_twonorm(300, 4).features() == ds.features());
  CHECK(gen_ringnorm(50, 1).dims() == 20);
  CHECK(gen_threenorm(50, 1).dims() == 20);
  CHECK(synthetic_generator("twonorm") == &gen_twonorm);
  CHECK(synthetic_generator("nope") == nullptr);

  const Dataset big = gen_twonorm(10000, 8);
  const auto counts = big.class_counts();
  CHECK(std::abs(static_cast<double>(counts[0]) / 10000.0 - 0.5) < 0.02);
}

TEST_CASE("twonorm nearest true mean is near the Bayes rate") {
  const double a = 2.0 / std::sqrt(20.0);
  const Dataset test = gen_twonorm(2000, 99);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    double d0 = 0.0, d1 = 0.0;
    for (double v : test.row(i)) {
      d0 += (v - a) * (v - a);
      d1 += (v + a) * (v + a);
    }
    if ((d0 <= d1 ? 0 : 1) != test.label(i)) ++wrong;
  }
  CHECK(static_cast<double>(wrong) / 2000.0 <= 0.05);
}

TEST_CASE("standardizer") {
  const Dataset ds(3, 2, {1.0, 5.0, 2.0, 5.0, 3.0, 5.0}, {0, 1, 0}, {"a", "b"});
  const Standardizer s = Standardizer::fit(ds);
  CHECK(s.mean[0] == doctest::Approx(2.0));
  CHECK(s.scale[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(s.degenerate == std::vector<std::size_t>{1});
  const Dataset t = s.transform(ds);
  CHECK(t.row(1)[0] == doctest::Approx(0.0));
  CHECK(t.row(0)[1] == 5.0);
}

TEST_CASE("fingerprint distinguishes content") {
  CHECK(fingerprint(gen_twonorm(10, 1)) == fingerprint(gen_twonorm(10, 1)));
  CHECK(fingerprint(gen_twonorm(10, 1)) != fingerprint(gen_twonorm(10, 2)));
}
