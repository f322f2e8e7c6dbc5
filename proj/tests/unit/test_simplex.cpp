#include <doctest.h>

#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "hetens/error.hpp"
#include "hetens/simplex.hpp"
#include "oracles.hpp"

using namespace hetens;

namespace {

Dataset line_data(std::vector<ClassId> y) {
  std::vector<double> x(y.size());
  std::iota(x.begin(), x.end(), 0.0);
  const std::size_t n = y.size();
  return Dataset(n, 1, std::move(x), std::move(y), {"a", "b"});
}

BaseModel constant(ClassId label, std::vector<std::size_t> train) {
  BaseModel m;
  m.kind = LearnerKind::kTree;
  m.dims = 1;
  m.num_classes = 2;
  m.train_indices.indices = std::move(train);
  TreeModel t;
  t.nodes.push_back(TreeNode{-1, 0.0, -1, -1, label});
  m.payload = t;
  return m;
}

HomogeneousEnsemble tagged(LearnerKind kind, std::size_t size, ClassId label, const Dataset& ds) {
  HomogeneousEnsemble e;
  e.kind = kind;
  e.train_fingerprint = fingerprint(ds);
  e.train_size = ds.size();
  for (std::size_t i = 0; i < size; ++i) e.models.push_back(constant(label, {i % ds.size()}));
  return e;
}

std::vector<HomogeneousEnsemble> real_ensembles(const Dataset& ds, std::size_t t, Seed seed) {
  EnsembleOptions o;
  o.mlp.epochs = 30;
  std::vector<HomogeneousEnsemble> out;
  out.push_back(build_batched_ensemble(LearnerKind::kSvm, ds, t, 1, ParamGrid({{"c", {4.0}}, {"gamma", {0.05}}}), seed, o));
  out.push_back(build_batched_ensemble(LearnerKind::kMlp, ds, t, 1, ParamGrid({{"hidden", {3}}}), seed, o));
  out.push_back(build_random_forest(ds, t, seed, o));
  return out;
}

std::vector<std::string> lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("composition counts") {
  CHECK(enumerate_compositions(101, 3, 1).size() == 5253);
  CHECK(enumerate_compositions(1001, 3, 13).size() == 3081);
  const auto one = enumerate_compositions(3, 1, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].counts == std::vector<std::size_t>{3});
  CHECK(enumerate_compositions(30, 3, 10).size() == 10);
}

TEST_CASE("composition counts agree with Pascal's triangle") {
  for (std::size_t m = 1; m <= 4; ++m) {
    for (std::size_t q = 1; q <= 30; ++q) {
      for (std::size_t s : {1, 2, 5}) {
        const auto comps = enumerate_compositions(q * s, m, s);
        CHECK(comps.size() == oracle::binomial(q + m - 1, m - 1));
      }
    }
  }
}

TEST_CASE("compositions are ordered, distinct and on the stride grid") {
  const auto comps = enumerate_compositions(24, 3, 4);
  CHECK(std::is_sorted(comps.begin(), comps.end()));
  CHECK(std::set<Composition>(comps.begin(), comps.end()).size() == comps.size());
  for (const auto& c : comps) {
    CHECK(c.total() == 24);
    for (auto v : c.counts) CHECK(v % 4 == 0);
  }
  CHECK(comps.front().counts == std::vector<std::size_t>{0, 0, 24});
  CHECK(comps.back().counts == std::vector<std::size_t>{24, 0, 0});
}

TEST_CASE("exact mode refuses a stride that does not divide t") {
  try {
    enumerate_compositions(101, 3, 13);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "stride 13 does not divide t = 101");
  }
}

TEST_CASE("apportioned mode") {
  const auto comps = enumerate_compositions(101, 3, 13, StrideMode::kApportioned);
  CHECK(comps.size() == oracle::binomial(7 + 2, 2));
  CHECK(std::set<Composition>(comps.begin(), comps.end()).size() == comps.size());
  std::set<Composition> all(comps.begin(), comps.end());
  for (const auto& c : comps) CHECK(c.total() == 101);
  CHECK(all.count(Composition{{101, 0, 0}}));
  CHECK(all.count(Composition{{0, 101, 0}}));
  CHECK(all.count(Composition{{0, 0, 101}}));
  CHECK(enumerate_compositions(30, 3, 10, StrideMode::kApportioned) == enumerate_compositions(30, 3, 10));
}

TEST_CASE("apportion") {
  CHECK(apportion(std::vector<double>{3.5, 3.5, 3.0}, 10) == std::vector<std::size_t>{4, 3, 3});
  CHECK(apportion(std::vector<double>{5.0, 5.0, 0.0}, 10) == std::vector<std::size_t>{5, 5, 0});
  CHECK(apportion(std::vector<double>{1.2, 1.7, 7.1}, 10) == std::vector<std::size_t>{1, 2, 7});
}

TEST_CASE("pooling takes prefixes") {
  const Dataset ds = line_data({0, 1, 0, 1});
  std::vector<HomogeneousEnsemble> es{tagged(LearnerKind::kSvm, 3, 0, ds), tagged(LearnerKind::kMlp, 3, 1, ds),
                                      tagged(LearnerKind::kTree, 3, 0, ds)};
  PooledModels p = pool(es, Composition{{2, 1, 0}});
  REQUIRE(p.size() == 3);
  CHECK(p[0] == &es[0].models[0]);
  CHECK(p[1] == &es[0].models[1]);
  CHECK(p[2] == &es[1].models[0]);

  p = pool(es, Composition{{3, 0, 0}});
  CHECK(p == PooledModels{&es[0].models[0], &es[0].models[1], &es[0].models[2]});
  p = pool(es, Composition{{0, 0, 3}});
  CHECK(p == PooledModels{&es[2].models[0], &es[2].models[1], &es[2].models[2]});

  CHECK_THROWS_AS(pool(es, Composition{{4, 0, 0}}), ConfigError);
  CHECK_THROWS_AS(pool(es, Composition{{1, 1}}), ConfigError);
  es[1].train_fingerprint ^= 1;
  CHECK_THROWS_AS(pool(es, Composition{{1, 1, 1}}), DataError);
}

TEST_CASE("out-of-bag error") {
  const Dataset ds = line_data({0, 0, 0, 1, 1});
  SUBCASE("one model covers only its out-of-bag row") {
    const BaseModel m = constant(1, {0, 1, 2, 3});
    const OobEstimate e = oob_error(PooledModels{&m}, ds);
    CHECK(e.covered_fraction == doctest::Approx(1.0 / 5.0));
    CHECK(e.error == 0.0);
  }
  SUBCASE("constant majority predictor errs on the minority") {
    const BaseModel a = constant(0, {0}), b = constant(0, {4});
    const OobEstimate e = oob_error(PooledModels{&a, &b}, ds);
    CHECK(e.covered_fraction == 1.0);
    CHECK(e.error == doctest::Approx(2.0 / 5.0));
  }
  SUBCASE("duplicating every model leaves the error unchanged") {
    const Dataset tw = gen_twonorm(40, 1);
    const HomogeneousEnsemble rf = build_random_forest(tw, 7, 2);
    PooledModels once, twice;
    for (const auto& m : rf.models) {
      once.push_back(&m);
      twice.push_back(&m);
      twice.push_back(&m);
    }
    const auto a = oob_error(once, tw), b = oob_error(twice, tw);
    CHECK(a.error == b.error);
    CHECK(a.covered_fraction == b.covered_fraction);
  }
  SUBCASE("no coverage at all") {
    const BaseModel m = constant(0, {0, 1, 2, 3, 4});
    const OobEstimate e = oob_error(PooledModels{&m}, ds);
    CHECK(e.covered_fraction == 0.0);
  }
}

TEST_CASE("vote cache equals direct out-of-bag tallies") {
  const Dataset ds = gen_ringnorm(50, 3);
  const auto es = real_ensembles(ds, 8, 4);
  const OobVoteCache cache(es, ds, 2);
  for (const auto& c : enumerate_compositions(8, 3, 1)) {
    const auto direct = oob_error(pool(es, c), ds);
    const auto cached = cache.evaluate(c);
    CHECK(cached.error == direct.error);
    CHECK(cached.covered_fraction == direct.covered_fraction);
  }
}

TEST_CASE("scan") {
  const Dataset ds = gen_twonorm(50, 9);
  const auto es = real_ensembles(ds, 12, 1);
  SUBCASE("one ensemble") {
    const SimplexScan s = scan_simplex(std::span(es).first(1), 12, 1, ds);
    CHECK(s.entries.size() == 1);
    CHECK(s.optimum.counts == std::vector<std::size_t>{12});
  }
  SUBCASE("three ensembles") {
    const SimplexScan s = scan_simplex(es, 12, 3, ds);
    CHECK(s.entries.size() == 15);
    double best = 1.0;
    for (const auto& e : s.entries) best = std::min(best, e.oob_error);
    CHECK(s.min_error == best);
    for (const auto& m : s.minima) {
      const auto it = std::find_if(s.entries.begin(), s.entries.end(), [&](const ScanEntry& e) { return e.composition == m; });
      REQUIRE(it != s.entries.end());
      CHECK(it->oob_error == best);
    }
    for (std::size_t j = 0; j < 3; ++j) {
      Composition vertex{{0, 0, 0}};
      vertex.counts[j] = 12;
      PooledModels members;
      for (const auto& m : es[j].models) members.push_back(&m);
      const auto direct = oob_error(members, ds);
      const auto it = std::find_if(s.entries.begin(), s.entries.end(),
                                   [&](const ScanEntry& e) { return e.composition == vertex; });
      REQUIRE(it != s.entries.end());
      CHECK(it->oob_error == direct.error);
    }
    CHECK(scan_simplex(es, 12, 3, ds, StrideMode::kExact, 3).entries.size() == 15);
  }
  SUBCASE("scan count on the paper-sized simplex") {
    const auto big = real_ensembles(ds, 101, 2);
    CHECK(scan_simplex(big, 101, 1, ds).entries.size() == 5253);
  }
  SUBCASE("mismatched training data") {
    CHECK_THROWS_AS(scan_simplex(es, 12, 3, gen_twonorm(50, 10)), DataError);
  }
}

TEST_CASE("optimum selection") {
  auto entry = [](std::vector<std::size_t> c, double err) { return ScanEntry{Composition{std::move(c)}, err, 1.0}; };
  std::vector<ScanEntry> es{entry({13, 0, 88}, 0.1), entry({0, 13, 88}, 0.2), entry({101, 0, 0}, 0.3)};
  CHECK(select_optimum(es, 101).counts == std::vector<std::size_t>{13, 0, 88});

  es = {entry({10, 0, 0}, 0.1), entry({0, 10, 0}, 0.1), entry({0, 0, 10}, 0.2)};
  CHECK(select_optimum(es, 10).counts == std::vector<std::size_t>{5, 5, 0});

  es = {entry({3, 3, 4}, 0.1), entry({4, 4, 2}, 0.1), entry({0, 0, 10}, 0.2)};
  CHECK(select_optimum(es, 10).counts == std::vector<std::size_t>{4, 3, 3});
}

TEST_CASE("scan and heatmap files") {
  const Dataset ds = gen_twonorm(40, 2);
  const auto es = real_ensembles(ds, 6, 3);
  const SimplexScan s = scan_simplex(es, 6, 2, ds);
  oracle::ScopedDir dir("scan");
  write_scan_csv(s, dir.path / "scan.csv");
  export_heatmap(s, dir.path / "heat.csv");
  const auto scan_rows = lines(dir.path / "scan.csv");
  CHECK(scan_rows.size() == s.entries.size() + 1);
  CHECK(scan_rows[0] == "t_svm,t_mlp,t_tree,oob_error,covered_fraction,is_minimum,is_optimum");
  std::size_t flagged = 0;
  for (std::size_t i = 1; i < scan_rows.size(); ++i) flagged += scan_rows[i].ends_with(",1");
  CHECK(flagged <= 1);

  const auto heat = lines(dir.path / "heat.csv");
  CHECK(heat[0] == "t_svm,t_mlp,t_tree,x,y,oob_error,covered_fraction,row_type");
  std::size_t entries = 0;
  for (const auto& l : heat) {
    entries += l.ends_with(",entry");
    if (l.starts_with("0,6,0,")) CHECK(l.find("0,6,0,6,0,") == 0);
    if (l.starts_with("6,0,0,") && l.ends_with(",entry")) CHECK(l.find("6,0,0,0,6,") == 0);
  }
  CHECK(entries == s.entries.size());
  CHECK(heat.back().ends_with(",optimum"));

  CHECK_THROWS_AS(export_heatmap(scan_simplex(std::span(es).first(2), 6, 2, ds), dir.path / "bad.csv"), ConfigError);
}
