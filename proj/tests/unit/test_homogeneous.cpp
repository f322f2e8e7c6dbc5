#include <doctest.h>

#include <cmath>
#include <set>

#include "hetens/error.hpp"
#include "hetens/homogeneous.hpp"
#include "oracles.hpp"

using namespace hetens;

namespace {

EnsembleOptions quick() {
  EnsembleOptions o;
  o.mlp.epochs = 40;
  return o;
}

ParamGrid small_svm_grid() { return ParamGrid({{"c", {1.0, 8.0}}, {"gamma", {0.01, 0.05}}}); }

}  // namespace

TEST_CASE("default grids") {
  const ParamGrid svm = ParamGrid::svm_default();
  CHECK(svm.size() == 399);
  CHECK(svm.axes()[0].values.size() == 21);
  CHECK(svm.axes()[1].values.size() == 19);
  CHECK(svm.hyper(LearnerKind::kSvm, 0).svm_c == std::ldexp(1.0, -5));
  CHECK(svm.hyper(LearnerKind::kSvm, 0).svm_gamma == std::ldexp(1.0, -15));
  CHECK(svm.hyper(LearnerKind::kSvm, 1).svm_gamma == std::ldexp(1.0, -14));
  CHECK(svm.hyper(LearnerKind::kSvm, 398).svm_c == std::ldexp(1.0, 15));
  CHECK(svm.hyper(LearnerKind::kSvm, 398).svm_gamma == 8.0);

  const ParamGrid mlp = ParamGrid::mlp_default();
  CHECK(mlp.size() == 8);
  CHECK(mlp.hyper(LearnerKind::kMlp, 0).mlp_hidden == 3);
  CHECK(mlp.hyper(LearnerKind::kMlp, 7).mlp_hidden == 10);
  CHECK_THROWS_AS(mlp.hyper(LearnerKind::kSvm, 0), ConfigError);
  CHECK_THROWS(ParamGrid(std::vector<ParamAxis>{ParamAxis{"c", {}}}));
}

TEST_CASE("partial optimization") {
  const Dataset ds = gen_twonorm(60, 3);
  SUBCASE("one node is returned as is") {
    const ParamGrid g({{"hidden", {4}}});
    const GridSelection s = partial_optimize(LearnerKind::kMlp, ds, g, 1, quick());
    CHECK(s.node == 0);
    CHECK(s.params.mlp_hidden == 4);
    CHECK(s.node_errors.size() == 1);
  }
  SUBCASE("ties go to the lowest node") {
    const ParamGrid g({{"c", {2.0, 2.0, 2.0}}, {"gamma", {0.05}}});
    const GridSelection s = partial_optimize(LearnerKind::kSvm, ds, g, 1, quick());
    CHECK(s.node_errors[0] == s.node_errors[1]);
    CHECK(s.node == 0);
  }
  SUBCASE("the selected node has the minimum error") {
    const GridSelection s = partial_optimize(LearnerKind::kSvm, ds, small_svm_grid(), 5, quick());
    for (double e : s.node_errors) CHECK(s.error <= e);
    CHECK(s.error == s.node_errors[s.node]);
  }
}

TEST_CASE("batch sizes") {
  CHECK(batch_sizes(10, 2) == std::vector<std::size_t>{5, 5});
  CHECK(batch_sizes(11, 3) == std::vector<std::size_t>{4, 4, 3});
  const auto paper = batch_sizes(1001, 10);
  CHECK(paper.size() == 10);
  CHECK(paper[0] == 101);
  for (std::size_t i = 1; i < 10; ++i) CHECK(paper[i] == 100);
  CHECK_THROWS_AS(batch_sizes(3, 4), ConfigError);
  CHECK_THROWS_AS(batch_sizes(3, 0), ConfigError);
}

TEST_CASE("batched ensemble") {
  const Dataset ds = gen_twonorm(41, 7);
  const HomogeneousEnsemble e = build_batched_ensemble(LearnerKind::kSvm, ds, 10, 2, small_svm_grid(), 3, quick());
  CHECK(e.size() == 10);
  CHECK(e.batch_params.size() == 2);
  for (std::size_t j = 0; j < 10; ++j) {
    CHECK(e.batch_of(j) == (j < 5 ? 0u : 1u));
    CHECK(e.models[j].hyper == e.batch_params[e.batch_of(j)]);
    CHECK(e.models[j].train_indices.indices.size() == 20);
    CHECK_FALSE(e.models[j].train_indices.with_replacement);
  }
  CHECK(e.train_fingerprint == fingerprint(ds));
  CHECK(e.train_size == 41);
  CHECK(e.scaler != nullptr);
  CHECK(e.class_names == ds.class_names());
}

TEST_CASE("random forest") {
  const Dataset ds = gen_ringnorm(100, 2);
  const HomogeneousEnsemble one = build_random_forest(ds, 1, 1);
  CHECK(one.size() == 1);
  CHECK(one.models[0].train_indices.with_replacement);
  CHECK(one.models[0].hyper.tree_mtry == 4);

  for (Seed seed = 0; seed < 20; ++seed) {
    const HomogeneousEnsemble rf = build_random_forest(ds, 5, seed);
    for (const auto& m : rf.models) CHECK_FALSE(m.train_indices.out_of_bag(100).empty());
  }

  const HomogeneousEnsemble a = build_random_forest(ds, 15, 9);
  const HomogeneousEnsemble b = build_random_forest(ds, 15, 9);
  const Dataset probe = gen_ringnorm(200, 77);
  for (std::size_t i = 0; i < probe.size(); ++i) CHECK(a.predict(probe.row(i)) == b.predict(probe.row(i)));
}

TEST_CASE("thread count does not change ensembles") {
  const Dataset ds = gen_threenorm(50, 2);
  EnsembleOptions o1 = quick(), o4 = quick();
  o4.threads = 4;
  CHECK(serialize_ensemble(build_batched_ensemble(LearnerKind::kMlp, ds, 6, 2, ParamGrid({{"hidden", {3, 5}}}), 1, o1)) ==
        serialize_ensemble(build_batched_ensemble(LearnerKind::kMlp, ds, 6, 2, ParamGrid({{"hidden", {3, 5}}}), 1, o4)));
  CHECK(serialize_ensemble(build_random_forest(ds, 7, 3, o1)) == serialize_ensemble(build_random_forest(ds, 7, 3, o4)));
}

TEST_CASE("majority vote") {
  CHECK(majority_vote(std::vector<ClassId>{1, 1, 0}, 2) == 1);
  CHECK(majority_vote(std::vector<ClassId>{0, 1}, 2) == 0);
  CHECK(majority_vote(std::vector<ClassId>{2, 1, 1, 2}, 3) == 1);
}

TEST_CASE("ensemble vote equals a brute-force tally") {
  const Dataset ds = gen_threenorm(60, 4);
  const HomogeneousEnsemble rf = build_random_forest(ds, 9, 5);
  const Dataset probe = gen_threenorm(100, 6);
  for (std::size_t i = 0; i < probe.size(); ++i) {
    std::vector<int> votes;
    for (const auto& m : rf.models) votes.push_back(m.predict(probe.row(i)));
    CHECK(ensemble_predict(rf, probe.row(i)) == oracle::tally(votes, 2));
  }
}

TEST_CASE("cross-validated grid search") {
  const Dataset ds = gen_twonorm(60, 1);
  const CvSelection cv = grid_search_cv(LearnerKind::kSvm, ds, small_svm_grid(), 5, 2, quick());
  CHECK(cv.selection.node_errors.size() == 4);
  CHECK(cv.model.train_indices.indices.size() == 60);
  CHECK(cv.model.hyper == cv.selection.params);
  CHECK_THROWS_AS(grid_search_cv(LearnerKind::kSvm, ds, small_svm_grid(), 1, 2), ConfigError);
}

TEST_CASE("container round-trip and corruption") {
  const Dataset ds = gen_twonorm(30, 5);
  for (const auto& e : {build_batched_ensemble(LearnerKind::kSvm, ds, 4, 2, small_svm_grid(), 1, quick()),
                        build_batched_ensemble(LearnerKind::kMlp, ds, 3, 1, ParamGrid({{"hidden", {3}}}), 1, quick()),
                        build_random_forest(ds, 5, 1)}) {
    const auto bytes = serialize_ensemble(e);
    const HomogeneousEnsemble back = deserialize_ensemble(bytes);
    CHECK(serialize_ensemble(back) == bytes);
    CHECK(back.class_names == e.class_names);
    CHECK(back.grid == e.grid);
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(back.predict(ds.row(i)) == e.predict(ds.row(i)));

    auto bad = bytes;
    bad[0] ^= 0xff;
    CHECK_THROWS_AS(deserialize_ensemble(bad), DataError);
    bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(deserialize_ensemble(bad), DataError);
    for (std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{9}}) {
      CHECK_THROWS_AS(deserialize_ensemble(std::span(bytes).first(cut)), DataError);
    }
  }

  oracle::ScopedDir dir("ens");
  const HomogeneousEnsemble rf = build_random_forest(ds, 3, 2);
  save_ensemble(rf, dir.path / "rf.hse");
  CHECK(serialize_ensemble(load_ensemble(dir.path / "rf.hse")) == serialize_ensemble(rf));
  CHECK_THROWS_AS(load_ensemble(dir.path / "missing.hse"), DataError);
}
