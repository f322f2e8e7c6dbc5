#include <benchmark/benchmark.h>

#include <numeric>

#include "hetens/eval.hpp"
#include "hetens/homogeneous.hpp"
#include "hetens/simplex.hpp"

using namespace hetens;

namespace {

IndexSample first_rows(std::size_t n) {
  IndexSample s;
  s.indices.resize(n);
  std::iota(s.indices.begin(), s.indices.end(), 0);
  return s;
}

void BM_SmoTwonorm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Dataset ds = Standardizer::fit(gen_twonorm(n, 1)).transform(gen_twonorm(n, 1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_svm(ds, first_rows(n), 1.0, 0.05));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SmoTwonorm)->RangeMultiplier(2)->Range(64, 512)->Complexity();

void BM_TreeBootstrap(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Dataset ds = gen_ringnorm(n, 2);
  Seed seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_tree(ds, bootstrap(n, seed), kDefaultMtry, seed));
    ++seed;
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_TreeBootstrap)->RangeMultiplier(2)->Range(128, 2048)->Complexity();

void BM_MlpEpochs(benchmark::State& state) {
  const Dataset ds = gen_twonorm(150, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_mlp(ds, first_rows(150), static_cast<std::size_t>(state.range(0)), 1));
  }
}
BENCHMARK(BM_MlpEpochs)->Arg(3)->Arg(10);

/// Full simplex scan over three 101-member ensembles.
void BM_SimplexScan(benchmark::State& state) {
  const Dataset ds = gen_twonorm(300, 4);
  EnsembleOptions o;
  o.mlp.epochs = 50;
  std::vector<HomogeneousEnsemble> es;
  es.push_back(build_batched_ensemble(LearnerKind::kSvm, ds, 101, 5, ParamGrid({{"c", {1.0, 4.0}}, {"gamma", {0.02}}}), 1, o));
  es.push_back(build_batched_ensemble(LearnerKind::kMlp, ds, 101, 5, ParamGrid({{"hidden", {3}}}), 1, o));
  es.push_back(build_random_forest(ds, 101, 1, o));
  const auto stride = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(scan_simplex(es, 101, stride, ds, StrideMode::kApportioned));
  }
}
BENCHMARK(BM_SimplexScan)->Arg(1)->Arg(13)->Unit(benchmark::kMillisecond);

/// Training cost of the partially optimized SVM ensemble against a single
/// SVM tuned by 10-fold cross-validated grid search, both on the full grid.
void BM_EsvmEnsemble(benchmark::State& state) {
  const Dataset ds = gen_twonorm(300, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_batched_ensemble(LearnerKind::kSvm, ds, 101, 5, ParamGrid::svm_default(), 1));
  }
}
BENCHMARK(BM_EsvmEnsemble)->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_SingleSvmGridSearch(benchmark::State& state) {
  const Dataset ds = gen_twonorm(300, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(grid_search_cv(LearnerKind::kSvm, ds, ParamGrid::svm_default(), 10, 1));
  }
}
BENCHMARK(BM_SingleSvmGridSearch)->Unit(benchmark::kMillisecond)->Iterations(1);

}  // namespace

BENCHMARK_MAIN();
