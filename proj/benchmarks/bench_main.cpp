#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "mvgb/baselines.hpp"
#include "mvgb/boosting.hpp"
#include "mvgb/dataset.hpp"
#include "mvgb/interpret.hpp"
#include "mvgb/rng.hpp"
#include "mvgb/tree.hpp"
#include "mvgb/tuning.hpp"

namespace {

using namespace mvgb;

// Random dataset with linear signal plus noise, mirroring the unit-test
// generator: predictors standard normal, outcomes a blend of them.
Dataset synth(int n, int p, int q, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Column> cols;
  std::vector<std::vector<double>> x(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    std::vector<double> col(static_cast<std::size_t>(n));
    for (double& v : col) v = rng.normal();
    x[static_cast<std::size_t>(j)] = col;
    cols.push_back({"x" + std::to_string(j + 1), Role::predictor, col});
  }
  for (int t = 0; t < q; ++t) {
    std::vector<double> col(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double s = rng.normal();
      for (int j = 0; j < p; j += 3)
        s += 0.5 * x[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
      col[static_cast<std::size_t>(i)] = s;
    }
    cols.push_back({"y" + std::to_string(t + 1), Role::outcome, col});
  }
  return Dataset::from_columns(std::move(cols));
}

void bm_fit_tree(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int depth = static_cast<int>(state.range(1));
  const Dataset d = synth(n, 20, 2, 1);
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  TreeParams tp;
  tp.max_splits = depth;
  tp.min_node = 10;
  tp.n_surrogates = 0;
  for (auto _ : state) {
    Tree t = fit_tree(d, rows, tp);
    benchmark::DoNotOptimize(t);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bm_fit_tree)
    ->Args({500, 1})
    ->Args({500, 3})
    ->Args({2000, 3})
    ->Unit(benchmark::kMicrosecond);

// One multivariate boosting step amortized over a short run: candidate trees
// for every outcome on a shared subsample plus the covariance bookkeeping.
void bm_boost_step(benchmark::State& state) {
  const int q = static_cast<int>(state.range(0));
  const int depth = static_cast<int>(state.range(1));
  const Dataset d = synth(800, 30, q, 2);
  BoostParams p;
  p.n_trees = 50;
  p.shrinkage = 0.05;
  p.depth = depth;
  p.bag_fraction = 0.5;
  p.seed = 3;
  for (auto _ : state) {
    MvModel m = boost_multivariate(d, p);
    benchmark::DoNotOptimize(m);
  }
  state.SetItemsProcessed(state.iterations() * p.n_trees);
  state.counters["per_step_us"] = benchmark::Counter(
      static_cast<double>(p.n_trees) * state.iterations(),
      benchmark::Counter::kIsRate | benchmark::Counter::kInvert);
}
BENCHMARK(bm_boost_step)
    ->Args({2, 1})
    ->Args({5, 1})
    ->Args({5, 3})
    ->Unit(benchmark::kMillisecond);

void bm_cv_curve(benchmark::State& state) {
  const Dataset d = synth(400, 10, 3, 4);
  BoostParams p;
  p.n_trees = 100;
  p.shrinkage = 0.1;
  p.depth = 1;
  p.seed = 5;
  for (auto _ : state) {
    CvSelection sel =
        cv_select_trees(d, p, 5, 5, ScalingMode::fold_honest, nullptr, 1);
    benchmark::DoNotOptimize(sel);
  }
}
BENCHMARK(bm_cv_curve)->Unit(benchmark::kMillisecond);

void bm_partial_dependence(benchmark::State& state) {
  const int grid = static_cast<int>(state.range(0));
  const Dataset d = synth(1000, 20, 2, 6);
  BoostParams p;
  p.n_trees = 200;
  p.shrinkage = 0.05;
  p.depth = 3;
  p.seed = 7;
  const MvModel m = boost_multivariate(d, p);
  for (auto _ : state) {
    PdpResult r = partial_dependence(m, {0, 1}, 0, grid, d);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * grid * grid);
}
BENCHMARK(bm_partial_dependence)
    ->Arg(20)
    ->Arg(100)
    ->Unit(benchmark::kMillisecond);

void bm_mvcart(benchmark::State& state) {
  const Dataset d = synth(500, 20, 3, 8);
  MvCartParams p;
  p.cp = 0.005;
  p.k_prune = 10;
  p.n_surrogates = 0;
  p.seed = 9;
  for (auto _ : state) {
    MvCartResult r = fit_mvcart(d, p);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(bm_mvcart)->Unit(benchmark::kMillisecond);

void bm_wilks(benchmark::State& state) {
  const Dataset d = synth(1000, 50, 5, 10);
  for (auto _ : state) {
    WilksResult w = wilks_screen(d);
    benchmark::DoNotOptimize(w);
  }
  state.SetItemsProcessed(state.iterations() * 50);
}
BENCHMARK(bm_wilks)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
