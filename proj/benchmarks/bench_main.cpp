#include <benchmark/benchmark.h>

#include "rffpsr/datagen.hpp"
#include "rffpsr/features.hpp"
#include "rffpsr/filter.hpp"
#include "rffpsr/log.hpp"
#include "rffpsr/random.hpp"
#include "rffpsr/refine.hpp"

namespace rffpsr {
namespace {

void BM_RffApplyColumns(benchmark::State& state) {
  const RffMap map(20, state.range(0), 1.0, 1);
  Rng rng(2);
  const Mat x = gaussian_matrix(20, 1000, rng);
  for (auto _ : state) benchmark::DoNotOptimize(map.apply_columns(x));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_RffApplyColumns)->Arg(500)->Arg(2000);

void BM_RandomizedSvd(benchmark::State& state) {
  Rng rng(3);
  const Mat x = gaussian_matrix(state.range(0), 2000, rng);
  for (auto _ : state) benchmark::DoNotOptimize(randomized_svd(x, 20));
}
BENCHMARK(BM_RandomizedSvd)->Arg(1000)->Arg(4000);

Dataset benchmark_data(std::size_t n) {
  BenchmarkOptions o;
  o.n_traj = n;
  o.length = 100;
  return simulate_benchmark(o);
}

Hyperparams default_hp() {
  Hyperparams hp;
  hp.spec = {10, 20};
  hp.features.num_freq = 2000;
  hp.features.pca_dim = 20;
  hp.lambda1 = hp.lambda2 = 1e-2;
  return hp;
}

void BM_LearnRffPsr(benchmark::State& state) {
  set_log_level(LogLevel::quiet);
  const Dataset ds = benchmark_data(static_cast<std::size_t>(state.range(0)));
  const Hyperparams hp = default_hp();
  for (auto _ : state) benchmark::DoNotOptimize(learn_rff_psr(ds, hp));
}
BENCHMARK(BM_LearnRffPsr)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_FilterUpdate(benchmark::State& state) {
  set_log_level(LogLevel::quiet);
  const Dataset ds = benchmark_data(20);
  const RffPsrModel m = learn_rff_psr(ds, default_hp());
  const Trajectory& tr = ds.trajectories.front();
  Eigen::Index t = 0;
  Vec q = m.q0;
  for (auto _ : state) {
    q = filter_update(m, q, tr.observations.col(t), tr.actions.col(t));
    if (++t == tr.length()) {
      t = 0;
      q = m.q0;
    }
  }
}
BENCHMARK(BM_FilterUpdate);

void BM_BpttGradients(benchmark::State& state) {
  set_log_level(LogLevel::quiet);
  const Dataset ds = benchmark_data(20);
  const RffPsrModel m = learn_rff_psr(ds, default_hp());
  const FilterOptions opts = filter_options(m);
  for (auto _ : state) benchmark::DoNotOptimize(bptt_gradients(m, ds.trajectories.front(), opts));
}
BENCHMARK(BM_BpttGradients)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace rffpsr

BENCHMARK_MAIN();
