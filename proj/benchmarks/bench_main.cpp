#include <cstddef>
#include <vector>

#include <benchmark/benchmark.h>

#include "calibra/audit.hpp"
#include "calibra/batch.hpp"
#include "calibra/dataset.hpp"
#include "calibra/matrix_game.hpp"
#include "calibra/online.hpp"
#include "calibra/property.hpp"

namespace {

using namespace calibra;

ExactDataset bench_dataset() { return synth_bounded_density(16, 64, 0.5, 2.0, 11); }

GroupFamily bench_groups(const ExactDataset& data) {
  std::vector<GroupPredicate> preds;
  for (int lo = 0; lo < 16; lo += 4)
    preds.push_back({"g" + std::to_string(lo), "idx", GroupPredicate::Op::in_range,
                     {static_cast<double>(lo), static_cast<double>(lo + 4)}});
  return groups_from_config(preds, data);
}

void BM_BatchMean(benchmark::State& state) {
  const ExactDataset data = bench_dataset();
  const GroupFamily groups = bench_groups(data);
  const PropertySpec prop = mean_property();
  for (auto _ : state) {
    BatchResult res = batch_multicalibrate(prop, data, groups, 19);
    benchmark::DoNotOptimize(res.predictor.current.data());
  }
}
BENCHMARK(BM_BatchMean);

void BM_BatchQuantile(benchmark::State& state) {
  const ExactDataset data = bench_dataset();
  const GroupFamily groups = bench_groups(data);
  const PropertySpec prop = quantile_property(0.5, 2.0);
  for (auto _ : state) {
    BatchResult res = batch_multicalibrate(prop, data, groups, 20);
    benchmark::DoNotOptimize(res.predictor.current.data());
  }
}
BENCHMARK(BM_BatchQuantile);

void BM_AuditV(benchmark::State& state) {
  const ExactDataset data = bench_dataset();
  const GroupFamily groups = bench_groups(data);
  const PropertySpec prop = mean_property();
  const std::vector<double> values(data.cells.size(), 0.5);
  for (auto _ : state) {
    CalibrationReport rep = batch_error_v(values, data, groups, prop.id_eval);
    benchmark::DoNotOptimize(rep.max_alpha_equivalent);
  }
}
BENCHMARK(BM_AuditV);

void BM_StageGame(benchmark::State& state) {
  const std::size_t rows = static_cast<std::size_t>(state.range(0));
  const std::size_t cols = 21;
  std::vector<std::vector<double>> a(rows, std::vector<double>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      a[i][j] = 2.0 * unit_uniform(99, i * cols + j, 0) - 1.0;
  for (auto _ : state) {
    StageGameSolution sol = solve_stage_game(a);
    benchmark::DoNotOptimize(sol.value);
  }
}
BENCHMARK(BM_StageGame)->Arg(20)->Arg(80);

void BM_OnlineRun(benchmark::State& state) {
  const PropertySpec prop = quantile_property(0.5, 2.0);
  OnlineConfig cfg;
  cfg.m = 10;
  cfg.T = 200;
  cfg.C = prop.id_bound_C;
  cfg.label_points = 51;
  GroupFamily gf;
  gf.groups.push_back({"all", {1, 1}});
  gf.groups.push_back({"g0", {1, 0}});
  const Adversary adv = iid_window_adversary(0.2, 0.7, 2, cfg.label_points, 2.0);
  for (auto _ : state) {
    cfg.seed = 7;
    OnlineResult res = run_online(prop.id_eval, cfg, gf, {"c0", "c1"}, adv);
    benchmark::DoNotOptimize(res.max_alpha);
  }
}
BENCHMARK(BM_OnlineRun);

}  // namespace

BENCHMARK_MAIN();
