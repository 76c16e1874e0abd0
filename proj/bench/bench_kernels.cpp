// Serial reference vs OpenMP kernels.

#include "qasched/dynamics.hpp"
#include "qasched/ising.hpp"
#include "qasched/lstm.hpp"
#include "qasched/schedule.hpp"
#include "qasched/spectral.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace qasched;

namespace {

Execution mode(const benchmark::State& state) {
  return state.range(0) ? Execution::parallel : Execution::serial;
}

void label(benchmark::State& state) { state.SetLabel(state.range(0) ? "parallel" : "serial"); }

void BM_GapProfile(benchmark::State& state) {
  const auto inst = sample_instance(Topology{TopologyKind::nearest_neighbor_periodic, {}, {}}, 6, 3);
  ProfileOptions o;
  o.n_grid = 200;
  o.execution = mode(state);
  for (auto _ : state) benchmark::DoNotOptimize(gap_profile(inst, o));
  label(state);
}
BENCHMARK(BM_GapProfile)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_EvolveBatch(benchmark::State& state) {
  std::vector<AnnealJob> jobs;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto inst = sample_instance(Topology{TopologyKind::nearest_neighbor_open, {}, {}}, 4, seed);
    jobs.push_back({inst, linear_schedule(10.0)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(evolve_batch(jobs, {}, mode(state)));
  label(state);
}
BENCHMARK(BM_EvolveBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BatchGradient(benchmark::State& state) {
  const LstmModel model = init_model({64, 64}, kSchedulePoints, 0.2, 1);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  Eigen::MatrixXd x(7, 64), y(kSchedulePoints, 64);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = 2 * u(rng) - 1;
  for (Eigen::Index k = 0; k < y.size(); ++k) y.data()[k] = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(batch_gradient(model, x, y, 1, 0, mode(state)));
  label(state);
}
BENCHMARK(BM_BatchGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
