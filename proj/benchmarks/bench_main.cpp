#include <benchmark/benchmark.h>

#include "causalsafe/causal_q.hpp"
#include "causalsafe/certificate.hpp"
#include "causalsafe/environments.hpp"
#include "causalsafe/evaluation.hpp"
#include "causalsafe/offline_tables.hpp"
#include "causalsafe/oracle.hpp"

namespace {

using namespace causalsafe;

TabularPolicy uniform_for(const ConfoundedMdpModel& m) {
  return TabularPolicy::uniform(m.num_states(), m.horizon(), m.num_actions());
}

void BM_DrivingEnvBuild(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(build_driving_env(10));
}
BENCHMARK(BM_DrivingEnvBuild)->Unit(benchmark::kMillisecond);

void BM_DrivingOracle(benchmark::State& state) {
  const Environment env = build_driving_env(static_cast<int>(state.range(0)));
  const TabularPolicy pi = uniform_for(env.model);
  for (auto _ : state) benchmark::DoNotOptimize(solve_oracle(env.model, pi));
}
BENCHMARK(BM_DrivingOracle)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_ControlEpisode(benchmark::State& state) {
  const Environment env = build_driving_env(10);
  const TabularPolicy pi = uniform_for(env.model);
  const auto values = env.model.action_values();
  const CertificateController controller("proposed", q_dp(env.model, pi), pi,
                                         CertificateConfig{},
                                         {values.begin(), values.end()});
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        run_control_episode(env.model, controller, pi, 0, seed++));
  }
}
BENCHMARK(BM_ControlEpisode);

void BM_ExactCurves(benchmark::State& state) {
  const Environment env = build_driving_env(10);
  const TabularPolicy pi = uniform_for(env.model);
  const OracleSolution oracle = solve_oracle(env.model, pi);
  const auto values = env.model.action_values();
  const CertificateController controller("proposed", oracle.q, pi,
                                         CertificateConfig{},
                                         {values.begin(), values.end()});
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        exact_curves(env.model, controller, pi, oracle.value, 0));
  }
}
BENCHMARK(BM_ExactCurves)->Unit(benchmark::kMillisecond);

void BM_FittedQmExact(benchmark::State& state) {
  const Environment env = build_mediator_toy_env(static_cast<int>(state.range(0)));
  const TabularPolicy pi = uniform_for(env.model);
  const OfflineTables tables = exact_offline_tables(env);
  for (auto _ : state) benchmark::DoNotOptimize(fitted_qm(env.model, tables, pi));
}
BENCHMARK(BM_FittedQmExact)->Arg(3)->Arg(50);

void BM_EmpiricalTables(benchmark::State& state) {
  const Environment env = build_mediator_toy_env(3);
  const EpisodeDataset data =
      convert_dataset(generate_offline(env, 10000, 0, 7), env.model);
  for (auto _ : state) {
    benchmark::DoNotOptimize(empirical_offline_tables(data, 2, 2, 2));
  }
}
BENCHMARK(BM_EmpiricalTables)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
