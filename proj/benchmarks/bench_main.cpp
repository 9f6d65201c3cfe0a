#include <benchmark/benchmark.h>

#include <vector>

#include "fsho/env.hpp"
#include "fsho/hmarl/ppo.hpp"
#include "fsho/optimizer.hpp"

using namespace fsho;

namespace {

void BM_EnvTimestep(benchmark::State& state) {
  EnvConfig cfg;
  cfg.n_users = static_cast<int>(state.range(0));
  Env env(cfg);
  env.reset(1);
  StaticPolicy policy(3);
  for (auto _ : state) {
    if (env.done()) env.reset(1);
    benchmark::DoNotOptimize(run_timestep(env, policy));
  }
}
BENCHMARK(BM_EnvTimestep)->Arg(50)->Arg(200);

void BM_BruteForceOptimal(benchmark::State& state) {
  Env env(EnvConfig{});
  env.reset(3);
  StaticPolicy policy(3);
  for (int i = 0; i < 20; ++i) run_timestep(env, policy);
  for (auto _ : state) benchmark::DoNotOptimize(brute_force_optimal(env));
}
BENCHMARK(BM_BruteForceOptimal)->Unit(benchmark::kMillisecond);

void BM_PolicyForward(benchmark::State& state) {
  Rng rng(1);
  const auto p = hmarl::make_policy({8, 7, 64, 2}, rng);
  const std::vector<double> obs(8, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(hmarl::forward_policy(p, obs));
}
BENCHMARK(BM_PolicyForward);

void BM_PpoUpdate(benchmark::State& state) {
  Rng rng(2);
  auto p = hmarl::make_policy({8, 7, 64, 2}, rng);
  const int n = static_cast<int>(state.range(0));
  hmarl::Trajectory traj;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < n; ++i) {
    std::vector<double> obs(8);
    for (auto& x : obs) x = u(rng);
    const auto out = hmarl::forward_policy(p, obs);
    const auto s = hmarl::sample_action(out.probs, rng);
    traj.steps.push_back({obs, s.action, s.log_prob, out.value, u(rng), i + 1 == n});
  }
  hmarl::PpoConfig cfg;
  hmarl::compute_gae(traj, cfg.gamma, cfg.gae_lambda);
  const auto batch = hmarl::make_batch(std::vector<hmarl::Trajectory>{traj});
  hmarl::Adam adam(hmarl::num_params(p), cfg.learning_rate);
  for (auto _ : state) benchmark::DoNotOptimize(hmarl::ppo_update(p, adam, batch, cfg, rng));
}
BENCHMARK(BM_PpoUpdate)->Arg(300)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
