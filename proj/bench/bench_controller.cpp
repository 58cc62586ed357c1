// Controller throughput: OpenMP candidate evaluation against the serial
// reference, plus one full episode step loop.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "wnum/controller.hpp"
#include "wnum/environment.hpp"
#include "wnum/planner.hpp"

using namespace wnum;

namespace {

struct Scene {
  AgentState self;
  std::vector<ObservedState> others;
  control::WindingPlan plan;
};

Scene make_scene(int n_others) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Scene s;
  s.self.goal = {3, 1};
  for (int j = 0; j < n_others; ++j) {
    s.others.push_back({j + 1, {u(rng), u(rng)}, {0.1 * u(rng), 0.1 * u(rng)}, 0.15});
    s.plan.set(j + 1, 0.3, 5.0);
  }
  return s;
}

void BM_Solve(benchmark::State& state) {
  const Scene s = make_scene(static_cast<int>(state.range(0)));
  control::ControllerConfig cfg;
  cfg.num_candidates = static_cast<int>(state.range(1));
  const DynamicsConfig dyn;
  for (auto _ : state) benchmark::DoNotOptimize(control::solve(s.self, s.others, s.plan, cfg, dyn));
  state.SetItemsProcessed(state.iterations() * (cfg.num_candidates + 2));
}

void BM_SolveSerial(benchmark::State& state) {
  const Scene s = make_scene(static_cast<int>(state.range(0)));
  control::ControllerConfig cfg;
  cfg.num_candidates = static_cast<int>(state.range(1));
  const DynamicsConfig dyn;
  for (auto _ : state) benchmark::DoNotOptimize(control::solve_serial(s.self, s.others, s.plan, cfg, dyn));
  state.SetItemsProcessed(state.iterations() * (cfg.num_candidates + 2));
}

void BM_Episode(benchmark::State& state) {
  env::ScenarioConfig scen;
  scen.n_agents = static_cast<int>(state.range(0));
  scen.mode = env::ScenarioMode::kCrossing;
  scen.rng_seed = 3;
  const env::Instance inst = env::generate_instance(scen);
  std::int64_t steps = 0;
  for (auto _ : state) {
    planner::ConstantPlanner tmpc(0.0, -3.0);
    const auto r = env::run_episode(inst, tmpc, control::ControllerConfig{}, DynamicsConfig{}, env::EpisodeLimits{});
    steps += r.steps;
  }
  state.counters["steps/s"] = benchmark::Counter(static_cast<double>(steps), benchmark::Counter::kIsRate);
}

}  // namespace

BENCHMARK(BM_Solve)->Args({3, 256})->Args({7, 256})->Args({7, 1024});
BENCHMARK(BM_SolveSerial)->Args({3, 256})->Args({7, 256})->Args({7, 1024});
BENCHMARK(BM_Episode)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
