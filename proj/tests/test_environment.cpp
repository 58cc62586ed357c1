#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "wnum/environment.hpp"
#include "wnum/errors.hpp"
#include "wnum/planner.hpp"

using namespace wnum;
using namespace wnum::env;
using doctest::Approx;

namespace {

WorldState two_agents(Vec2 a, Vec2 b) {
  Instance inst;
  inst.starts = {a, b};
  inst.goals = {{10, 10}, {-10, -10}};
  return make_world(inst);
}

}  // namespace

TEST_CASE("generate_instance") {
  ScenarioConfig cfg;
  cfg.mode = ScenarioMode::kCrossing;
  cfg.n_agents = 6;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    cfg.rng_seed = seed;
    const auto inst = generate_instance(cfg);
    REQUIRE(inst.size() == 6);
    for (int i = 0; i < 6; ++i) {
      const double r = norm(inst.starts[i]);
      CHECK(r >= 2.0 - 0.4 * std::sqrt(2.0) - 1e-12);
      CHECK(r <= 2.0 + 0.4 * std::sqrt(2.0) + 1e-12);
      CHECK(inst.goals[i] == -inst.starts[i]);
      for (int j = i + 1; j < 6; ++j) CHECK(norm(inst.starts[i] - inst.starts[j]) >= 0.6);
    }
  }

  cfg.center = {1, -1};
  cfg.n_agents = 2;
  const auto shifted = generate_instance(cfg);
  CHECK(shifted.goals[0].x == Approx(2.0 * 1 - shifted.starts[0].x));
  CHECK(shifted.goals[0].y == Approx(2.0 * -1 - shifted.starts[0].y));

  cfg = ScenarioConfig{};
  cfg.mode = ScenarioMode::kRandom;
  cfg.n_agents = 5;
  cfg.rng_seed = 77;
  const auto a = generate_instance(cfg);
  const auto b = generate_instance(cfg);
  CHECK(a.starts == b.starts);
  CHECK(a.goals == b.goals);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      CHECK(norm(a.goals[i] - a.starts[j]) >= 0.6);
      if (i != j) CHECK(norm(a.goals[i] - a.goals[j]) >= 0.6);
    }
  }

  cfg.n_agents = 40;
  CHECK_THROWS_AS(generate_instance(cfg), InfeasibleScenarioError);
  cfg.n_agents = 1;
  CHECK_THROWS(generate_instance(cfg));
}

TEST_CASE("step_world") {
  Instance inst;
  inst.starts = {{0, 0}, {3, 0}};
  inst.goals = {{0.84, 0}, {3, 3}};
  WorldState w = make_world(inst);
  CHECK(w.agents[0].heading == 0.0);
  CHECK(w.agents[1].heading == Approx(kPi / 2));

  const std::vector<Action> zero(2);
  const auto z = step_world(w, zero, DynamicsConfig{}, 0.1);
  CHECK(z.agents[0].position == w.agents[0].position);
  CHECK(z.agents[1].position == w.agents[1].position);
  CHECK(z.step == 1);
  CHECK_THROWS_AS(step_world(w, std::vector<Action>(1), DynamicsConfig{}, 0.1), ShapeError);

  // straight run, capped at the remaining distance
  const DynamicsConfig dyn;
  int steps = 0;
  while (!w.frozen[0]) {
    const double rem = inst.goals[0].x - w.agents[0].position.x;
    const std::vector<Action> u{{std::min(dyn.v_max, rem / dyn.dt), 0.0}, {}};
    w = step_world(w, u, dyn, 1e-9);
    ++steps;
    REQUIRE(steps < 100);
  }
  CHECK(steps == static_cast<int>(std::ceil(0.84 / (dyn.v_max * dyn.dt))));
  CHECK(w.agents[0].velocity == Vec2{0, 0});

  const Vec2 held = w.agents[0].position;
  const std::vector<Action> push{{0.8, 0.0}, {}};
  w = step_world(w, push, dyn, 1e-9);
  CHECK(w.agents[0].position == held);
  CHECK(w.frozen[0]);
}

TEST_CASE("detect_collision") {
  CHECK_FALSE(detect_collision(two_agents({0, 0}, {0.31, 0})));
  const auto hit = detect_collision(two_agents({0, 0}, {0.29, 0}));
  REQUIRE(hit);
  CHECK(hit->first == 0);
  CHECK(hit->second == 1);
  auto w = two_agents({0, 0}, {0.2, 0});
  w.frozen = {true, true};
  CHECK(detect_collision(w));
  CHECK(min_clearance(two_agents({0, 0}, {1, 0}), 0) == Approx(0.7));
}

TEST_CASE("extra_time_to_goal") {
  EpisodeResult r;
  r.outcome = Outcome::kSuccess;
  r.instance.starts = {{0, 0}};
  r.instance.goals = {{4, 0}};
  r.arrival_time = {10.0};
  CHECK(extra_time_to_goal(r, 0.8) == Approx(5.0));

  r.instance.starts = {{0, 0}, {0, 0}};
  r.instance.goals = {{0.8, 0}, {0, 0.8}};
  r.arrival_time = {2.0, 4.0};
  CHECK(extra_time_to_goal(r, 0.8) == Approx(2.0));

  r.outcome = Outcome::kTimeout;
  CHECK_THROWS_AS(extra_time_to_goal(r, 0.8), MetricUndefinedError);
}

TEST_CASE("single agent reaches its goal") {
  Instance inst;
  inst.starts = {{-2, 0.3}};
  inst.goals = {{2, -0.3}};
  planner::ConstantPlanner vanilla(0.0, 0.0);
  const auto res = run_episode(inst, vanilla, control::ControllerConfig{}, DynamicsConfig{}, EpisodeLimits{});
  CHECK(res.outcome == Outcome::kSuccess);
  CHECK(std::abs(res.extra_time) <= 0.2);
  CHECK(res.trajectory.size() == static_cast<std::size_t>(res.steps + 1));
  CHECK(res.actions.size() == static_cast<std::size_t>(res.steps));
}

TEST_CASE("head-on Vanilla keeps point symmetry") {
  Instance inst;
  inst.starts = {{-2, 0}, {2, 0}};
  inst.goals = {{2, 0}, {-2, 0}};
  planner::ConstantPlanner vanilla(0.0, 0.0);
  const auto res = run_episode(inst, vanilla, control::ControllerConfig{}, DynamicsConfig{}, EpisodeLimits{});
  for (const auto& snap : res.trajectory) {
    CHECK(std::abs(snap[0].position.x + snap[1].position.x) <= 1e-9);
    CHECK(std::abs(snap[0].position.y + snap[1].position.y) <= 1e-9);
  }
}

TEST_CASE("episode invariants") {
  ScenarioConfig scen;
  scen.n_agents = 4;
  control::ControllerConfig ctrl;
  ctrl.num_candidates = 64;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    scen.rng_seed = seed;
    scen.mode = seed % 2 ? ScenarioMode::kCrossing : ScenarioMode::kRandom;
    const auto inst = generate_instance(scen);
    planner::ConstantPlanner tmpc(0.0, -3.0);
    EpisodeLimits lim;
    lim.seed = seed;
    const auto a = run_episode(inst, tmpc, ctrl, DynamicsConfig{}, lim);
    const auto b = run_episode(inst, tmpc, ctrl, DynamicsConfig{}, lim);
    CHECK(a.steps == b.steps);
    CHECK(a.outcome == b.outcome);
    for (std::size_t k = 0; k < a.trajectory.size(); ++k) {
      for (int i = 0; i < 4; ++i) {
        CHECK(a.trajectory[k][i].position == b.trajectory[k][i].position);
        if (a.frozen[k][i]) {
          CHECK(a.trajectory[k][i].velocity == Vec2{0, 0});
          if (k + 1 < a.frozen.size()) CHECK(a.frozen[k + 1][i]);
        }
      }
    }
    for (const auto& act : a.actions) {
      for (const auto& u : act) CHECK(is_feasible(u, DynamicsConfig{}));
    }
    const bool all_frozen = std::all_of(a.frozen.back().begin(), a.frozen.back().end(), [](bool f) { return f; });
    if (a.outcome == Outcome::kSuccess) {
      CHECK(all_frozen);
      CHECK(std::isfinite(a.extra_time));
    } else if (a.outcome == Outcome::kCollision) {
      CHECK(a.collision_step == a.steps);
      CHECK(detect_collision(WorldState{a.trajectory.back(), a.steps, a.frozen.back()}));
    } else {
      CHECK(a.steps == lim.max_steps(0.1));
      CHECK(std::isnan(a.extra_time));
    }
    CHECK(a.realized_winding.size() == 6);
    const auto w = realized_windings(a.trajectory);
    for (std::size_t p = 0; p < w.size(); ++p) CHECK(w[p].w == a.realized_winding[p].w);
  }
}

TEST_CASE("names") {
  CHECK(parse_scenario_mode("crossing") == ScenarioMode::kCrossing);
  CHECK(to_string(ScenarioMode::kRandom) == "random");
  CHECK(parse_outcome(to_string(Outcome::kTimeout)) == Outcome::kTimeout);
  CHECK_THROWS(parse_outcome("maybe"));
  CHECK(EpisodeLimits{}.max_steps(0.1) == 200);
}
