#include "wnum/environment.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "wnum/errors.hpp"
#include "wnum/seeding.hpp"
#include "wnum/topology.hpp"

namespace wnum::env {

std::string_view to_string(ScenarioMode m) {
  return m == ScenarioMode::kRandom ? "random" : "crossing";
}

ScenarioMode parse_scenario_mode(std::string_view s) {
  if (s == "random") return ScenarioMode::kRandom;
  if (s == "crossing") return ScenarioMode::kCrossing;
  throw ConfigError("unknown scenario mode '" + std::string(s) + "'");
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::kSuccess:
      return "success";
    case Outcome::kCollision:
      return "collision";
    case Outcome::kTimeout:
      return "timeout";
  }
  return "timeout";
}

Outcome parse_outcome(std::string_view s) {
  if (s == "success") return Outcome::kSuccess;
  if (s == "collision") return Outcome::kCollision;
  if (s == "timeout") return Outcome::kTimeout;
  throw DataError("unknown outcome '" + std::string(s) + "'");
}

void ScenarioConfig::validate() const {
  if (n_agents < 2) throw ConfigError("scenario.n_agents must be >= 2");
  if (!(circle_radius > 0.0)) throw ConfigError("scenario.circle_radius must be > 0");
  if (!(noise_half_width >= 0.0)) throw ConfigError("scenario.noise_half_width must be >= 0");
  if (!(agent_radius > 0.0)) throw ConfigError("scenario.agent_radius must be > 0");
}

namespace {

Vec2 sample_on_noisy_circle(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::uniform_real_distribution<double> noise(-cfg.noise_half_width, cfg.noise_half_width);
  const double a = angle(rng);
  const double nx = cfg.noise_half_width > 0.0 ? noise(rng) : 0.0;
  const double ny = cfg.noise_half_width > 0.0 ? noise(rng) : 0.0;
  return cfg.center + Vec2{cfg.circle_radius * std::cos(a), cfg.circle_radius * std::sin(a)} +
         Vec2{nx, ny};
}

bool far_from_all(Vec2 p, std::span<const Vec2> others, double sep) {
  for (const Vec2& o : others) {
    if (norm(p - o) < sep) return false;
  }
  return true;
}

}  // namespace

Instance generate_instance(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const double sep = cfg.separation();
  Instance inst;
  inst.mode = cfg.mode;
  inst.radius = cfg.agent_radius;
  inst.seed = cfg.rng_seed;
  int attempts = 0;
  auto place = [&](std::span<const Vec2> avoid_a, std::span<const Vec2> avoid_b) {
    while (true) {
      if (++attempts > kMaxPlacementAttempts) {
        throw InfeasibleScenarioError("could not place " + std::to_string(cfg.n_agents) +
                                      " agents with separation " + std::to_string(sep) +
                                      " within " + std::to_string(kMaxPlacementAttempts) +
                                      " attempts");
      }
      const Vec2 p = sample_on_noisy_circle(cfg, rng);
      if (far_from_all(p, avoid_a, sep) && far_from_all(p, avoid_b, sep)) return p;
    }
  };
  for (int i = 0; i < cfg.n_agents; ++i) inst.starts.push_back(place(inst.starts, {}));
  if (cfg.mode == ScenarioMode::kCrossing) {
    for (const Vec2& s : inst.starts) inst.goals.push_back(2.0 * cfg.center - s);
  } else {
    for (int i = 0; i < cfg.n_agents; ++i) inst.goals.push_back(place(inst.goals, inst.starts));
  }
  return inst;
}

Instance generate_instance(const ScenarioConfig& cfg) {
  std::mt19937_64 rng(cfg.rng_seed);
  return generate_instance(cfg, rng);
}

std::vector<ObservedState> WorldState::neighbors_of(int i) const {
  std::vector<ObservedState> out;
  out.reserve(agents.size() - 1);
  for (int j = 0; j < size(); ++j) {
    if (j != i) out.push_back(observe(j, agents[static_cast<std::size_t>(j)]));
  }
  return out;
}

WorldState make_world(const Instance& inst) {
  WorldState w;
  for (int i = 0; i < inst.size(); ++i) {
    AgentState s;
    s.position = inst.starts[static_cast<std::size_t>(i)];
    s.goal = inst.goals[static_cast<std::size_t>(i)];
    s.radius = inst.radius;
    const Vec2 d = s.goal - s.position;
    s.heading = (d.x != 0.0 || d.y != 0.0) ? std::atan2(d.y, d.x) : 0.0;
    w.agents.push_back(s);
  }
  w.frozen.assign(w.agents.size(), false);
  return w;
}

WorldState step_world(const WorldState& world, std::span<const Action> actions,
                      const DynamicsConfig& dyn, double goal_tolerance) {
  if (actions.size() != world.agents.size()) {
    throw ShapeError("step_world: expected one action per agent");
  }
  WorldState next = world;
  for (std::size_t i = 0; i < world.agents.size(); ++i) {
    if (world.frozen[i]) continue;
    AgentState s = step(world.agents[i], actions[i], dyn);
    if (norm(s.goal - s.position) <= goal_tolerance) {
      next.frozen[i] = true;
      s.velocity = {0.0, 0.0};
    }
    next.agents[i] = s;
  }
  ++next.step;
  return next;
}

std::optional<std::pair<int, int>> detect_collision(const WorldState& world) {
  for (int i = 0; i < world.size(); ++i) {
    for (int j = i + 1; j < world.size(); ++j) {
      const AgentState& a = world.agents[static_cast<std::size_t>(i)];
      const AgentState& b = world.agents[static_cast<std::size_t>(j)];
      if (norm(a.position - b.position) <= a.radius + b.radius) return std::pair{i, j};
    }
  }
  return std::nullopt;
}

double min_clearance(const WorldState& world, int i) {
  double best = std::numeric_limits<double>::infinity();
  const AgentState& a = world.agents[static_cast<std::size_t>(i)];
  for (int j = 0; j < world.size(); ++j) {
    if (j == i) continue;
    const AgentState& b = world.agents[static_cast<std::size_t>(j)];
    best = std::min(best, norm(a.position - b.position) - a.radius - b.radius);
  }
  return best;
}

std::int64_t EpisodeLimits::max_steps(double dt) const {
  return static_cast<std::int64_t>(std::llround(timeout / dt));
}

std::vector<PairWinding> realized_windings(const std::vector<std::vector<AgentState>>& trajectory) {
  std::vector<PairWinding> out;
  if (trajectory.empty()) return out;
  const std::size_t n = trajectory.front().size();
  std::vector<std::vector<Vec2>> paths(n);
  for (const auto& snap : trajectory) {
    for (std::size_t i = 0; i < n; ++i) paths[i].push_back(snap[i].position);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      out.push_back({static_cast<int>(i), static_cast<int>(j),
                     topology::winding_number(paths[i], paths[j])});
    }
  }
  return out;
}

EpisodeResult run_episode(const Instance& inst, planner::Planner& planner,
                          const control::ControllerConfig& controller, const DynamicsConfig& dyn,
                          const EpisodeLimits& limits, EpisodeObserver* observer) {
  const int n = inst.size();
  const auto un = static_cast<std::size_t>(n);
  const std::int64_t max_steps = limits.max_steps(dyn.dt);

  control::ControllerConfig ctrl = controller;
  ctrl.rng_seed = derive_seed(limits.seed, SeedStream::kController, 0);

  std::vector<std::int64_t> offsets(un, 0);
  if (limits.random_refresh_offset) {
    std::mt19937_64 rng(derive_seed(limits.seed, SeedStream::kRefreshOffsets, 0));
    std::uniform_int_distribution<std::int64_t> pick(0, limits.plan_refresh_steps - 1);
    for (auto& o : offsets) o = pick(rng);
  }

  EpisodeResult res;
  res.dt = dyn.dt;
  res.instance = inst;
  res.arrival_time.assign(un, std::numeric_limits<double>::quiet_NaN());
  res.extra_time = std::numeric_limits<double>::quiet_NaN();

  WorldState world = make_world(inst);
  res.trajectory.push_back(world.agents);
  res.frozen.push_back(world.frozen);

  std::vector<control::WindingPlan> plans(un);
  std::vector<control::WarmStart> warm(un);
  std::vector<bool> planned(un, false);
  std::vector<Action> actions(un);
  std::vector<std::vector<ObservedState>> neighbors(un);

  // Goal check before any motion (an agent may start inside tolerance).
  for (std::size_t i = 0; i < un; ++i) {
    if (norm(world.agents[i].goal - world.agents[i].position) <= limits.goal_tolerance) {
      world.frozen[i] = true;
      res.arrival_time[i] = 0.0;
    }
  }
  res.frozen.back() = world.frozen;

  Outcome outcome = Outcome::kTimeout;
  bool finished = false;
  if (const auto hit = detect_collision(world)) {
    outcome = Outcome::kCollision;
    res.collision_pair = hit;
    res.collision_step = 0;
    finished = true;
  } else if (std::all_of(world.frozen.begin(), world.frozen.end(), [](bool f) { return f; })) {
    outcome = Outcome::kSuccess;
    finished = true;
  }

  while (!finished && world.step < max_steps) {
    const std::int64_t k = world.step;
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      if (world.frozen[ui]) continue;
      neighbors[ui] = world.neighbors_of(i);
      if (!planned[ui] || planner::refresh_schedule(k, offsets[ui], limits.plan_refresh_steps)) {
        plans[ui] = planner.plan({i, k, world.agents[ui], neighbors[ui]});
        planned[ui] = true;
      }
    }

#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      if (world.frozen[ui]) {
        actions[ui] = Action{};
        continue;
      }
      const control::Solution sol =
          control::solve(world.agents[ui], neighbors[ui], plans[ui], ctrl, dyn, warm[ui]);
      actions[ui] = sol.action;
      warm[ui] = sol.warm;
    }

    WorldState next = step_world(world, actions, dyn, limits.goal_tolerance);
    res.actions.push_back(actions);
    res.trajectory.push_back(next.agents);
    res.frozen.push_back(next.frozen);

    std::vector<bool> arrived(un, false);
    for (std::size_t i = 0; i < un; ++i) {
      if (next.frozen[i] && !world.frozen[i]) {
        arrived[i] = true;
        res.arrival_time[i] = static_cast<double>(next.step) * dyn.dt;
      }
    }
    const auto hit = detect_collision(next);
    if (observer != nullptr) observer->on_step({k, world, next, arrived, hit});
    world = std::move(next);

    if (hit) {
      outcome = Outcome::kCollision;
      res.collision_pair = hit;
      res.collision_step = world.step;
      finished = true;
    } else if (std::all_of(world.frozen.begin(), world.frozen.end(), [](bool f) { return f; })) {
      outcome = Outcome::kSuccess;
      finished = true;
    }
  }

  res.outcome = outcome;
  res.steps = world.step;
  res.realized_winding = realized_windings(res.trajectory);
  if (outcome == Outcome::kSuccess) res.extra_time = extra_time_to_goal(res, dyn.v_max);
  if (observer != nullptr) observer->on_end(world, outcome);
  return res;
}

double extra_time_to_goal(const EpisodeResult& result, double v_max) {
  if (result.outcome != Outcome::kSuccess) {
    throw MetricUndefinedError("extra time to goal is only defined for successful episodes");
  }
  const Instance& inst = result.instance;
  double total = 0.0;
  for (int i = 0; i < inst.size(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    total += result.arrival_time[ui] - norm(inst.starts[ui] - inst.goals[ui]) / v_max;
  }
  return total / static_cast<double>(inst.size());
}

}  // namespace wnum::env
