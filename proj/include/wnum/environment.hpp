#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "wnum/controller.hpp"
#include "wnum/dynamics.hpp"
#include "wnum/planner.hpp"

namespace wnum::env {

enum class ScenarioMode { kRandom, kCrossing };

std::string_view to_string(ScenarioMode m);
ScenarioMode parse_scenario_mode(std::string_view s);

struct ScenarioConfig {
  int n_agents = 3;
  double circle_radius = 2.0;
  double noise_half_width = 0.4;
  ScenarioMode mode = ScenarioMode::kRandom;
  // Minimum pairwise start (and goal) distance; <= 0 means 2 * (r_i + r_j).
  double min_start_separation = 0.0;
  double agent_radius = 0.15;
  Vec2 center;
  std::uint64_t rng_seed = 0;

  double separation() const {
    return min_start_separation > 0.0 ? min_start_separation : 4.0 * agent_radius;
  }
  void validate() const;
};

struct Instance {
  ScenarioMode mode = ScenarioMode::kRandom;
  std::vector<Vec2> starts;
  std::vector<Vec2> goals;
  double radius = 0.15;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(starts.size()); }
};

inline constexpr int kMaxPlacementAttempts = 10000;

Instance generate_instance(const ScenarioConfig& cfg, std::mt19937_64& rng);
Instance generate_instance(const ScenarioConfig& cfg);

struct WorldState {
  std::vector<AgentState> agents;
  std::int64_t step = 0;
  std::vector<bool> frozen;

  int size() const { return static_cast<int>(agents.size()); }
  std::vector<ObservedState> neighbors_of(int i) const;
};

// Agents start at rest, facing their goals.
WorldState make_world(const Instance& inst);

// Synchronous advance: every unfrozen agent applies its action, then agents
// within goal_tolerance of their goal freeze in place with zero velocity.
WorldState step_world(const WorldState& world, std::span<const Action> actions,
                      const DynamicsConfig& dyn, double goal_tolerance);

// First pair (lexicographic) with centre distance <= r_i + r_j.
std::optional<std::pair<int, int>> detect_collision(const WorldState& world);

// Smallest clearance ||p_i - p_j|| - r_i - r_j from agent i to any other.
double min_clearance(const WorldState& world, int i);

enum class Outcome { kSuccess, kCollision, kTimeout };
std::string_view to_string(Outcome o);
Outcome parse_outcome(std::string_view s);

struct EpisodeLimits {
  double timeout = 20.0;
  double goal_tolerance = 0.1;
  int plan_refresh_steps = 5;
  bool random_refresh_offset = true;
  // Seeds refresh offsets and the controller sampler.
  std::uint64_t seed = 0;

  std::int64_t max_steps(double dt) const;
};

struct PairWinding {
  int i = 0;
  int j = 0;
  double w = 0.0;
};

struct EpisodeResult {
  Outcome outcome = Outcome::kTimeout;
  std::int64_t steps = 0;
  double dt = 0.1;
  Instance instance;
  // trajectory[k][i]: state of agent i after k steps (k = 0..steps).
  std::vector<std::vector<AgentState>> trajectory;
  std::vector<std::vector<bool>> frozen;
  // actions[k][i]: input applied at step k (zero for frozen agents).
  std::vector<std::vector<Action>> actions;
  std::vector<double> arrival_time;  // NaN when the agent never arrived
  std::optional<std::pair<int, int>> collision_pair;
  std::int64_t collision_step = -1;
  std::vector<PairWinding> realized_winding;
  double extra_time = 0.0;  // NaN unless outcome is success
};

// Per-step notifications for reward bookkeeping.
struct StepEvents {
  std::int64_t step = 0;  // index of the step just taken
  const WorldState& before;
  const WorldState& after;
  std::vector<bool> arrived;  // froze during this step
  std::optional<std::pair<int, int>> collision;
};

class EpisodeObserver {
 public:
  virtual ~EpisodeObserver() = default;
  virtual void on_step(const StepEvents& ev) = 0;
  virtual void on_end(const WorldState& final_world, Outcome outcome) = 0;
};

EpisodeResult run_episode(const Instance& inst, planner::Planner& planner,
                          const control::ControllerConfig& controller, const DynamicsConfig& dyn,
                          const EpisodeLimits& limits, EpisodeObserver* observer = nullptr);

// Mean over agents of arrival time minus straight-line time at v_max.
// Throws MetricUndefinedError unless the episode succeeded.
double extra_time_to_goal(const EpisodeResult& result, double v_max);

// Pairwise winding numbers over whole trajectories, i < j.
std::vector<PairWinding> realized_windings(const std::vector<std::vector<AgentState>>& trajectory);

}  // namespace wnum::env
