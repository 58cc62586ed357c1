#pragma once

#include <string_view>

#include "wnum/geometry.hpp"

namespace wnum {

// Full state of one agent. position/velocity/radius are what other agents
// observe; goal and heading are private.
struct AgentState {
  Vec2 position;
  Vec2 velocity;
  double heading = 0.0;
  double radius = 0.15;
  Vec2 goal;
};

// Observable slice of another agent, tagged with its index in the world.
struct ObservedState {
  int id = 0;
  Vec2 position;
  Vec2 velocity;
  double radius = 0.15;
};

inline ObservedState observe(int id, const AgentState& s) {
  return {id, s.position, s.velocity, s.radius};
}

enum class DynamicsModel { kHolonomic, kDiffDrive };

std::string_view to_string(DynamicsModel m);
DynamicsModel parse_dynamics_model(std::string_view s);

struct DynamicsConfig {
  DynamicsModel model = DynamicsModel::kHolonomic;
  double dt = 0.1;
  // Speed bound: norm limit for holonomic, per-wheel limit for diff-drive.
  double v_max = 0.8;
  // Angular-to-wheel divisor in |u_v +- psi / wheel_coef| <= v_max.
  double wheel_coef = 7.5;
  double collision_radius = 0.15;

  static DynamicsConfig holonomic() { return {}; }
  static DynamicsConfig diff_drive() {
    DynamicsConfig c;
    c.model = DynamicsModel::kDiffDrive;
    c.v_max = 0.6;
    return c;
  }
  void validate() const;
};

struct HolonomicAction {
  Vec2 velocity;
};

struct DiffDriveAction {
  double linear = 0.0;
  double angular = 0.0;
};

// Model-agnostic control input: (u_x, u_y) for holonomic agents and
// (u_v, psi) for differential-drive agents.
struct Action {
  double u0 = 0.0;
  double u1 = 0.0;

  static Action from(HolonomicAction a) { return {a.velocity.x, a.velocity.y}; }
  static Action from(DiffDriveAction a) { return {a.linear, a.angular}; }
  HolonomicAction holonomic() const { return {{u0, u1}}; }
  DiffDriveAction diff_drive() const { return {u0, u1}; }
  friend bool operator==(const Action&, const Action&) = default;
};

AgentState step_holonomic(const AgentState& s, HolonomicAction u, double dt);
AgentState step_diffdrive(const AgentState& s, DiffDriveAction a, double dt);
AgentState step(const AgentState& s, Action a, const DynamicsConfig& cfg);

HolonomicAction clamp_holonomic(Vec2 u_raw, double v_max);
DiffDriveAction clamp_diffdrive(DiffDriveAction raw, double wheel_limit = 0.6,
                                double wheel_coef = 7.5);
Action clamp(Action raw, const DynamicsConfig& cfg);

bool is_feasible(HolonomicAction a, const DynamicsConfig& cfg);
bool is_feasible(DiffDriveAction a, const DynamicsConfig& cfg);
bool is_feasible(Action a, const DynamicsConfig& cfg);

}  // namespace wnum
