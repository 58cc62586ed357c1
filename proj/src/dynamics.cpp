#include "wnum/dynamics.hpp"

#include <cmath>
#include <string>

#include "wnum/errors.hpp"

namespace wnum {

namespace {
constexpr double kFeasibilityTol = 1e-9;
// Inputs within this slack of the bound pass through clamp untouched, which
// makes clamp exactly idempotent despite rounding in the rescale.
constexpr double kClampSlack = 1e-12;
}

std::string_view to_string(DynamicsModel m) {
  return m == DynamicsModel::kHolonomic ? "holonomic" : "diffdrive";
}

DynamicsModel parse_dynamics_model(std::string_view s) {
  if (s == "holonomic") return DynamicsModel::kHolonomic;
  if (s == "diffdrive" || s == "diff_drive") return DynamicsModel::kDiffDrive;
  throw ConfigError("unknown dynamics model '" + std::string(s) + "'");
}

void DynamicsConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("dynamics.dt must be > 0");
  if (!(v_max > 0.0)) throw ConfigError("dynamics.v_max must be > 0");
  if (!(wheel_coef > 0.0)) throw ConfigError("dynamics.wheel_coef must be > 0");
  if (!(collision_radius > 0.0)) throw ConfigError("dynamics.collision_radius must be > 0");
}

AgentState step_holonomic(const AgentState& s, HolonomicAction u, double dt) {
  AgentState next = s;
  next.position = s.position + u.velocity * dt;
  next.velocity = u.velocity;
  if (u.velocity.x != 0.0 || u.velocity.y != 0.0) {
    next.heading = std::atan2(u.velocity.y, u.velocity.x);
  }
  return next;
}

AgentState step_diffdrive(const AgentState& s, DiffDriveAction a, double dt) {
  AgentState next = s;
  const double mid = s.heading + a.angular * dt / 2.0;
  next.position = s.position + Vec2{std::cos(mid), std::sin(mid)} * (a.linear * dt);
  next.heading = s.heading + a.angular * dt;
  next.velocity = Vec2{std::cos(next.heading), std::sin(next.heading)} * a.linear;
  return next;
}

AgentState step(const AgentState& s, Action a, const DynamicsConfig& cfg) {
  return cfg.model == DynamicsModel::kHolonomic ? step_holonomic(s, a.holonomic(), cfg.dt)
                                                : step_diffdrive(s, a.diff_drive(), cfg.dt);
}

HolonomicAction clamp_holonomic(Vec2 u_raw, double v_max) {
  const double n = norm(u_raw);
  if (n <= v_max + kClampSlack) return {u_raw};
  return {u_raw * (v_max / n)};
}

DiffDriveAction clamp_diffdrive(DiffDriveAction raw, double wheel_limit, double wheel_coef) {
  // |u + w| <= L and |u - w| <= L  <=>  |u| + |w| <= L.
  const double load = std::abs(raw.linear) + std::abs(raw.angular) / wheel_coef;
  if (load <= wheel_limit + kClampSlack) return raw;
  const double t = wheel_limit / load;
  return {raw.linear * t, raw.angular * t};
}

Action clamp(Action raw, const DynamicsConfig& cfg) {
  if (cfg.model == DynamicsModel::kHolonomic) {
    return Action::from(clamp_holonomic({raw.u0, raw.u1}, cfg.v_max));
  }
  return Action::from(clamp_diffdrive(raw.diff_drive(), cfg.v_max, cfg.wheel_coef));
}

bool is_feasible(HolonomicAction a, const DynamicsConfig& cfg) {
  return is_finite(a.velocity) && norm(a.velocity) <= cfg.v_max + kFeasibilityTol;
}

bool is_feasible(DiffDriveAction a, const DynamicsConfig& cfg) {
  if (!std::isfinite(a.linear) || !std::isfinite(a.angular)) return false;
  const double w = a.angular / cfg.wheel_coef;
  return std::abs(a.linear + w) <= cfg.v_max + kFeasibilityTol &&
         std::abs(a.linear - w) <= cfg.v_max + kFeasibilityTol;
}

bool is_feasible(Action a, const DynamicsConfig& cfg) {
  return cfg.model == DynamicsModel::kHolonomic ? is_feasible(a.holonomic(), cfg)
                                                : is_feasible(a.diff_drive(), cfg);
}

}  // namespace wnum
