#pragma once

#include <span>

#include "wnum/geometry.hpp"

// Winding numbers between pairs of planar trajectories.
//
// The winding number of agent j around agent i over a time window is the
// accumulated signed change of the bearing of j as seen from i, divided by
// 2*pi. Counterclockwise is positive. Each per-step change is taken in
// (-pi, pi], so the result is exact whenever consecutive samples are dense
// enough that no single step turns by more than half a revolution.
namespace wnum::topology {

using PlanarPath = std::span<const Vec2>;

// Unique delta in (-pi, pi] with theta_from + delta == theta_to (mod 2*pi).
// Throws DomainError on non-finite input.
double signed_angle_diff(double theta_from, double theta_to);

// Angle of (p_other - p_self) in the world frame. Throws
// DegenerateBearingError when the points coincide.
double bearing(Vec2 p_self, Vec2 p_other);

// Winding number in turns. Paths must have equal length; fewer than two
// samples wind nothing. Indices where the two positions coincide reuse the
// previous valid bearing, i.e. contribute a zero increment.
double winding_number(PlanarPath path_i, PlanarPath path_j);

// Entry point used by the controller's topology cost over predicted rollouts.
inline double predicted_winding_number(PlanarPath own_rollout, PlanarPath other_rollout) {
  return winding_number(own_rollout, other_rollout);
}

}  // namespace wnum::topology
