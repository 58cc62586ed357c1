#include "wnum/topology.hpp"

#include <cmath>
#include <string>

#include "wnum/errors.hpp"

namespace wnum::topology {

double signed_angle_diff(double theta_from, double theta_to) {
  if (!std::isfinite(theta_from) || !std::isfinite(theta_to)) {
    throw DomainError("signed_angle_diff: non-finite angle");
  }
  return wrap_angle(theta_to - theta_from);
}

double bearing(Vec2 p_self, Vec2 p_other) {
  const Vec2 d = p_other - p_self;
  if (d.x == 0.0 && d.y == 0.0) {
    throw DegenerateBearingError("bearing: coincident positions");
  }
  return std::atan2(d.y, d.x);
}

double winding_number(PlanarPath path_i, PlanarPath path_j) {
  if (path_i.size() != path_j.size()) {
    throw ShapeError("winding_number: path lengths differ (" + std::to_string(path_i.size()) +
                     " vs " + std::to_string(path_j.size()) + ")");
  }
  if (path_i.size() < 2) return 0.0;

  double total = 0.0;
  double previous = 0.0;
  bool have_previous = false;
  for (std::size_t k = 0; k < path_i.size(); ++k) {
    const Vec2 d = path_j[k] - path_i[k];
    if (d.x == 0.0 && d.y == 0.0) continue;
    const double theta = std::atan2(d.y, d.x);
    if (have_previous) total += wrap_angle(theta - previous);
    previous = theta;
    have_previous = true;
  }
  return total / kTwoPi;
}

}  // namespace wnum::topology
