#pragma once

#include <cmath>
#include <numbers>

namespace wnum {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(Vec2 o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
constexpr Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.y * s}; }
constexpr Vec2 operator*(double s, Vec2 a) { return {a.x * s, a.y * s}; }

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
constexpr double squared_norm(Vec2 a) { return dot(a, a); }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline bool is_finite(Vec2 a) { return std::isfinite(a.x) && std::isfinite(a.y); }

// Orthonormal 2D frame given by the image of the unit x axis. Local
// coordinates of a world vector v are (dot(v, axis), cross(axis, v)).
struct Frame2 {
  Vec2 origin;
  Vec2 axis{1.0, 0.0};

  constexpr Vec2 to_local_dir(Vec2 v) const { return {dot(v, axis), cross(axis, v)}; }
  constexpr Vec2 to_local(Vec2 p) const { return to_local_dir(p - origin); }
  constexpr Vec2 to_world_dir(Vec2 v) const {
    return {axis.x * v.x - axis.y * v.y, axis.y * v.x + axis.x * v.y};
  }
  constexpr Vec2 to_world(Vec2 p) const { return origin + to_world_dir(p); }
};

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

}  // namespace wnum
