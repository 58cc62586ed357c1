#include <cmath>
#include <random>

#include <doctest.h>

#include "wnum/dynamics.hpp"

using namespace wnum;
using doctest::Approx;

TEST_CASE("step_holonomic") {
  AgentState s;
  s.heading = 0.7;
  auto n = step_holonomic(s, {{0.8, 0}}, 0.1);
  CHECK(n.position.x == Approx(0.08));
  CHECK(n.position.y == 0.0);
  CHECK(n.heading == 0.0);

  n = step_holonomic(s, {{0, 0}}, 0.1);
  CHECK(n.position == s.position);
  CHECK(n.velocity == Vec2{0, 0});
  CHECK(n.heading == 0.7);

  s.position = {1, 1};
  n = step_holonomic(s, {{0, 0.8}}, 0.1);
  CHECK(n.position.x == 1.0);
  CHECK(n.position.y == Approx(1.08));
  CHECK(n.heading == Approx(kPi / 2));

  // full-quadrant heading
  n = step_holonomic(s, {{-0.5, -0.5}}, 0.1);
  CHECK(n.heading == Approx(-3 * kPi / 4));
}

TEST_CASE("step_diffdrive") {
  AgentState s;
  auto n = step_diffdrive(s, {0.6, 0}, 0.1);
  CHECK(n.position.x == Approx(0.06));
  CHECK(n.position.y == 0.0);
  CHECK(n.heading == 0.0);

  n = step_diffdrive(s, {0, 2.0}, 0.1);
  CHECK(n.position == s.position);
  CHECK(n.heading == Approx(0.2));

  n = step_diffdrive(s, {0.5, 1.0}, 0.1);
  CHECK(n.position.x == Approx(0.05 * std::cos(0.05)).epsilon(1e-12));
  CHECK(n.position.y == Approx(0.05 * std::sin(0.05)).epsilon(1e-12));
  CHECK(n.heading == Approx(0.1));
  CHECK(n.velocity.x == Approx(0.5 * std::cos(0.1)));
  CHECK(n.velocity.y == Approx(0.5 * std::sin(0.1)));
}

TEST_CASE("clamps") {
  auto h = clamp_holonomic({1.6, 0}, 0.8);
  CHECK(h.velocity.x == 0.8);
  CHECK(h.velocity.y == 0.0);
  h = clamp_holonomic({0.1, 0.1}, 0.8);
  CHECK(h.velocity == Vec2{0.1, 0.1});
  h = clamp_holonomic({0, 0}, 0.8);
  CHECK(h.velocity == Vec2{0, 0});

  auto d = clamp_diffdrive({0.6, 0});
  CHECK(d.linear == 0.6);
  CHECK(d.angular == 0.0);
  d = clamp_diffdrive({1.2, 0});
  CHECK(d.linear == Approx(0.6));
  d = clamp_diffdrive({0.6, 7.5 * 0.6});
  CHECK(d.linear == Approx(0.3));
  CHECK(d.angular == Approx(2.25));
}

TEST_CASE("is_feasible") {
  const auto hol = DynamicsConfig::holonomic();
  const auto dd = DynamicsConfig::diff_drive();
  CHECK(is_feasible(HolonomicAction{{0.8, 0}}, hol));
  CHECK_FALSE(is_feasible(HolonomicAction{{0.81, 0}}, hol));
  CHECK(is_feasible(DiffDriveAction{0.5, 0.75}, dd));
  CHECK_FALSE(is_feasible(DiffDriveAction{0.5, 1.0}, dd));
  CHECK(is_feasible(Action{0.5, 0.75}, dd));
}

TEST_CASE("dynamics properties") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const auto hol = DynamicsConfig::holonomic();
  const auto dd = DynamicsConfig::diff_drive();
  for (int t = 0; t < 2000; ++t) {
    AgentState s;
    s.position = {u(rng), u(rng)};
    s.heading = u(rng);
    const double sp = 0.2 * u(rng);
    s.velocity = {sp * std::cos(s.heading), sp * std::sin(s.heading)};
    const Action raw{u(rng), u(rng) * 3.0};

    for (const auto& cfg : {hol, dd}) {
      const Action a = clamp(raw, cfg);
      CHECK(is_feasible(a, cfg));
      CHECK(clamp(a, cfg) == a);
      const AgentState n1 = step(s, a, cfg);
      const AgentState n2 = step(s, a, cfg);
      CHECK(n1.position == n2.position);
      CHECK(n1.heading == n2.heading);
      CHECK(norm(n1.position - s.position) <= cfg.v_max * cfg.dt + 1e-12);
      if (cfg.model == DynamicsModel::kDiffDrive) {
        const double speed = a.u0;
        CHECK(std::abs(n1.velocity.x - speed * std::cos(n1.heading)) <= 1e-12);
        CHECK(std::abs(n1.velocity.y - speed * std::sin(n1.heading)) <= 1e-12);
      }
      const AgentState z = step(s, Action{}, cfg);
      CHECK(z.position == s.position);
      CHECK(z.heading == s.heading);
    }
  }
}

TEST_CASE("config validation") {
  DynamicsConfig c;
  c.dt = 0.0;
  CHECK_THROWS(c.validate());
  c = DynamicsConfig{};
  c.v_max = -1;
  CHECK_THROWS(c.validate());
  CHECK(parse_dynamics_model("diffdrive") == DynamicsModel::kDiffDrive);
  CHECK(to_string(DynamicsModel::kHolonomic) == "holonomic");
}
