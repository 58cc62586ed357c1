#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "oracles.hpp"
#include "wnum/errors.hpp"
#include "wnum/topology.hpp"

using namespace wnum;
using namespace wnum::topology;

TEST_CASE("signed_angle_diff") {
  CHECK(signed_angle_diff(0.0, kPi / 2) == doctest::Approx(kPi / 2).epsilon(1e-15));
  CHECK(signed_angle_diff(1.234, 1.234) == 0.0);
  CHECK(signed_angle_diff(3.0, -3.0) == doctest::Approx(kTwoPi - 6.0).epsilon(1e-14));
  // half turns resolve to +pi
  CHECK(signed_angle_diff(0.0, kPi) == kPi);
  CHECK(signed_angle_diff(kPi, 0.0) == kPi);
  CHECK_THROWS_AS(signed_angle_diff(NAN, 0.0), DomainError);
  CHECK_THROWS_AS(signed_angle_diff(0.0, INFINITY), DomainError);
}

TEST_CASE("bearing") {
  CHECK(bearing({0, 0}, {1, 0}) == 0.0);
  CHECK(bearing({0, 0}, {0, 1}) == doctest::Approx(kPi / 2));
  CHECK(bearing({1, 1}, {0, 0}) == doctest::Approx(-3 * kPi / 4));
  CHECK_THROWS_AS(bearing({2, 3}, {2, 3}), DegenerateBearingError);
}

TEST_CASE("winding_number fixed cases") {
  std::vector<Vec2> still_a(7, Vec2{0, 0}), still_b(7, Vec2{1, 2});
  CHECK(winding_number(still_a, still_b) == 0.0);

  std::vector<Vec2> origin(9, Vec2{0, 0}), octagon;
  for (int k = 0; k <= 8; ++k) octagon.push_back({std::cos(k * kPi / 4), std::sin(k * kPi / 4)});
  CHECK(winding_number(origin, octagon) == doctest::Approx(1.0).epsilon(1e-14));

  SUBCASE("head-on pass") {
    std::vector<Vec2> a, b;
    for (int k = 0; k <= 40; ++k) {
      const double s = k / 40.0;
      a.push_back({-2 + 4 * s, 0});
      b.push_back({2 - 4 * s, 0.2});
    }
    const double w = winding_number(a, b);
    CHECK(w == doctest::Approx(0.48409774874382366).epsilon(1e-12));
    // the bearing sweeps from atan2(0.2, 4) to atan2(0.2, -4)
    const double closed = (std::atan2(0.2, -4.0) - std::atan2(0.2, 4.0)) / kTwoPi;
    CHECK(w == doctest::Approx(closed).epsilon(1e-12));
  }

  SUBCASE("short paths") {
    std::vector<Vec2> p{{0, 0}}, q{{1, 0}};
    CHECK(winding_number(p, q) == 0.0);
    CHECK(predicted_winding_number(p, q) == 0.0);
    std::vector<Vec2> e;
    CHECK(winding_number(e, e) == 0.0);
  }

  SUBCASE("parallel motion") {
    std::vector<Vec2> a, b;
    for (int k = 0; k < 11; ++k) {
      a.push_back({0.1 * k, 0});
      b.push_back({0.1 * k + 0.3, 0.5});
    }
    CHECK(predicted_winding_number(a, b) == 0.0);
  }

  SUBCASE("length mismatch") {
    std::vector<Vec2> a(3), b(4, Vec2{1, 1});
    CHECK_THROWS_AS(winding_number(a, b), ShapeError);
  }

  SUBCASE("coincident sample reuses the previous bearing") {
    std::vector<Vec2> a{{0, 0}, {0, 0}, {0, 0}, {0, 0}};
    std::vector<Vec2> b{{1, 0}, {0, 1}, {0, 0}, {-1, 0}};
    // 0 -> pi/2, hold, pi/2 -> pi
    CHECK(winding_number(a, b) == doctest::Approx(0.5).epsilon(1e-14));
    std::vector<Vec2> c{{0, 0}, {1, 0}, {0, 1}};
    std::vector<Vec2> o(3, Vec2{0, 0});
    // first sample degenerate: no bearing until index 1
    CHECK(winding_number(o, c) == doctest::Approx(0.25).epsilon(1e-14));
  }
}

TEST_CASE("winding_number matches the dense oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto pair = oracle::random_smooth_pair(rng, 30);
    const auto a = oracle::sample(pair.a, 30, 1);
    const auto b = oracle::sample(pair.b, 30, 1);
    const double w = winding_number(a, b);
    CHECK(std::abs(w - oracle::dense_winding(pair, 30, 10)) <= 1e-6);
  }
}

TEST_CASE("winding_number properties") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ang(-kPi, kPi), off(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pair = oracle::random_smooth_pair(rng, 40);
    const auto a = oracle::sample(pair.a, 40, 1);
    const auto b = oracle::sample(pair.b, 40, 1);
    const double w = winding_number(a, b);

    CHECK(std::abs(winding_number(b, a) - w) <= 1e-12);

    const double th = ang(rng);
    const Vec2 t{off(rng), off(rng)};
    auto rigid = [&](Vec2 p) {
      return Vec2{std::cos(th) * p.x - std::sin(th) * p.y + t.x,
                  std::sin(th) * p.x + std::cos(th) * p.y + t.y};
    };
    std::vector<Vec2> ra, rb;
    for (auto p : a) ra.push_back(rigid(p));
    for (auto p : b) rb.push_back(rigid(p));
    CHECK(std::abs(winding_number(ra, rb) - w) <= 1e-9);

    // mirror across the line through t with direction (cos th, sin th)
    const Vec2 d{std::cos(th), std::sin(th)};
    auto mirror = [&](Vec2 p) {
      const Vec2 r = p - t;
      return t + 2.0 * dot(r, d) * d - r;
    };
    std::vector<Vec2> ma, mb;
    for (auto p : a) ma.push_back(mirror(p));
    for (auto p : b) mb.push_back(mirror(p));
    CHECK(std::abs(winding_number(ma, mb) + w) <= 1e-9);

    const std::size_t m = 1 + static_cast<std::size_t>(trial) % (a.size() - 2);
    const double head = winding_number(std::span(a).first(m + 1), std::span(b).first(m + 1));
    const double tail = winding_number(std::span(a).subspan(m), std::span(b).subspan(m));
    CHECK(std::abs(head + tail - w) <= 1e-12);
  }
}
