#include <doctest.h>

#include <cmath>

#include "twopass/gates.hpp"
#include "twopass/util.hpp"

using namespace twopass;

namespace {
Pass2Result fine(double t2, double x2 = 0.0, double y2 = 0.0) { return {t2, x2, y2}; }
}  // namespace

TEST_CASE("gate1 keeps the coarse time on declines and hedges") {
  auto declined = gate1_temporal(10.0, fine(-1.0), 7.0, 13.0, 0.3);
  CHECK(declined.t_star == 10.0);
  CHECK(declined.source == Source::Pass1);

  auto hedge_left = gate1_temporal(10.0, fine(7.1), 7.0, 13.0, 0.3);
  CHECK(hedge_left.t_star == 10.0);
  CHECK(hedge_left.source == Source::Pass1);

  auto hedge_right = gate1_temporal(10.0, fine(12.9), 7.0, 13.0, 0.3);
  CHECK(hedge_right.t_star == 10.0);
  CHECK(hedge_right.source == Source::Pass1);
}

TEST_CASE("gate1 accepts interior fine times") {
  auto accepted = gate1_temporal(10.0, fine(11.4), 7.0, 13.0, 0.3);
  CHECK(accepted.t_star == 11.4);
  CHECK(accepted.source == Source::Pass2);
}

TEST_CASE("gate1 boundary comparison is strict") {
  // |7.3 - 7.0| == tau exactly: not a hedge
  auto at_tau = gate1_temporal(10.0, fine(7.3), 7.0, 13.0, 0.3);
  CHECK(at_tau.t_star == 7.3);
  CHECK(at_tau.source == Source::Pass2);

  auto just_inside = gate1_temporal(10.0, fine(std::nextafter(7.3, 0.0)), 7.0, 13.0, 0.3);
  CHECK(just_inside.source == Source::Pass1);
}

TEST_CASE("gate1 applies the tolerance at clamped window edges too") {
  auto left_clamp = gate1_temporal(1.0, fine(0.2), 0.0, 4.0, 0.3);
  CHECK(left_clamp.source == Source::Pass1);
  auto interior = gate1_temporal(1.0, fine(0.4), 0.0, 4.0, 0.3);
  CHECK(interior.source == Source::Pass2);
}

TEST_CASE("gate1 output is always one of its inputs") {
  DetRng rng(11);
  for (int i = 0; i < 5000; ++i) {
    const double w_min = rng.next_unit() * 20.0;
    const double w_max = w_min + rng.next_unit() * 6.0;
    const double t1 = w_min + rng.next_unit() * (w_max - w_min);
    const double t2 = rng.next_unit() < 0.2 ? -1.0 : rng.next_unit() * 25.0;
    const double tau = 0.05 + rng.next_unit();
    auto d = gate1_temporal(t1, fine(t2), w_min, w_max, tau);
    CHECK((d.t_star == t1 || d.t_star == t2));
    CHECK((d.source == Source::Pass2) == (d.t_star == t2 && t2 >= 0.0));
  }
}

TEST_CASE("gate1 accepts any non-negative interior time as tau approaches zero") {
  DetRng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const double t2 = 0.01 + rng.next_unit() * 24.0;
    auto d = gate1_temporal(10.0, fine(t2), 0.0, 25.0, 1e-12);
    if (t2 != 0.0 && t2 != 25.0) CHECK(d.source == Source::Pass2);
  }
}

TEST_CASE("gate1 monotone in tau: growing tau never moves a decision to pass2") {
  DetRng rng(13);
  for (int i = 0; i < 2000; ++i) {
    const double w_min = rng.next_unit() * 10.0;
    const double w_max = w_min + 2.0 + rng.next_unit() * 4.0;
    const double t1 = w_min + rng.next_unit() * (w_max - w_min);
    const double t2 = w_min + rng.next_unit() * (w_max - w_min);
    const double tau_small = 0.05 + rng.next_unit() * 0.5;
    const double tau_big = tau_small + rng.next_unit();
    auto small = gate1_temporal(t1, fine(t2), w_min, w_max, tau_small);
    auto big = gate1_temporal(t1, fine(t2), w_min, w_max, tau_big);
    if (small.source == Source::Pass1) CHECK(big.source == Source::Pass1);
  }
}

TEST_CASE("gate2 accepts interior fine points") {
  auto d = gate2_spatial(300.0, 400.0, 500.0, 500.0, 10.0);
  CHECK(d.point.x == 0.5);
  CHECK(d.point.y == 0.5);
  CHECK(d.source == Source::Pass2);
}

TEST_CASE("gate2 rejects edge-clamped fine points") {
  auto d = gate2_spatial(300.0, 400.0, 5.0, 500.0, 10.0);
  CHECK(d.point.x == 0.3);
  CHECK(d.point.y == 0.4);
  CHECK(d.source == Source::Pass1);
}

TEST_CASE("gate2 margin bounds are inclusive") {
  auto d = gate2_spatial(300.0, 400.0, 10.0, 990.0, 10.0);
  CHECK(d.point.x == 0.01);
  CHECK(d.point.y == 0.99);
  CHECK(d.source == Source::Pass2);
}

TEST_CASE("gate2 margin zero bypasses the check entirely") {
  auto d = gate2_spatial(300.0, 400.0, -1.0, -1.0, 0.0);
  CHECK(d.point.x == -0.001);
  CHECK(d.point.y == -0.001);
  CHECK(d.source == Source::Pass2);
}

TEST_CASE("gate2 requires all four axis conditions") {
  CHECK(gate2_spatial(1.0, 2.0, 9.0, 500.0, 10.0).source == Source::Pass1);
  CHECK(gate2_spatial(1.0, 2.0, 991.0, 500.0, 10.0).source == Source::Pass1);
  CHECK(gate2_spatial(1.0, 2.0, 500.0, 9.0, 10.0).source == Source::Pass1);
  CHECK(gate2_spatial(1.0, 2.0, 500.0, 991.0, 10.0).source == Source::Pass1);
}

TEST_CASE("gate2 pass2 branch never emits a coordinate outside the margin band") {
  DetRng rng(14);
  for (int i = 0; i < 5000; ++i) {
    const double m = 1.0 + rng.next_unit() * 100.0;
    const double x2 = (rng.next_unit() - 0.2) * 1500.0;
    const double y2 = (rng.next_unit() - 0.2) * 1500.0;
    auto d = gate2_spatial(500.0, 500.0, x2, y2, m);
    if (d.source == Source::Pass2) {
      CHECK(d.point.x >= m / 1000.0);
      CHECK(d.point.x <= 1.0 - m / 1000.0);
      CHECK(d.point.y >= m / 1000.0);
      CHECK(d.point.y <= 1.0 - m / 1000.0);
    }
  }
}

TEST_CASE("gate2 monotone in margin") {
  DetRng rng(15);
  for (int i = 0; i < 2000; ++i) {
    const double x2 = rng.next_unit() * 1000.0;
    const double y2 = rng.next_unit() * 1000.0;
    const double m_small = 1.0 + rng.next_unit() * 50.0;
    const double m_big = m_small + rng.next_unit() * 100.0;
    auto small = gate2_spatial(400.0, 400.0, x2, y2, m_small);
    auto big = gate2_spatial(400.0, 400.0, x2, y2, m_big);
    if (small.source == Source::Pass1) CHECK(big.source == Source::Pass1);
  }
}

TEST_CASE("any margin in [5,50] decides identically away from the edge bands") {
  DetRng rng(16);
  const double grid[] = {5.0, 10.0, 20.0, 50.0};
  for (int i = 0; i < 2000; ++i) {
    // keep coordinates out of [0,50] and [950,1000]
    const double x2 = 51.0 + rng.next_unit() * 898.0;
    const double y2 = 51.0 + rng.next_unit() * 898.0;
    auto first = gate2_spatial(100.0, 100.0, x2, y2, grid[0]);
    for (double m : grid) {
      auto d = gate2_spatial(100.0, 100.0, x2, y2, m);
      CHECK(d.source == first.source);
      CHECK(d.point.x == first.point.x);
      CHECK(d.point.y == first.point.y);
    }
  }
}
