#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "hlab/error.hpp"
#include "hlab/mdp.hpp"
#include "hlab/operators.hpp"
#include "hlab/point.hpp"
#include "hlab/qlearning.hpp"

using namespace hlab;

namespace {

Point random_point(std::mt19937_64& rng, std::size_t d, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Point p(d);
  for (std::size_t i = 0; i < d; ++i) p[i] = g(rng);
  return p;
}

std::vector<Operator> gallery2() {
  const Operator rot = Operator::rotation(2, 0, 1, 0.7);
  const Operator hs = Operator::halfspace_projection({1.0, 2.0}, 0.5);
  const Operator ball = Operator::ball_projection({1.0, -1.0}, 2.0);
  return {Operator::identity(),
          rot,
          hs,
          ball,
          Operator::averaged(rot, 0.3),
          Operator::composition({hs, ball, rot}),
          Operator::convex_combination({hs, ball, rot}, {0.2, 0.5, 0.3}),
          Operator::linear(2, {0.5, 0.0, 0.0, 0.5}, NormKind::Euclidean)};
}

}  // namespace

TEST_CASE("norms") {
  CHECK(norm(NormKind::Euclidean, Point{3.0, 4.0}) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(norm(NormKind::Sup, Point{1.0, -2.0}) == 2.0);
  CHECK(norm(NormKind::L1, Point{0.0, 0.0}) == 0.0);
  CHECK(norm(NormKind::L1, Point{1.0, -2.5}) == 3.5);
  CHECK(distance(NormKind::Sup, Point{1.0, 1.0}, Point{-1.0, 0.5}) == 2.0);
  CHECK_THROWS_AS(distance(NormKind::Euclidean, Point{1.0}, Point{1.0, 2.0}), DimensionError);
  CHECK(parse_norm_kind("sup") == NormKind::Sup);
  CHECK_FALSE(parse_norm_kind("Sup").has_value());
  CHECK_FALSE(parse_norm_kind("l2").has_value());
}

TEST_CASE("apply examples") {
  const Point x{1.0, 2.0};
  CHECK(Operator::identity()(x) == x);
  const Point r = Operator::rotation(2, 0, 1, std::numbers::pi / 2)(Point{1.0, 0.0});
  CHECK(std::abs(r[0]) < 1e-15);
  CHECK(r[1] == doctest::Approx(1.0).epsilon(1e-15));
  const Point h = Operator::halfspace_projection({1.0, 0.0}, 0.0)(Point{2.0, 3.0});
  CHECK(h == Point{0.0, 3.0});
  CHECK_THROWS_AS(Operator::rotation(2, 0, 1, 0.3)(Point{1.0, 2.0, 3.0}), DimensionError);
}

TEST_CASE("halfspace projection matches variational-inequality oracle") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    const Point a = random_point(rng, 3, 1.0);
    const double b = std::normal_distribution<double>(0.0, 1.0)(rng);
    const Operator P = Operator::halfspace_projection(a, b);
    const Point x = random_point(rng, 3, 3.0);
    const Point p = P(x);
    CHECK(dot(a, p) <= b + 1e-12);
    // <x - p, z - p> <= 0 for every feasible z characterises the projection.
    for (int k = 0; k < 20; ++k) {
      Point z = random_point(rng, 3, 3.0);
      const double over = dot(a, z) - b;
      if (over > 0) z -= (over / dot(a, a)) * a;
      CHECK(dot(x - p, z - p) <= 1e-9);
      CHECK(distance(NormKind::Euclidean, x, p) <= distance(NormKind::Euclidean, x, z) + 1e-12);
    }
  }
}

TEST_CASE("residual examples") {
  CHECK(residual(Operator::identity(), NormKind::L1, Point{5.0, -1.0}) == 0.0);
  CHECK(residual(Operator::rotation(2, 0, 1, std::numbers::pi / 2), NormKind::Euclidean, Point{1.0, 0.0}) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(residual(Operator::ball_projection({0.0, 0.0}, 1.0), NormKind::Euclidean, Point{2.0, 0.0}) ==
        doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("check_nonexpansive examples") {
  for (NormKind k : {NormKind::Euclidean, NormKind::Sup, NormKind::L1}) {
    const auto rep = check_nonexpansive(Operator::identity(), k, 3, 100, 1);
    CHECK(rep.max_ratio <= 1.0);
    CHECK(rep.violations == 0);
  }
  const auto rot = check_nonexpansive(Operator::rotation(3, 0, 2, 1.1), NormKind::Euclidean, 3, 1000, 2);
  CHECK(rot.max_ratio <= 1.0 + 1e-10);
  CHECK(rot.max_ratio >= 1.0 - 1e-10);
  const auto half = check_nonexpansive(Operator::linear(2, {0.5, 0.0, 0.0, 0.5}, NormKind::Euclidean),
                                       NormKind::Euclidean, 2, 1000, 3);
  CHECK(half.max_ratio == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("gallery is nonexpansive in its declared norms") {
  std::uint64_t seed = 100;
  for (const Operator& op : gallery2()) {
    for (NormKind k : {NormKind::Euclidean, NormKind::Sup, NormKind::L1}) {
      if (!op.nonexpansive_in(k)) continue;
      const auto rep = check_nonexpansive(op, k, 2, 2000, ++seed);
      INFO(op.describe());
      CHECK(rep.violations == 0);
      CHECK(rep.max_ratio <= 1.0 + 1e-10);
    }
  }
  const Operator sup_lin = Operator::linear(3, {0.5, 0.5, 0.0, 0.0, 0.2, 0.8, 1.0, 0.0, 0.0}, NormKind::Sup);
  CHECK(sup_lin.nonexpansive_in(NormKind::Sup));
  CHECK(check_nonexpansive(sup_lin, NormKind::Sup, 3, 2000, 7).violations == 0);
  CHECK_THROWS_AS(Operator::linear(2, {1.0, 1.0, 0.0, 1.0}, NormKind::Euclidean), DomainError);
}

TEST_CASE("projections are idempotent and declared fixed points are fixed") {
  std::mt19937_64 rng(5);
  const Operator hs = Operator::halfspace_projection({1.0, -1.0, 2.0}, 1.0);
  const Operator ball = Operator::ball_projection({0.5, 0.0, -1.0}, 0.7);
  for (int t = 0; t < 500; ++t) {
    const Point x = random_point(rng, 3, 4.0);
    CHECK(distance(NormKind::Sup, hs(hs(x)), hs(x)) <= 1e-12);
    CHECK(distance(NormKind::Sup, ball(ball(x)), ball(x)) <= 1e-12);
  }
  for (const Operator& op : gallery2()) {
    if (auto p = op.known_fixed_point(2)) {
      INFO(op.describe());
      CHECK(residual(op, NormKind::Sup, *p) <= kFixedPointTol);
    }
  }
  const auto p = common_fixed_point(Operator::halfspace_projection({1.0, 1.0}, 1.0),
                                    Operator::halfspace_projection({1.0, -1.0}, 1.0), 2);
  REQUIRE(p.has_value());
  CHECK(residual(Operator::halfspace_projection({1.0, 1.0}, 1.0), NormKind::Sup, *p) <= 1e-12);
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(Operator::ball_projection({0.0, 0.0}, 0.0), DomainError);
  CHECK_THROWS_AS(Operator::halfspace_projection({0.0, 0.0}, 1.0), DomainError);
  CHECK_THROWS_AS(Operator::averaged(Operator::identity(), 1.5), DomainError);
  CHECK_THROWS(Operator::convex_combination({Operator::identity()}, {0.5}));
  CHECK_THROWS(Operator::rotation(2, 0, 0, 1.0));
  CHECK_FALSE(Operator::rotation(2, 0, 1, 1.0).nonexpansive_in(NormKind::Sup));
  CHECK_FALSE(Operator::ball_projection({0.0, 0.0}, 1.0).nonexpansive_in(NormKind::L1));
}

TEST_CASE("bellman_rvi examples") {
  const Mdp one(1, 1, {1.0}, {1.0});
  for (double v : {-3.0, 0.0, 7.5}) CHECK(bellman_rvi(one, PinnedEntry{}, Point{v}) == Point{1.0});

  const Mdp cyc = two_state_cycle();
  // Damped fixed-point oracle, written independently of rvi_oracle.
  Point q{0.0, 0.0};
  for (int i = 0; i < 20000; ++i) {
    const double f = q[0];
    const Point tq{0.0 + q[1] - f, 2.0 + q[0] - f};
    q = Point{0.5 * q[0] + 0.5 * tq[0], 0.5 * q[1] + 0.5 * tq[1]};
  }
  CHECK(distance(NormKind::Sup, bellman_rvi(cyc, PinnedEntry{}, q), q) <= 1e-9);

  const Mdp rnd = random_unichain(3, 2, 4);
  std::mt19937_64 rng(9);
  for (const FSpec f : {FSpec{PinnedEntry{1, 1}}, FSpec{MeanOverEntries{}}}) {
    const Operator T = Operator::bellman_rvi(std::make_shared<const Mdp>(rnd), f);
    CHECK_FALSE(T.nonexpansive_in(NormKind::Sup));
    double worst_span = 0.0, worst_sup = 0.0;
    for (int t = 0; t < 10000; ++t) {
      const Point a = random_point(rng, 6, 3.0), b = random_point(rng, 6, 3.0);
      worst_span = std::max(worst_span, span_seminorm(T(a) - T(b)) / span_seminorm(a - b));
      worst_sup = std::max(worst_sup, distance(NormKind::Sup, T(a), T(b)) / distance(NormKind::Sup, a, b));
    }
    CHECK(worst_span <= 1.0 + 1e-10);
    CHECK(worst_sup <= 2.0 + 1e-10);
    // f(Q + c) = f(Q) + c.
    const Point a = random_point(rng, 6, 1.0);
    Point shifted = a;
    for (std::size_t i = 0; i < 6; ++i) shifted[i] += 2.5;
    CHECK(evaluate_f(rnd, f, shifted) == doctest::Approx(evaluate_f(rnd, f, a) + 2.5).epsilon(1e-14));
  }
  // Raising the maximisers by d and lowering the pinned entry by d moves TQ by 2d.
  const Point q0{0.0, 1.0};
  const Point q1{-1.0, 2.0};
  CHECK(distance(NormKind::Sup, bellman_rvi(cyc, PinnedEntry{}, q0), bellman_rvi(cyc, PinnedEntry{}, q1)) ==
        doctest::Approx(2.0 * distance(NormKind::Sup, q0, q1)));
  CHECK_THROWS(Mdp(1, 1, {1.0}, {0.5}));
  CHECK_THROWS(Mdp(2, 1, {1.0}, {1.0, 0.0, 0.0, 1.0}));
}
