#include <cmath>
#include <vector>

#include "doctest.h"
#include "hlab/error.hpp"
#include "hlab/geometry.hpp"
#include "hlab/rates.hpp"
#include "hlab/scheme.hpp"

using namespace hlab;

namespace {

const std::vector<double> kEps = {2.0, 1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01};
const std::vector<double> kLam = {0.9, 0.5, 0.2, 0.1, 0.05};

ConvergenceModulus inv(double c) {
  return [c](double e) { return ceil_index(c / e); };
}
const ConvergenceModulus kZero = [](double) -> Index { return 0; };

DivergenceModulus exp_theta() {
  return [](Index k, double b) { return ceil_index((static_cast<double>(k) + 2.0) * std::exp(b / 2.0)); };
}

void check_monotone(const MeanRate& r) {
  INFO(r.origin());
  for (std::size_t i = 1; i < kEps.size(); ++i) CHECK(r(kEps[i - 1]) <= r(kEps[i]));
}

void check_monotone(const AsRate& r) {
  INFO(r.origin());
  for (double l : kLam) {
    for (std::size_t i = 1; i < kEps.size(); ++i) CHECK(r(l, kEps[i - 1]) <= r(l, kEps[i]));
  }
  for (double e : kEps) {
    for (std::size_t i = 1; i < kLam.size(); ++i) CHECK(r(kLam[i - 1], e) <= r(kLam[i], e));
  }
}

Index ceil_d(double x) { return static_cast<Index>(std::ceil(x)); }

XarInputs full_inputs() {
  XarInputs in;
  in.K0 = 1.0;
  in.E0 = 0.5;
  in.D0 = 0.25;
  in.chi1 = inv(1.0);
  in.chi2 = inv(2.0);
  in.chi3 = inv(3.0);
  in.chi4 = inv(5.0);
  in.B1 = 1.0;
  in.B2 = 2.0;
  in.B3 = 3.0;
  in.B4 = 4.0;
  in.theta = exp_theta();
  return in;
}

SchemeConfig rotation_case() {
  SchemeConfig cfg = make_halpern(Operator::rotation(2, 0, 1, M_PI / 3.0), Point{0.0, 0.0},
                                  Point{1.0, 0.0}, Schedule::halpern_two(),
                                  NoiseModel::gaussian_decay(0.5), NormKind::Euclidean);
  cfg.fixed_point = Point{0.0, 0.0};
  return cfg;
}

}  // namespace

TEST_CASE("xu rate: value and recursion oracle") {
  const MeanRate phi = xu_rate(1.0, exp_theta(), inv(2.0));
  CHECK(phi(0.1) == 189);
  for (double e : kEps) CHECK(phi(e) >= inv(2.0)(e / 2.0));
  CHECK_THROWS_AS(phi(0.0), DomainError);
  CHECK_THROWS_AS(phi(-1.0), DomainError);
  CHECK_THROWS_AS(xu_rate(0.0, exp_theta(), inv(2.0)), DomainError);
  check_monotone(phi);

  // a_n = 2/(n+2) witnesses theta; c_n = 2/(n(n+1)) (c_0 = 0) witnesses chi.
  // s_0 = 1, s_{n+1} = (1 - a_n) s_n + c_n stays <= 1.
  const Index N = 1000000;
  std::vector<double> s(N + 1);
  s[0] = 1.0;
  for (Index n = 0; n < N; ++n) {
    const double a = 2.0 / (n + 2.0);
    const double c = n == 0 ? 0.0 : 2.0 / (static_cast<double>(n) * (n + 1.0));
    s[n + 1] = (1.0 - a) * s[n] + c;
  }
  double smax = 0.0;
  for (double v : s) smax = std::max(smax, v);
  CHECK(smax <= 1.0);
  for (double e : {0.5, 0.2, 0.1, 0.05}) {
    const Index start = phi(e);
    REQUIRE(start <= N);
    double worst = 0.0;
    for (Index n = start; n <= N; ++n) worst = std::max(worst, s[n]);
    CHECK(worst < e);
  }
}

TEST_CASE("stochastic xu and transfer") {
  const MeanAsPair p = stochastic_xu_rates(1.0, exp_theta(), inv(2.0));
  for (double e : kEps) CHECK(p.as(1.0, e) == p.mean(e / 2.0));
  CHECK(p.as(0.5, 0.2) == p.mean(0.05));
  check_monotone(p.as);

  const MeanRate phi = MeanRate(inv(1.0), "harmonic");
  const AsRate psi = mean_to_as_transfer(kZero, phi);
  const AsRate same = mean_to_as_transfer(inv(1.0), phi);
  for (double l : kLam) {
    for (double e : kEps) {
      CHECK(same(l, e) == phi(l * e / 2.0));
      // X_n = 1/(n+1) is decreasing: the event {exists n >= N: X_n >= eps} is {X_N >= eps}.
      const Index N = psi(l, e);
      CHECK(1.0 / (static_cast<double>(N) + 1.0) < e);
    }
  }
}

TEST_CASE("x_n and y_n asymptotic regularity rates") {
  const XarInputs in = full_inputs();
  const XarRates x = x_ar_rates(in);
  const double B = 1.0 + 2.0 + 3.0 * 1.5 + 4.0 * 1.25;
  CHECK(x.K == doctest::Approx(2.0 + 0.5 + 0.25 + B));
  CHECK(x.phi.constants().at("K") == doctest::Approx(x.K));
  for (double e : kEps) {
    const Index want = std::max({ceil_d(4.0 / e), ceil_d(8.0 / e), ceil_d(3.0 * 4.0 * 1.5 / e),
                                 ceil_d(5.0 * 4.0 * 1.25 / e)});
    CHECK(x.chi(e) == want);
    CHECK(x.psi(1.0, e) == x.phi(e / 2.0));
  }
  check_monotone(x.phi);
  check_monotone(x.psi);

  const YarRates y = y_ar_rates(in);
  for (double e : kEps) {
    CHECK(y.phi(e) == std::max({x.phi(e / 3.0), ceil_d(3.0 / e), ceil_d(3.0 * 3.0 * 1.5 / e)}));
    for (double l : kLam) CHECK(y.psi(l, e) == std::max(y.phi(l * e / 2.0), x.chi(l * e / 2.0)));
  }
  check_monotone(y.phi);
  check_monotone(y.psi);

  // Zero noise, constant beta: only chi3 survives.
  XarInputs z = in;
  z.E0 = z.D0 = 0.0;
  z.chi1 = z.chi2 = z.chi4 = kZero;
  z.B1 = z.B2 = z.B4 = 0.0;
  const XarRates xz = x_ar_rates(z);
  for (double e : kEps) CHECK(xz.chi(e) == ceil_d(3.0 * 4.0 / e));
  const YarRates yz = y_ar_rates(z);
  for (double e : kEps) CHECK(yz.phi(e) == std::max(xz.phi(e / 3.0), ceil_d(9.0 / e)));

  XarInputs missing = in;
  missing.chi3.reset();
  missing.theta.reset();
  try {
    x_ar_rates(missing);
    FAIL("expected HypothesisError");
  } catch (const HypothesisError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("chi3") != std::string::npos);
    CHECK(msg.find("theta") != std::string::npos);
  }
}

TEST_CASE("inputs from a scheme") {
  const SchemeConfig cfg = rotation_case();
  const XarInputs in = xar_inputs_for(cfg, 2.0);
  CHECK(in.theta.has_value());
  CHECK(in.chi1.has_value());
  CHECK(in.chi2.has_value());
  CHECK(in.chi3.has_value());
  CHECK(in.chi4.has_value());
  CHECK(*in.B4 == 0.0);
  CHECK(in.E0 == doctest::Approx(cfg.xi.sup_bound()));
  CHECK(in.D0 == 0.0);
  CHECK_NOTHROW(x_ar_rates(in));

  const FixedPointConstants fp = constants_from_fixed_point(cfg, Point{0.0, 0.0});
  CHECK(fp.x0_dist == 1.0);
  CHECK(fp.u_dist == 0.0);
  CHECK(fp.D == 0.0);
  CHECK(fp.K == doctest::Approx(2.0 * (1.0 + fp.E)));
  SchemeConfig rnd = cfg;
  rnd.random_anchor_scale = 0.5;
  CHECK_THROWS_AS(constants_from_fixed_point(rnd, Point{0.0, 0.0}), HypothesisError);
}

TEST_CASE("relative residual rates") {
  RelativeInputs in;
  in.phi = MeanRate(inv(1.0), "rUy");
  in.rho1 = inv(2.0);
  in.rho2 = inv(3.0);
  in.rho3 = inv(2.0);
  in.phi0 = MeanRate(inv(4.0), "dx");
  in.K0 = 2.0;
  const RelativeRates r = relative_rates(in);
  for (double e : kEps) {
    CHECK(r.phi1(e) == std::max({ceil_d(12.0 / e), ceil_d(3.0 / e), ceil_d(9.0 / e)}));
    CHECK(r.phi2(e) == std::max({r.phi1(e / 3.0), ceil_d(2.0 * 3.0 * 2.0 / e), ceil_d(6.0 / e)}));
    CHECK(r.phi3(e) == std::max(r.phi1(e / 3.0), ceil_d(3.0 / e)));
    CHECK(r.phi4(e) == std::max(r.phi1(e / 3.0), r.phi2(e / 3.0)));
  }
  for (const MeanRate* m : {&r.phi1, &r.phi2, &r.phi3, &r.phi4}) check_monotone(*m);

  // U = Id: rUy vanishes and phi3 is dominated by phi1(eps/3).
  RelativeInputs id = in;
  id.phi = MeanRate::zero("rUy");
  const RelativeRates ri = relative_rates(id);
  for (double e : kEps) CHECK(ri.phi3(e) == ri.phi1(e / 3.0));

  RelativeInputs bad = in;
  bad.phi0.reset();
  CHECK_THROWS_AS(relative_rates(bad), HypothesisError);
}

TEST_CASE("relative residual a.s. rates") {
  RelativeAsInputs in;
  in.psi = AsRate([](double l, double e) { return ceil_index(1.0 / (l * e)); }, "rUy");
  in.rho = inv(2.0);
  in.phi1 = summed_mean_to_as(inv(1.0));
  in.phi2 = summed_mean_to_as(inv(2.0));
  in.psi0 = AsRate([](double l, double e) { return ceil_index(3.0 / (l * e)); }, "dx");
  in.K0 = 1.5;
  CHECK_THROWS_AS(relative_rates_as(in), HypothesisError);
  in.hyp_prime = true;
  const RelativeAsRates r = relative_rates_as(in);
  for (double l : kLam) {
    for (double e : kEps) {
      CHECK(r.psi2(l, e) == std::max({r.psi1(l / 3.0, e / 3.0), ceil_d(2.0 * 9.0 * 1.5 / (e * l)),
                                      (*in.phi1)(l / 3.0, e / 3.0)}));
      CHECK(r.psi3(l, e) == std::max(r.psi1(l / 2.0, e / 3.0), (*in.psi)(l / 2.0, e / 3.0)));
      CHECK(r.psi4(l, e) == std::max(r.psi1(l / 2.0, e / 3.0), r.psi2(l / 2.0, e / 3.0)));
    }
  }
  for (const AsRate* a : {&r.psi1, &r.psi2, &r.psi3, &r.psi4}) check_monotone(*a);
}

TEST_CASE("summed mean to a.s.") {
  const AsRate a = summed_mean_to_as(inv(1.0));
  CHECK(a(0.1, 0.1) == 100);
  for (double l : kLam) {
    for (double e : kEps) CHECK(a(l, e) == ceil_index(1.0 / (l * e)));
  }
  check_monotone(a);
}

TEST_CASE("KM-Tikhonov residual rates") {
  KmtInputs in;
  in.Lambda = 0.5;
  in.K0 = 2.0;
  in.beta = Schedule::constant(0.5);
  in.phi_dy = MeanRate(inv(1.0), "dy");
  in.rho = inv(2.0);
  in.chi = kZero;
  const KmtRates r = kmt_rates(in);
  REQUIRE(r.kappa.has_value());
  CHECK_FALSE(r.zeta.has_value());
  for (double e : kEps) {
    CHECK((*r.kappa)(e) == std::max(ceil_d(8.0 / e), ceil_d(2.0 * 8.0 * 2.0 / e)) + 1);
  }
  check_monotone(*r.kappa);

  KmtInputs as = in;
  as.psi_dy = AsRate([](double l, double e) { return ceil_index(1.0 / (l * e)); }, "dy_as");
  as.phi_delta = AsRate::zero("delta");
  CHECK_THROWS_AS(kmt_rates(as), HypothesisError);
  as.hyp_prime = true;
  const KmtRates ra = kmt_rates(as);
  REQUIRE(ra.zeta.has_value());
  for (double l : kLam) {
    for (double e : kEps) {
      const double t = 0.5 * e / 4.0;
      CHECK((*ra.zeta)(l, e) ==
            std::max(ceil_index(3.0 / (l * t)), ceil_index(2.0 * 4.0 * 2.0 / (0.5 * l * e))) + 1);
    }
  }
  check_monotone(*ra.zeta);

  KmtInputs bad = in;
  bad.Lambda = 0.4;
  bad.beta = Schedule::constant(0.3);
  CHECK_THROWS_AS(kmt_rates(bad), DomainError);
  bad.beta = Schedule::constant(0.7);
  CHECK_THROWS_AS(kmt_rates(bad), DomainError);
  bad.beta = Schedule::constant(0.5);
  CHECK_NOTHROW(kmt_rates(bad));
  bad.Lambda = 0.6;
  CHECK_THROWS_AS(kmt_rates(bad), DomainError);
  bad = in;
  bad.beta.reset();
  CHECK_THROWS_AS(kmt_rates(bad), HypothesisError);
}

TEST_CASE("partial products and the closed-form bound") {
  const Schedule h = Schedule::halpern_two();
  CHECK(partial_product_closed_form(1, 3) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(partial_product(1, 3, h) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(partial_product(5, 4, h) == 1.0);
  CHECK(partial_product_closed_form(5, 4) == 1.0);
  for (Index j = 1; j <= 60; ++j) {
    for (Index k = j; k <= 300; k += 7) {
      CHECK(std::abs(partial_product(j, k, h) - partial_product_closed_form(j, k)) <= 1e-12);
    }
  }

  // s_{n+1} = (1 - alpha_{n+1}) s_n + (alpha_n - alpha_{n+1}) L with L = s_0 = 1.
  const FastBound fb = sabach_stern_closed_form(h, 1.0, 1.0);
  double s = 1.0;
  bool dominated = true;
  for (Index n = 0; n <= 10000; ++n) {
    if (n == 1) CHECK(s == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    if (s > fb.mean_bound(n) * (1.0 + 1e-12)) dominated = false;
    if (n % 997 == 0) CHECK(std::abs(sabach_stern_bound(n, 1.0, 1.0, h) - s) <= 1e-12);
    s = (1.0 - h(n + 1)) * s + (h(n) - h(n + 1));
  }
  CHECK(dominated);

  CHECK_THROWS_AS(sabach_stern_closed_form(Schedule::constant(0.5), 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(sabach_stern_closed_form(h, 1.0, 2.0), DomainError);
  CHECK(sabach_stern_bound(50, 0.5, 1.0, Schedule::power_decay(1.0, 1.0)) > 0.0);
}

TEST_CASE("fast bounds") {
  FastInputs in;
  in.K0 = 1.0;
  const FastBound dx = fast_bounds(FastCase::dx, in);
  CHECK(dx.L == 2.0);
  CHECK(dx.mean_bound(0) == 2.0);
  CHECK(dx.tail_bound(0.5, 2) == doctest::Approx(4.0 * 2.0 / (0.5 * 4.0)));
  for (Index n = 0; n < 100; ++n) {
    CHECK(dx.mean_bound(n + 1) < dx.mean_bound(n));
    CHECK(dx.tail_bound(0.3, n + 1) < dx.tail_bound(0.3, n));
  }
  in.K1 = 0.5;
  in.K2 = 0.25;
  CHECK(fast_bounds(FastCase::dx, in).L == doctest::Approx(2.0 + 1.0 + 0.5));
  CHECK(fast_bounds(FastCase::dy, in).L == doctest::Approx(8.0 + 6.0 + 1.0));
  CHECK_THROWS_AS(fast_bounds(FastCase::halpern_residual, in), DomainError);
  CHECK_THROWS_AS(fast_bounds(FastCase::kmt_residual, in), DomainError);
  FastInputs h;
  h.K0 = 1.0;
  h.K1 = 0.5;
  CHECK(fast_bounds(FastCase::halpern_residual, h).L == doctest::Approx(14.0 + 7.0));
  FastInputs k;
  k.K0 = 1.0;
  k.K2 = 0.5;
  k.beta = 0.5;
  k.B = 1.5;
  CHECK_THROWS_AS(fast_bounds(FastCase::kmt_residual, k), DomainError);
  k.B = 2.0;
  const FastBound km = fast_bounds(FastCase::kmt_residual, k);
  CHECK(km.L == doctest::Approx(16.0 + 10.0 + 600.0 + 162.0));
  CHECK(km.first_index == 1);
  CHECK(km.coefficients.size() == 4);
  CHECK_THROWS_AS(fast_bounds(FastCase::dx, FastInputs{-1.0}), DomainError);

  const MeanRate mr = fast_mean_rate(dx);
  const AsRate ar = fast_as_rate(dx);
  for (double e : kEps) {
    CHECK(mr(e) == ceil_index(4.0 / e));
    CHECK(dx.mean_bound(mr(e)) < e);
    for (double l : kLam) {
      CHECK(ar(l, e) == ceil_index(8.0 / (e * l)));
      CHECK(dx.tail_bound(e, ar(l, e)) < l);
    }
  }
  check_monotone(mr);
  check_monotone(ar);
  CHECK(fast_mean_rate(km)(1e6) == 1);

  CHECK(parse_fast_case("kmt_residual") == FastCase::kmt_residual);
  CHECK_FALSE(parse_fast_case("bogus").has_value());
  CHECK(to_string(FastCase::halpern_residual) == "halpern_residual");
}

TEST_CASE("fast bounds from a scheme") {
  SchemeConfig cfg = rotation_case();
  const FastBound fb = fast_bounds_for(cfg, FastCase::halpern_residual, 2.0);
  CHECK(fb.L == doctest::Approx(14.0 * 2.0 + 14.0 * *cfg.xi.decay_constant()));
  CHECK_THROWS_AS(fast_bounds_for(cfg, FastCase::kmt_residual, 2.0), DomainError);
  SchemeConfig c2 = cfg;
  c2.alpha = Schedule::power_decay(1.0, 1.0);
  CHECK_THROWS_AS(fast_bounds_for(c2, FastCase::dx, 2.0), DomainError);
  SchemeConfig c3 = cfg;
  c3.beta = Schedule::power_decay(0.5, 1.0);
  CHECK_THROWS_AS(fast_bounds_for(c3, FastCase::dx, 2.0), DomainError);

  SchemeConfig km = make_km_tikhonov(Operator::ball_projection(Point{2.0, 0.0}, 1.0),
                                     Schedule::halpern_two(), Point{0.0, 2.0}, Schedule::constant(0.5),
                                     NoiseModel::gaussian_decay(0.5), NormKind::Euclidean);
  const FastBound kb = fast_bounds_for(km, FastCase::kmt_residual, 1.0);
  CHECK(kb.L == doctest::Approx(16.0 + 20.0 * 0.5 + 300.0 * 2.0 + 162.0 * 2.0 * 0.5));
}

TEST_CASE("geometric rates") {
  GeometryInputs in;
  in.eta = inner_product_modulus();
  in.K = 3.0;
  in.Lambda = 0.5;
  in.Delta = AsRate([](double l, double e) { return ceil_index(1.0 / (l * e)); }, "dx_as");
  in.rho = inv(1.0);
  in.chi1 = inv(2.0);
  in.chi2 = kZero;
  const AsRate g = geometry_as_rate(in);
  for (double l : kLam) {
    for (double e : kEps) {
      const double Kp = 9.0 / l;
      const double a = std::min(e / Kp, 2.0);
      const double h = e * 0.25 * a * a / 8.0;
      const Index want = std::max({ceil_index(9.0 / (l * h / 4.0)), ceil_index(4.0 * Kp / h),
                                   ceil_index(2.0 * 36.0 / (l * h))});
      CHECK(g(l, e) == want);
    }
  }
  check_monotone(g);

  GeometryInputs opt = in;
  opt.optimized = true;
  const AsRate go = geometry_as_rate(opt);
  for (double l : kLam) {
    for (double e : kEps) CHECK(go(l, e) <= g(l, e));
  }

  // Quadratic shape: halving lambda at fixed eps scales the rho term by about 2^3.
  const double r = static_cast<double>(g(0.05, 0.5)) / static_cast<double>(g(0.1, 0.5));
  CHECK(r == doctest::Approx(8.0).epsilon(0.01));

  CHECK_THROWS_AS(geometry_mean_rate(in), HypothesisError);
  in.mu = ui_from_pth_moment(3.0, 2.0);
  const MeanRate gm = geometry_mean_rate(in);
  for (double e : kEps) CHECK(gm(e) == g((*in.mu)(e / 4.0), e / 2.0));
  check_monotone(gm);

  GeometryInputs none = in;
  none.eta.reset();
  try {
    geometry_as_rate(none);
    FAIL("expected HypothesisError");
  } catch (const HypothesisError& e) {
    CHECK(std::string(e.what()).find("eta") != std::string::npos);
  }
  GeometryInputs notilde = in;
  notilde.eta = UcModulus([](double e) { return e * e / 16.0; });
  notilde.optimized = true;
  CHECK_THROWS_AS(geometry_as_rate(notilde), HypothesisError);
  GeometryInputs lam = in;
  lam.Lambda = 0.75;
  CHECK_THROWS_AS(geometry_as_rate(lam), DomainError);
}

TEST_CASE("inner-product closed forms") {
  const UiModulus mu = ui_from_pth_moment(2.0, 2.0);
  const InnerProductRates r = inner_product_fast_rates(2.0, 0.5, 0.0, 0.5, mu);
  CHECK(r.L == doctest::Approx(144.0 * 5.0));
  for (double l : kLam) {
    for (double e : kEps) {
      const double base = 2.0 * r.L / (0.25 * e * e * l * l);
      CHECK(r.Phi1(l, e) == ceil_index(24.0 * base));
      CHECK(r.Phi2(l, e) == ceil_index(72.0 * base));
      CHECK(r.Phi2(l, e) <= 3 * r.Phi1(l, e));
    }
  }
  REQUIRE(r.phi1.has_value());
  for (double e : kEps) {
    const double q = mu(e / 4.0);
    CHECK((*r.phi1)(e) == ceil_index(96.0 * 2.0 * r.L / (0.25 * e * e * q * q)));
    CHECK((*r.phi2)(e) == ceil_index(288.0 * 2.0 * r.L / (0.25 * e * e * q * q)));
  }
  check_monotone(r.Phi1);
  check_monotone(*r.phi2);
  CHECK_FALSE(inner_product_fast_rates(2.0, 0.0, 0.0, 0.5).phi1.has_value());
  CHECK_THROWS_AS(inner_product_fast_rates(0.0, 0.0, 0.0, 0.5), DomainError);
}
