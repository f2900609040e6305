#include "hlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hlab/error.hpp"

namespace hlab {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || std::isnan(v)) throw DomainError(std::string(what) + " must be > 0");
}

}  // namespace

UcModulus::UcModulus(RealModulus eta, std::string name) : eta_(std::move(eta)), name_(std::move(name)) {
  if (!eta_) throw DomainError("UcModulus: empty function");
  for (int k = 0; k <= 11; ++k) {
    const double e = std::ldexp(1.0, -k) * 2.0;
    const double v = eta_(e);
    if (!(v > 0.0 && v <= 1.0)) {
      throw DomainError("UcModulus '" + name_ + "': eta(" + std::to_string(e) +
                        ") = " + std::to_string(v) + " is outside (0, 1]");
    }
  }
}

UcModulus UcModulus::power_type(double p, double C) {
  if (!(p >= 2.0)) throw DomainError("power-type modulus needs p >= 2");
  require_positive(C, "power-type constant C");
  UcModulus m([p, C](double e) { return C * std::pow(e, p); },
              "power(" + std::to_string(p) + "," + std::to_string(C) + ")");
  m.tilde_ = [p, C](double e) { return C * std::pow(e, p - 1.0); };
  m.power_ = std::make_pair(p, C);
  return m;
}

double UcModulus::operator()(double eps) const {
  if (!(eps > 0.0)) throw DomainError("uniform convexity modulus needs eps > 0");
  return eta_(std::min(eps, 2.0));
}

std::optional<double> UcModulus::tilde(double eps) const {
  if (!tilde_) return std::nullopt;
  if (!(eps > 0.0)) throw DomainError("uniform convexity modulus needs eps > 0");
  return tilde_(std::min(eps, 2.0));
}

UcModulus inner_product_modulus() {
  UcModulus m = UcModulus::power_type(2.0, 0.125);
  return m;
}

ConvexityVerdict ball_convexity_check(const UcModulus& eta, const Point& a, const Point& x,
                                      const Point& y, double r, double lam,
                                      std::optional<double> eps, NormKind norm) {
  require_same_dim(a, x, "ball_convexity_check");
  require_same_dim(a, y, "ball_convexity_check");
  if (!(r > 0.0) || !(lam >= 0.0 && lam <= 1.0)) return ConvexityVerdict::Inconclusive;
  const double slack = 1e-12 * r;
  if (distance(norm, x, a) > r + slack || distance(norm, y, a) > r + slack) {
    return ConvexityVerdict::Inconclusive;
  }
  const double dxy = distance(norm, x, y);
  const double e = eps ? *eps : std::min(2.0, dxy / r);
  if (!(e > 0.0) || dxy < e * r * (1.0 - 1e-12)) return ConvexityVerdict::Inconclusive;
  const Point m = lerp(x, y, lam);
  const double lhs = distance(norm, m, a);
  const double rhs = (1.0 - 2.0 * lam * (1.0 - lam) * eta(e)) * r;
  return lhs <= rhs + 1e-9 ? ConvexityVerdict::Holds : ConvexityVerdict::Violated;
}

UiModulus::UiModulus(RealModulus mu, std::string provenance)
    : mu_(std::move(mu)), provenance_(std::move(provenance)) {
  if (!mu_) throw DomainError("UiModulus: empty function");
}

double UiModulus::operator()(double eps) const {
  if (!(eps > 0.0)) throw DomainError("uniform integrability modulus needs eps > 0");
  return mu_(eps);
}

UiModulus ui_from_pth_moment(double K, double p) {
  if (!(p > 1.0)) throw DomainError("ui_from_pth_moment: p must be > 1");
  require_positive(K, "ui_from_pth_moment: K");
  return UiModulus(
      [K, p](double e) { return 0.5 * e * std::pow(e / (2.0 * K), 1.0 / (p - 1.0)); },
      "pth_moment(K=" + std::to_string(K) + ",p=" + std::to_string(p) + ")");
}

UiModulus ui_from_supercoercive(double K, RealModulus kappa) {
  require_positive(K, "ui_from_supercoercive: K");
  if (!kappa) throw DomainError("ui_from_supercoercive: empty kappa");
  return UiModulus([K, kappa](double e) { return e / (2.0 * kappa(2.0 * K / e)); },
                   "supercoercive(K=" + std::to_string(K) + ")");
}

UiModulus ui_from_error_sums(double K, RealModulus mu1, RealModulus mu2, bool constant_anchors) {
  if (!constant_anchors) {
    throw HypothesisError("ui_from_error_sums: x0 and u must be constant (deterministic)");
  }
  require_positive(K, "ui_from_error_sums: K");
  if (!mu1 || !mu2) throw DomainError("ui_from_error_sums: empty modulus");
  return UiModulus(
      [K, mu1, mu2](double e) {
        return std::min({e / (4.0 * K), mu1(e / 8.0), mu2(e / 8.0)});
      },
      "error_sums(K=" + std::to_string(K) + ")");
}

double abs_continuity_lower_bound(const RealModulus& mu, double eps) {
  require_positive(eps, "abs_continuity_lower_bound: eps");
  return mu(eps / 2.0);
}

double abs_continuity_half_threshold(const RealModulus& mu, double eps) {
  require_positive(eps, "abs_continuity_half_threshold: eps");
  return mu(eps / 4.0);
}

}  // namespace hlab
