#pragma once

#include <optional>
#include <string>

#include "hlab/moduli.hpp"
#include "hlab/point.hpp"

namespace hlab {

// Modulus of uniform convexity eta: (0, 2] -> (0, 1].
class UcModulus {
 public:
  // Throws DomainError if eta leaves (0, 1] on the grid 2^-k, k = 0..10.
  explicit UcModulus(RealModulus eta, std::string name = "custom");
  // eta(eps) = C eps^p, eta~(eps) = C eps^(p-1). Needs p >= 2, C > 0.
  static UcModulus power_type(double p, double C);

  double operator()(double eps) const;
  // eta(eps) / eps when a tilde form is known, otherwise nullopt.
  std::optional<double> tilde(double eps) const;
  bool has_tilde() const noexcept { return static_cast<bool>(tilde_); }
  std::optional<std::pair<double, double>> power() const noexcept { return power_; }
  const std::string& name() const noexcept { return name_; }

 private:
  RealModulus eta_;
  RealModulus tilde_;
  std::optional<std::pair<double, double>> power_;
  std::string name_;
};

// eps^2 / 8, valid for any inner-product norm.
UcModulus inner_product_modulus();

enum class ConvexityVerdict { Holds, Violated, Inconclusive };

// For x, y in the closed ball B_r(a) with ||x - y|| >= eps r, checks
// ||(1-lam) x + lam y - a|| <= (1 - 2 lam (1-lam) eta(eps)) r + 1e-9.
// eps defaults to min(2, ||x - y|| / r). Inadmissible inputs are Inconclusive.
ConvexityVerdict ball_convexity_check(const UcModulus& eta, const Point& a, const Point& x,
                                      const Point& y, double r, double lam,
                                      std::optional<double> eps = std::nullopt,
                                      NormKind norm = NormKind::Euclidean);

// Modulus of uniform integrability: P(A) <= mu(eps) implies E[X_n 1_A] <= eps for all n.
class UiModulus {
 public:
  UiModulus(RealModulus mu, std::string provenance);
  double operator()(double eps) const;
  const std::string& provenance() const noexcept { return provenance_; }

 private:
  RealModulus mu_;
  std::string provenance_;
};

// E[X_n^p] <= K: mu(eps) = (eps/2) (eps/(2K))^(1/(p-1)).
UiModulus ui_from_pth_moment(double K, double p);
// E[g(X_n)] <= K with g(x)/x >= a for x >= kappa(a): mu(eps) = eps / (2 kappa(2K/eps)).
UiModulus ui_from_supercoercive(double K, RealModulus kappa);
// X_n dominated by c + sum ||xi_i|| + sum ||delta_i|| with c <= K constant, and
// mu1, mu2 absolute continuity moduli of the two sums: min{eps/4K, mu1(eps/8), mu2(eps/8)}.
// Needs constant anchors (deterministic x0 and u).
UiModulus ui_from_error_sums(double K, RealModulus mu1, RealModulus mu2, bool constant_anchors);

// E|X| >= a + eps implies P(|X| > a) > mu(eps/2).
double abs_continuity_lower_bound(const RealModulus& mu, double eps);
// The a = eps/2 instance: E|X| >= eps implies P(|X| > eps/2) > mu(eps/4).
double abs_continuity_half_threshold(const RealModulus& mu, double eps);

}  // namespace hlab
