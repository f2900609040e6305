#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hlab/geometry.hpp"
#include "hlab/moduli.hpp"
#include "hlab/noise.hpp"
#include "hlab/schedule.hpp"

namespace hlab {

struct SchemeConfig;

using Constants = std::map<std::string, double>;

// eps -> N with a_n < eps for all n >= N.
class MeanRate {
 public:
  MeanRate(std::function<Index(double)> fn, std::string origin, Constants constants = {});
  // Rate identically 0 (valid for quantities that vanish).
  static MeanRate zero(std::string origin);

  // Throws DomainError unless eps > 0.
  Index operator()(double eps) const;
  const std::string& origin() const noexcept { return origin_; }
  const Constants& constants() const noexcept { return constants_; }

 private:
  std::function<Index(double)> fn_;
  std::string origin_;
  Constants constants_;
};

// (lambda, eps) -> N with P(exists n >= N: X_n >= eps) < lambda.
class AsRate {
 public:
  AsRate(std::function<Index(double, double)> fn, std::string origin, Constants constants = {});
  static AsRate zero(std::string origin);

  Index operator()(double lambda, double eps) const;
  const std::string& origin() const noexcept { return origin_; }
  const Constants& constants() const noexcept { return constants_; }

 private:
  std::function<Index(double, double)> fn_;
  std::string origin_;
  Constants constants_;
};

// E[X_n] <= 2L/(n+2) and P(exists i >= n: X_i >= eps) <= 4L/(eps (n+2)) for n >= first_index.
struct FastBound {
  double L = 0.0;
  Index first_index = 0;
  std::string origin;
  // How L was assembled, e.g. {"K0", 14}, {"K1", 14}.
  std::vector<std::pair<std::string, double>> coefficients;

  double mean_bound(Index n) const { return 2.0 * L / (static_cast<double>(n) + 2.0); }
  double tail_bound(double eps, Index n) const {
    return 4.0 * L / (eps * (static_cast<double>(n) + 2.0));
  }
};

// --- Xu-type lemmas -------------------------------------------------------

// phi(eps) = theta(chi(eps/2), ln(2K/eps)) + 1 for s_{n+1} <= (1 - a_n) s_n + c_n,
// s_n <= K, theta a divergence modulus for sum a_n, chi a convergence modulus for sum c_n.
MeanRate xu_rate(double K, DivergenceModulus theta, ConvergenceModulus chi);

struct MeanAsPair {
  MeanRate mean;
  AsRate as;
};
// Mean rate as xu_rate; a.s. rate psi(lambda, eps) = phi(lambda eps / 2).
MeanAsPair stochastic_xu_rates(double K, DivergenceModulus theta, ConvergenceModulus chi);

// For X_{n+1} <= X_n + C_n: psi(lambda, eps) = max{phi(lambda eps/2), chi(lambda eps/2)}.
AsRate mean_to_as_transfer(ConvergenceModulus chi_for_c, MeanRate phi_for_x);

// --- Asymptotic regularity of x_n and y_n ---------------------------------

struct XarInputs {
  double K0 = 0.0;
  double E0 = 0.0;  // sup_n E||xi_n||
  double D0 = 0.0;  // sup_n E||delta_n||
  // Moduli and bounds for sum E||xi_{n+1}-xi_n||, sum E||delta_{n+1}-delta_n||,
  // sum |alpha_{n+1}-alpha_n|, sum |beta_{n+1}-beta_n|.
  std::optional<ConvergenceModulus> chi1, chi2, chi3, chi4;
  std::optional<double> B1, B2, B3, B4;
  // Divergence modulus for sum alpha_n. The recurrence for ||x_{n+1}-x_n||
  // contracts by (1 - alpha_{n+1}), so the shifted modulus is used internally.
  std::optional<DivergenceModulus> theta;
};

struct XarRates {
  MeanRate phi;
  AsRate psi;
  ConvergenceModulus chi;  // combined modulus for sum E[c_n]
  double K = 0.0;          // bound on E||x_{n+1}-x_n||
};
// Missing moduli throw HypothesisError naming them.
XarRates x_ar_rates(const XarInputs& in);

struct YarRates {
  MeanRate phi;
  AsRate psi;
};
YarRates y_ar_rates(const XarInputs& in);

// Fills XarInputs from the schedules and noise certificates of a scheme.
XarInputs xar_inputs_for(const SchemeConfig& cfg, double K0);

// --- Residuals relative to T and U ----------------------------------------

struct RelativeInputs {
  std::optional<MeanRate> phi;   // E||U y_n - y_n|| -> 0
  std::optional<ConvergenceModulus> rho1;  // E||xi_n|| -> 0
  std::optional<ConvergenceModulus> rho2;  // E||delta_n|| -> 0
  std::optional<ConvergenceModulus> rho3;  // alpha_n -> 0
  std::optional<MeanRate> phi0;  // E||x_{n+1} - x_n|| -> 0
  double K0 = 0.0;
};

struct RelativeRates {
  MeanRate phi1;  // E||x_n - y_n||
  MeanRate phi2;  // E||T y_n - y_n||
  MeanRate phi3;  // E||U x_n - x_n||
  MeanRate phi4;  // E||T x_n - x_n||
};
RelativeRates relative_rates(const RelativeInputs& in);

struct RelativeAsInputs {
  std::optional<AsRate> psi;   // ||U y_n - y_n|| -> 0 a.s.
  std::optional<ConvergenceModulus> rho;  // alpha_n -> 0
  std::optional<AsRate> phi1;  // ||xi_n|| -> 0 a.s.
  std::optional<AsRate> phi2;  // ||delta_n|| -> 0 a.s.
  std::optional<AsRate> psi0;  // ||x_{n+1} - x_n|| -> 0 a.s.
  double K0 = 0.0;
  // A single integrable Y dominating the displacement quantities with E[Y] <= K0.
  bool hyp_prime = false;
};

struct RelativeAsRates {
  AsRate psi1, psi2, psi3, psi4;
};
RelativeAsRates relative_rates_as(const RelativeAsInputs& in);

// (lambda, eps) -> chi(lambda eps): a.s. rate for ||xi_n|| -> 0 from sum E||xi_n|| < inf.
AsRate summed_mean_to_as(ConvergenceModulus chi, std::string origin = "summed_mean_to_as");

// --- Krasnoselskii-Mann with Tikhonov terms --------------------------------

struct KmtInputs {
  double Lambda = 0.0;
  double K0 = 0.0;
  std::optional<Schedule> beta;               // checked against Lambda
  std::optional<MeanRate> phi_dy;             // E||y_n - y_{n+1}|| -> 0
  std::optional<ConvergenceModulus> rho;      // alpha_n -> 0
  std::optional<ConvergenceModulus> chi;      // E||delta_n|| -> 0
  std::optional<AsRate> psi_dy;               // ||y_n - y_{n+1}|| -> 0 a.s.
  std::optional<AsRate> phi_delta;            // ||delta_n|| -> 0 a.s.
  bool hyp_prime = false;
};

struct KmtRates {
  std::optional<MeanRate> kappa;  // E||U y_n - y_n||
  std::optional<AsRate> zeta;     // ||U y_n - y_n|| a.s.
};
// Throws DomainError when beta leaves [Lambda, 1 - Lambda].
KmtRates kmt_rates(const KmtInputs& in);

// --- Fast rates ------------------------------------------------------------

// prod_{i=j}^{k} (1 - s_i), 1 for j > k.
double partial_product(Index j, Index k, const Schedule& s);
// Closed form j(j+1)/((k+1)(k+2)) for HalpernTwo, j <= k.
double partial_product_closed_form(Index j, Index k);
// A_1^n s0 + L sum_{i=1}^n (s_{i-1} - s_i) A_{i+1}^n.
double sabach_stern_bound(Index n, double s0, double L, const Schedule& s);
// FastBound with the given L; requires HalpernTwo and s0 <= L.
FastBound sabach_stern_closed_form(const Schedule& s, double L, double s0);

enum class FastCase { dx, dy, halpern_residual, kmt_residual };
std::string_view to_string(FastCase c);
std::optional<FastCase> parse_fast_case(std::string_view name);

struct FastInputs {
  double K0 = 0.0;
  double K1 = 0.0;  // E||xi_n|| <= K1/(n+2)^2
  double K2 = 0.0;  // E||delta_n|| <= K2/(n+2)^2
  double B = 0.0;   // KM-T only: B >= 1/(1 - beta)
  std::optional<double> beta;  // constant beta, when known
};
// One L valid for both the mean and the tail bound (the larger of the two
// assembled constants). Coefficients are recorded in the result.
FastBound fast_bounds(FastCase c, const FastInputs& in);
// Checks the scheme shape and noise certificates, then calls fast_bounds.
FastBound fast_bounds_for(const SchemeConfig& cfg, FastCase c, double K0, double B = 0.0);

// Rates read off a fast bound: mean ceil(2L/eps), a.s. ceil(4L/(eps lambda)).
MeanRate fast_mean_rate(const FastBound& fb);
AsRate fast_as_rate(const FastBound& fb);

// --- Geometric rates --------------------------------------------------------

struct GeometryInputs {
  std::optional<UcModulus> eta;
  double K = 0.0;       // E[Y] <= K with Y dominating (L1-domination)
  double Lambda = 0.0;
  std::optional<AsRate> Delta;             // ||x_{n+1}-x_n|| -> 0 a.s.
  std::optional<ConvergenceModulus> rho;   // alpha_n -> 0
  std::optional<ConvergenceModulus> chi1;  // sum E||xi_n||
  std::optional<ConvergenceModulus> chi2;  // sum E||delta_n||
  bool optimized = false;  // use the tilde form of eta
  std::optional<UiModulus> mu;  // for the mean rate
};
// Gamma(lambda, eps) for ||U y_n - y_n|| -> 0 a.s.
AsRate geometry_as_rate(const GeometryInputs& in);
// Gamma(eps) = Gamma_as(mu(eps/4), eps/2) for E||U y_n - y_n|| -> 0.
MeanRate geometry_mean_rate(const GeometryInputs& in);

// Inner-product closed forms with L = 144 (2K + 2K1 + 2K2):
// Phi1 = ceil(24KL/(Lambda^2 eps^2 lambda^2)), Phi2 = 3 Phi1 (rUx, rTx a.s.),
// phi1 = ceil(96KL/(Lambda^2 eps^2 mu(eps/4)^2)), phi2 = 3 phi1 (in mean).
struct InnerProductRates {
  AsRate Phi1, Phi2;
  std::optional<MeanRate> phi1, phi2;
  double L = 0.0;
};
InnerProductRates inner_product_fast_rates(double K, double K1, double K2, double Lambda,
                                           std::optional<UiModulus> mu = std::nullopt);

// --- Constants from a declared common fixed point ---------------------------

struct FixedPointConstants {
  double x0_dist = 0.0;  // ||x0 - p||
  double u_dist = 0.0;   // ||u - p||
  double E = 0.0;        // >= sum E||xi_n||
  double D = 0.0;        // >= sum E||delta_n||
  // Y = 2 (||x0-p|| + ||u-p|| + sum (||xi_n|| + ||delta_n||)) dominates every
  // displacement quantity in both hypotheses; K = E[Y] bound.
  double K = 0.0;
};
// Requires constant anchors; throws HypothesisError otherwise.
FixedPointConstants constants_from_fixed_point(const SchemeConfig& cfg, const Point& p);

}  // namespace hlab
