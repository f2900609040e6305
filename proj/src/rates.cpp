#include "hlab/rates.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "hlab/error.hpp"
#include "hlab/scheme.hpp"

namespace hlab {

namespace {

void require_finite_nonneg(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(name) + " must be finite and >= 0");
  }
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be finite and > 0");
}

// Collects the names of absent inputs and throws one HypothesisError.
class Missing {
 public:
  explicit Missing(std::string who) : who_(std::move(who)) {}
  template <class T>
  void need(const std::optional<T>& v, const char* name) {
    if (!v) names_.push_back(name);
  }
  void need_flag(bool v, const char* name) {
    if (!v) names_.push_back(name);
  }
  void raise() const {
    if (names_.empty()) return;
    std::string msg = who_ + ": missing ";
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (i) msg += ", ";
      msg += names_[i];
    }
    throw HypothesisError(msg);
  }

 private:
  std::string who_;
  std::vector<std::string> names_;
};

Index max_of(std::initializer_list<Index> v) { return std::max(v); }

}  // namespace

MeanRate::MeanRate(std::function<Index(double)> fn, std::string origin, Constants constants)
    : fn_(std::move(fn)), origin_(std::move(origin)), constants_(std::move(constants)) {
  if (!fn_) throw DomainError("MeanRate: empty function");
}

MeanRate MeanRate::zero(std::string origin) {
  return MeanRate([](double) -> Index { return 0; }, std::move(origin));
}

Index MeanRate::operator()(double eps) const {
  if (!(eps > 0.0)) throw DomainError("rate '" + origin_ + "' needs eps > 0");
  return fn_(eps);
}

AsRate::AsRate(std::function<Index(double, double)> fn, std::string origin, Constants constants)
    : fn_(std::move(fn)), origin_(std::move(origin)), constants_(std::move(constants)) {
  if (!fn_) throw DomainError("AsRate: empty function");
}

AsRate AsRate::zero(std::string origin) {
  return AsRate([](double, double) -> Index { return 0; }, std::move(origin));
}

Index AsRate::operator()(double lambda, double eps) const {
  if (!(lambda > 0.0)) throw DomainError("rate '" + origin_ + "' needs lambda > 0");
  if (!(eps > 0.0)) throw DomainError("rate '" + origin_ + "' needs eps > 0");
  return fn_(lambda, eps);
}

// --- Xu-type lemmas -------------------------------------------------------

MeanRate xu_rate(double K, DivergenceModulus theta, ConvergenceModulus chi) {
  require_positive(K, "xu_rate: K");
  if (!theta || !chi) throw DomainError("xu_rate: empty modulus");
  return MeanRate(
      [K, theta, chi](double eps) -> Index {
        return sat_add(theta(chi(eps / 2.0), std::log(2.0 * K / eps)), 1);
      },
      "xu", {{"K", K}});
}

MeanAsPair stochastic_xu_rates(double K, DivergenceModulus theta, ConvergenceModulus chi) {
  MeanRate phi = xu_rate(K, std::move(theta), std::move(chi));
  AsRate psi([phi](double lambda, double eps) { return phi(lambda * eps / 2.0); }, "xu_as",
             phi.constants());
  return {std::move(phi), std::move(psi)};
}

AsRate mean_to_as_transfer(ConvergenceModulus chi_for_c, MeanRate phi_for_x) {
  if (!chi_for_c) throw DomainError("mean_to_as_transfer: empty modulus");
  return AsRate(
      [chi_for_c, phi_for_x](double lambda, double eps) {
        const double t = lambda * eps / 2.0;
        return std::max(phi_for_x(t), chi_for_c(t));
      },
      "mean_to_as", phi_for_x.constants());
}

// --- Asymptotic regularity -------------------------------------------------

XarRates x_ar_rates(const XarInputs& in) {
  Missing m("x_ar_rates");
  m.need(in.theta, "theta (divergence of sum alpha_n)");
  m.need(in.chi1, "chi1 (sum E||xi_{n+1}-xi_n||)");
  m.need(in.chi2, "chi2 (sum E||delta_{n+1}-delta_n||)");
  m.need(in.chi3, "chi3 (sum |alpha_{n+1}-alpha_n|)");
  m.need(in.chi4, "chi4 (sum |beta_{n+1}-beta_n|)");
  m.need(in.B1, "B1");
  m.need(in.B2, "B2");
  m.need(in.B3, "B3");
  m.need(in.B4, "B4");
  m.raise();
  require_finite_nonneg(in.K0, "x_ar_rates: K0");
  require_finite_nonneg(in.E0, "x_ar_rates: E0");
  require_finite_nonneg(in.D0, "x_ar_rates: D0");

  const double ek = in.E0 + in.K0, dk = in.D0 + in.K0;
  const double B = *in.B1 + *in.B2 + *in.B3 * ek + *in.B4 * dk;
  const double K = 2.0 * in.K0 + in.E0 + in.D0 + B;
  auto c1 = *in.chi1, c2 = *in.chi2, c3 = *in.chi3, c4 = *in.chi4;
  ConvergenceModulus chi = [=](double eps) {
    return max_of({c1(eps / 4.0), c2(eps / 4.0), c3(eps / (4.0 * ek)), c4(eps / (4.0 * dk))});
  };
  Constants cs{{"K0", in.K0}, {"E0", in.E0}, {"D0", in.D0}, {"B", B}, {"K", K}};
  // K = 0 means x_{n+1} = x_n for all n.
  MeanRate phi = K > 0.0 ? xu_rate(K, shifted_divergence(*in.theta), chi) : MeanRate::zero("x_ar");
  phi = MeanRate([phi](double e) { return phi(e); }, "x_ar", cs);
  AsRate psi([phi](double lambda, double eps) { return phi(lambda * eps / 2.0); }, "x_ar_as", cs);
  return {std::move(phi), std::move(psi), std::move(chi), K};
}

YarRates y_ar_rates(const XarInputs& in) {
  XarRates x = x_ar_rates(in);
  const double ek = in.K0 + in.E0;
  auto c1 = *in.chi1, c3 = *in.chi3;
  MeanRate phix = x.phi;
  Constants cs = phix.constants();
  MeanRate phi(
      [=](double eps) {
        return max_of({phix(eps / 3.0), c1(eps / 3.0), c3(eps / (3.0 * ek))});
      },
      "y_ar", cs);
  ConvergenceModulus chi = x.chi;
  AsRate psi(
      [phi, chi](double lambda, double eps) {
        const double t = lambda * eps / 2.0;
        return std::max(phi(t), chi(t));
      },
      "y_ar_as", cs);
  return {std::move(phi), std::move(psi)};
}

XarInputs xar_inputs_for(const SchemeConfig& cfg, double K0) {
  XarInputs in;
  in.K0 = K0;
  in.E0 = cfg.xi.sup_bound();
  in.D0 = cfg.delta.sup_bound();
  try {
    DifferenceModulus d = noise_difference_modulus(cfg.xi);
    in.chi1 = d.chi;
    in.B1 = d.bound;
  } catch (const DomainError&) {
  }
  try {
    DifferenceModulus d = noise_difference_modulus(cfg.delta);
    in.chi2 = d.chi;
    in.B2 = d.bound;
  } catch (const DomainError&) {
  }
  try {
    VariationModulus v = variation_modulus(cfg.alpha);
    in.chi3 = v.chi;
    in.B3 = v.bound;
  } catch (const DomainError&) {
  }
  try {
    VariationModulus v = variation_modulus(cfg.beta);
    in.chi4 = v.chi;
    in.B4 = v.bound;
  } catch (const DomainError&) {
  }
  try {
    in.theta = divergence_modulus(cfg.alpha);
  } catch (const DomainError&) {
  }
  return in;
}

// --- Relative residuals -----------------------------------------------------

RelativeRates relative_rates(const RelativeInputs& in) {
  Missing m("relative_rates");
  m.need(in.phi, "phi (E||U y_n - y_n||)");
  m.need(in.rho1, "rho1 (E||xi_n||)");
  m.need(in.rho2, "rho2 (E||delta_n||)");
  m.need(in.rho3, "rho3 (alpha_n)");
  m.need(in.phi0, "phi0 (E||x_{n+1}-x_n||)");
  m.raise();
  require_finite_nonneg(in.K0, "relative_rates: K0");
  const MeanRate phi = *in.phi, phi0 = *in.phi0;
  const auto r1 = *in.rho1, r2 = *in.rho2, r3 = *in.rho3;
  const double K0 = in.K0;
  Constants cs{{"K0", K0}};
  MeanRate p1([=](double e) { return max_of({phi0(e / 3.0), phi(e / 3.0), r2(e / 3.0)}); },
              "relative_xy", cs);
  MeanRate p2([=](double e) { return max_of({p1(e / 3.0), r3(e / (3.0 * K0)), r1(e / 3.0)}); },
              "relative_Ty", cs);
  MeanRate p3([=](double e) { return std::max(p1(e / 3.0), phi(e / 3.0)); }, "relative_Ux", cs);
  MeanRate p4([=](double e) { return std::max(p1(e / 3.0), p2(e / 3.0)); }, "relative_Tx", cs);
  return {std::move(p1), std::move(p2), std::move(p3), std::move(p4)};
}

RelativeAsRates relative_rates_as(const RelativeAsInputs& in) {
  Missing m("relative_rates_as");
  m.need_flag(in.hyp_prime, "dominating variable Y (almost-sure boundedness hypothesis)");
  m.need(in.psi, "psi (||U y_n - y_n|| a.s.)");
  m.need(in.rho, "rho (alpha_n)");
  m.need(in.phi1, "phi1 (||xi_n|| a.s.)");
  m.need(in.phi2, "phi2 (||delta_n|| a.s.)");
  m.need(in.psi0, "psi0 (||x_{n+1}-x_n|| a.s.)");
  m.raise();
  require_finite_nonneg(in.K0, "relative_rates_as: K0");
  const AsRate psi = *in.psi, f1 = *in.phi1, f2 = *in.phi2, psi0 = *in.psi0;
  const auto rho = *in.rho;
  const double K0 = in.K0;
  Constants cs{{"K0", K0}};
  AsRate q1(
      [=](double l, double e) {
        return max_of({psi0(l / 3.0, e / 3.0), psi(l / 3.0, e / 3.0), f2(l / 3.0, e / 3.0)});
      },
      "relative_xy_as", cs);
  AsRate q2(
      [=](double l, double e) {
        return max_of({q1(l / 3.0, e / 3.0), rho(e * l / (9.0 * K0)), f1(l / 3.0, e / 3.0)});
      },
      "relative_Ty_as", cs);
  AsRate q3([=](double l, double e) { return std::max(q1(l / 2.0, e / 3.0), psi(l / 2.0, e / 3.0)); },
            "relative_Ux_as", cs);
  AsRate q4([=](double l, double e) { return std::max(q1(l / 2.0, e / 3.0), q2(l / 2.0, e / 3.0)); },
            "relative_Tx_as", cs);
  return {std::move(q1), std::move(q2), std::move(q3), std::move(q4)};
}

AsRate summed_mean_to_as(ConvergenceModulus chi, std::string origin) {
  if (!chi) throw DomainError("summed_mean_to_as: empty modulus");
  return AsRate([chi](double lambda, double eps) { return chi(lambda * eps); }, std::move(origin));
}

// --- KM with Tikhonov terms -------------------------------------------------

KmtRates kmt_rates(const KmtInputs& in) {
  if (!(in.Lambda > 0.0 && in.Lambda <= 0.5)) throw DomainError("kmt_rates: Lambda must lie in (0, 1/2]");
  require_finite_nonneg(in.K0, "kmt_rates: K0");
  if (!in.beta) throw HypothesisError("kmt_rates: missing beta schedule (needed to certify Lambda)");
  const auto band = certify_band(*in.beta);
  if (!band || *band < in.Lambda) {
    throw DomainError("kmt_rates: beta (" + in.beta->describe() + ") does not stay in [Lambda, 1 - Lambda]"
                      " for Lambda = " + std::to_string(in.Lambda));
  }
  const double L = in.Lambda, K0 = in.K0;
  Constants cs{{"Lambda", L}, {"K0", K0}};
  KmtRates out;
  if (in.phi_dy && in.rho && in.chi) {
    const MeanRate phi = *in.phi_dy;
    const auto rho = *in.rho, chi = *in.chi;
    out.kappa = MeanRate(
        [=](double e) {
          const double t = L * e / 4.0;
          return sat_add(max_of({phi(t), rho(t / K0), chi(t)}), 1);
        },
        "kmt", cs);
  }
  if (in.psi_dy && in.rho && in.phi_delta) {
    if (!in.hyp_prime) {
      throw HypothesisError("kmt_rates: the a.s. rate needs a dominating variable Y");
    }
    const AsRate psi = *in.psi_dy, phd = *in.phi_delta;
    const auto rho = *in.rho;
    out.zeta = AsRate(
        [=](double l, double e) {
          const double t = L * e / 4.0;
          return sat_add(max_of({psi(l / 3.0, t), rho(L * l * e / (4.0 * K0)), phd(l / 3.0, t)}), 1);
        },
        "kmt_as", cs);
  }
  if (!out.kappa && !out.zeta) {
    throw HypothesisError("kmt_rates: need (phi_dy, rho, chi) or (psi_dy, rho, phi_delta)");
  }
  return out;
}

// --- Fast rates ------------------------------------------------------------

double partial_product(Index j, Index k, const Schedule& s) {
  double p = 1.0;
  for (Index i = j; i <= k && j <= k; ++i) {
    p *= 1.0 - s(i);
    if (i == kIndexMax) break;
  }
  return p;
}

double partial_product_closed_form(Index j, Index k) {
  if (j > k) return 1.0;
  const double a = static_cast<double>(j), b = static_cast<double>(k);
  return a * (a + 1.0) / ((b + 1.0) * (b + 2.0));
}

double sabach_stern_bound(Index n, double s0, double L, const Schedule& s) {
  double prod = 1.0;  // A_{i+1}^n
  double sum = 0.0;
  for (Index i = n; i >= 1; --i) {
    sum += (s(i - 1) - s(i)) * prod;
    prod *= 1.0 - s(i);
  }
  return prod * s0 + L * sum;
}

FastBound sabach_stern_closed_form(const Schedule& s, double L, double s0) {
  if (!s.is_halpern_two()) {
    throw DomainError("sabach_stern_closed_form: needs alpha_n = 2/(n+2); use sabach_stern_bound for " +
                      s.describe());
  }
  require_finite_nonneg(L, "sabach_stern_closed_form: L");
  if (!(s0 >= 0.0) || s0 > L) throw DomainError("sabach_stern_closed_form: needs 0 <= s0 <= L");
  return FastBound{L, 0, "sabach_stern", {{"L", 1.0}}};
}

namespace {
constexpr std::array<std::string_view, 4> kFastNames = {"dx", "dy", "halpern_residual",
                                                        "kmt_residual"};
}

std::string_view to_string(FastCase c) { return kFastNames[static_cast<std::size_t>(c)]; }

std::optional<FastCase> parse_fast_case(std::string_view name) {
  for (std::size_t i = 0; i < kFastNames.size(); ++i) {
    if (kFastNames[i] == name) return static_cast<FastCase>(i);
  }
  return std::nullopt;
}

FastBound fast_bounds(FastCase c, const FastInputs& in) {
  require_finite_nonneg(in.K0, "fast_bounds: K0");
  require_finite_nonneg(in.K1, "fast_bounds: K1");
  require_finite_nonneg(in.K2, "fast_bounds: K2");
  const double K0 = in.K0, K1 = in.K1, K2 = in.K2;
  FastBound fb;
  fb.origin = std::string("fast_") + std::string(to_string(c));
  switch (c) {
    case FastCase::dx:
      fb.coefficients = {{"K0", 2}, {"K1", 2}, {"K2", 2}};
      break;
    case FastCase::dy:
      // mean: Lx + K0 + K1; tail: 2Lx + 4K0 + 8K1 (the larger).
      fb.coefficients = {{"K0", 8}, {"K1", 12}, {"K2", 4}};
      break;
    case FastCase::halpern_residual:
      if (K2 != 0.0) throw DomainError("fast_bounds(halpern_residual): needs delta = 0 (K2 = 0)");
      // rTx <= 3 dx + alpha ||Tx - u|| + ||xi||; mean 3Lx + K0 + K1, tail 6Lx + 2K0 + 2K1.
      fb.coefficients = {{"K0", 14}, {"K1", 14}};
      break;
    case FastCase::kmt_residual: {
      if (K1 != 0.0) throw DomainError("fast_bounds(kmt_residual): needs xi = 0 (K1 = 0)");
      require_positive(in.B, "fast_bounds(kmt_residual): B");
      if (in.beta) {
        if (!(*in.beta < 1.0) || in.B * (1.0 - *in.beta) < 1.0 - 1e-12) {
          throw DomainError("fast_bounds(kmt_residual): needs B >= 1/(1 - beta)");
        }
      }
      // rUy_n <= B (2 dy_{n-1} + alpha_n ||Uy_n - u|| + ||delta_{n-1}||) for n >= 1,
      // rUx <= 2 dx + 3 rUy + 2 ||delta||. Tail: 8Lx + 6 B (6 Ly + 2K0 + 3K2) + 4K2
      // with Ly = 2Lx + 4K0 dominates the mean constant.
      fb.coefficients = {{"K0", 16}, {"K2", 20}, {"B*K0", 300}, {"B*K2", 162}};
      fb.first_index = 1;
      break;
    }
  }
  double L = 0.0;
  for (const auto& [name, coef] : fb.coefficients) {
    if (name == "K0") L += coef * K0;
    else if (name == "K1") L += coef * K1;
    else if (name == "K2") L += coef * K2;
    else if (name == "B*K0") L += coef * in.B * K0;
    else if (name == "B*K2") L += coef * in.B * K2;
  }
  fb.L = L;
  return fb;
}

FastBound fast_bounds_for(const SchemeConfig& cfg, FastCase c, double K0, double B) {
  if (!cfg.alpha.is_halpern_two()) {
    throw DomainError("fast bounds need alpha_n = 2/(n+2), got " + cfg.alpha.describe());
  }
  const auto beta = cfg.beta.constant_value();
  if (!beta || !(*beta < 1.0)) throw DomainError("fast bounds need a constant beta < 1, got " + cfg.beta.describe());
  const auto k1 = cfg.xi.decay_constant();
  if (!k1) throw DomainError("fast bounds need E||xi_n|| <= K1/(n+2)^2; xi is " + cfg.xi.describe());
  const auto k2 = cfg.delta.decay_constant();
  if (!k2) throw DomainError("fast bounds need E||delta_n|| <= K2/(n+2)^2; delta is " + cfg.delta.describe());
  FastInputs in;
  in.K0 = K0;
  in.K1 = *k1;
  in.K2 = *k2;
  in.beta = *beta;
  if (c == FastCase::halpern_residual && (!cfg.U.is_identity() || !cfg.delta.is_zero())) {
    throw DomainError("halpern_residual bound needs U = Id and delta = 0");
  }
  if (c == FastCase::kmt_residual) {
    if (!cfg.T.is_identity() || !cfg.xi.is_zero()) {
      throw DomainError("kmt_residual bound needs T = Id and xi = 0");
    }
    in.B = B > 0.0 ? B : 1.0 / (1.0 - *beta);
  }
  return fast_bounds(c, in);
}

MeanRate fast_mean_rate(const FastBound& fb) {
  const double L = fb.L;
  const Index first = fb.first_index;
  return MeanRate([L, first](double e) { return std::max(first, ceil_index(2.0 * L / e)); },
                  fb.origin + "_mean", {{"L", L}});
}

AsRate fast_as_rate(const FastBound& fb) {
  const double L = fb.L;
  const Index first = fb.first_index;
  return AsRate(
      [L, first](double l, double e) { return std::max(first, ceil_index(4.0 * L / (e * l))); },
      fb.origin + "_as", {{"L", L}});
}

// --- Geometry ------------------------------------------------------------------

AsRate geometry_as_rate(const GeometryInputs& in) {
  Missing m("geometry_as_rate");
  m.need(in.eta, "eta (uniform convexity modulus; only the Euclidean norm has a built-in one)");
  m.need(in.Delta, "Delta (||x_{n+1}-x_n|| a.s.)");
  m.need(in.rho, "rho (alpha_n)");
  m.need(in.chi1, "chi1 (sum E||xi_n||)");
  m.need(in.chi2, "chi2 (sum E||delta_n||)");
  m.raise();
  require_positive(in.K, "geometry_as_rate: K");
  if (!(in.Lambda > 0.0 && in.Lambda <= 0.5)) throw DomainError("geometry_as_rate: Lambda must lie in (0, 1/2]");
  if (in.optimized && !in.eta->has_tilde()) {
    throw HypothesisError("geometry_as_rate: optimized form needs eta = eps * eta~(eps)");
  }
  const UcModulus eta = *in.eta;
  const AsRate Delta = *in.Delta;
  const auto rho = *in.rho, c1 = *in.chi1, c2 = *in.chi2;
  const double K = in.K, Lam = in.Lambda;
  const bool opt = in.optimized;
  return AsRate(
      [=](double l, double e) {
        const double Kp = 3.0 * K / l;
        const double arg = std::min(e / Kp, 2.0);
        const double h = e * Lam * Lam * (opt ? *eta.tilde(arg) : eta(arg));
        return max_of({Delta(l / 9.0, h / 4.0), rho(h / (4.0 * Kp)), c1(l * h / 36.0),
                       c2(l * h / 36.0)});
      },
      opt ? "geometry_as_opt" : "geometry_as", {{"K", K}, {"Lambda", Lam}});
}

MeanRate geometry_mean_rate(const GeometryInputs& in) {
  if (!in.mu) {
    throw HypothesisError(
        "geometry_mean_rate: missing mu; build one with ui_from_pth_moment, ui_from_supercoercive"
        " or ui_from_error_sums");
  }
  const AsRate g = geometry_as_rate(in);
  const UiModulus mu = *in.mu;
  return MeanRate([g, mu](double e) { return g(mu(e / 4.0), e / 2.0); },
                  in.optimized ? "geometry_mean_opt" : "geometry_mean", g.constants());
}

InnerProductRates inner_product_fast_rates(double K, double K1, double K2, double Lambda,
                                           std::optional<UiModulus> mu) {
  require_positive(K, "inner_product_fast_rates: K");
  require_finite_nonneg(K1, "inner_product_fast_rates: K1");
  require_finite_nonneg(K2, "inner_product_fast_rates: K2");
  if (!(Lambda > 0.0 && Lambda <= 0.5)) throw DomainError("inner_product_fast_rates: Lambda must lie in (0, 1/2]");
  const double L = 144.0 * (2.0 * K + 2.0 * K1 + 2.0 * K2);
  const double L2 = Lambda * Lambda;
  Constants cs{{"K", K}, {"K1", K1}, {"K2", K2}, {"Lambda", Lambda}, {"L", L}};
  auto as = [=](double c) {
    return [=](double l, double e) { return ceil_index(c * K * L / (L2 * e * e * l * l)); };
  };
  InnerProductRates out{AsRate(as(24.0), "inner_product_Ux_as", cs),
                        AsRate(as(72.0), "inner_product_Tx_as", cs), std::nullopt, std::nullopt, L};
  if (mu) {
    const UiModulus m = *mu;
    auto mean = [=](double c) {
      return [=](double e) {
        const double q = m(e / 4.0);
        return ceil_index(c * K * L / (L2 * e * e * q * q));
      };
    };
    out.phi1 = MeanRate(mean(96.0), "inner_product_Ux", cs);
    out.phi2 = MeanRate(mean(288.0), "inner_product_Tx", cs);
  }
  return out;
}

FixedPointConstants constants_from_fixed_point(const SchemeConfig& cfg, const Point& p) {
  if (!cfg.constant_anchor()) {
    throw HypothesisError("constants from a fixed point need a constant anchor u");
  }
  require_same_dim(cfg.x0, p, "constants_from_fixed_point");
  FixedPointConstants c;
  c.x0_dist = distance(cfg.norm, cfg.x0, p);
  c.u_dist = distance(cfg.norm, cfg.u, p);
  try {
    c.E = cfg.xi.total_bound();
    c.D = cfg.delta.total_bound();
  } catch (const DomainError& e) {
    throw HypothesisError(std::string("constants from a fixed point need summable noise: ") + e.what());
  }
  c.K = 2.0 * (c.x0_dist + c.u_dist + c.E + c.D);
  return c;
}

}  // namespace hlab
