#include "hlab/catalog.hpp"

#include <algorithm>
#include <array>

#include "hlab/error.hpp"

namespace hlab {

namespace {

constexpr std::array<std::string_view, 3> kSourceNames = {"declared-fixed-point", "user", "empirical"};

double pilot_k0(const SchemeConfig& cfg, const ConstantsOptions& opt) {
  const Index H = std::max<Index>(1, opt.pilot_horizon);
  const std::uint64_t M = std::max<std::uint64_t>(1, opt.pilot_paths);
  const NormKind nk = cfg.norm;
  std::vector<std::array<double, 4>> sums(H + 1, {0.0, 0.0, 0.0, 0.0});
  for (std::uint64_t i = 0; i < M; ++i) {
    const Trajectory t = run_path(cfg, H, path_seed(opt.pilot_seed, i), true);
    const double uu = distance(nk, cfg.U(t.u), t.u);
    for (Index n = 0; n <= H; ++n) {
      const Point& x = t.xs[n];
      const Point& y = t.ys[n];
      const Point uy = cfg.U(y);
      sums[n][0] += distance(nk, cfg.T(x), t.u);
      sums[n][1] += distance(nk, uy, y);
      sums[n][2] += uu;
      sums[n][3] += distance(nk, uy, t.u);
    }
  }
  double k0 = 0.0;
  for (const auto& s : sums) {
    for (double v : s) k0 = std::max(k0, v / static_cast<double>(M));
  }
  return k0;
}

std::optional<FixedPointConstants> try_fixed_point(const SchemeConfig& cfg) {
  if (!cfg.fixed_point || !cfg.constant_anchor()) return std::nullopt;
  try {
    return constants_from_fixed_point(cfg, *cfg.fixed_point);
  } catch (const HypothesisError&) {
    return std::nullopt;
  }
}

template <class T>
std::optional<T> attempt(std::vector<SkippedRate>& skipped, const std::string& name,
                         const std::function<T()>& f) {
  try {
    return f();
  } catch (const HypothesisError& e) {
    skipped.push_back({name, e.what()});
  } catch (const DomainError& e) {
    skipped.push_back({name, e.what()});
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(ConstantsSource s) { return kSourceNames[static_cast<std::size_t>(s)]; }

std::optional<ConstantsSource> parse_constants_source(std::string_view name) {
  for (std::size_t i = 0; i < kSourceNames.size(); ++i) {
    if (kSourceNames[i] == name) return static_cast<ConstantsSource>(i);
  }
  return std::nullopt;
}

SchemeConstants scheme_constants(const SchemeConfig& cfg, const ConstantsOptions& opt) {
  SchemeConstants c;
  c.source = opt.source;
  c.fixed_point = try_fixed_point(cfg);
  switch (opt.source) {
    case ConstantsSource::DeclaredFixedPoint:
      if (!cfg.fixed_point) {
        throw HypothesisError("constants from a fixed point need a declared common fixed point");
      }
      c.fixed_point = constants_from_fixed_point(cfg, *cfg.fixed_point);
      c.K0 = c.fixed_point->K;
      c.dominated = true;
      break;
    case ConstantsSource::User:
      if (!opt.K0 || !(*opt.K0 >= 0.0)) throw DomainError("user constants need K0 >= 0");
      c.K0 = *opt.K0;
      c.dominated = opt.user_dominated;
      break;
    case ConstantsSource::Empirical:
      c.K0 = pilot_k0(cfg, opt);
      c.dominated = false;
      break;
  }
  return c;
}

RateCatalog build_rate_catalog(const SchemeConfig& cfg, const SchemeConstants& constants,
                               const CatalogOptions& opt) {
  for (const auto& t : opt.theorems) {
    const auto& g = theorem_groups();
    if (std::find(g.begin(), g.end(), t) == g.end()) throw DomainError("unknown theorem group '" + t + "'");
  }
  auto selected = [&](std::string_view name) {
    return opt.theorems.empty() ||
           std::find(opt.theorems.begin(), opt.theorems.end(), name) != opt.theorems.end();
  };

  RateCatalog cat;
  cat.constants = constants;
  auto& sk = cat.skipped;
  const double K0 = constants.K0;
  const bool dominated = constants.dominated;
  const bool euclid = cfg.norm == NormKind::Euclidean;
  const auto rho_alpha = rate_to_zero(cfg.alpha);
  std::optional<double> Lambda = opt.Lambda;
  if (!Lambda) Lambda = certify_band(cfg.beta);

  // Asymptotic regularity of x_n and y_n.
  const XarInputs xin = xar_inputs_for(cfg, K0);
  const auto xar = attempt<XarRates>(sk, "x_ar", [&] { return x_ar_rates(xin); });
  const auto yar = attempt<YarRates>(sk, "y_ar", [&] { return y_ar_rates(xin); });
  if (xar && selected("x_ar")) {
    cat.mean.push_back({"x_ar", Quantity::dx, xar->phi});
    cat.as.push_back({"x_ar", Quantity::dx, xar->psi});
  }
  if (yar && selected("y_ar")) {
    cat.mean.push_back({"y_ar", Quantity::dy, yar->phi});
    cat.as.push_back({"y_ar", Quantity::dy, yar->psi});
  }

  // Fast bounds.
  std::optional<FastBound> fast_dx, fast_dy;
  auto add_fast = [&](FastCase c) -> std::optional<FastBound> {
    const std::string name = "fast_" + std::string(to_string(c));
    auto fb = attempt<FastBound>(sk, name, [&] { return fast_bounds_for(cfg, c, K0, opt.B.value_or(0.0)); });
    if (!fb) return fb;
    const bool tail_valid = c == FastCase::dx || dominated;
    if (selected("fast")) {
      cat.fast.push_back({c, *fb, tail_valid});
      cat.mean.push_back({name, fast_case_quantity(c), fast_mean_rate(*fb)});
      if (tail_valid) cat.as.push_back({name, fast_case_quantity(c), fast_as_rate(*fb)});
      else sk.push_back({name + "_as", "tail bound needs a dominating variable Y"});
    }
    return fb;
  };
  fast_dx = add_fast(FastCase::dx);
  fast_dy = add_fast(FastCase::dy);
  if (cfg.U.is_identity() && cfg.delta.is_zero()) add_fast(FastCase::halpern_residual);
  if (cfg.T.is_identity() && cfg.xi.is_zero() && !cfg.U.is_identity()) add_fast(FastCase::kmt_residual);

  std::optional<MeanRate> dx_mean, dy_mean;
  std::optional<AsRate> dx_as, dy_as;
  if (fast_dx) {
    dx_mean = fast_mean_rate(*fast_dx);
    dx_as = fast_as_rate(*fast_dx);
  } else if (xar) {
    dx_mean = xar->phi;
    dx_as = xar->psi;
  }
  if (fast_dy) {
    dy_mean = fast_mean_rate(*fast_dy);
    if (dominated) dy_as = fast_as_rate(*fast_dy);
  } else if (yar) {
    dy_mean = yar->phi;
    dy_as = yar->psi;
  }
  if (!dy_as && yar) dy_as = yar->psi;

  // Noise sequences.
  auto noise_rates = [&](const NoiseModel& m, Quantity q, const std::string& name) {
    if (m.is_zero()) return;
    if (auto r = attempt<ConvergenceModulus>(sk, name, [&] { return noise_mean_rate(m); })) {
      cat.mean.push_back({name, q, MeanRate(*r, name)});
    }
    if (auto chi = attempt<ConvergenceModulus>(sk, name + "_as", [&] { return noise_sum_modulus(m); })) {
      cat.as.push_back({name, q, summed_mean_to_as(*chi, name + "_as")});
    }
  };
  if (selected("noise")) {
    noise_rates(cfg.xi, Quantity::xi_norm, "noise_xi");
    noise_rates(cfg.delta, Quantity::delta_norm, "noise_delta");
  }

  auto sum_modulus = [&](const NoiseModel& m) -> std::optional<ConvergenceModulus> {
    try {
      return noise_sum_modulus(m);
    } catch (const DomainError&) {
      return std::nullopt;
    }
  };
  auto mean_modulus = [&](const NoiseModel& m) -> std::optional<ConvergenceModulus> {
    try {
      return noise_mean_rate(m);
    } catch (const DomainError&) {
      return std::nullopt;
    }
  };

  std::optional<UiModulus> mu;
  if (constants.fixed_point && cfg.constant_anchor()) {
    const auto& fp = *constants.fixed_point;
    const RealModulus m1 = noise_sum_abs_continuity(cfg.xi, cfg.dim(), cfg.norm);
    const RealModulus m2 = noise_sum_abs_continuity(cfg.delta, cfg.dim(), cfg.norm);
    // ||Uy_n - y_n|| <= 2 ||y_n - p|| <= 2 (||x0-p|| + ||u-p||) + 2 sum ||xi|| + 2 sum ||delta||.
    mu = ui_from_error_sums(std::max(2.0 * (fp.x0_dist + fp.u_dist), 1e-12),
                            [m1](double e) { return m1(e / 2.0); },
                            [m2](double e) { return m2(e / 2.0); }, true);
  }

  // Residual of U along y_n.
  std::optional<MeanRate> uy_mean;
  std::optional<AsRate> uy_as;
  if (cfg.U.is_identity()) {
    uy_mean = MeanRate::zero("identity_U");
    uy_as = AsRate::zero("identity_U");
  } else if (cfg.T.is_identity() && cfg.xi.is_zero()) {
    auto kr = attempt<KmtRates>(sk, "kmt", [&]() -> KmtRates {
      if (!Lambda) throw HypothesisError("kmt: beta does not certify a band [Lambda, 1 - Lambda]");
      KmtInputs in;
      in.Lambda = *Lambda;
      in.K0 = K0;
      in.beta = cfg.beta;
      in.phi_dy = dy_mean;
      in.rho = rho_alpha;
      in.chi = mean_modulus(cfg.delta);
      in.psi_dy = dy_as;
      if (auto chi = sum_modulus(cfg.delta)) in.phi_delta = summed_mean_to_as(*chi);
      in.hyp_prime = dominated;
      if (!dominated) in.psi_dy.reset();
      return kmt_rates(in);
    });
    if (kr) {
      uy_mean = kr->kappa;
      uy_as = kr->zeta;
      if (selected("kmt")) {
        if (kr->kappa) cat.mean.push_back({"kmt", Quantity::rUy, *kr->kappa});
        if (kr->zeta) cat.as.push_back({"kmt", Quantity::rUy, *kr->zeta});
      }
    }
  } else {
    auto gin = [&]() -> GeometryInputs {
      if (!euclid) throw HypothesisError("geometry: uniform convexity modulus only known for the Euclidean norm");
      if (!constants.fixed_point) {
        throw HypothesisError("geometry: needs a declared common fixed point and a constant anchor");
      }
      if (!Lambda) throw HypothesisError("geometry: beta does not certify a band [Lambda, 1 - Lambda]");
      GeometryInputs in;
      in.eta = inner_product_modulus();
      in.K = constants.fixed_point->K;
      in.Lambda = *Lambda;
      in.Delta = dx_as;
      in.rho = rho_alpha;
      in.chi1 = sum_modulus(cfg.xi);
      in.chi2 = sum_modulus(cfg.delta);
      in.optimized = opt.geometry_optimized;
      in.mu = mu;
      return in;
    };
    uy_as = attempt<AsRate>(sk, "geometry_as", [&] { return geometry_as_rate(gin()); });
    uy_mean = attempt<MeanRate>(sk, "geometry", [&] { return geometry_mean_rate(gin()); });
    if (selected("geometry")) {
      if (uy_as) cat.as.push_back({"geometry", Quantity::rUy, *uy_as});
      if (uy_mean) cat.mean.push_back({"geometry", Quantity::rUy, *uy_mean});
    }

    if (selected("inner_product")) {
      auto ip = attempt<InnerProductRates>(sk, "inner_product", [&]() -> InnerProductRates {
        if (!euclid) throw HypothesisError("inner_product: needs the Euclidean norm");
        if (!constants.fixed_point) throw HypothesisError("inner_product: needs a declared common fixed point");
        if (!Lambda) throw HypothesisError("inner_product: beta does not certify a band");
        if (!cfg.alpha.is_halpern_two()) throw HypothesisError("inner_product: needs alpha_n = 2/(n+2)");
        const auto k1 = cfg.xi.decay_constant(), k2 = cfg.delta.decay_constant();
        if (!k1 || !k2) throw HypothesisError("inner_product: needs K/(n+2)^2 noise certificates");
        return inner_product_fast_rates(constants.fixed_point->K, *k1, *k2, *Lambda, mu);
      });
      if (ip) {
        cat.as.push_back({"inner_product", Quantity::rUx, ip->Phi1});
        cat.as.push_back({"inner_product", Quantity::rTx, ip->Phi2});
        if (ip->phi1) cat.mean.push_back({"inner_product", Quantity::rUx, *ip->phi1});
        if (ip->phi2) cat.mean.push_back({"inner_product", Quantity::rTx, *ip->phi2});
      }
    }
  }

  if (selected("relative")) {
    auto rr = attempt<RelativeRates>(sk, "relative", [&] {
      RelativeInputs in;
      in.phi = uy_mean;
      in.rho1 = mean_modulus(cfg.xi);
      in.rho2 = mean_modulus(cfg.delta);
      in.rho3 = rho_alpha;
      in.phi0 = dx_mean;
      in.K0 = K0;
      return relative_rates(in);
    });
    if (rr) {
      cat.mean.push_back({"relative", Quantity::xy, rr->phi1});
      cat.mean.push_back({"relative", Quantity::rTy, rr->phi2});
      cat.mean.push_back({"relative", Quantity::rUx, rr->phi3});
      cat.mean.push_back({"relative", Quantity::rTx, rr->phi4});
    }
  }
  if (selected("relative_as")) {
    auto rr = attempt<RelativeAsRates>(sk, "relative_as", [&] {
      RelativeAsInputs in;
      in.psi = uy_as;
      in.rho = rho_alpha;
      if (auto c = sum_modulus(cfg.xi)) in.phi1 = summed_mean_to_as(*c);
      if (auto c = sum_modulus(cfg.delta)) in.phi2 = summed_mean_to_as(*c);
      in.psi0 = dx_as;
      in.K0 = K0;
      in.hyp_prime = dominated;
      return relative_rates_as(in);
    });
    if (rr) {
      cat.as.push_back({"relative_as", Quantity::xy, rr->psi1});
      cat.as.push_back({"relative_as", Quantity::rTy, rr->psi2});
      cat.as.push_back({"relative_as", Quantity::rUx, rr->psi3});
      cat.as.push_back({"relative_as", Quantity::rTx, rr->psi4});
    }
  }
  return cat;
}

}  // namespace hlab
