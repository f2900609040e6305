#include "hlab/scheme.hpp"

#include <array>
#include <cmath>
#include <ostream>

#include "hlab/error.hpp"
#include "hlab/format.hpp"

namespace hlab {

namespace {

constexpr std::array<std::string_view, kNumQuantities> kQuantityNames = {
    "dx", "dy", "xy", "rTx", "rUx", "rTy", "rUy", "xi_norm", "delta_norm"};

void check_operator(const Operator& op, const char* name, std::size_t dim, NormKind norm) {
  if (auto d = op.dim(); d && *d != dim) {
    throw DimensionError(std::string("operator ") + name + " acts on R^" + std::to_string(*d) +
                         ", scheme lives in R^" + std::to_string(dim));
  }
  if (!op.nonexpansive_in(norm)) {
    throw DomainError(std::string("operator ") + name + " (" + op.describe() +
                      ") is not certified nonexpansive in the " + std::string(to_string(norm)) +
                      " norm");
  }
}

void record(PathCheck& c, Index n, double lhs, double rhs) {
  ++c.checked;
  const double scale = std::max(1.0, std::abs(rhs));
  const double excess = (lhs - rhs) / scale;
  if (c.checked == 1 || excess > c.worst_excess) c.worst_excess = excess;
  if (lhs > rhs + kPathTol * scale) {
    ++c.violations;
    if (!c.first_violation) c.first_violation = n;
  }
}

}  // namespace

std::string_view to_string(Quantity q) { return kQuantityNames[static_cast<std::size_t>(q)]; }

std::optional<Quantity> parse_quantity(std::string_view name) {
  for (std::size_t i = 0; i < kNumQuantities; ++i) {
    if (kQuantityNames[i] == name) return static_cast<Quantity>(i);
  }
  return std::nullopt;
}

double get(const StepRecord& r, Quantity q) {
  switch (q) {
    case Quantity::dx: return r.dx;
    case Quantity::dy: return r.dy;
    case Quantity::xy: return r.xy;
    case Quantity::rTx: return r.rTx;
    case Quantity::rUx: return r.rUx;
    case Quantity::rTy: return r.rTy;
    case Quantity::rUy: return r.rUy;
    case Quantity::xi_norm: return r.xi_norm;
    case Quantity::delta_norm: return r.delta_norm;
  }
  return 0.0;
}

void validate(const SchemeConfig& cfg) {
  const std::size_t d = cfg.x0.dim();
  if (d == 0) throw DimensionError("scheme: x0 must be set");
  if (cfg.u.dim() != d) throw DimensionError("scheme: anchor u and x0 differ in dimension");
  check_operator(cfg.T, "T", d, cfg.norm);
  check_operator(cfg.U, "U", d, cfg.norm);
  if (!(cfg.random_anchor_scale >= 0.0) || !std::isfinite(cfg.random_anchor_scale)) {
    throw DomainError("scheme: random_anchor_scale must be finite and nonnegative");
  }
  if (cfg.fixed_point) {
    const Point& p = *cfg.fixed_point;
    if (p.dim() != d) throw DimensionError("scheme: fixed point has the wrong dimension");
    if (residual(cfg.T, NormKind::Sup, p) > kFixedPointTol ||
        residual(cfg.U, NormKind::Sup, p) > kFixedPointTol) {
      throw DomainError("scheme: declared fixed point is not fixed by both T and U");
    }
  }
}

SchemeConfig make_halpern(Operator T, Point u, Point x0, Schedule alpha, NoiseModel xi,
                          NormKind norm) {
  SchemeConfig cfg;
  cfg.T = std::move(T);
  cfg.U = Operator::identity();
  cfg.u = std::move(u);
  cfg.x0 = std::move(x0);
  cfg.alpha = std::move(alpha);
  cfg.beta = Schedule::constant(0.0);
  cfg.xi = std::move(xi);
  cfg.delta = NoiseModel::zero();
  cfg.norm = norm;
  return cfg;
}

SchemeConfig make_km_tikhonov(Operator U, Schedule alpha, Point x0, Schedule beta,
                              NoiseModel delta, NormKind norm) {
  SchemeConfig cfg;
  cfg.T = Operator::identity();
  cfg.U = std::move(U);
  cfg.u = Point(x0.dim(), 0.0);
  cfg.x0 = std::move(x0);
  cfg.alpha = std::move(alpha);
  cfg.beta = std::move(beta);
  cfg.xi = NoiseModel::zero();
  cfg.delta = std::move(delta);
  cfg.norm = norm;
  return cfg;
}

StepResult step(const SchemeConfig& cfg, Index n, const Point& x, const Point& u, Rng& rng) {
  const std::size_t d = x.dim();
  const double a = cfg.alpha(n);
  const double b = cfg.beta(n);
  StepResult r;
  r.tx = cfg.T(x);
  r.xi = cfg.xi.sample(n, d, cfg.norm, rng, &x);
  r.y = Point(d);
  for (std::size_t i = 0; i < d; ++i) r.y[i] = (1.0 - a) * (r.tx[i] + r.xi[i]) + a * u[i];
  if (!r.y.all_finite() || !r.tx.all_finite()) throw NumericError("non-finite y_n", n);
  r.uy = cfg.U(r.y);
  r.delta = cfg.delta.sample(n, d, cfg.norm, rng, &r.y);
  r.x_next = Point(d);
  for (std::size_t i = 0; i < d; ++i) {
    r.x_next[i] = (1.0 - b) * (r.uy[i] + r.delta[i]) + b * r.y[i];
  }
  if (!r.x_next.all_finite() || !r.uy.all_finite()) throw NumericError("non-finite x_{n+1}", n);
  return r;
}

Point path_anchor(const SchemeConfig& cfg, Rng& rng) {
  if (cfg.constant_anchor()) return cfg.u;
  std::normal_distribution<double> gauss(0.0, cfg.random_anchor_scale);
  Point u = cfg.u;
  for (std::size_t i = 0; i < u.dim(); ++i) u[i] += gauss(rng);
  return u;
}

Trajectory run_path(const SchemeConfig& cfg, Index horizon, std::uint64_t seed, bool keep_states) {
  if (horizon == 0) throw DomainError("run_path: horizon must be >= 1");
  const NormKind nk = cfg.norm;
  Rng rng(seed);
  Trajectory traj;
  traj.seed = seed;
  traj.u = path_anchor(cfg, rng);
  traj.records.resize(horizon);
  if (keep_states) {
    traj.xs.reserve(horizon + 1);
    traj.ys.reserve(horizon + 1);
    traj.xis.reserve(horizon + 1);
    traj.deltas.reserve(horizon);
  }

  Point x = cfg.x0;
  Point y_prev;
  for (Index n = 0; n < horizon; ++n) {
    StepResult s = step(cfg, n, x, traj.u, rng);
    StepRecord& rec = traj.records[n];
    rec.n = n;
    rec.dx = distance(nk, s.x_next, x);
    rec.xy = distance(nk, x, s.y);
    rec.rTx = distance(nk, s.tx, x);
    rec.rUx = cfg.U.is_identity() ? 0.0 : distance(nk, cfg.U(x), x);
    rec.rTy = cfg.T.is_identity() ? 0.0 : distance(nk, cfg.T(s.y), s.y);
    rec.rUy = distance(nk, s.uy, s.y);
    rec.xi_norm = norm(nk, s.xi);
    rec.delta_norm = norm(nk, s.delta);
    if (n > 0) traj.records[n - 1].dy = distance(nk, s.y, y_prev);
    if (keep_states) {
      traj.xs.push_back(x);
      traj.ys.push_back(s.y);
      traj.xis.push_back(s.xi);
      traj.deltas.push_back(s.delta);
    }
    x = std::move(s.x_next);
    y_prev = std::move(s.y);
  }

  // Half step: y_H, so that dy_{H-1} is defined.
  const double a = cfg.alpha(horizon);
  const Point tx = cfg.T(x);
  const Point xi = cfg.xi.sample(horizon, x.dim(), nk, rng, &x);
  Point y(x.dim());
  for (std::size_t i = 0; i < x.dim(); ++i) y[i] = (1.0 - a) * (tx[i] + xi[i]) + a * traj.u[i];
  if (!y.all_finite()) throw NumericError("non-finite y_n", horizon);
  traj.records[horizon - 1].dy = distance(nk, y, y_prev);
  if (keep_states) {
    traj.xs.push_back(x);
    traj.ys.push_back(y);
    traj.xis.push_back(xi);
  }
  return traj;
}

PathCheck check_recurrences(const SchemeConfig& cfg, const Trajectory& traj) {
  if (!traj.has_states()) throw DomainError("check_recurrences: trajectory kept no states");
  const NormKind nk = cfg.norm;
  const Index h = traj.records.size();
  PathCheck c;
  for (Index n = 0; n < h; ++n) {
    const double a0 = cfg.alpha(n), a1 = cfg.alpha(n + 1);
    const Point tx = cfg.T(traj.xs[n]);
    const Point shifted = tx + traj.xis[n];
    const double rhs_y = (1.0 - a1) * (traj.records[n].dx +
                                       distance(nk, traj.xis[n + 1], traj.xis[n])) +
                         std::abs(a1 - a0) * distance(nk, shifted, traj.u);
    record(c, n, traj.records[n].dy, rhs_y);

    if (n + 1 < h) {
      const double b0 = cfg.beta(n), b1 = cfg.beta(n + 1);
      const Point uy_delta = cfg.U(traj.ys[n]) + traj.deltas[n];
      const double rhs_x = traj.records[n].dy +
                           (1.0 - b1) * distance(nk, traj.deltas[n + 1], traj.deltas[n]) +
                           std::abs(b1 - b0) * distance(nk, uy_delta, traj.ys[n]);
      record(c, n, traj.records[n + 1].dx, rhs_x);
    }
  }
  return c;
}

PathCheck check_l1_domination(const SchemeConfig& cfg, const Trajectory& traj, const Point& p) {
  if (!traj.has_states()) throw DomainError("check_l1_domination: trajectory kept no states");
  const NormKind nk = cfg.norm;
  PathCheck c;
  double bound = distance(nk, traj.xs[0], p) + distance(nk, traj.u, p);
  for (Index n = 0; n < traj.xs.size(); ++n) {
    record(c, n, distance(nk, traj.xs[n], p), bound);
    if (n < traj.records.size()) bound += traj.records[n].xi_norm + traj.records[n].delta_norm;
  }
  return c;
}

PathCheck check_triangle_relations(const Trajectory& traj) {
  PathCheck c;
  for (const auto& r : traj.records) {
    record(c, r.n, r.rUx, 2.0 * r.xy + r.rUy);
    record(c, r.n, r.rTx, 2.0 * r.xy + r.rTy);
  }
  return c;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "n,dx,dy,xy,rTx,rUx,rTy,rUy,xi_norm,delta_norm\n";
  for (const auto& r : traj.records) {
    os << r.n;
    for (std::size_t q = 0; q < kNumQuantities; ++q) {
      os << ',' << format_double(get(r, static_cast<Quantity>(q)));
    }
    os << '\n';
  }
}

}  // namespace hlab
