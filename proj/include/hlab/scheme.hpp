#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hlab/noise.hpp"
#include "hlab/operators.hpp"
#include "hlab/point.hpp"
#include "hlab/schedule.hpp"

namespace hlab {

// y_n     = (1 - alpha_n)(T x_n + xi_n) + alpha_n u
// x_{n+1} = (1 - beta_n)(U y_n + delta_n) + beta_n y_n
struct SchemeConfig {
  Operator T = Operator::identity();
  Operator U = Operator::identity();
  Point u;
  Point x0;
  Schedule alpha = Schedule::halpern_two();
  Schedule beta = Schedule::constant(0.0);
  NoiseModel xi;
  NoiseModel delta;
  NormKind norm = NormKind::Euclidean;
  // Declared common fixed point of T and U.
  std::optional<Point> fixed_point;
  // > 0: each path draws its anchor as u + scale * N(0, I) from its own stream.
  double random_anchor_scale = 0.0;

  std::size_t dim() const noexcept { return x0.dim(); }
  bool constant_anchor() const noexcept { return random_anchor_scale == 0.0; }
};

// Throws DimensionError / DomainError on inconsistent dims, a fixed point that
// is not fixed, or operators not declared nonexpansive in cfg.norm.
void validate(const SchemeConfig& cfg);

// U = Id, delta = 0, beta = 0.
SchemeConfig make_halpern(Operator T, Point u, Point x0, Schedule alpha, NoiseModel xi,
                          NormKind norm);
// T = Id, xi = 0, u = 0; y_n = gamma_n x_n with gamma_n = 1 - alpha_n.
SchemeConfig make_km_tikhonov(Operator U, Schedule alpha, Point x0, Schedule beta,
                              NoiseModel delta, NormKind norm);

struct StepResult {
  Point y;
  Point x_next;
  Point xi;
  Point delta;
  Point tx;
  Point uy;
};

// One step from x_n with anchor u. Draws xi_n, then delta_n, from rng.
// Throws NumericError(n) on a non-finite intermediate.
StepResult step(const SchemeConfig& cfg, Index n, const Point& x, const Point& u, Rng& rng);

struct StepRecord {
  Index n = 0;
  double dx = 0.0;  // ||x_{n+1} - x_n||
  double dy = 0.0;  // ||y_{n+1} - y_n||
  double xy = 0.0;  // ||x_n - y_n||
  double rTx = 0.0;
  double rUx = 0.0;
  double rTy = 0.0;
  double rUy = 0.0;
  double xi_norm = 0.0;
  double delta_norm = 0.0;
};

enum class Quantity { dx, dy, xy, rTx, rUx, rTy, rUy, xi_norm, delta_norm };
inline constexpr std::size_t kNumQuantities = 9;
std::string_view to_string(Quantity q);
std::optional<Quantity> parse_quantity(std::string_view name);
double get(const StepRecord& r, Quantity q);

struct Trajectory {
  std::uint64_t seed = 0;
  std::string config_digest;
  Point u;  // anchor used by this path
  std::vector<StepRecord> records;  // n = 0..H-1
  // Kept only when requested: x_0..x_H, y_0..y_H, xi_0..xi_H, delta_0..delta_{H-1}.
  std::vector<Point> xs, ys, xis, deltas;

  bool has_states() const noexcept { return !xs.empty(); }
};

// Runs H steps plus the half step producing y_H, so every record has dy.
Trajectory run_path(const SchemeConfig& cfg, Index horizon, std::uint64_t seed,
                    bool keep_states = false);

// Anchor of the path with the given seed.
Point path_anchor(const SchemeConfig& cfg, Rng& rng);

struct PathCheck {
  std::uint64_t checked = 0;
  std::uint64_t violations = 0;
  double worst_excess = 0.0;  // max (lhs - rhs) / max(1, |rhs|)
  std::optional<Index> first_violation;
  bool ok() const noexcept { return violations == 0; }
};

// Pathwise tolerance: lhs <= rhs + 1e-9 * max(1, |rhs|).
inline constexpr double kPathTol = 1e-9;

// Both one-step recurrences linking dy_n to dx_n and dx_{n+1} to dy_n.
// Requires keep_states.
PathCheck check_recurrences(const SchemeConfig& cfg, const Trajectory& traj);
// ||x_n - p|| <= ||x_0 - p|| + ||u - p|| + sum_{i<n} (||xi_i|| + ||delta_i||).
PathCheck check_l1_domination(const SchemeConfig& cfg, const Trajectory& traj, const Point& p);
// rUx <= 2 xy + rUy and rTx <= 2 xy + rTy.
PathCheck check_triangle_relations(const Trajectory& traj);

// Columns n,dx,dy,xy,rTx,rUx,rTy,rUy,xi_norm,delta_norm.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace hlab
