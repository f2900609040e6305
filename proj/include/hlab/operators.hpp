#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hlab/mdp.hpp"
#include "hlab/point.hpp"

namespace hlab {

enum class OperatorKind {
  Identity,
  Rotation,
  HalfspaceProjection,
  BallProjection,
  AveragedMap,
  Composition,
  ConvexCombination,
  LinearContraction,
  BellmanRvi,
};

struct OperatorNode;

// Immutable handle to a 1-Lipschitz map on R^d. Copies share the node.
//
// Each constructor validates its arguments and records the norms in which the
// map is nonexpansive; `nonexpansive_in` reports that declaration and
// `check_nonexpansive` tests it empirically.
class Operator {
 public:
  static Operator identity();
  // Rotation by `angle` radians in the coordinate plane (i, j) of R^dim.
  static Operator rotation(std::size_t dim, std::size_t i, std::size_t j, double angle);
  // Metric projection onto {x : <a, x> <= b}.
  static Operator halfspace_projection(Point a, double b);
  // Metric projection onto the closed Euclidean ball.
  static Operator ball_projection(Point center, double radius);
  // x -> (1 - weight) x + weight * inner(x).
  static Operator averaged(Operator inner, double weight);
  // ops[0] is applied first.
  static Operator composition(std::vector<Operator> ops);
  // x -> sum_i weights[i] * ops[i](x); weights nonnegative, summing to 1.
  static Operator convex_combination(std::vector<Operator> ops, std::vector<double> weights);
  // x -> M x with M row-major dim x dim. Rejected unless the operator norm
  // induced by `declared` is <= 1. Other norms are certified when they also hold.
  static Operator linear(std::size_t dim, std::vector<double> matrix, NormKind declared);
  // Q -> r + P max Q - f(Q). Nonexpansive in the span seminorm, 2-Lipschitz in
  // the sup norm; declared nonexpansive in no norm, so schemes reject it.
  static Operator bellman_rvi(std::shared_ptr<const Mdp> mdp, FSpec f);

  OperatorKind kind() const noexcept;
  // Dimension the map acts on; nullopt for dimension-agnostic maps (Identity).
  std::optional<std::size_t> dim() const noexcept;
  bool nonexpansive_in(NormKind kind) const noexcept;
  bool is_identity() const noexcept { return kind() == OperatorKind::Identity; }

  Point apply(const Point& x) const;
  Point operator()(const Point& x) const { return apply(x); }

  // A fixed point known in closed form, if any. `dim` is needed for
  // dimension-agnostic maps.
  std::optional<Point> known_fixed_point(std::size_t dim) const;

  std::string describe() const;

 private:
  explicit Operator(std::shared_ptr<const OperatorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const OperatorNode> node_;
};

Point apply(const Operator& op, const Point& x);

// ||x - op(x)|| in the given norm.
double residual(const Operator& op, NormKind kind, const Point& x);

struct NonexpansiveReport {
  double max_ratio = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t violations = 0;  // pairs with ratio > 1 + 1e-10
};

// Samples random pairs (x, y) at mixed scales and records ||op x - op y|| / ||x - y||.
NonexpansiveReport check_nonexpansive(const Operator& op, NormKind kind, std::size_t dim,
                                      std::uint64_t trials, std::uint64_t seed);

// Common fixed point of T and U drawn from their closed-form candidates,
// verified to residual <= 1e-12 in the sup norm.
std::optional<Point> common_fixed_point(const Operator& t, const Operator& u, std::size_t dim);

inline constexpr double kFixedPointTol = 1e-12;

}  // namespace hlab
