#include "hlab/operators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>
#include <variant>

#include "hlab/error.hpp"

namespace hlab {

namespace {

// Bit set over NormKind.
using NormSet = unsigned;
constexpr NormSet bit(NormKind k) { return 1u << static_cast<unsigned>(k); }
constexpr NormSet kAllNorms = bit(NormKind::Euclidean) | bit(NormKind::Sup) | bit(NormKind::L1);

struct IdentityNode {};
struct RotationNode {
  std::size_t dim, i, j;
  double angle, c, s;
};
struct HalfspaceNode {
  Point a;
  double b;
  double a_sq;
};
struct BallNode {
  Point center;
  double radius;
};
struct AveragedNode {
  Operator inner;
  double weight;
};
struct CompositionNode {
  std::vector<Operator> ops;
};
struct ConvexNode {
  std::vector<Operator> ops;
  std::vector<double> weights;
};
struct LinearNode {
  std::size_t dim;
  std::vector<double> m;
  NormKind declared;
};
struct BellmanNode {
  std::shared_ptr<const Mdp> mdp;
  FSpec f;
};

}  // namespace

struct OperatorNode {
  std::variant<IdentityNode, RotationNode, HalfspaceNode, BallNode, AveragedNode, CompositionNode,
               ConvexNode, LinearNode, BellmanNode>
      v;
  std::optional<std::size_t> dim;
  NormSet norms = 0;
};

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_dim(const OperatorNode& node, const Point& x) {
  if (node.dim && *node.dim != x.dim()) {
    throw DimensionError("operator acts on R^" + std::to_string(*node.dim) + ", got point in R^" +
                         std::to_string(x.dim()));
  }
}

// Dimension shared by a list of sub-operators, or nullopt when all are agnostic.
std::optional<std::size_t> merged_dim(const std::vector<Operator>& ops) {
  std::optional<std::size_t> d;
  for (const auto& op : ops) {
    if (auto od = op.dim()) {
      if (d && *d != *od) throw DimensionError("sub-operators act on different dimensions");
      d = od;
    }
  }
  return d;
}

NormSet merged_norms(const std::vector<Operator>& ops) {
  NormSet s = kAllNorms;
  for (const auto& op : ops) {
    NormSet k = 0;
    for (NormKind n : {NormKind::Euclidean, NormKind::Sup, NormKind::L1}) {
      if (op.nonexpansive_in(n)) k |= bit(n);
    }
    s &= k;
  }
  return s;
}

bool fixes(const Operator& op, const Point& p) {
  return residual(op, NormKind::Sup, p) <= kFixedPointTol;
}

}  // namespace

Operator Operator::identity() {
  auto n = std::make_shared<OperatorNode>();
  n->v = IdentityNode{};
  n->norms = kAllNorms;
  return Operator(std::move(n));
}

Operator Operator::rotation(std::size_t dim, std::size_t i, std::size_t j, double angle) {
  if (dim < 2 || i >= dim || j >= dim || i == j) {
    throw DomainError("rotation: plane indices must be distinct and < dim (dim >= 2)");
  }
  if (!std::isfinite(angle)) throw DomainError("rotation: non-finite angle");
  auto n = std::make_shared<OperatorNode>();
  n->v = RotationNode{dim, i, j, angle, std::cos(angle), std::sin(angle)};
  n->dim = dim;
  n->norms = bit(NormKind::Euclidean);
  return Operator(std::move(n));
}

Operator Operator::halfspace_projection(Point a, double b) {
  const double a_sq = dot(a, a);
  if (!(a_sq > 0.0)) throw DomainError("halfspace_projection: normal vector must be nonzero");
  if (!std::isfinite(b)) throw DomainError("halfspace_projection: non-finite offset");
  auto n = std::make_shared<OperatorNode>();
  const auto nonzero = std::count_if(a.coords().begin(), a.coords().end(),
                                     [](double c) { return c != 0.0; });
  n->dim = a.dim();
  // Axis-aligned halfspaces act coordinate-wise (a clamp), nonexpansive in every l_p.
  n->norms = (nonzero == 1 || a.dim() == 1) ? kAllNorms : bit(NormKind::Euclidean);
  n->v = HalfspaceNode{std::move(a), b, a_sq};
  return Operator(std::move(n));
}

Operator Operator::ball_projection(Point center, double radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw DomainError("ball_projection: radius must be positive");
  }
  auto n = std::make_shared<OperatorNode>();
  n->dim = center.dim();
  n->norms = center.dim() == 1 ? kAllNorms : bit(NormKind::Euclidean);
  n->v = BallNode{std::move(center), radius};
  return Operator(std::move(n));
}

Operator Operator::averaged(Operator inner, double weight) {
  if (!(weight >= 0.0 && weight <= 1.0)) throw DomainError("averaged: weight must lie in [0,1]");
  auto n = std::make_shared<OperatorNode>();
  n->dim = inner.dim();
  n->norms = merged_norms({inner});
  n->v = AveragedNode{std::move(inner), weight};
  return Operator(std::move(n));
}

Operator Operator::composition(std::vector<Operator> ops) {
  if (ops.empty()) throw DomainError("composition: empty operator list");
  auto n = std::make_shared<OperatorNode>();
  n->dim = merged_dim(ops);
  n->norms = merged_norms(ops);
  n->v = CompositionNode{std::move(ops)};
  return Operator(std::move(n));
}

Operator Operator::convex_combination(std::vector<Operator> ops, std::vector<double> weights) {
  if (ops.empty() || ops.size() != weights.size()) {
    throw DomainError("convex_combination: need one weight per operator");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw DomainError("convex_combination: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("convex_combination: weights must sum to 1");
  auto n = std::make_shared<OperatorNode>();
  n->dim = merged_dim(ops);
  n->norms = merged_norms(ops);
  n->v = ConvexNode{std::move(ops), std::move(weights)};
  return Operator(std::move(n));
}

Operator Operator::linear(std::size_t dim, std::vector<double> matrix, NormKind declared) {
  if (dim == 0 || matrix.size() != dim * dim) {
    throw DimensionError("linear: matrix must be dim x dim");
  }
  Eigen::MatrixXd m(dim, dim);
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < dim; ++c) {
      const double v = matrix[r * dim + c];
      if (!std::isfinite(v)) throw DomainError("linear: non-finite matrix entry");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  constexpr double slack = 1e-12;
  const double spectral = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
  const double max_row = m.cwiseAbs().rowwise().sum().maxCoeff();
  const double max_col = m.cwiseAbs().colwise().sum().maxCoeff();
  NormSet norms = 0;
  if (spectral <= 1.0 + slack) norms |= bit(NormKind::Euclidean);
  if (max_row <= 1.0 + slack) norms |= bit(NormKind::Sup);
  if (max_col <= 1.0 + slack) norms |= bit(NormKind::L1);
  if (!(norms & bit(declared))) {
    throw DomainError("linear: operator norm exceeds 1 in the declared " +
                      std::string(to_string(declared)) + " norm");
  }
  auto n = std::make_shared<OperatorNode>();
  n->dim = dim;
  n->norms = norms;
  n->v = LinearNode{dim, std::move(matrix), declared};
  return Operator(std::move(n));
}

Operator Operator::bellman_rvi(std::shared_ptr<const Mdp> mdp, FSpec f) {
  if (!mdp) throw DomainError("bellman_rvi: null MDP");
  if (const auto* pin = std::get_if<PinnedEntry>(&f)) {
    if (pin->state >= mdp->num_states() || pin->action >= mdp->num_actions()) {
      throw DomainError("bellman_rvi: pinned entry outside the MDP");
    }
  }
  auto n = std::make_shared<OperatorNode>();
  n->dim = mdp->table_size();
  // Sup-Lipschitz constant is 2 (the f term); nonexpansive only in the span seminorm.
  n->norms = 0;
  n->v = BellmanNode{std::move(mdp), f};
  return Operator(std::move(n));
}

OperatorKind Operator::kind() const noexcept {
  return static_cast<OperatorKind>(node_->v.index());
}

std::optional<std::size_t> Operator::dim() const noexcept { return node_->dim; }

bool Operator::nonexpansive_in(NormKind kind) const noexcept {
  return (node_->norms & bit(kind)) != 0;
}

Point Operator::apply(const Point& x) const {
  const OperatorNode& node = *node_;
  check_dim(node, x);
  return std::visit(
      overloaded{
          [&](const IdentityNode&) { return x; },
          [&](const RotationNode& r) {
            Point out = x;
            out[r.i] = r.c * x[r.i] - r.s * x[r.j];
            out[r.j] = r.s * x[r.i] + r.c * x[r.j];
            return out;
          },
          [&](const HalfspaceNode& h) {
            const double excess = dot(h.a, x) - h.b;
            if (excess <= 0.0) return x;
            Point out = x;
            const double t = excess / h.a_sq;
            for (std::size_t k = 0; k < x.dim(); ++k) out[k] -= t * h.a[k];
            return out;
          },
          [&](const BallNode& b) {
            const double d = distance(NormKind::Euclidean, x, b.center);
            if (d <= b.radius) return x;
            Point out = b.center;
            const double t = b.radius / d;
            for (std::size_t k = 0; k < x.dim(); ++k) out[k] += t * (x[k] - b.center[k]);
            return out;
          },
          [&](const AveragedNode& a) { return lerp(x, a.inner.apply(x), a.weight); },
          [&](const CompositionNode& c) {
            Point out = x;
            for (const auto& op : c.ops) out = op.apply(out);
            return out;
          },
          [&](const ConvexNode& c) {
            Point out(x.dim(), 0.0);
            for (std::size_t k = 0; k < c.ops.size(); ++k) {
              const Point y = c.ops[k].apply(x);
              for (std::size_t i = 0; i < x.dim(); ++i) out[i] += c.weights[k] * y[i];
            }
            return out;
          },
          [&](const LinearNode& l) {
            Point out(l.dim, 0.0);
            for (std::size_t r = 0; r < l.dim; ++r) {
              double s = 0.0;
              for (std::size_t c = 0; c < l.dim; ++c) s += l.m[r * l.dim + c] * x[c];
              out[r] = s;
            }
            return out;
          },
          [&](const BellmanNode& b) { return hlab::bellman_rvi(*b.mdp, b.f, x); },
      },
      node.v);
}

std::optional<Point> Operator::known_fixed_point(std::size_t dim) const {
  const OperatorNode& node = *node_;
  if (node.dim && *node.dim != dim) return std::nullopt;
  return std::visit(
      overloaded{
          [&](const IdentityNode&) -> std::optional<Point> { return Point(dim, 0.0); },
          [&](const RotationNode&) -> std::optional<Point> { return Point(dim, 0.0); },
          [&](const LinearNode&) -> std::optional<Point> { return Point(dim, 0.0); },
          [&](const HalfspaceNode& h) -> std::optional<Point> {
            // Point of the set nearest the origin.
            if (h.b >= 0.0) return Point(dim, 0.0);
            return (h.b / h.a_sq) * h.a;
          },
          [&](const BallNode&) -> std::optional<Point> { return apply(Point(dim, 0.0)); },
          [&](const AveragedNode& a) { return a.inner.known_fixed_point(dim); },
          [&](const CompositionNode& c) -> std::optional<Point> {
            for (const auto& op : c.ops) {
              auto p = op.known_fixed_point(dim);
              if (p && std::all_of(c.ops.begin(), c.ops.end(),
                                   [&](const Operator& o) { return fixes(o, *p); })) {
                return p;
              }
            }
            return std::nullopt;
          },
          [&](const ConvexNode& c) -> std::optional<Point> {
            for (const auto& op : c.ops) {
              auto p = op.known_fixed_point(dim);
              if (p && std::all_of(c.ops.begin(), c.ops.end(),
                                   [&](const Operator& o) { return fixes(o, *p); })) {
                return p;
              }
            }
            return std::nullopt;
          },
          [&](const BellmanNode&) -> std::optional<Point> { return std::nullopt; },
      },
      node.v);
}

std::string Operator::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const IdentityNode&) { os << "identity"; },
                 [&](const RotationNode& r) {
                   os << "rotation(" << r.angle << ", plane " << r.i << "," << r.j << ")";
                 },
                 [&](const HalfspaceNode& h) { os << "halfspace_projection(b=" << h.b << ")"; },
                 [&](const BallNode& b) { os << "ball_projection(r=" << b.radius << ")"; },
                 [&](const AveragedNode& a) {
                   os << "averaged(" << a.inner.describe() << ", " << a.weight << ")";
                 },
                 [&](const CompositionNode& c) {
                   os << "composition[";
                   for (std::size_t i = 0; i < c.ops.size(); ++i) {
                     os << (i ? ", " : "") << c.ops[i].describe();
                   }
                   os << "]";
                 },
                 [&](const ConvexNode& c) {
                   os << "convex_combination[";
                   for (std::size_t i = 0; i < c.ops.size(); ++i) {
                     os << (i ? ", " : "") << c.weights[i] << "*" << c.ops[i].describe();
                   }
                   os << "]";
                 },
                 [&](const LinearNode& l) { os << "linear(" << l.dim << "x" << l.dim << ")"; },
                 [&](const BellmanNode& b) {
                   os << "bellman_rvi(" << b.mdp->num_states() << "x" << b.mdp->num_actions()
                      << ")";
                 },
             },
             node_->v);
  return os.str();
}

Point apply(const Operator& op, const Point& x) { return op.apply(x); }

double residual(const Operator& op, NormKind kind, const Point& x) {
  return distance(kind, x, op.apply(x));
}

NonexpansiveReport check_nonexpansive(const Operator& op, NormKind kind, std::size_t dim,
                                      std::uint64_t trials, std::uint64_t seed) {
  if (auto d = op.dim(); d && *d != dim) throw DimensionError("check_nonexpansive: dim mismatch");
  if (trials == 0) throw DomainError("check_nonexpansive: trials must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> log_scale(-3.0, 2.0);
  NonexpansiveReport rep;
  Point x(dim), y(dim);
  for (std::uint64_t t = 0; t < trials; ++t) {
    const double sx = std::pow(10.0, log_scale(rng));
    const double sd = std::pow(10.0, log_scale(rng));
    for (std::size_t i = 0; i < dim; ++i) {
      x[i] = sx * gauss(rng);
      y[i] = x[i] + sd * gauss(rng);
    }
    const double den = distance(kind, x, y);
    if (den == 0.0) continue;
    const double ratio = distance(kind, op.apply(x), op.apply(y)) / den;
    rep.max_ratio = std::max(rep.max_ratio, ratio);
    if (ratio > 1.0 + 1e-10) ++rep.violations;
    ++rep.trials;
  }
  return rep;
}

std::optional<Point> common_fixed_point(const Operator& t, const Operator& u, std::size_t dim) {
  for (const Operator* src : {&t, &u}) {
    auto p = src->known_fixed_point(dim);
    if (p && fixes(t, *p) && fixes(u, *p)) return p;
  }
  return std::nullopt;
}

}  // namespace hlab
