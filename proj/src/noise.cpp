#include "hlab/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "hlab/error.hpp"

namespace hlab {

namespace {

// Batches up to this size are averaged sample by sample; larger ones draw the
// (exactly Gaussian) batch mean directly.
constexpr Index kExplicitBatchCap = 1024;

constexpr double kBasel = std::numbers::pi * std::numbers::pi / 6.0 - 1.0;  // sum_{n>=0} 1/(n+2)^2

double sq(double x) { return x * x; }

// E||Z||^2 for Z standard normal in R^d.
double gaussian_second_moment(std::size_t dim, NormKind norm) {
  const double d = static_cast<double>(dim);
  if (norm == NormKind::L1) return d + d * (d - 1.0) * 2.0 / std::numbers::pi;
  return d;  // Euclidean exactly; sup bounded by it
}

// b_n of a BoundedAdversarial model.
double bounded_at(const BoundedAdversarial& b, Index n) {
  if (n < b.table.size()) return b.table[n];
  return b.scale * std::pow(static_cast<double>(n) + b.shift, -b.power);
}

// Table padded so that it has at least one entry.
std::vector<double> effective_table(const BoundedAdversarial& b) {
  if (!b.table.empty()) return b.table;
  return {bounded_at(b, 0)};
}

// sum_{n >= N} scale (n + shift)^(-p) <= scale (N - 1 + shift)^(1-p) / (p - 1), N >= 1.
double bounded_tail(const BoundedAdversarial& b, Index from) {
  if (b.scale == 0.0) return 0.0;
  return b.scale * std::pow(static_cast<double>(from) - 1.0 + b.shift, 1.0 - b.power) /
         (b.power - 1.0);
}

void require_eps(double eps) {
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
}

Point unit_direction(std::size_t dim, NormKind norm, Rng& rng) {
  std::normal_distribution<double> gauss;
  Point z(dim);
  for (;;) {
    for (std::size_t i = 0; i < dim; ++i) z[i] = gauss(rng);
    const double r = hlab::norm(norm, z);
    if (r > 0.0) return (1.0 / r) * z;
  }
}

}  // namespace

double gaussian_mean_norm(std::size_t dim, NormKind norm) {
  if (dim == 0) throw DimensionError("gaussian_mean_norm: dim must be positive");
  const double d = static_cast<double>(dim);
  if (norm == NormKind::L1) return d * std::sqrt(2.0 / std::numbers::pi);
  return std::sqrt(2.0) * std::exp(std::lgamma((d + 1.0) / 2.0) - std::lgamma(d / 2.0));
}

NoiseModel::NoiseModel(Variant v) : v_(std::move(v)) {
  std::visit(
      [](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, GaussianDecay>) {
          if (!(m.k1 >= 0.0) || !std::isfinite(m.k1)) {
            throw DomainError("GaussianDecay: K1 must be nonnegative");
          }
        } else if constexpr (std::is_same_v<M, BoundedAdversarial>) {
          for (double b : m.table) {
            if (!(b >= 0.0) || !std::isfinite(b)) {
              throw DomainError("BoundedAdversarial: bounds must be finite and nonnegative");
            }
          }
          if (!(m.scale >= 0.0) || !std::isfinite(m.scale)) {
            throw DomainError("BoundedAdversarial: scale must be nonnegative");
          }
          if (!(m.shift >= 1.0)) throw DomainError("BoundedAdversarial: shift must be >= 1");
          if (!(m.power > 0.0)) throw DomainError("BoundedAdversarial: power must be positive");
        } else if constexpr (std::is_same_v<M, MinibatchSurrogate>) {
          if (!(m.sigma >= 0.0) || !std::isfinite(m.sigma)) {
            throw DomainError("MinibatchSurrogate: sigma must be nonnegative");
          }
          if (!(m.k1 > 0.0) || !std::isfinite(m.k1)) {
            throw DomainError("MinibatchSurrogate: K1 must be positive");
          }
        }
      },
      v_);
}

bool NoiseModel::is_zero() const noexcept {
  return std::visit(
      [](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, ZeroNoise>) {
          return true;
        } else if constexpr (std::is_same_v<M, GaussianDecay>) {
          return m.k1 == 0.0;
        } else if constexpr (std::is_same_v<M, BoundedAdversarial>) {
          return m.scale == 0.0 &&
                 std::all_of(m.table.begin(), m.table.end(), [](double b) { return b == 0.0; });
        } else {
          return m.sigma == 0.0;
        }
      },
      v_);
}

std::string NoiseModel::describe() const {
  std::ostringstream os;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, ZeroNoise>) {
          os << "zero";
        } else if constexpr (std::is_same_v<M, GaussianDecay>) {
          os << "gaussian_decay(K1=" << m.k1 << ")";
        } else if constexpr (std::is_same_v<M, BoundedAdversarial>) {
          os << "bounded(table=" << m.table.size() << ", " << m.scale << "/(n+" << m.shift
             << ")^" << m.power << (m.direction == Direction::AlongState ? ", along_state)" : ")");
        } else {
          os << "minibatch(sigma=" << m.sigma << ", K1=" << m.k1 << ")";
        }
      },
      v_);
  return os.str();
}

Index minibatch_size(const MinibatchSurrogate& m, Index n) {
  const double s = sq(m.sigma) * std::pow(static_cast<double>(n) + 2.0, 4.0) / sq(m.k1);
  return std::max<Index>(1, ceil_index(s));
}

Point NoiseModel::sample(Index n, std::size_t dim, NormKind norm, Rng& rng,
                         const Point* context) const {
  return std::visit(
      [&](const auto& m) -> Point {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, ZeroNoise>) {
          return Point(dim, 0.0);
        } else if constexpr (std::is_same_v<M, GaussianDecay>) {
          if (m.k1 == 0.0) return Point(dim, 0.0);
          const double scale = mean_norm_bound(n) / gaussian_mean_norm(dim, norm);
          std::normal_distribution<double> gauss(0.0, scale);
          Point out(dim);
          for (std::size_t i = 0; i < dim; ++i) out[i] = gauss(rng);
          return out;
        } else if constexpr (std::is_same_v<M, BoundedAdversarial>) {
          const double b = bounded_at(m, n);
          if (b == 0.0) return Point(dim, 0.0);
          if (m.direction == Direction::AlongState) {
            if (context && context->dim() == dim) {
              const double r = hlab::norm(norm, *context);
              if (r > 0.0) return (b / r) * *context;
            }
            Point e(dim, 0.0);
            e[0] = b;
            return e;
          }
          return b * unit_direction(dim, norm, rng);
        } else {
          if (m.sigma == 0.0) return Point(dim, 0.0);
          const double d = static_cast<double>(dim);
          // Per-coordinate std of one sample: E||X||_2^2 = sigma^2, or sigma^2/d for l1.
          const double coord_sd = norm == NormKind::L1 ? m.sigma / d : m.sigma / std::sqrt(d);
          const Index s = minibatch_size(m, n);
          Point out(dim, 0.0);
          if (s <= kExplicitBatchCap) {
            std::normal_distribution<double> gauss(0.0, coord_sd);
            for (Index j = 0; j < s; ++j) {
              for (std::size_t i = 0; i < dim; ++i) out[i] += gauss(rng);
            }
            out *= 1.0 / static_cast<double>(s);
          } else {
            std::normal_distribution<double> gauss(0.0, coord_sd / std::sqrt(static_cast<double>(s)));
            for (std::size_t i = 0; i < dim; ++i) out[i] = gauss(rng);
          }
          return out;
        }
      },
      v_);
}

double NoiseModel::mean_norm_bound(Index n) const {
  return std::visit(
      [n](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, ZeroNoise>) {
          return 0.0;
        } else if constexpr (std::is_same_v<M, GaussianDecay>) {
          return m.k1 / sq(static_cast<double>(n) + 2.0);
        } else if constexpr (std::is_same_v<M, BoundedAdversarial>) {
          return bounded_at(m, n);
        } else {
          return m.sigma / std::sqrt(static_cast<double>(minibatch_size(m, n)));
        }
      },
      v_);
}

double NoiseModel::rms_norm_bound(Index n, std::size_t dim, NormKind norm) const {
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, GaussianDecay>) {
          return mean_norm_bound(n) * std::sqrt(gaussian_second_moment(dim, norm)) /
                 gaussian_mean_norm(dim, norm);
        } else {
          // Zero and Bounded have deterministic norms; the surrogate's bound is
          // already a root-mean-square bound.
          return mean_norm_bound(n);
        }
      },
      v_);
}

std::optional<double> NoiseModel::decay_constant() const {
  return std::visit(
      [](const auto& m) -> std::optional<double> {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, ZeroNoise>) {
          return 0.0;
        } else if constexpr (std::is_same_v<M, GaussianDecay>) {
          return m.k1;
        } else if constexpr (std::is_same_v<M, MinibatchSurrogate>) {
          return m.k1;
        } else {
          double k = 0.0;
          for (std::size_t i = 0; i < m.table.size(); ++i) {
            k = std::max(k, m.table[i] * sq(static_cast<double>(i) + 2.0));
          }
          if (m.scale == 0.0) return k;
          if (m.power < 2.0) return std::nullopt;
          const double t = static_cast<double>(m.table.size());
          const double ratio = std::max(1.0, sq((t + 2.0) / (t + m.shift)));
          return std::max(k, m.scale * ratio * std::pow(t + m.shift, 2.0 - m.power));
        }
      },
      v_);
}

double NoiseModel::total_bound() const {
  return std::visit(
      [](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, ZeroNoise>) {
          return 0.0;
        } else if constexpr (std::is_same_v<M, GaussianDecay>) {
          return m.k1 * kBasel;
        } else if constexpr (std::is_same_v<M, MinibatchSurrogate>) {
          return m.k1 * kBasel;
        } else {
          if (m.scale > 0.0 && m.power <= 1.0) throw DomainError("noise bounds not summable");
          const auto table = effective_table(m);
          double s = 0.0;
          for (double b : table) s += b;
          return s + bounded_tail(m, table.size());
        }
      },
      v_);
}

double NoiseModel::sup_bound() const {
  return std::visit(
      [this](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, BoundedAdversarial>) {
          double s = m.scale * std::pow(static_cast<double>(m.table.size()) + m.shift, -m.power);
          for (double b : m.table) s = std::max(s, b);
          return s;
        } else {
          return mean_norm_bound(0);
        }
      },
      v_);
}

ConvergenceModulus noise_sum_modulus(const NoiseModel& m) {
  return std::visit(
      [](const auto& v) -> ConvergenceModulus {
        using M = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<M, ZeroNoise>) {
          return [](double) -> Index { return 0; };
        } else if constexpr (std::is_same_v<M, GaussianDecay> ||
                             std::is_same_v<M, MinibatchSurrogate>) {
          // sum_{n>=N} K1/(n+2)^2 < K1/(N+1).
          const double k1 = v.k1;
          return [k1](double eps) -> Index {
            require_eps(eps);
            if (k1 == 0.0) return 0;
            return std::max<Index>(sat_sub(ceil_index(k1 / eps), 1), 1);
          };
        } else {
          if (v.scale > 0.0 && v.power <= 1.0) throw DomainError("noise bounds not summable");
          const BoundedAdversarial b = v;
          return [b](double eps) -> Index {
            require_eps(eps);
            const auto table = effective_table(b);
            const Index t = table.size();
            if (b.scale > 0.0) {
              const double r = std::pow(b.scale / ((b.power - 1.0) * eps), 1.0 / (b.power - 1.0));
              const double nd = std::floor(r - b.shift) + 2.0;
              if (nd > static_cast<double>(t)) return ceil_index(nd);
            }
            double tail = bounded_tail(b, t);
            Index n = t;
            while (n > 0 && tail + table[n - 1] < eps) {
              tail += table[n - 1];
              --n;
            }
            return n;
          };
        }
      },
      m.variant());
}

ConvergenceModulus noise_mean_rate(const NoiseModel& m) {
  return std::visit(
      [](const auto& v) -> ConvergenceModulus {
        using M = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<M, ZeroNoise>) {
          return [](double) -> Index { return 0; };
        } else if constexpr (std::is_same_v<M, GaussianDecay> ||
                             std::is_same_v<M, MinibatchSurrogate>) {
          const double k1 = v.k1;
          return [k1](double eps) -> Index {
            require_eps(eps);
            return sat_sub(floor_index(std::sqrt(k1 / eps)), 1);
          };
        } else {
          const BoundedAdversarial b = v;
          return [b](double eps) -> Index {
            require_eps(eps);
            const Index t = b.table.size();
            if (b.scale > 0.0) {
              const double nd = std::floor(std::pow(b.scale / eps, 1.0 / b.power) - b.shift) + 1.0;
              if (nd > static_cast<double>(t)) return ceil_index(nd);
            }
            Index n = t;
            while (n > 0 && b.table[n - 1] < eps) --n;
            return n;
          };
        }
      },
      m.variant());
}

DifferenceModulus noise_difference_modulus(const NoiseModel& m) {
  // sum_{n>=N} E||xi_{n+1} - xi_n|| <= 2 sum_{n>=N} mean_norm_bound(n).
  auto chi = noise_sum_modulus(m);
  return {[chi](double eps) { return chi(eps / 2.0); }, 2.0 * m.total_bound()};
}

RealModulus noise_sum_abs_continuity(const NoiseModel& m, std::size_t dim, NormKind norm) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (m.is_zero()) return [](double) { return inf; };
  if (std::holds_alternative<BoundedAdversarial>(m.variant())) {
    // The sum is a deterministic constant S, so E[S 1_A] = S P(A).
    const double s = m.total_bound();
    return [s](double eps) { return eps / s; };
  }
  // Minkowski: sqrt(E S^2) <= sum_n sqrt(E||xi_n||^2) =: R. The second-moment
  // modulus with E S^2 <= R^2 is (eps/2) (eps / (2 R^2)).
  const double rms_factor = m.rms_norm_bound(0, dim, norm) / m.mean_norm_bound(0);
  const double r = m.total_bound() * rms_factor;
  return [r](double eps) { return (eps / 2.0) * (eps / (2.0 * r * r)); };
}

}  // namespace hlab
