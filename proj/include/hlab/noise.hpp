#pragma once

#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "hlab/moduli.hpp"
#include "hlab/point.hpp"

namespace hlab {

using Rng = std::mt19937_64;

// Seed of path i under master seed m.
inline std::uint64_t path_seed(std::uint64_t master, std::uint64_t i) noexcept { return master ^ i; }

struct ZeroNoise {};

// Centered Gaussian, scaled so that E||xi_n|| = K1 / (n+2)^2 in the
// Euclidean and l1 norms (an upper bound in the sup norm).
struct GaussianDecay {
  double k1 = 0.0;
};

enum class Direction { Random, AlongState };

// ||xi_n|| = b_n exactly. b_n = table[n] for n < table.size(), else
// scale / (n + shift)^power. AlongState points xi_n along the current state,
// a deterministic function of the trajectory.
struct BoundedAdversarial {
  std::vector<double> table;
  double scale = 0.0;
  double shift = 1.0;
  double power = 2.0;
  Direction direction = Direction::Random;
};

// Mean of s_n iid centered Gaussian samples with E||X||^2 = sigma^2 (Euclidean
// second moment, rescaled by 1/sqrt(d) for l1), s_n = ceil(sigma^2 (n+2)^4 / K1^2).
struct MinibatchSurrogate {
  double sigma = 1.0;
  double k1 = 1.0;
};

class NoiseModel {
 public:
  using Variant = std::variant<ZeroNoise, GaussianDecay, BoundedAdversarial, MinibatchSurrogate>;

  NoiseModel() : v_(ZeroNoise{}) {}
  // Validates parameters; throws DomainError.
  explicit NoiseModel(Variant v);

  static NoiseModel zero() { return NoiseModel(ZeroNoise{}); }
  static NoiseModel gaussian_decay(double k1) { return NoiseModel(GaussianDecay{k1}); }
  static NoiseModel minibatch(double sigma, double k1) {
    return NoiseModel(MinibatchSurrogate{sigma, k1});
  }

  const Variant& variant() const noexcept { return v_; }
  bool is_zero() const noexcept;
  std::string describe() const;

  // `context` is the state the noise is added next to (x_n for xi, y_n for
  // delta); only AlongState reads it.
  Point sample(Index n, std::size_t dim, NormKind norm, Rng& rng,
               const Point* context = nullptr) const;

  // Certified bound on E||xi_n||.
  double mean_norm_bound(Index n) const;
  // Bound on sqrt(E||xi_n||^2) in the given norm and dimension.
  double rms_norm_bound(Index n, std::size_t dim, NormKind norm) const;
  // K with mean_norm_bound(n) <= K / (n+2)^2 for all n, when one exists.
  std::optional<double> decay_constant() const;
  // Upper bound on sum_n mean_norm_bound(n); throws when not summable.
  double total_bound() const;
  // sup_n mean_norm_bound(n).
  double sup_bound() const;

 private:
  Variant v_;
};

// Batch size s_n of the surrogate; saturates at kIndexMax.
Index minibatch_size(const MinibatchSurrogate& m, Index n);

// chi with sum_{n >= chi(eps)} mean_norm_bound(n) < eps. Non-summable models throw.
ConvergenceModulus noise_sum_modulus(const NoiseModel& m);
// rho with mean_norm_bound(n) < eps for n >= rho(eps).
ConvergenceModulus noise_mean_rate(const NoiseModel& m);
// Modulus and bound for sum_n E||xi_{n+1} - xi_n|| (via the triangle inequality).
struct DifferenceModulus {
  ConvergenceModulus chi;
  double bound = 0.0;
};
DifferenceModulus noise_difference_modulus(const NoiseModel& m);
// Modulus of absolute continuity for sum_n ||xi_n||; +inf for Zero.
RealModulus noise_sum_abs_continuity(const NoiseModel& m, std::size_t dim, NormKind norm);

// E||Z|| for Z standard normal in R^d: Euclidean sqrt(2) G((d+1)/2) / G(d/2),
// l1 d sqrt(2/pi). Sup returns the Euclidean value (an upper bound).
double gaussian_mean_norm(std::size_t dim, NormKind norm);

}  // namespace hlab
