#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hlab/moduli.hpp"

namespace hlab {

struct HalpernTwo {};  // 2 / (n + 2)
struct ConstantSchedule {
  double c = 0.0;
};
struct PowerDecay {  // c * (n + 1)^(-exponent)
  double c = 1.0;
  double exponent = 1.0;
};
struct CustomSchedule {
  std::vector<double> values;
  bool hold_last = false;  // n >= values.size() -> values.back()
};

// Deterministic step-size sequence with values in [0, 1].
class Schedule {
 public:
  using Variant = std::variant<HalpernTwo, ConstantSchedule, PowerDecay, CustomSchedule>;

  Schedule() : v_(HalpernTwo{}) {}
  // Validates ranges; throws DomainError.
  explicit Schedule(Variant v);

  static Schedule halpern_two() { return Schedule(HalpernTwo{}); }
  static Schedule constant(double c) { return Schedule(ConstantSchedule{c}); }
  static Schedule power_decay(double c, double exponent) { return Schedule(PowerDecay{c, exponent}); }
  static Schedule custom(std::vector<double> values, bool hold_last) {
    return Schedule(CustomSchedule{std::move(values), hold_last});
  }

  double operator()(Index n) const { return value(n); }
  double value(Index n) const;

  const Variant& variant() const noexcept { return v_; }
  bool is_halpern_two() const noexcept { return std::holds_alternative<HalpernTwo>(v_); }
  // The value when the schedule is constant (Constant, or a one-entry held Custom).
  std::optional<double> constant_value() const noexcept;
  std::string describe() const;

 private:
  Variant v_;
};

double schedule_value(const Schedule& s, Index n);

// theta with sum_{n=k}^{theta(k,b)} s_n >= b. Only HalpernTwo and
// Constant(c > 0). Convergent schedules throw DomainError("series not divergent").
DivergenceModulus divergence_modulus(const Schedule& s);

// theta' for the shifted sequence a_n = s_{n+1}: theta'(k, b) = theta(k + 1, b) - 1.
DivergenceModulus shifted_divergence(DivergenceModulus theta);

struct VariationModulus {
  ConvergenceModulus chi;  // sum_{n >= chi(eps)} |s_{n+1} - s_n| < eps
  double bound = 0.0;      // >= total variation
};
// Requires a monotone schedule; non-monotone Custom throws DomainError.
VariationModulus variation_modulus(const Schedule& s);

// rho with s_n < eps for all n >= rho(eps); nullopt when s_n does not tend to 0.
std::optional<ConvergenceModulus> rate_to_zero(const Schedule& s);

// Largest Lambda > 0 with Lambda <= s_n <= 1 - Lambda for all n, when certifiable.
std::optional<double> certify_band(const Schedule& s);

struct SeriesModuli {
  std::optional<DivergenceModulus> theta;
  std::optional<ConvergenceModulus> chi_variation;
  std::optional<ConvergenceModulus> rho_to_zero;
  std::optional<double> variation_bound;
};
// Every modulus the schedule supports; unsupported entries are left empty.
SeriesModuli series_moduli(const Schedule& s);

}  // namespace hlab
