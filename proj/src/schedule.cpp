#include "hlab/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hlab/error.hpp"

namespace hlab {

namespace {

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

// +1 nondecreasing, -1 nonincreasing, 0 constant; throws when neither.
int monotone_direction(const std::vector<double>& v) {
  bool up = false, down = false;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[i - 1]) up = true;
    if (v[i] < v[i - 1]) down = true;
  }
  if (up && down) throw DomainError("variation modulus needs a monotone schedule");
  return up ? 1 : (down ? -1 : 0);
}

}  // namespace

Schedule::Schedule(Variant v) : v_(std::move(v)) {
  std::visit(
      [](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, ConstantSchedule>) {
          if (!in_unit(s.c)) throw DomainError("Constant schedule value must lie in [0,1]");
        } else if constexpr (std::is_same_v<S, PowerDecay>) {
          if (!in_unit(s.c)) throw DomainError("PowerDecay coefficient must lie in [0,1]");
          if (!(s.exponent > 0.0) || !std::isfinite(s.exponent)) {
            throw DomainError("PowerDecay exponent must be positive");
          }
        } else if constexpr (std::is_same_v<S, CustomSchedule>) {
          if (s.values.empty()) throw DomainError("Custom schedule needs at least one value");
          for (double x : s.values) {
            if (!in_unit(x)) throw DomainError("Custom schedule values must lie in [0,1]");
          }
        }
      },
      v_);
}

double Schedule::value(Index n) const {
  return std::visit(
      [n](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, HalpernTwo>) {
          return 2.0 / (static_cast<double>(n) + 2.0);
        } else if constexpr (std::is_same_v<S, ConstantSchedule>) {
          return s.c;
        } else if constexpr (std::is_same_v<S, PowerDecay>) {
          return s.c * std::pow(static_cast<double>(n) + 1.0, -s.exponent);
        } else {
          if (n < s.values.size()) return s.values[n];
          if (!s.hold_last) {
            throw DomainError("Custom schedule has no value at n=" + std::to_string(n) +
                              " (tabulated prefix of " + std::to_string(s.values.size()) +
                              ", no tail rule)");
          }
          return s.values.back();
        }
      },
      v_);
}

std::optional<double> Schedule::constant_value() const noexcept {
  if (const auto* c = std::get_if<ConstantSchedule>(&v_)) return c->c;
  if (const auto* c = std::get_if<CustomSchedule>(&v_)) {
    if (c->hold_last && std::all_of(c->values.begin(), c->values.end(),
                                    [&](double x) { return x == c->values.front(); })) {
      return c->values.front();
    }
  }
  return std::nullopt;
}

std::string Schedule::describe() const {
  std::ostringstream os;
  std::visit(
      [&](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, HalpernTwo>) {
          os << "halpern_two";
        } else if constexpr (std::is_same_v<S, ConstantSchedule>) {
          os << "constant(" << s.c << ")";
        } else if constexpr (std::is_same_v<S, PowerDecay>) {
          os << "power_decay(" << s.c << ", " << s.exponent << ")";
        } else {
          os << "custom(" << s.values.size() << (s.hold_last ? ", hold_last)" : ")");
        }
      },
      v_);
  return os.str();
}

double schedule_value(const Schedule& s, Index n) { return s.value(n); }

DivergenceModulus divergence_modulus(const Schedule& s) {
  if (s.is_halpern_two()) {
    // sum_{n=k}^{m} 2/(n+2) >= 2 ln((m+3)/(k+2)).
    return [](Index k, double b) -> Index {
      const double m = (static_cast<double>(k) + 2.0) * std::exp(b / 2.0);
      return std::max(k, ceil_index(m));
    };
  }
  if (auto c = s.constant_value()) {
    const double v = *c;
    if (v > 0.0) {
      return [v](Index k, double b) -> Index {
        if (!(b > 0.0)) return k;
        return sat_add(k, ceil_index(b / v));
      };
    }
    throw DomainError("series not divergent");
  }
  if (const auto* p = std::get_if<PowerDecay>(&s.variant())) {
    if (p->exponent > 1.0 || p->c == 0.0) throw DomainError("series not divergent");
    throw DomainError("divergence modulus only available for halpern_two and constant schedules");
  }
  if (const auto* c = std::get_if<CustomSchedule>(&s.variant())) {
    if (!c->hold_last || c->values.back() == 0.0) throw DomainError("series not divergent");
  }
  throw DomainError("divergence modulus only available for halpern_two and constant schedules");
}

DivergenceModulus shifted_divergence(DivergenceModulus theta) {
  return [theta = std::move(theta)](Index k, double b) -> Index {
    return std::max(k, sat_sub(theta(sat_add(k, 1), b), 1));
  };
}

VariationModulus variation_modulus(const Schedule& s) {
  return std::visit(
      [](const auto& v) -> VariationModulus {
        using S = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<S, HalpernTwo>) {
          // Tail from N telescopes to 2/(N+2); 2/(N+2) < eps iff N > 2/eps - 2.
          return {[](double eps) -> Index {
                    if (!(eps > 0.0)) throw DomainError("eps must be positive");
                    return sat_sub(floor_index(2.0 / eps), 1);
                  },
                  1.0};
        } else if constexpr (std::is_same_v<S, ConstantSchedule>) {
          return {[](double) -> Index { return 0; }, 0.0};
        } else if constexpr (std::is_same_v<S, PowerDecay>) {
          // Tail from N telescopes to c (N+1)^(-e).
          const double c = v.c, e = v.exponent;
          return {[c, e](double eps) -> Index {
                    if (!(eps > 0.0)) throw DomainError("eps must be positive");
                    if (c < eps) return 0;
                    return floor_index(std::pow(c / eps, 1.0 / e));
                  },
                  c};
        } else {
          monotone_direction(v.values);
          const std::vector<double> vals = v.values;
          const double total = std::abs(vals.front() - vals.back());
          return {[vals](double eps) -> Index {
                    if (!(eps > 0.0)) throw DomainError("eps must be positive");
                    // Monotone: the tail from N equals |v_N - v_last|.
                    std::size_t n = vals.size() - 1;
                    while (n > 0 && std::abs(vals[n - 1] - vals.back()) < eps) --n;
                    return n;
                  },
                  total};
        }
      },
      s.variant());
}

std::optional<ConvergenceModulus> rate_to_zero(const Schedule& s) {
  return std::visit(
      [](const auto& v) -> std::optional<ConvergenceModulus> {
        using S = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<S, HalpernTwo>) {
          return ConvergenceModulus([](double eps) -> Index {
            if (!(eps > 0.0)) throw DomainError("eps must be positive");
            return ceil_index(2.0 / eps);
          });
        } else if constexpr (std::is_same_v<S, ConstantSchedule>) {
          if (v.c != 0.0) return std::nullopt;
          return ConvergenceModulus([](double) -> Index { return 0; });
        } else if constexpr (std::is_same_v<S, PowerDecay>) {
          const double c = v.c, e = v.exponent;
          return ConvergenceModulus([c, e](double eps) -> Index {
            if (!(eps > 0.0)) throw DomainError("eps must be positive");
            if (c < eps) return 0;
            return floor_index(std::pow(c / eps, 1.0 / e));
          });
        } else {
          if (!v.hold_last || v.values.back() != 0.0) return std::nullopt;
          const std::vector<double> vals = v.values;
          return ConvergenceModulus([vals](double eps) -> Index {
            if (!(eps > 0.0)) throw DomainError("eps must be positive");
            std::size_t n = vals.size() - 1;
            while (n > 0 && vals[n - 1] < eps) --n;
            return n;
          });
        }
      },
      s.variant());
}

std::optional<double> certify_band(const Schedule& s) {
  double lo = 0.0, hi = 0.0;
  if (auto c = s.constant_value()) {
    lo = hi = *c;
  } else if (const auto* c = std::get_if<CustomSchedule>(&s.variant()); c && c->hold_last) {
    lo = *std::min_element(c->values.begin(), c->values.end());
    hi = *std::max_element(c->values.begin(), c->values.end());
  } else {
    return std::nullopt;
  }
  const double band = std::min(lo, 1.0 - hi);
  if (!(band > 0.0)) return std::nullopt;
  return band;
}

SeriesModuli series_moduli(const Schedule& s) {
  SeriesModuli m;
  try {
    m.theta = divergence_modulus(s);
  } catch (const DomainError&) {
  }
  try {
    auto v = variation_modulus(s);
    m.chi_variation = std::move(v.chi);
    m.variation_bound = v.bound;
  } catch (const DomainError&) {
  }
  m.rho_to_zero = rate_to_zero(s);
  return m;
}

}  // namespace hlab
