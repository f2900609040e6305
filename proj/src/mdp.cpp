#include "hlab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hlab/error.hpp"

namespace hlab {

Mdp::Mdp(std::size_t num_states, std::size_t num_actions, std::vector<double> rewards,
         std::vector<double> transitions)
    : states_(num_states), actions_(num_actions), rewards_(std::move(rewards)),
      transitions_(std::move(transitions)) {
  if (states_ == 0 || actions_ == 0) throw DomainError("Mdp: need at least one state and action");
  if (rewards_.size() != states_ * actions_) {
    throw DimensionError("Mdp: reward table must have |S|*|A| entries");
  }
  if (transitions_.size() != states_ * actions_ * states_) {
    throw DimensionError("Mdp: transition table must have |S|*|A|*|S| entries");
  }
  for (double r : rewards_) {
    if (!std::isfinite(r)) throw DomainError("Mdp: non-finite reward");
  }
  for (std::size_t s = 0; s < states_; ++s) {
    for (std::size_t a = 0; a < actions_; ++a) {
      double total = 0.0;
      for (double p : row(s, a)) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
          throw DomainError("Mdp: negative or non-finite transition probability");
        }
        total += p;
      }
      if (total == 0.0) {
        throw DomainError("Mdp: empty support row (s=" + std::to_string(s) +
                          ", a=" + std::to_string(a) + ")");
      }
      if (std::abs(total - 1.0) > 1e-12) {
        throw DomainError("Mdp: transition row (s=" + std::to_string(s) + ", a=" +
                          std::to_string(a) + ") does not sum to 1");
      }
    }
  }
}

bool Mdp::deterministic() const noexcept {
  return std::all_of(transitions_.begin(), transitions_.end(),
                     [](double p) { return p == 0.0 || p == 1.0; });
}

double evaluate_f(const Mdp& mdp, const FSpec& f, const Point& q) {
  if (q.dim() != mdp.table_size()) throw DimensionError("evaluate_f: Q-table size mismatch");
  if (const auto* pin = std::get_if<PinnedEntry>(&f)) {
    if (pin->state >= mdp.num_states() || pin->action >= mdp.num_actions()) {
      throw DomainError("PinnedEntry outside the MDP");
    }
    return q[mdp.index(pin->state, pin->action)];
  }
  double s = 0.0;
  for (double v : q.coords()) s += v;
  return s / static_cast<double>(q.dim());
}

std::vector<double> state_values(const Mdp& mdp, const Point& q) {
  std::vector<double> v(mdp.num_states());
  for (std::size_t t = 0; t < mdp.num_states(); ++t) {
    double m = q[mdp.index(t, 0)];
    for (std::size_t b = 1; b < mdp.num_actions(); ++b) m = std::max(m, q[mdp.index(t, b)]);
    v[t] = m;
  }
  return v;
}

double weighted_backup(std::span<const double> weights, std::span<const double> values) {
  double s = 0.0;
  for (std::size_t t = 0; t < weights.size(); ++t) s += weights[t] * values[t];
  return s;
}

double span_seminorm(const Point& v) {
  if (v.dim() == 0) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.vec().begin(), v.vec().end());
  return *hi - *lo;
}

Point bellman_rvi(const Mdp& mdp, const FSpec& f, const Point& q) {
  if (q.dim() != mdp.table_size()) throw DimensionError("bellman_rvi: Q-table size mismatch");
  const auto v = state_values(mdp, q);
  const double offset = evaluate_f(mdp, f, q);
  Point out(q.dim());
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      out[mdp.index(s, a)] = mdp.reward(s, a) + weighted_backup(mdp.row(s, a), v) - offset;
    }
  }
  return out;
}

}  // namespace hlab
