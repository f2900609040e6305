#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "hlab/point.hpp"

namespace hlab {

// Finite MDP (S, A, r, p). Q-tables are Points of dimension |S|*|A| laid out
// row-major by state: index(s, a) = s * |A| + a.
class Mdp {
 public:
  // rewards: |S|*|A| entries; transitions: |S|*|A|*|S| entries, each (s,a) row
  // summing to 1 within 1e-12.
  Mdp(std::size_t num_states, std::size_t num_actions, std::vector<double> rewards,
      std::vector<double> transitions);

  std::size_t num_states() const noexcept { return states_; }
  std::size_t num_actions() const noexcept { return actions_; }
  std::size_t table_size() const noexcept { return states_ * actions_; }
  std::size_t index(std::size_t s, std::size_t a) const noexcept { return s * actions_ + a; }

  double reward(std::size_t s, std::size_t a) const { return rewards_[index(s, a)]; }
  std::span<const double> row(std::size_t s, std::size_t a) const {
    return {transitions_.data() + index(s, a) * states_, states_};
  }
  bool deterministic() const noexcept;

 private:
  std::size_t states_;
  std::size_t actions_;
  std::vector<double> rewards_;
  std::vector<double> transitions_;
};

// Reference functional f of relative value iteration. Both variants are
// sup-norm 1-Lipschitz and satisfy f(Q + c) = f(Q) + c.
struct PinnedEntry {
  std::size_t state = 0;
  std::size_t action = 0;
};
struct MeanOverEntries {};
using FSpec = std::variant<PinnedEntry, MeanOverEntries>;

double evaluate_f(const Mdp& mdp, const FSpec& f, const Point& q);

// V(t) = max_b Q(t, b).
std::vector<double> state_values(const Mdp& mdp, const Point& q);

// sum_t w[t] * v[t], accumulated in increasing t. Shared by the exact Bellman
// backup and the minibatch estimate so that point-mass rows agree bitwise.
double weighted_backup(std::span<const double> weights, std::span<const double> values);

// max_i v_i - min_i v_i.
double span_seminorm(const Point& v);

// (TQ)(s,a) = r(s,a) + sum_t p(s,a,t) max_b Q(t,b) - f(Q).
Point bellman_rvi(const Mdp& mdp, const FSpec& f, const Point& q);

}  // namespace hlab
