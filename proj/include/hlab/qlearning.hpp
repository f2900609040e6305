#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hlab/mdp.hpp"
#include "hlab/noise.hpp"
#include "hlab/scheme.hpp"

namespace hlab {

// s_n = ceil((n+2)^4 / divisor), saturating.
Index default_batch(Index n, double divisor = 100.0);

// One synchronous step:
// Q'(s,a) = (1-b)(r(s,a) + (g/s_n) sum_j max_b Q(z_j, b) - f(g Q)) + b g Q(s,a)
// with g = 1 - alpha_n, b = beta_n and z_1..z_{s_n} iid from p(s,a,.), drawn
// independently for every (s,a) as a multinomial count vector.
Point q_tikhonov_step(const Mdp& mdp, const FSpec& f, const Point& q, Index n, const Schedule& beta,
                      const Schedule& alpha, Index batch, Rng& rng);

// The same step with the sample mean replaced by its expectation.
Point q_tikhonov_expected(const Mdp& mdp, const FSpec& f, const Point& q, Index n,
                          const Schedule& beta, const Schedule& alpha);

// Draws a multinomial count vector of `trials` over `probs` by sequential binomials.
std::vector<std::uint64_t> multinomial(std::span<const double> probs, std::uint64_t trials, Rng& rng);

// Lowest-index argmax per state; entries within tol of the max count as ties.
std::vector<std::size_t> greedy_policy(const Mdp& mdp, const Point& q, double tol = 0.0);
std::string policy_digest(const std::vector<std::size_t>& policy);

struct RviSolution {
  double gain = 0.0;  // optimal average reward
  std::vector<std::size_t> policy;
  Point q;            // fixed point of bellman_rvi
  Index iterations = 0;
};
// Averaged iteration Q <- (Q + bellman_rvi(Q)) / 2 until the sup residual is
// below tol. Unichain is assumed, not checked. Throws NumericError on the cap.
RviSolution rvi_oracle(const Mdp& mdp, const FSpec& f = PinnedEntry{}, double tol = 1e-10,
                       Index max_iter = 5'000'000);

struct QRunConfig {
  std::shared_ptr<const Mdp> mdp;
  FSpec f = PinnedEntry{};
  Schedule alpha = Schedule::halpern_two();
  Schedule beta = Schedule::constant(0.5);
  double batch_divisor = 100.0;  // s_n = ceil((n+2)^4 / divisor)
  Index steps = 500;
  std::uint64_t seed = 0;
  std::optional<Point> q0;  // zeros by default
  bool exact = false;       // expected update, no sampling
};

struct QRecord {
  Index n = 0;
  double sup_residual = 0.0;  // ||bellman_rvi(Q_n) - Q_n||_sup
  std::string policy;
  bool matches_oracle = false;
};

struct QRunResult {
  std::vector<QRecord> records;  // n = 0..steps
  Point q_final;
  RviSolution oracle;
};
QRunResult run_qlearning(const QRunConfig& cfg);
QRunResult run_qlearning(const QRunConfig& cfg, const RviSolution& oracle);

// The KM-Tikhonov scheme with U = bellman_rvi, T = Id, u = 0, sup norm and no
// noise; for a deterministic MDP its iterates equal the Q-learning iterates.
SchemeConfig qlearning_as_scheme(const QRunConfig& cfg);

// Hoeffding-type certificate: E||delta_n||_sup <= |S||A| * span / (2 sqrt(s_n)),
// where span bounds max V - min V of the value vector along the run.
double minibatch_noise_bound(const Mdp& mdp, double value_span, Index batch);

// Desk MDPs.
// Two states, one action, deterministic cycle with rewards 0 and 2 (gain 1).
Mdp two_state_cycle();
// The cycle plus a noisy "stay" action with reward 0.3; the cycle stays optimal.
Mdp two_state_cycle_choice();
// One state, two actions with rewards r0 and r1 (defaults: gain 3, policy {1}).
Mdp single_state_two_rewards(double r0 = 1.0, double r1 = 3.0);
// All transition probabilities >= floor / |S| (hence unichain and aperiodic),
// rewards uniform in [0, 1].
Mdp random_unichain(std::size_t states, std::size_t actions, std::uint64_t seed, double floor = 0.2);

}  // namespace hlab
