#include "hlab/qlearning.hpp"

#include <algorithm>
#include <cmath>

#include "hlab/error.hpp"

namespace hlab {

namespace {

Point tikhonov_scaled(const Point& q, double g) {
  // Same expression as the scheme engine's y_n with T = Id, xi = 0, u = 0.
  const double a = 1.0 - g;
  Point y(q.dim());
  for (std::size_t i = 0; i < q.dim(); ++i) y[i] = (1.0 - a) * (q[i] + 0.0) + a * 0.0;
  return y;
}

Point combine(const Point& uy, const Point& y, double b) {
  Point out(y.dim());
  for (std::size_t i = 0; i < y.dim(); ++i) out[i] = (1.0 - b) * (uy[i] + 0.0) + b * y[i];
  return out;
}

void check_q(const Mdp& mdp, const Point& q) {
  if (q.dim() != mdp.table_size()) throw DimensionError("Q-table size does not match the MDP");
}

}  // namespace

Index default_batch(Index n, double divisor) {
  if (!(divisor > 0.0)) throw DomainError("batch divisor must be > 0");
  const double m = static_cast<double>(n) + 2.0;
  return std::max<Index>(1, ceil_index(m * m * m * m / divisor));
}

std::vector<std::uint64_t> multinomial(std::span<const double> probs, std::uint64_t trials, Rng& rng) {
  std::vector<std::uint64_t> counts(probs.size(), 0);
  if (probs.empty()) throw DomainError("multinomial: empty support");
  std::uint64_t left = trials;
  double mass = 1.0;
  for (std::size_t t = 0; t + 1 < probs.size() && left > 0; ++t) {
    const double p = mass > 0.0 ? std::clamp(probs[t] / mass, 0.0, 1.0) : 1.0;
    std::uint64_t k = 0;
    if (p >= 1.0) k = left;
    else if (p > 0.0) k = std::binomial_distribution<std::uint64_t>(left, p)(rng);
    counts[t] = k;
    left -= k;
    mass -= probs[t];
  }
  counts.back() += left;
  return counts;
}

Point q_tikhonov_step(const Mdp& mdp, const FSpec& f, const Point& q, Index n, const Schedule& beta,
                      const Schedule& alpha, Index batch, Rng& rng) {
  check_q(mdp, q);
  if (batch < 1) throw DomainError("q_tikhonov_step: batch must be >= 1");
  const Point y = tikhonov_scaled(q, 1.0 - alpha(n));
  const auto v = state_values(mdp, y);
  const double offset = evaluate_f(mdp, f, y);
  const double s = static_cast<double>(batch);
  Point uy(y.dim());
  std::vector<double> w(mdp.num_states());
  for (std::size_t st = 0; st < mdp.num_states(); ++st) {
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      const auto counts = multinomial(mdp.row(st, a), batch, rng);
      for (std::size_t t = 0; t < w.size(); ++t) w[t] = static_cast<double>(counts[t]) / s;
      uy[mdp.index(st, a)] = mdp.reward(st, a) + weighted_backup(w, v) - offset;
    }
  }
  return combine(uy, y, beta(n));
}

Point q_tikhonov_expected(const Mdp& mdp, const FSpec& f, const Point& q, Index n,
                          const Schedule& beta, const Schedule& alpha) {
  check_q(mdp, q);
  const Point y = tikhonov_scaled(q, 1.0 - alpha(n));
  return combine(bellman_rvi(mdp, f, y), y, beta(n));
}

std::vector<std::size_t> greedy_policy(const Mdp& mdp, const Point& q, double tol) {
  check_q(mdp, q);
  std::vector<std::size_t> pi(mdp.num_states(), 0);
  for (std::size_t s = 0; s < mdp.num_states(); ++s) {
    double best = q[mdp.index(s, 0)];
    for (std::size_t a = 1; a < mdp.num_actions(); ++a) best = std::max(best, q[mdp.index(s, a)]);
    for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
      if (q[mdp.index(s, a)] >= best - tol) {
        pi[s] = a;
        break;
      }
    }
  }
  return pi;
}

std::string policy_digest(const std::vector<std::size_t>& policy) {
  std::string out;
  for (std::size_t i = 0; i < policy.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(policy[i]);
  }
  return out;
}

RviSolution rvi_oracle(const Mdp& mdp, const FSpec& f, double tol, Index max_iter) {
  Point q(mdp.table_size(), 0.0);
  for (Index k = 0; k < max_iter; ++k) {
    const Point tq = bellman_rvi(mdp, f, q);
    if (distance(NormKind::Sup, tq, q) < tol) {
      RviSolution sol;
      sol.gain = evaluate_f(mdp, f, tq);
      sol.policy = greedy_policy(mdp, tq, 1e-9);
      sol.q = tq;
      sol.iterations = k;
      return sol;
    }
    for (std::size_t i = 0; i < q.dim(); ++i) q[i] = 0.5 * (q[i] + tq[i]);
  }
  throw NumericError("rvi_oracle did not reach tolerance " + std::to_string(tol), max_iter);
}

QRunResult run_qlearning(const QRunConfig& cfg) {
  if (!cfg.mdp) throw DomainError("run_qlearning: no MDP");
  return run_qlearning(cfg, rvi_oracle(*cfg.mdp, cfg.f));
}

QRunResult run_qlearning(const QRunConfig& cfg, const RviSolution& oracle) {
  if (!cfg.mdp) throw DomainError("run_qlearning: no MDP");
  const Mdp& mdp = *cfg.mdp;
  Point q = cfg.q0 ? *cfg.q0 : Point(mdp.table_size(), 0.0);
  check_q(mdp, q);
  Rng rng(cfg.seed);
  QRunResult res;
  res.oracle = oracle;
  res.records.reserve(cfg.steps + 1);
  for (Index n = 0;; ++n) {
    QRecord r;
    r.n = n;
    r.sup_residual = distance(NormKind::Sup, bellman_rvi(mdp, cfg.f, q), q);
    const auto pi = greedy_policy(mdp, q);
    r.policy = policy_digest(pi);
    r.matches_oracle = pi == oracle.policy;
    res.records.push_back(std::move(r));
    if (n == cfg.steps) break;
    q = cfg.exact ? q_tikhonov_expected(mdp, cfg.f, q, n, cfg.beta, cfg.alpha)
                  : q_tikhonov_step(mdp, cfg.f, q, n, cfg.beta, cfg.alpha,
                                    default_batch(n, cfg.batch_divisor), rng);
    if (!q.all_finite()) throw NumericError("non-finite Q-table", n);
  }
  res.q_final = q;
  return res;
}

SchemeConfig qlearning_as_scheme(const QRunConfig& cfg) {
  if (!cfg.mdp) throw DomainError("qlearning_as_scheme: no MDP");
  Point q0 = cfg.q0 ? *cfg.q0 : Point(cfg.mdp->table_size(), 0.0);
  return make_km_tikhonov(Operator::bellman_rvi(cfg.mdp, cfg.f), cfg.alpha, std::move(q0), cfg.beta,
                          NoiseModel::zero(), NormKind::Sup);
}

double minibatch_noise_bound(const Mdp& mdp, double value_span, Index batch) {
  if (!(value_span >= 0.0)) throw DomainError("minibatch_noise_bound: span must be >= 0");
  if (batch < 1) throw DomainError("minibatch_noise_bound: batch must be >= 1");
  return static_cast<double>(mdp.table_size()) * value_span /
         (2.0 * std::sqrt(static_cast<double>(batch)));
}

Mdp two_state_cycle() { return Mdp(2, 1, {0.0, 2.0}, {0.0, 1.0, 1.0, 0.0}); }

Mdp two_state_cycle_choice() {
  // (s, a) rows: s0 a0 -> s1; s0 a1 stays w.p. 0.7; s1 a0 -> s0; s1 a1 stays w.p. 0.7.
  return Mdp(2, 2, {0.0, 0.3, 2.0, 0.3}, {0.0, 1.0, 0.7, 0.3, 1.0, 0.0, 0.3, 0.7});
}

Mdp single_state_two_rewards(double r0, double r1) { return Mdp(1, 2, {r0, r1}, {1.0, 1.0}); }

Mdp random_unichain(std::size_t states, std::size_t actions, std::uint64_t seed, double floor) {
  if (states == 0 || actions == 0) throw DomainError("random_unichain: empty MDP");
  if (!(floor > 0.0 && floor < 1.0)) throw DomainError("random_unichain: floor must lie in (0, 1)");
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> r(states * actions), p;
  p.reserve(states * actions * states);
  for (auto& x : r) x = unif(rng);
  for (std::size_t k = 0; k < states * actions; ++k) {
    std::vector<double> w(states);
    double tot = 0.0;
    for (auto& x : w) tot += (x = expo(rng));
    double sum = 0.0;
    for (std::size_t t = 0; t + 1 < states; ++t) {
      w[t] = floor / static_cast<double>(states) + (1.0 - floor) * w[t] / tot;
      sum += w[t];
    }
    w.back() = 1.0 - sum;
    p.insert(p.end(), w.begin(), w.end());
  }
  return Mdp(states, actions, std::move(r), std::move(p));
}

}  // namespace hlab
