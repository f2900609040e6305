#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hlab/rates.hpp"
#include "hlab/scheme.hpp"

namespace hlab {

struct McPlan {
  SchemeConfig config;
  Index horizon = 200;
  std::uint64_t num_paths = 1000;
  std::uint64_t master_seed = 0;
  std::vector<Quantity> quantities;  // empty: all of them
  std::vector<double> eps_grid;      // tails are tabulated for these
  std::vector<double> lambda_grid;
  unsigned threads = 0;  // 0: hardware concurrency
  std::string config_digest;
};

// Throws DomainError for M < 2, H < 1, or unsorted / non-positive grids.
void validate(const McPlan& plan);

struct QuantityStats {
  Quantity quantity = Quantity::dx;
  std::vector<double> mean;  // per n
  std::vector<double> se;    // sample stdev / sqrt(M)
  // tail[e][n]: fraction of valid paths with max_{i in [n, H)} X_i >= eps_grid[e].
  std::vector<std::vector<double>> tail;
};

struct McReport {
  SchemeConfig config;
  Index horizon = 0;
  std::uint64_t num_paths = 0;
  std::uint64_t valid_paths = 0;
  std::uint64_t master_seed = 0;
  std::string config_digest;
  std::vector<double> eps_grid, lambda_grid;
  std::vector<QuantityStats> stats;
  std::vector<std::string> invalid_notes;  // first few path failures

  // Throws DomainError when q was not recorded.
  const QuantityStats& at(Quantity q) const;
  // Tail frequency for an eps on the grid; throws DomainError otherwise.
  double tail_frequency(Quantity q, double eps, Index n) const;
  static const char* truncation_note() {
    return "tail events are measured on [n, H), not [n, inf); frequencies under-estimate the"
           " infinite-horizon probabilities";
  }
};

// Deterministic in master_seed regardless of thread count; path i uses seed
// master ^ i. Failed paths are dropped; more than 1% failures throws NumericError.
McReport run_ensemble(const McPlan& plan);

enum class Verdict { Pass, Fail, Inconclusive, Skipped };
std::string_view to_string(Verdict v);

struct VerdictRow {
  std::string check;  // mean_rate | as_rate | fast_mean | fast_tail
  std::string origin;
  Quantity quantity = Quantity::dx;
  std::optional<double> eps, lambda;
  Index index = 0;        // rate value, or n for fast bounds
  double estimate = 0.0;  // mean or tail frequency at the decisive n
  double se = 0.0;
  double bound = 0.0;
  Verdict verdict = Verdict::Skipped;
  std::string note;
};

// Fail if any row fails, else Inconclusive if any, else Pass if any, else Skipped.
Verdict overall(const std::vector<VerdictRow>& rows);

// Per eps: Skipped if rate(eps) >= H; Pass if mean + 3 SE < eps for every n >= rate(eps);
// Fail if mean - 3 SE >= eps for some such n; Inconclusive otherwise.
std::vector<VerdictRow> verify_mean_rate(const McReport& report, const MeanRate& rate, Quantity q);

// Per (lambda, eps): Skipped if rate > H - margin; f = tail frequency at the
// rate, SE binomial; Pass iff f + 3 SE < lambda, Fail iff f - 3 SE >= lambda.
std::vector<VerdictRow> verify_as_rate(const McReport& report, const AsRate& rate, Quantity q,
                                       Index margin = 1);

// Quantity for each case: dx, dy, rTx, rUx.
Quantity fast_case_quantity(FastCase c);

// Mean rows for every n >= first_index: Pass iff mean - 3 SE <= 2L/(n+2), else Fail.
// Tail rows for every eps on the grid and n in tail_ns (default: all n >= first_index):
// Pass iff f - 3 SE <= 4L/(eps (n+2)). Throws DomainError when the case does not
// match the run (e.g. a KM-Tikhonov bound on a run with U = Id).
std::vector<VerdictRow> verify_fast_bound(const McReport& report, const FastBound& fb, FastCase c,
                                          bool tail = true,
                                          std::optional<std::vector<Index>> tail_ns = std::nullopt);

}  // namespace hlab
