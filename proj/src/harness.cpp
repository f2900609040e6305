#include "hlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>

#include "hlab/error.hpp"

namespace hlab {

namespace {

constexpr std::uint64_t kChunk = 64;
constexpr std::size_t kMaxNotes = 8;

struct Neumaier {
  double s = 0.0, c = 0.0;
  void add(double x) {
    const double t = s + x;
    if (std::abs(s) >= std::abs(x)) c += (s - t) + x;
    else c += (x - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

// Welford within a chunk, Chan et al. when merging chunks.
struct Moments {
  double count = 0.0, mean = 0.0, m2 = 0.0;
  void add(double x) {
    count += 1.0;
    const double d = x - mean;
    mean += d / count;
    m2 += d * (x - mean);
  }
  void merge(const Moments& o) {
    if (o.count == 0.0) return;
    const double n = count + o.count, d = o.mean - mean;
    mean += d * o.count / n;
    m2 += o.m2 + d * d * count * o.count / n;
    count = n;
  }
};

struct Acc {
  std::vector<Neumaier> sum;             // [q * H + n]
  std::vector<Moments> mom;
  std::vector<std::uint64_t> tail;       // [(q * E + e) * H + n]
  std::uint64_t valid = 0;
  std::vector<std::string> notes;
  std::uint64_t failures = 0;
  std::optional<Index> first_fail_step;
};

std::vector<Quantity> plan_quantities(const McPlan& plan) {
  if (!plan.quantities.empty()) return plan.quantities;
  std::vector<Quantity> all;
  for (std::size_t i = 0; i < kNumQuantities; ++i) all.push_back(static_cast<Quantity>(i));
  return all;
}

void check_grid(const std::vector<double>& g, const char* name) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] > 0.0) || !std::isfinite(g[i])) {
      throw DomainError(std::string("McPlan: ") + name + " entries must be positive");
    }
    if (i && !(g[i - 1] < g[i])) {
      throw DomainError(std::string("McPlan: ") + name + " must be sorted ascending");
    }
  }
}

double binomial_se(double f, std::uint64_t m) {
  return std::sqrt(std::max(0.0, f * (1.0 - f)) / static_cast<double>(m));
}

}  // namespace

void validate(const McPlan& plan) {
  if (plan.num_paths < 2) throw DomainError("McPlan: num_paths must be >= 2");
  if (plan.horizon < 1) throw DomainError("McPlan: horizon must be >= 1");
  check_grid(plan.eps_grid, "eps_grid");
  check_grid(plan.lambda_grid, "lambda_grid");
  validate(plan.config);
}

const QuantityStats& McReport::at(Quantity q) const {
  for (const auto& s : stats) {
    if (s.quantity == q) return s;
  }
  throw DomainError("quantity '" + std::string(to_string(q)) + "' was not recorded");
}

double McReport::tail_frequency(Quantity q, double eps, Index n) const {
  const auto it = std::find(eps_grid.begin(), eps_grid.end(), eps);
  if (it == eps_grid.end()) throw DomainError("eps " + std::to_string(eps) + " is not on the grid");
  if (n >= horizon) throw DomainError("tail index beyond the horizon");
  return at(q).tail[static_cast<std::size_t>(it - eps_grid.begin())][n];
}

McReport run_ensemble(const McPlan& plan) {
  validate(plan);
  const std::vector<Quantity> qs = plan_quantities(plan);
  const std::size_t nq = qs.size(), H = plan.horizon, E = plan.eps_grid.size();
  const std::uint64_t M = plan.num_paths;
  const std::uint64_t chunks = (M + kChunk - 1) / kChunk;

  auto run_chunk = [&](std::uint64_t c) {
    Acc a;
    a.sum.resize(nq * H);
    a.mom.resize(nq * H);
    a.tail.assign(nq * E * H, 0);
    std::vector<double> smax(H);
    const std::uint64_t lo = c * kChunk, hi = std::min(M, lo + kChunk);
    for (std::uint64_t i = lo; i < hi; ++i) {
      Trajectory t;
      try {
        t = run_path(plan.config, plan.horizon, path_seed(plan.master_seed, i));
      } catch (const NumericError& e) {
        ++a.failures;
        if (!a.first_fail_step) a.first_fail_step = e.step();
        if (a.notes.size() < kMaxNotes) a.notes.push_back("path " + std::to_string(i) + ": " + e.what());
        continue;
      }
      ++a.valid;
      for (std::size_t k = 0; k < nq; ++k) {
        double run = -std::numeric_limits<double>::infinity();
        for (std::size_t n = H; n-- > 0;) {
          const double v = get(t.records[n], qs[k]);
          a.sum[k * H + n].add(v);
          a.mom[k * H + n].add(v);
          run = std::max(run, v);
          smax[n] = run;
        }
        for (std::size_t e = 0; e < E; ++e) {
          const double eps = plan.eps_grid[e];
          std::uint64_t* row = &a.tail[(k * E + e) * H];
          for (std::size_t n = 0; n < H && smax[n] >= eps; ++n) ++row[n];
        }
      }
    }
    return a;
  };

  Acc total;
  total.sum.resize(nq * H);
  total.mom.resize(nq * H);
  total.tail.assign(nq * E * H, 0);
  auto merge = [&](const Acc& a) {
    for (std::size_t j = 0; j < nq * H; ++j) {
      total.sum[j].add(a.sum[j].value());
      total.mom[j].merge(a.mom[j]);
    }
    for (std::size_t j = 0; j < a.tail.size(); ++j) total.tail[j] += a.tail[j];
    total.valid += a.valid;
    total.failures += a.failures;
    if (!total.first_fail_step) total.first_fail_step = a.first_fail_step;
    for (const auto& s : a.notes) {
      if (total.notes.size() < kMaxNotes) total.notes.push_back(s);
    }
  };

  unsigned threads = plan.threads ? plan.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, chunks));
  if (threads <= 1) {
    for (std::uint64_t c = 0; c < chunks; ++c) merge(run_chunk(c));
  } else {
    // Chunks are merged strictly in index order so sums do not depend on scheduling.
    std::atomic<std::uint64_t> next{0};
    std::mutex mu;
    std::map<std::uint64_t, Acc> pending;
    std::uint64_t merged = 0;
    std::exception_ptr err;
    auto worker = [&] {
      for (;;) {
        const std::uint64_t c = next.fetch_add(1);
        if (c >= chunks) return;
        try {
          Acc a = run_chunk(c);
          std::lock_guard<std::mutex> lock(mu);
          pending.emplace(c, std::move(a));
          for (auto it = pending.find(merged); it != pending.end(); it = pending.find(merged)) {
            merge(it->second);
            pending.erase(it);
            ++merged;
          }
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!err) err = std::current_exception();
          next = chunks;
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
  }

  if (total.failures * 100 > M) {
    throw NumericError("ensemble aborted: " + std::to_string(total.failures) + " of " +
                           std::to_string(M) + " paths failed (limit 1%)",
                       total.first_fail_step.value_or(0));
  }

  McReport r;
  r.config = plan.config;
  r.horizon = plan.horizon;
  r.num_paths = M;
  r.valid_paths = total.valid;
  r.master_seed = plan.master_seed;
  r.config_digest = plan.config_digest;
  r.eps_grid = plan.eps_grid;
  r.lambda_grid = plan.lambda_grid;
  r.invalid_notes = total.notes;
  const double m = static_cast<double>(total.valid);
  for (std::size_t k = 0; k < nq; ++k) {
    QuantityStats s;
    s.quantity = qs[k];
    s.mean.resize(H);
    s.se.resize(H);
    for (std::size_t n = 0; n < H; ++n) {
      const double sum = total.sum[k * H + n].value();
      const double mean = sum / m;
      const double var = std::max(0.0, total.mom[k * H + n].m2 / (m - 1.0));
      s.mean[n] = mean;
      s.se[n] = std::sqrt(var / m);
    }
    s.tail.assign(E, std::vector<double>(H));
    for (std::size_t e = 0; e < E; ++e) {
      for (std::size_t n = 0; n < H; ++n) {
        s.tail[e][n] = static_cast<double>(total.tail[(k * E + e) * H + n]) / m;
      }
    }
    r.stats.push_back(std::move(s));
  }
  return r;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::Inconclusive: return "INCONCLUSIVE";
    case Verdict::Skipped: return "SKIPPED";
  }
  return "?";
}

Verdict overall(const std::vector<VerdictRow>& rows) {
  bool any_inc = false, any_pass = false;
  for (const auto& r : rows) {
    if (r.verdict == Verdict::Fail) return Verdict::Fail;
    any_inc |= r.verdict == Verdict::Inconclusive;
    any_pass |= r.verdict == Verdict::Pass;
  }
  if (any_inc) return Verdict::Inconclusive;
  return any_pass ? Verdict::Pass : Verdict::Skipped;
}

std::vector<VerdictRow> verify_mean_rate(const McReport& report, const MeanRate& rate, Quantity q) {
  const QuantityStats& s = report.at(q);
  std::vector<VerdictRow> rows;
  for (double eps : report.eps_grid) {
    VerdictRow row;
    row.check = "mean_rate";
    row.origin = rate.origin();
    row.quantity = q;
    row.eps = eps;
    row.bound = eps;
    row.index = rate(eps);
    if (row.index >= report.horizon) {
      row.verdict = Verdict::Skipped;
      row.note = "rate beyond horizon";
      rows.push_back(row);
      continue;
    }
    std::optional<Index> fail_n;
    Index worst = row.index;
    for (Index n = row.index; n < report.horizon; ++n) {
      if (s.mean[n] - 3.0 * s.se[n] >= eps) {
        fail_n = n;
        break;
      }
      if (s.mean[n] + 3.0 * s.se[n] > s.mean[worst] + 3.0 * s.se[worst]) worst = n;
    }
    const Index n = fail_n.value_or(worst);
    row.estimate = s.mean[n];
    row.se = s.se[n];
    if (fail_n) {
      row.verdict = Verdict::Fail;
      row.note = "violated at n=" + std::to_string(n);
    } else if (s.mean[n] + 3.0 * s.se[n] < eps) {
      row.verdict = Verdict::Pass;
    } else {
      row.verdict = Verdict::Inconclusive;
      row.note = "within 3 SE of eps at n=" + std::to_string(n);
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<VerdictRow> verify_as_rate(const McReport& report, const AsRate& rate, Quantity q,
                                       Index margin) {
  const QuantityStats& s = report.at(q);
  std::vector<VerdictRow> rows;
  for (double lambda : report.lambda_grid) {
    for (std::size_t e = 0; e < report.eps_grid.size(); ++e) {
      VerdictRow row;
      row.check = "as_rate";
      row.origin = rate.origin();
      row.quantity = q;
      row.eps = report.eps_grid[e];
      row.lambda = lambda;
      row.bound = lambda;
      row.index = rate(lambda, report.eps_grid[e]);
      if (report.horizon < margin || row.index > report.horizon - margin) {
        row.verdict = Verdict::Skipped;
        row.note = "rate beyond horizon";
        rows.push_back(row);
        continue;
      }
      const Index n = std::min<Index>(row.index, report.horizon - 1);
      const double f = s.tail[e][n];
      const double se = binomial_se(f, report.valid_paths);
      row.estimate = f;
      row.se = se;
      if (f + 3.0 * se < lambda) row.verdict = Verdict::Pass;
      else if (f - 3.0 * se >= lambda) row.verdict = Verdict::Fail;
      else row.verdict = Verdict::Inconclusive;
      rows.push_back(row);
    }
  }
  return rows;
}

Quantity fast_case_quantity(FastCase c) {
  switch (c) {
    case FastCase::dx: return Quantity::dx;
    case FastCase::dy: return Quantity::dy;
    case FastCase::halpern_residual: return Quantity::rTx;
    case FastCase::kmt_residual: return Quantity::rUx;
  }
  return Quantity::dx;
}

std::vector<VerdictRow> verify_fast_bound(const McReport& report, const FastBound& fb, FastCase c,
                                          bool tail, std::optional<std::vector<Index>> tail_ns) {
  const SchemeConfig& cfg = report.config;
  if (c == FastCase::halpern_residual && (!cfg.U.is_identity() || !cfg.delta.is_zero())) {
    throw DomainError("halpern_residual bound checked on a run with U != Id or delta != 0");
  }
  if (c == FastCase::kmt_residual && (!cfg.T.is_identity() || !cfg.xi.is_zero() || cfg.U.is_identity())) {
    throw DomainError("kmt_residual bound checked on a run that is not a KM-Tikhonov scheme");
  }
  const Quantity q = fast_case_quantity(c);
  const QuantityStats& s = report.at(q);
  std::vector<VerdictRow> rows;
  for (Index n = fb.first_index; n < report.horizon; ++n) {
    VerdictRow row;
    row.check = "fast_mean";
    row.origin = fb.origin;
    row.quantity = q;
    row.index = n;
    row.estimate = s.mean[n];
    row.se = s.se[n];
    row.bound = fb.mean_bound(n);
    row.verdict = s.mean[n] - 3.0 * s.se[n] <= row.bound ? Verdict::Pass : Verdict::Fail;
    rows.push_back(row);
  }
  if (!tail) return rows;
  std::vector<Index> ns;
  if (tail_ns) ns = *tail_ns;
  else for (Index n = fb.first_index; n < report.horizon; ++n) ns.push_back(n);
  for (std::size_t e = 0; e < report.eps_grid.size(); ++e) {
    for (Index n : ns) {
      if (n >= report.horizon || n < fb.first_index) {
        throw DomainError("fast tail check at n=" + std::to_string(n) + " outside [first_index, H)");
      }
      VerdictRow row;
      row.check = "fast_tail";
      row.origin = fb.origin;
      row.quantity = q;
      row.eps = report.eps_grid[e];
      row.index = n;
      row.estimate = s.tail[e][n];
      row.se = binomial_se(row.estimate, report.valid_paths);
      row.bound = fb.tail_bound(report.eps_grid[e], n);
      row.verdict = row.estimate - 3.0 * row.se <= row.bound ? Verdict::Pass : Verdict::Fail;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace hlab
