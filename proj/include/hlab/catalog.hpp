#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hlab/harness.hpp"
#include "hlab/rates.hpp"
#include "hlab/scheme.hpp"

namespace hlab {

enum class ConstantsSource { DeclaredFixedPoint, User, Empirical };
std::string_view to_string(ConstantsSource s);
std::optional<ConstantsSource> parse_constants_source(std::string_view name);

struct ConstantsOptions {
  ConstantsSource source = ConstantsSource::DeclaredFixedPoint;
  std::optional<double> K0;  // User
  bool user_dominated = false;  // User asserts a dominating Y with E[Y] <= K0
  std::uint64_t pilot_paths = 200;
  Index pilot_horizon = 200;
  std::uint64_t pilot_seed = 0;
};

struct SchemeConstants {
  ConstantsSource source = ConstantsSource::DeclaredFixedPoint;
  double K0 = 0.0;
  // A dominating Y is known (fixed-point route or user assertion).
  bool dominated = false;
  std::optional<FixedPointConstants> fixed_point;
};

// Empirical: max over n of the Monte Carlo means of ||Tx_n - u||, ||Uy_n - y_n||,
// ||Uu - u|| and ||Uy_n - u|| on a pilot ensemble. Never dominated.
SchemeConstants scheme_constants(const SchemeConfig& cfg, const ConstantsOptions& opt);

struct NamedMeanRate {
  std::string theorem;
  Quantity quantity;
  MeanRate rate;
};
struct NamedAsRate {
  std::string theorem;
  Quantity quantity;
  AsRate rate;
};
struct NamedFastBound {
  FastCase fast_case;
  FastBound bound;
  bool tail_valid = true;  // the tail bound needs a dominating Y except for dx
};
struct SkippedRate {
  std::string theorem;
  std::string reason;
};

struct CatalogOptions {
  // Theorem groups: x_ar y_ar relative relative_as kmt geometry inner_product fast noise.
  // Empty selects all of them.
  std::vector<std::string> theorems;
  std::optional<double> Lambda;  // default: certified band of beta
  std::optional<double> B;       // default: 1 / (1 - beta)
  bool geometry_optimized = false;
};

struct RateCatalog {
  SchemeConstants constants;
  std::vector<NamedMeanRate> mean;
  std::vector<NamedAsRate> as;
  std::vector<NamedFastBound> fast;
  std::vector<SkippedRate> skipped;
};

// Every rate whose hypotheses the scheme certifies; the others are listed in
// `skipped` with the reason.
RateCatalog build_rate_catalog(const SchemeConfig& cfg, const SchemeConstants& constants,
                               const CatalogOptions& opt = {});

inline const std::vector<std::string>& theorem_groups() {
  static const std::vector<std::string> g = {"x_ar", "y_ar", "relative", "relative_as", "kmt",
                                             "geometry", "inner_product", "fast", "noise"};
  return g;
}

}  // namespace hlab
