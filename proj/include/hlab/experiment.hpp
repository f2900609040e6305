#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hlab/catalog.hpp"
#include "hlab/harness.hpp"
#include "hlab/qlearning.hpp"
#include "hlab/scheme.hpp"

namespace hlab {

inline constexpr const char* kToolVersion = "0.1.0";

struct McSection {
  Index horizon = 200;
  std::uint64_t paths = 1000;
  std::uint64_t seed = 0;
  std::vector<double> eps_grid = {0.2, 0.5, 1.0};
  std::vector<double> lambda_grid = {0.2, 0.5};
  std::vector<Quantity> quantities;  // empty: all
  unsigned threads = 0;
};

struct RatesSection {
  ConstantsOptions constants;
  CatalogOptions catalog;
};

enum class CheckKind { Catalog, FastBound, MeanRate, AsRate, ZeroRate };

struct VerifyCheck {
  CheckKind kind = CheckKind::Catalog;
  std::optional<FastCase> fast_case;
  std::string theorem;                // MeanRate / AsRate: catalog theorem group
  std::optional<Quantity> quantity;   // MeanRate / AsRate / ZeroRate
  bool as_mode = false;               // ZeroRate: check as an a.s. rate
  double L_scale = 1.0;               // FastBound: multiplies L
  bool tail = true;
  std::optional<std::vector<Index>> tail_n;
};

struct QlearnSection {
  std::shared_ptr<const Mdp> mdp;
  FSpec f = PinnedEntry{};
  Schedule alpha = Schedule::halpern_two();
  Schedule beta = Schedule::constant(0.5);
  double batch_divisor = 100.0;
  Index steps = 500;
  std::uint64_t seeds = 1;
  double residual_threshold = 0.05;
  std::optional<bool> cross_check;  // default: on for deterministic MDPs
  Index cross_steps = 100;
};

struct OutputSection {
  std::string dir = "out";
  bool csv = true;
  bool json = true;
};

struct ExperimentConfig {
  std::string canonical;  // canonical JSON of the effective configuration
  std::string digest;     // FNV-1a 64 of `canonical`, 16 hex digits
  std::optional<SchemeConfig> scheme;
  McSection mc;
  RatesSection rates;
  std::vector<VerifyCheck> verify = {VerifyCheck{}};
  std::optional<QlearnSection> qlearn;
  OutputSection output;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> paths;
  std::optional<Index> horizon;
  std::optional<unsigned> threads;
  std::optional<std::string> out_dir;
};

// Throws ConfigError naming the offending field (dotted path).
ExperimentConfig parse_config(const std::string& json_text, const Overrides& ov = {});
ExperimentConfig load_config(const std::string& path, const Overrides& ov = {});

std::string fnv1a_hex(const std::string& bytes);
// "# halpern-lab <version> config=<digest> seed=<n>"
std::string provenance_line(const ExperimentConfig& cfg);

struct CommandResult {
  std::uint64_t pass = 0, fail = 0, inconclusive = 0, skipped = 0;
  std::vector<std::string> files;
  std::vector<std::string> warnings;
  std::string summary_json;
};

// Each command writes its files atomically under cfg.output.dir.
CommandResult cmd_simulate(const ExperimentConfig& cfg);
CommandResult cmd_rates(const ExperimentConfig& cfg);
CommandResult cmd_verify(const ExperimentConfig& cfg);
CommandResult cmd_qlearn(const ExperimentConfig& cfg);

// Write `content` to `path` through a temporary file and a rename.
void write_atomic(const std::string& path, const std::string& content);

}  // namespace hlab
