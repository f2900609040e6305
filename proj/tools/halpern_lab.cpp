#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hlab/hlab.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int report_error(hlab_status s) {
  std::fprintf(stderr, "halpern-lab: error: %s\n", hlab_last_error());
  return s == HLAB_ERR_CONFIG ? kExitConfig : kExitRuntime;
}

std::optional<unsigned> env_threads() {
  const char* v = std::getenv("HALPERN_LAB_THREADS");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (*end != '\0') {
    std::fprintf(stderr, "halpern-lab: warning: ignoring HALPERN_LAB_THREADS='%s'\n", v);
    return std::nullopt;
  }
  return static_cast<unsigned>(n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate stochastic Halpern-Mann iterations and check rate bounds"};
  app.set_version_flag("--version", std::string(hlab_version()));
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed, paths, horizon;
  std::optional<unsigned> threads;

  for (const char* name : {"simulate", "rates", "verify", "qlearn"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "experiment config (JSON)")->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--paths", paths, "number of Monte Carlo paths");
    sub->add_option("--horizon", horizon, "iterations per path");
    sub->add_option("--threads", threads, "worker threads (0 = all cores)");
  }
  app.get_subcommand("simulate")->description("run the ensemble and write trajectories");
  app.get_subcommand("rates")->description("tabulate rates and fast bounds");
  app.get_subcommand("verify")->description("check rates and bounds against the ensemble");
  app.get_subcommand("qlearn")->description("run Q-learning and compare with the RVI oracle");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  if (!threads) threads = env_threads();

  hlab_experiment* exp = nullptr;
  hlab_status s = hlab_experiment_load(config.c_str(), &exp);
  if (s != HLAB_OK) return report_error(s);
  if (s == HLAB_OK && seed) s = hlab_experiment_set_seed(exp, *seed);
  if (s == HLAB_OK && paths) s = hlab_experiment_set_paths(exp, *paths);
  if (s == HLAB_OK && horizon) s = hlab_experiment_set_horizon(exp, *horizon);
  if (s == HLAB_OK && threads) s = hlab_experiment_set_threads(exp, *threads);
  if (s == HLAB_OK && out) s = hlab_experiment_set_out_dir(exp, out->c_str());
  if (s != HLAB_OK) {
    hlab_experiment_free(exp);
    return report_error(s);
  }

  hlab_result* res = nullptr;
  s = hlab_run(exp, command.c_str(), &res);
  hlab_experiment_free(exp);
  if (s != HLAB_OK) return report_error(s);

  hlab_counts c{};
  hlab_result_counts(res, &c);
  for (std::uint64_t i = 0; i < hlab_result_num_files(res); ++i) std::printf("wrote %s\n", hlab_result_file(res, i));
  if (command == "verify" || command == "rates") {
    std::printf("%s: PASS=%llu FAIL=%llu INCONCLUSIVE=%llu SKIPPED=%llu\n", command.c_str(),
                static_cast<unsigned long long>(c.pass), static_cast<unsigned long long>(c.fail),
                static_cast<unsigned long long>(c.inconclusive), static_cast<unsigned long long>(c.skipped));
  }
  for (std::uint64_t i = 0; i < hlab_result_num_warnings(res); ++i) {
    std::fprintf(stderr, "halpern-lab: warning: %s\n", hlab_result_warning(res, i));
  }
  const int rc = c.fail > 0 ? kExitFail : kExitOk;
  hlab_result_free(res);
  return rc;
}
