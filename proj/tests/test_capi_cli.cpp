#include <sys/wait.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "hlab/hlab.h"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell, merging stderr into the captured output.
Run cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " '" + std::string(HLAB_CLI_PATH) + "' " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string cfg(const std::string& name) { return "--config '" + std::string(HLAB_CONFIG_DIR) + "/" + name + "'"; }

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("hlab_cli_" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_tmp(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

const char* kSmall = R"({
  "scheme": {"norm": "euclidean", "x0": [1, 0], "T": {"type": "rotation", "angle": 1.0},
             "alpha": {"type": "halpern_two"}, "xi": {"type": "gaussian_decay", "k1": 0.5},
             "fixed_point": [0, 0]},
  "mc": {"horizon": 60, "paths": 80, "seed": 2, "eps_grid": [0.5, 1.0], "lambda_grid": [0.5]},
  "rates": {"theorems": ["fast", "x_ar"]}
})";

}  // namespace

TEST_CASE("C API: status codes and error fields") {
  CHECK(std::strcmp(hlab_version(), "0.1.0") == 0);
  hlab_experiment* e = nullptr;
  CHECK(hlab_experiment_from_json(R"({"scheme": {"norm": "taxicab", "x0": [1]}})", &e) == HLAB_ERR_CONFIG);
  CHECK(e == nullptr);
  CHECK(std::string(hlab_last_error_field()) == "scheme.norm");
  CHECK(std::string(hlab_last_error()).find("norm") != std::string::npos);
  CHECK(hlab_experiment_from_json(nullptr, &e) == HLAB_ERR_INVALID_ARGUMENT);
  CHECK(hlab_experiment_load("/nonexistent/x.json", &e) == HLAB_ERR_IO);

  REQUIRE(hlab_experiment_from_json(kSmall, &e) == HLAB_OK);
  const char* d0 = nullptr;
  REQUIRE(hlab_experiment_digest(e, &d0) == HLAB_OK);
  const std::string digest = d0;
  CHECK(digest.size() == 16);
  CHECK(hlab_experiment_set_paths(e, 1) == HLAB_ERR_CONFIG);
  CHECK(std::string(hlab_last_error_field()) == "mc.paths");
  const char* d1 = nullptr;
  hlab_experiment_digest(e, &d1);
  CHECK(digest == d1);  // the rejected override was rolled back
  CHECK(hlab_experiment_set_seed(e, 9) == HLAB_OK);
  hlab_experiment_digest(e, &d1);
  CHECK(digest != d1);
  CHECK(hlab_experiment_set_threads(e, 2) == HLAB_OK);
  const fs::path dir = scratch("capi");
  CHECK(hlab_experiment_set_out_dir(e, dir.c_str()) == HLAB_OK);

  hlab_result* r = nullptr;
  CHECK(hlab_run(e, "dance", &r) == HLAB_ERR_INVALID_ARGUMENT);
  CHECK(hlab_run(nullptr, "verify", &r) == HLAB_ERR_INVALID_ARGUMENT);
  REQUIRE(hlab_run(e, "verify", &r) == HLAB_OK);
  hlab_counts c{};
  REQUIRE(hlab_result_counts(r, &c) == HLAB_OK);
  CHECK(c.fail == 0);
  CHECK(c.pass > 0);
  CHECK(hlab_result_num_files(r) == 2);
  for (std::uint64_t i = 0; i < hlab_result_num_files(r); ++i) CHECK(fs::exists(hlab_result_file(r, i)));
  CHECK(hlab_result_file(r, 99) == nullptr);
  CHECK(std::string(hlab_result_summary_json(r)).find("\"overall\"") != std::string::npos);
  hlab_result_free(r);
  CHECK(hlab_result_counts(nullptr, &c) == HLAB_ERR_INVALID_ARGUMENT);

  REQUIRE(hlab_run(e, "simulate", &r) == HLAB_OK);
  CHECK(hlab_result_num_files(r) == 4);
  hlab_result_free(r);
  hlab_experiment_free(e);
  hlab_experiment_free(nullptr);
  hlab_result_free(nullptr);
}

TEST_CASE("C API: runtime errors map to codes") {
  hlab_experiment* e = nullptr;
  // Every path overflows, so the ensemble fails with a numeric error.
  const char* bad = R"({
    "scheme": {"x0": [1.7e308], "anchor": [1.7e308], "alpha": {"type": "constant", "c": 0},
               "xi": {"type": "bounded", "table": [1e308, 1e308, 1e308], "direction": "along_state"}},
    "mc": {"horizon": 5, "paths": 4}
  })";
  REQUIRE(hlab_experiment_from_json(bad, &e) == HLAB_OK);
  hlab_experiment_set_out_dir(e, scratch("capi_bad").c_str());
  hlab_result* r = nullptr;
  CHECK(hlab_run(e, "simulate", &r) == HLAB_ERR_NUMERIC);
  CHECK(r == nullptr);
  CHECK(std::strlen(hlab_last_error()) > 0);
  hlab_experiment_free(e);
}

TEST_CASE("CLI: exit codes") {
  const fs::path out = scratch("exit");
  const std::string o = " --out '" + out.string() + "'";
  Run r = cli("simulate " + cfg("identity_smoke.json") + o);
  CHECK(r.code == 0);
  CHECK(r.out.find("wrote") != std::string::npos);

  const fs::path badnorm = write_tmp("hlab_badnorm.json", R"({"scheme": {"norm": "manhattan", "x0": [1]}})");
  r = cli("simulate --config '" + badnorm.string() + "'" + o);
  CHECK(r.code == 2);
  CHECK(r.out.find("norm") != std::string::npos);

  const fs::path zero = write_tmp("hlab_zero.json", R"({"scheme": {"x0": [1]}, "mc": {"paths": 0}})");
  r = cli("verify --config '" + zero.string() + "'" + o);
  CHECK(r.code == 2);
  CHECK(r.out.find("mc.paths") != std::string::npos);

  CHECK(cli("verify").code == 2);
  CHECK(cli("frobnicate " + cfg("identity_smoke.json")).code == 2);
  CHECK(cli("simulate " + cfg("identity_smoke.json") + " --paths 1" + o).code == 2);
  CHECK(cli("simulate --config /nonexistent.json" + o).code != 0);

  const fs::path overflow = write_tmp("hlab_overflow.json", R"({
    "scheme": {"x0": [1.7e308], "anchor": [1.7e308], "alpha": {"type": "constant", "c": 0},
               "xi": {"type": "bounded", "table": [1e308], "direction": "along_state"}},
    "mc": {"horizon": 5, "paths": 4}})");
  CHECK(cli("simulate --config '" + overflow.string() + "'" + o).code == 3);

  r = cli("verify " + cfg("negative_zero_rate.json") + " --paths 300 --horizon 60" + o);
  CHECK(r.code == 1);
  CHECK(r.out.find("FAIL=") != std::string::npos);
  r = cli("verify " + cfg("negative_scaled_L.json") + " --paths 300 --horizon 60" + o);
  CHECK(r.code == 1);

  r = cli("verify " + cfg("rotation_halpern.json") + " --paths 300 --horizon 100" + o);
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL=0") != std::string::npos);
  r = cli("rates " + cfg("sup_norm_rates.json") + o);
  CHECK(r.code == 0);
  r = cli("qlearn " + cfg("qlearn_cycle_crosscheck.json") + o);
  CHECK(r.code == 0);
}

TEST_CASE("CLI: determinism, seed override and the threads variable") {
  const fs::path cfgfile = write_tmp("hlab_small.json", kSmall);
  const std::string c = "--config '" + cfgfile.string() + "'";
  const fs::path a = scratch("det_a"), b = scratch("det_b"), s = scratch("det_s");
  REQUIRE(cli("simulate " + c + " --threads 1 --out '" + a.string() + "'").code == 0);
  REQUIRE(cli("simulate " + c + " --out '" + b.string() + "'", "HALPERN_LAB_THREADS=3").code == 0);
  REQUIRE(cli("simulate " + c + " --seed 77 --out '" + s.string() + "'").code == 0);
  for (const char* f : {"ensemble.csv", "tails.csv", "trajectory.csv", "simulate.json"}) {
    INFO(f);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(slurp(a / "ensemble.csv") != slurp(s / "ensemble.csv"));
  CHECK(slurp(s / "ensemble.csv").find("seed=77") != std::string::npos);
  const Run w = cli("simulate " + c + " --out '" + b.string() + "'", "HALPERN_LAB_THREADS=lots");
  CHECK(w.code == 0);
  CHECK(w.out.find("HALPERN_LAB_THREADS") != std::string::npos);
}
