#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hlab/error.hpp"
#include "hlab/experiment.hpp"
#include "json.hpp"

using namespace hlab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("hlab_experiment_" + name);
  fs::remove_all(d);
  return d;
}

std::string config_file(const std::string& name) { return std::string(HLAB_CONFIG_DIR) + "/" + name; }

std::string field_of(const std::string& text, const Overrides& ov = {}) {
  try {
    parse_config(text, ov);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

const char* kRotation = R"({
  "scheme": {"norm": "euclidean", "x0": [1, 0], "T": {"type": "rotation", "angle": 1.0},
             "alpha": {"type": "halpern_two"}, "xi": {"type": "gaussian_decay", "k1": 0.5},
             "fixed_point": [0, 0]},
  "mc": {"horizon": 200, "paths": 50, "seed": 4}
})";

}  // namespace

TEST_CASE("config errors name the field") {
  CHECK(field_of(R"({"scheme": {"norm": "manhattan", "x0": [1], "T": {"type": "identity"}}})") ==
        "scheme.norm");
  try {
    parse_config(R"({"scheme": {"norm": "manhattan", "x0": [1]}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("norm") != std::string::npos);
  }
  CHECK(field_of(R"({"scheme": {"x0": [1], "colour": 3}})") == "scheme.colour");
  CHECK(field_of(R"({"bogus": 1})") == "bogus");
  CHECK(field_of(R"({"scheme": {"x0": "abc"}})") == "scheme.x0");
  CHECK(field_of(R"({"scheme": {"x0": [1, 0], "T": {"type": "warp"}}})") == "scheme.T.type");
  CHECK(field_of(R"({"scheme": {"x0": [1, 0], "T": {"type": "ball", "center": [0], "radius": 1}}})") ==
        "scheme.T.center");
  CHECK(field_of(R"({"scheme": {"x0": [1, 0], "T": {"type": "rotation", "angle": 1}, "fixed_point": [1, 1]}})") ==
        "scheme.fixed_point");
  CHECK(field_of(R"({"scheme": {"x0": [1, 0]}, "mc": {"paths": 0}})") == "mc.paths");
  CHECK(field_of(R"({"scheme": {"x0": [1, 0]}, "mc": {"paths": 1}})") == "mc.paths");
  CHECK(field_of(R"({"scheme": {"x0": [1, 0]}})", Overrides{std::nullopt, 0}) == "mc.paths");
  CHECK(field_of(R"({"scheme": {"x0": [1, 0]}, "mc": {"horizon": -3}})") == "mc.horizon");
  CHECK(field_of(R"({"scheme": {"x0": [1, 0]}, "rates": {"constants_source": "user"}})") == "rates.K0");
  CHECK(field_of(R"({"scheme": {"x0": [1, 0]}, "rates": {"theorems": ["nope"]}})") == "rates.theorems[0]");
  CHECK(field_of(R"({"scheme": {"x0": [1, 0]}, "verify": {"checks": [{"kind": "fast_bound", "case": "zz"}]}})") ==
        "verify.checks[0].case");
  CHECK(field_of(R"({"qlearn": {"mdp": {"preset": "two_state_cycle_choice"}, "cross_check": true}})") ==
        "qlearn.cross_check");
  CHECK(field_of("{not json") != "<no error>");
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), IoError);
}

TEST_CASE("digest and canonical form") {
  const ExperimentConfig a = parse_config(kRotation);
  CHECK(a.digest.size() == 16);
  CHECK(a.digest == fnv1a_hex(a.canonical));
  const ExperimentConfig b = parse_config(a.canonical);
  CHECK(b.digest == a.digest);
  // Output location and thread count do not change the experiment.
  json j = json::parse(kRotation);
  j["output"] = {{"dir", "/tmp/elsewhere"}};
  j["mc"]["threads"] = 3;
  CHECK(parse_config(j.dump(2)).digest == a.digest);
  CHECK(parse_config(kRotation, Overrides{std::nullopt, std::nullopt, std::nullopt, 2, "x"}).digest == a.digest);
  const ExperimentConfig s = parse_config(kRotation, Overrides{99});
  CHECK(s.digest != a.digest);
  CHECK(s.mc.seed == 99);
  CHECK(provenance_line(s) == "# halpern-lab 0.1.0 config=" + s.digest + " seed=99");
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("simulate: golden rows for the identity smoke config") {
  const fs::path dir = scratch("smoke");
  Overrides ov;
  ov.out_dir = dir.string();
  const ExperimentConfig cfg = load_config(config_file("identity_smoke.json"), ov);
  const CommandResult r = cmd_simulate(cfg);
  CHECK(r.files.size() == 4);
  std::string want = provenance_line(cfg) + "\n" +
                     "n,dx_mean,dx_se,dy_mean,dy_se,xy_mean,xy_se,rTx_mean,rTx_se,rUx_mean,rUx_se,"
                     "rTy_mean,rTy_se,rUy_mean,rUy_se,xi_norm_mean,xi_norm_se,delta_norm_mean,"
                     "delta_norm_se\n";
  for (int n = 0; n < 50; ++n) {
    want += std::to_string(n);
    for (int k = 0; k < 18; ++k) want += ",0";
    want += "\n";
  }
  CHECK(slurp(dir / "ensemble.csv") == want);
  std::string traj = provenance_line(cfg) + "\nn,dx,dy,xy,rTx,rUx,rTy,rUy,xi_norm,delta_norm\n";
  for (int n = 0; n < 50; ++n) traj += std::to_string(n) + ",0,0,0,0,0,0,0,0,0\n";
  CHECK(slurp(dir / "trajectory.csv") == traj);
  for (const auto& e : fs::directory_iterator(dir)) {
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
  }
  const json summary = json::parse(r.summary_json);
  CHECK(summary["config_digest"] == cfg.digest);
  CHECK(summary["seed"] == 1);
}

TEST_CASE("simulate: reproducible by seed") {
  const fs::path d1 = scratch("rot1"), d2 = scratch("rot2"), d3 = scratch("rot3");
  Overrides ov;
  ov.out_dir = d1.string();
  cmd_simulate(parse_config(kRotation, ov));
  ov.out_dir = d2.string();
  ov.threads = 3;
  cmd_simulate(parse_config(kRotation, ov));
  ov.out_dir = d3.string();
  ov.seed = 5;
  cmd_simulate(parse_config(kRotation, ov));
  const std::string e1 = slurp(d1 / "ensemble.csv");
  CHECK(lines(e1).size() == 202);
  CHECK(e1 == slurp(d2 / "ensemble.csv"));
  CHECK(slurp(d1 / "tails.csv") == slurp(d2 / "tails.csv"));
  CHECK(e1 != slurp(d3 / "ensemble.csv"));

  // Re-running from the canonical form embedded in the report reproduces the outputs.
  const ExperimentConfig cfg = parse_config(kRotation);
  const fs::path d4 = scratch("rot4");
  Overrides o4;
  o4.out_dir = d4.string();
  cmd_simulate(parse_config(cfg.canonical, o4));
  CHECK(slurp(d4 / "ensemble.csv") == e1);
}

TEST_CASE("rates: fast dx rows and gating") {
  const fs::path dir = scratch("rates");
  json j = json::parse(kRotation);
  j["scheme"].erase("xi");
  j["rates"] = {{"constants_source", "user"}, {"K0", 1.0}, {"theorems", {"fast", "x_ar"}}};
  Overrides ov;
  ov.out_dir = dir.string();
  const ExperimentConfig cfg = parse_config(j.dump(), ov);
  cmd_rates(cfg);
  const auto fb = lines(slurp(dir / "fast_bounds.csv"));
  REQUIRE(fb.size() > 3);
  CHECK(fb[1] == "case,kind,eps,n,bound,L");
  int dx_rows = 0;
  for (std::size_t i = 2; i < fb.size(); ++i) {
    const auto f = split(fb[i]);
    if (f[0] != "dx" || f[1] != "mean") continue;
    ++dx_rows;
    const double n = std::stod(f[3]);
    CHECK(std::stod(f[4]) == doctest::Approx(4.0 / (n + 2.0)).epsilon(1e-15));
    CHECK(f[5] == "2");
  }
  CHECK(dx_rows == 200);

  // Mean-rate indices are nonincreasing in eps for every origin.
  const auto rows = lines(slurp(dir / "rates.csv"));
  CHECK(rows[1] == "theorem,origin,quantity,kind,eps,lambda,index,status,reason,constants_digest");
  std::map<std::string, std::vector<std::pair<double, double>>> by_origin;
  for (std::size_t i = 2; i < rows.size(); ++i) {
    const auto f = split(rows[i]);
    if (f[3] == "mean" && f[7] == "ok") by_origin[f[1]].push_back({std::stod(f[4]), std::stod(f[6])});
  }
  CHECK(by_origin.size() >= 2);
  for (auto& [origin, pts] : by_origin) {
    INFO(origin);
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i].second <= pts[i - 1].second);
  }
}

TEST_CASE("rates: geometry under the sup norm is skipped with a reason") {
  const fs::path dir = scratch("sup");
  Overrides ov;
  ov.out_dir = dir.string();
  const ExperimentConfig cfg = load_config(config_file("sup_norm_rates.json"), ov);
  const CommandResult r = cmd_rates(cfg);
  CHECK(r.skipped > 0);
  int geometry = 0;
  for (const auto& l : lines(slurp(dir / "rates.csv"))) {
    const auto f = split(l);
    if (f.size() < 9 || f[0].rfind("geometry", 0) != 0) continue;
    ++geometry;
    CHECK(f[7] == "SKIPPED");
    CHECK(f[8].find("Euclidean") != std::string::npos);
  }
  CHECK(geometry > 0);
}

TEST_CASE("verify: desk pass and negative controls") {
  const fs::path dir = scratch("verify");
  Overrides ov;
  ov.out_dir = dir.string();
  ov.paths = 300;
  ov.horizon = 100;
  const ExperimentConfig ok = load_config(config_file("rotation_halpern.json"), ov);
  const CommandResult r = cmd_verify(ok);
  CHECK(r.fail == 0);
  CHECK(r.pass > 0);
  const json v = json::parse(r.summary_json);
  CHECK(v["overall"] != "FAIL");
  CHECK(v.contains("notes"));
  const auto header = lines(slurp(dir / "verdicts.csv"));
  CHECK(header[0] == provenance_line(ok));

  const CommandResult z = cmd_verify(load_config(config_file("negative_zero_rate.json"), ov));
  CHECK(z.fail > 0);
  CHECK(json::parse(z.summary_json)["overall"] == "FAIL");
  const CommandResult s = cmd_verify(load_config(config_file("negative_scaled_L.json"), ov));
  CHECK(s.fail > 0);
}

TEST_CASE("qlearn commands") {
  const fs::path dir = scratch("qlearn");
  const char* single = R"({"qlearn": {"mdp": {"preset": "single_state_two_rewards"}, "steps": 5, "seeds": 3}})";
  Overrides ov;
  ov.out_dir = dir.string();
  const CommandResult r = cmd_qlearn(parse_config(single, ov));
  const json j = json::parse(r.summary_json);
  CHECK(j["fraction_policy_match"] == 1.0);
  CHECK(j["oracle"]["gain"].get<double>() == doctest::Approx(3.0));
  const CommandResult c = cmd_qlearn(load_config(config_file("qlearn_cycle_crosscheck.json"), ov));
  const json cj = json::parse(c.summary_json);
  CHECK(cj["cross_check"]["bitwise_equal"] == true);
  CHECK(cj["cross_check"]["max_abs_diff"] == 0.0);
  CHECK(cj["cross_check"]["steps"].get<int>() >= 100);
  const auto rows = lines(slurp(dir / "qlearn.csv"));
  CHECK(rows[1] == "seed,n,sup_residual,greedy_policy_digest,matches_oracle");
}

TEST_CASE("atomic writes") {
  const fs::path dir = scratch("atomic");
  fs::create_directories(dir);
  write_atomic((dir / "a.txt").string(), "one\n");
  write_atomic((dir / "a.txt").string(), "two\n");
  CHECK(slurp(dir / "a.txt") == "two\n");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 1);
  CHECK_THROWS_AS(write_atomic("/nonexistent/dir/a.txt", "x"), IoError);
}
