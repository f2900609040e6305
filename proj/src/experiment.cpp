#include "hlab/experiment.hpp"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "hlab/error.hpp"
#include "hlab/format.hpp"
#include "json.hpp"

namespace hlab {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

std::string at_index(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

// Runs f, turning library argument errors into ConfigError(field).
template <class F>
auto wrap(const std::string& field, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(field, e.what());
  }
}

void check_object(const json& o, const std::string& field) {
  if (!o.is_object()) throw ConfigError(field, "expected an object");
}

void check_keys(const json& o, const std::string& field, std::initializer_list<const char*> allowed) {
  check_object(o, field);
  for (auto it = o.begin(); it != o.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok |= it.key() == a;
    if (!ok) throw ConfigError(join(field, it.key()), "unknown key");
  }
}

const json& require(const json& o, const std::string& field, const char* key) {
  if (!o.contains(key)) throw ConfigError(join(field, key), "missing");
  return o.at(key);
}

double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(field, "expected a finite number");
  return d;
}

std::uint64_t as_uint(const json& v, const std::string& field) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError(field, "expected a nonnegative integer");
}

std::string as_string(const json& v, const std::string& field) {
  if (!v.is_string()) throw ConfigError(field, "expected a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& field) {
  if (!v.is_boolean()) throw ConfigError(field, "expected true or false");
  return v.get<bool>();
}

double num_or(const json& o, const std::string& field, const char* key, double def) {
  return o.contains(key) ? as_number(o.at(key), join(field, key)) : def;
}

void flatten(const json& v, const std::string& field, std::vector<double>& out) {
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) flatten(v[i], at_index(field, i), out);
  } else {
    out.push_back(as_number(v, field));
  }
}

std::vector<double> as_numbers(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field, "expected an array of numbers");
  std::vector<double> out;
  flatten(v, field, out);
  return out;
}

Point as_point(const json& v, const std::string& field) {
  std::vector<double> c = as_numbers(v, field);
  if (c.empty()) throw ConfigError(field, "expected a nonempty array");
  return Point(std::move(c));
}

Point as_point_dim(const json& v, const std::string& field, std::size_t dim) {
  Point p = as_point(v, field);
  if (p.dim() != dim) {
    throw ConfigError(field, "has dimension " + std::to_string(p.dim()) + ", expected " + std::to_string(dim));
  }
  return p;
}

NormKind parse_norm(const json& v, const std::string& field) {
  const std::string s = as_string(v, field);
  const auto n = parse_norm_kind(s);
  if (!n) throw ConfigError(field, "unknown norm '" + s + "'; expected euclidean | sup | l1");
  return *n;
}

std::string type_of(const json& o, const std::string& field) {
  check_object(o, field);
  return as_string(require(o, field, "type"), join(field, "type"));
}

Schedule parse_schedule(const json& v, const std::string& field) {
  if (v.is_number()) return wrap(field, [&] { return Schedule::constant(as_number(v, field)); });
  const std::string t = type_of(v, field);
  return wrap(field, [&] {
    if (t == "halpern_two") {
      check_keys(v, field, {"type"});
      return Schedule::halpern_two();
    }
    if (t == "constant") {
      check_keys(v, field, {"type", "c"});
      return Schedule::constant(as_number(require(v, field, "c"), join(field, "c")));
    }
    if (t == "power_decay") {
      check_keys(v, field, {"type", "c", "exponent"});
      return Schedule::power_decay(num_or(v, field, "c", 1.0),
                                   as_number(require(v, field, "exponent"), join(field, "exponent")));
    }
    if (t == "custom") {
      check_keys(v, field, {"type", "values", "hold_last"});
      const bool hold = v.contains("hold_last") && as_bool(v.at("hold_last"), join(field, "hold_last"));
      return Schedule::custom(as_numbers(require(v, field, "values"), join(field, "values")), hold);
    }
    throw ConfigError(join(field, "type"),
                      "unknown schedule '" + t + "'; expected halpern_two | constant | power_decay | custom");
  });
}

NoiseModel parse_noise(const json& v, const std::string& field) {
  const std::string t = type_of(v, field);
  return wrap(field, [&] {
    if (t == "zero") {
      check_keys(v, field, {"type"});
      return NoiseModel::zero();
    }
    if (t == "gaussian_decay") {
      check_keys(v, field, {"type", "k1"});
      return NoiseModel::gaussian_decay(as_number(require(v, field, "k1"), join(field, "k1")));
    }
    if (t == "minibatch") {
      check_keys(v, field, {"type", "sigma", "k1"});
      return NoiseModel::minibatch(num_or(v, field, "sigma", 1.0), num_or(v, field, "k1", 1.0));
    }
    if (t == "bounded") {
      check_keys(v, field, {"type", "table", "scale", "shift", "power", "direction"});
      BoundedAdversarial b;
      if (v.contains("table")) b.table = as_numbers(v.at("table"), join(field, "table"));
      b.scale = num_or(v, field, "scale", 0.0);
      b.shift = num_or(v, field, "shift", 1.0);
      b.power = num_or(v, field, "power", 2.0);
      if (v.contains("direction")) {
        const std::string d = as_string(v.at("direction"), join(field, "direction"));
        if (d == "random") b.direction = Direction::Random;
        else if (d == "along_state") b.direction = Direction::AlongState;
        else throw ConfigError(join(field, "direction"), "expected random | along_state");
      }
      return NoiseModel(b);
    }
    throw ConfigError(join(field, "type"),
                      "unknown noise '" + t + "'; expected zero | gaussian_decay | bounded | minibatch");
  });
}

Mdp parse_mdp(const json& v, const std::string& field) {
  check_object(v, field);
  return wrap(field, [&]() -> Mdp {
    if (v.contains("preset")) {
      check_keys(v, field, {"preset"});
      const std::string p = as_string(v.at("preset"), join(field, "preset"));
      if (p == "two_state_cycle") return two_state_cycle();
      if (p == "two_state_cycle_choice") return two_state_cycle_choice();
      if (p == "single_state_two_rewards") return single_state_two_rewards();
      throw ConfigError(join(field, "preset"),
                        "unknown preset '" + p +
                            "'; expected two_state_cycle | two_state_cycle_choice | single_state_two_rewards");
    }
    if (v.contains("random")) {
      check_keys(v, field, {"random"});
      const std::string f = join(field, "random");
      const json& r = v.at("random");
      check_keys(r, f, {"states", "actions", "seed", "floor"});
      return random_unichain(as_uint(require(r, f, "states"), join(f, "states")),
                             as_uint(require(r, f, "actions"), join(f, "actions")),
                             r.contains("seed") ? as_uint(r.at("seed"), join(f, "seed")) : 0,
                             num_or(r, f, "floor", 0.2));
    }
    check_keys(v, field, {"states", "actions", "rewards", "transitions"});
    return Mdp(as_uint(require(v, field, "states"), join(field, "states")),
               as_uint(require(v, field, "actions"), join(field, "actions")),
               as_numbers(require(v, field, "rewards"), join(field, "rewards")),
               as_numbers(require(v, field, "transitions"), join(field, "transitions")));
  });
}

FSpec parse_f(const json& v, const std::string& field) {
  const std::string t = type_of(v, field);
  if (t == "pinned") {
    check_keys(v, field, {"type", "state", "action"});
    PinnedEntry p;
    if (v.contains("state")) p.state = as_uint(v.at("state"), join(field, "state"));
    if (v.contains("action")) p.action = as_uint(v.at("action"), join(field, "action"));
    return p;
  }
  if (t == "mean") {
    check_keys(v, field, {"type"});
    return MeanOverEntries{};
  }
  throw ConfigError(join(field, "type"), "unknown reference functional '" + t + "'; expected pinned | mean");
}

Operator parse_operator(const json& v, const std::string& field, std::size_t dim, NormKind norm) {
  const std::string t = type_of(v, field);
  auto ops = [&](const char* key) {
    const std::string f = join(field, key);
    const json& a = require(v, field, key);
    if (!a.is_array() || a.empty()) throw ConfigError(f, "expected a nonempty array of operators");
    std::vector<Operator> out;
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(parse_operator(a[i], at_index(f, i), dim, norm));
    return out;
  };
  return wrap(field, [&]() -> Operator {
    if (t == "identity") {
      check_keys(v, field, {"type"});
      return Operator::identity();
    }
    if (t == "rotation") {
      check_keys(v, field, {"type", "angle", "plane"});
      std::size_t i = 0, j = 1;
      if (v.contains("plane")) {
        const json& pl = v.at("plane");
        if (!pl.is_array() || pl.size() != 2) throw ConfigError(join(field, "plane"), "expected [i, j]");
        i = as_uint(pl[0], at_index(join(field, "plane"), 0));
        j = as_uint(pl[1], at_index(join(field, "plane"), 1));
      }
      return Operator::rotation(dim, i, j, as_number(require(v, field, "angle"), join(field, "angle")));
    }
    if (t == "halfspace") {
      check_keys(v, field, {"type", "normal", "offset"});
      return Operator::halfspace_projection(as_point_dim(require(v, field, "normal"), join(field, "normal"), dim),
                                            num_or(v, field, "offset", 0.0));
    }
    if (t == "ball") {
      check_keys(v, field, {"type", "center", "radius"});
      return Operator::ball_projection(as_point_dim(require(v, field, "center"), join(field, "center"), dim),
                                       as_number(require(v, field, "radius"), join(field, "radius")));
    }
    if (t == "averaged") {
      check_keys(v, field, {"type", "inner", "weight"});
      return Operator::averaged(parse_operator(require(v, field, "inner"), join(field, "inner"), dim, norm),
                                as_number(require(v, field, "weight"), join(field, "weight")));
    }
    if (t == "composition") {
      check_keys(v, field, {"type", "ops"});
      return Operator::composition(ops("ops"));
    }
    if (t == "convex") {
      check_keys(v, field, {"type", "ops", "weights"});
      return Operator::convex_combination(ops("ops"),
                                          as_numbers(require(v, field, "weights"), join(field, "weights")));
    }
    if (t == "linear") {
      check_keys(v, field, {"type", "matrix", "norm"});
      const NormKind declared = v.contains("norm") ? parse_norm(v.at("norm"), join(field, "norm")) : norm;
      return Operator::linear(dim, as_numbers(require(v, field, "matrix"), join(field, "matrix")), declared);
    }
    if (t == "bellman") {
      check_keys(v, field, {"type", "mdp", "f"});
      auto mdp = std::make_shared<const Mdp>(parse_mdp(require(v, field, "mdp"), join(field, "mdp")));
      const FSpec f = v.contains("f") ? parse_f(v.at("f"), join(field, "f")) : FSpec{PinnedEntry{}};
      return Operator::bellman_rvi(std::move(mdp), f);
    }
    throw ConfigError(join(field, "type"),
                      "unknown operator '" + t +
                          "'; expected identity | rotation | halfspace | ball | averaged | composition | convex |"
                          " linear | bellman");
  });
}

SchemeConfig parse_scheme(const json& v, const std::string& field) {
  check_keys(v, field,
             {"norm", "x0", "anchor", "random_anchor_scale", "T", "U", "alpha", "beta", "xi", "delta",
              "fixed_point"});
  SchemeConfig cfg;
  cfg.norm = v.contains("norm") ? parse_norm(v.at("norm"), join(field, "norm")) : NormKind::Euclidean;
  cfg.x0 = as_point(require(v, field, "x0"), join(field, "x0"));
  const std::size_t d = cfg.x0.dim();
  cfg.u = v.contains("anchor") ? as_point_dim(v.at("anchor"), join(field, "anchor"), d) : Point(d, 0.0);
  cfg.random_anchor_scale = num_or(v, field, "random_anchor_scale", 0.0);
  if (v.contains("T")) cfg.T = parse_operator(v.at("T"), join(field, "T"), d, cfg.norm);
  if (v.contains("U")) cfg.U = parse_operator(v.at("U"), join(field, "U"), d, cfg.norm);
  if (v.contains("alpha")) cfg.alpha = parse_schedule(v.at("alpha"), join(field, "alpha"));
  if (v.contains("beta")) cfg.beta = parse_schedule(v.at("beta"), join(field, "beta"));
  if (v.contains("xi")) cfg.xi = parse_noise(v.at("xi"), join(field, "xi"));
  if (v.contains("delta")) cfg.delta = parse_noise(v.at("delta"), join(field, "delta"));
  if (v.contains("fixed_point")) {
    cfg.fixed_point = as_point_dim(v.at("fixed_point"), join(field, "fixed_point"), d);
  }
  try {
    validate(cfg);
  } catch (const Error& e) {
    const std::string msg = e.what();
    std::string f = field;
    if (msg.rfind("operator T", 0) == 0) f = join(field, "T");
    else if (msg.rfind("operator U", 0) == 0) f = join(field, "U");
    else if (msg.find("fixed point") != std::string::npos) f = join(field, "fixed_point");
    else if (msg.find("random_anchor_scale") != std::string::npos) f = join(field, "random_anchor_scale");
    throw ConfigError(f, msg);
  }
  return cfg;
}

std::vector<double> parse_grid(const json& v, const std::string& field) {
  std::vector<double> g = as_numbers(v, field);
  if (g.empty()) throw ConfigError(field, "expected a nonempty array");
  std::sort(g.begin(), g.end());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] > 0.0)) throw ConfigError(field, "entries must be positive");
    if (i && g[i] == g[i - 1]) throw ConfigError(field, "entries must be distinct");
  }
  return g;
}

Quantity parse_q(const json& v, const std::string& field) {
  const std::string s = as_string(v, field);
  const auto q = parse_quantity(s);
  if (!q) throw ConfigError(field, "unknown quantity '" + s + "'");
  return *q;
}

McSection parse_mc(const json& v, const std::string& field) {
  check_keys(v, field, {"horizon", "paths", "seed", "eps_grid", "lambda_grid", "quantities", "threads"});
  McSection mc;
  if (v.contains("horizon")) mc.horizon = as_uint(v.at("horizon"), join(field, "horizon"));
  if (v.contains("paths")) mc.paths = as_uint(v.at("paths"), join(field, "paths"));
  if (v.contains("seed")) mc.seed = as_uint(v.at("seed"), join(field, "seed"));
  if (v.contains("threads")) mc.threads = static_cast<unsigned>(as_uint(v.at("threads"), join(field, "threads")));
  if (v.contains("eps_grid")) mc.eps_grid = parse_grid(v.at("eps_grid"), join(field, "eps_grid"));
  if (v.contains("lambda_grid")) mc.lambda_grid = parse_grid(v.at("lambda_grid"), join(field, "lambda_grid"));
  if (v.contains("quantities")) {
    const json& a = v.at("quantities");
    if (!a.is_array()) throw ConfigError(join(field, "quantities"), "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) mc.quantities.push_back(parse_q(a[i], at_index(join(field, "quantities"), i)));
  }
  if (mc.paths < 2) throw ConfigError(join(field, "paths"), "must be >= 2");
  if (mc.horizon < 1) throw ConfigError(join(field, "horizon"), "must be >= 1");
  return mc;
}

RatesSection parse_rates(const json& v, const std::string& field) {
  check_keys(v, field,
             {"constants_source", "K0", "dominated", "pilot_paths", "theorems", "Lambda", "B",
              "geometry_optimized"});
  RatesSection r;
  if (v.contains("constants_source")) {
    const std::string s = as_string(v.at("constants_source"), join(field, "constants_source"));
    const auto src = parse_constants_source(s);
    if (!src) {
      throw ConfigError(join(field, "constants_source"),
                        "unknown source '" + s + "'; expected declared-fixed-point | user | empirical");
    }
    r.constants.source = *src;
  }
  if (v.contains("K0")) r.constants.K0 = as_number(v.at("K0"), join(field, "K0"));
  if (v.contains("dominated")) r.constants.user_dominated = as_bool(v.at("dominated"), join(field, "dominated"));
  if (v.contains("pilot_paths")) r.constants.pilot_paths = as_uint(v.at("pilot_paths"), join(field, "pilot_paths"));
  if (r.constants.source == ConstantsSource::User && !r.constants.K0) {
    throw ConfigError(join(field, "K0"), "required when constants_source is user");
  }
  if (v.contains("theorems")) {
    const json& a = v.at("theorems");
    const std::string f = join(field, "theorems");
    if (!a.is_array()) throw ConfigError(f, "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string t = as_string(a[i], at_index(f, i));
      const auto& g = theorem_groups();
      if (std::find(g.begin(), g.end(), t) == g.end()) throw ConfigError(at_index(f, i), "unknown theorem group '" + t + "'");
      r.catalog.theorems.push_back(t);
    }
  }
  if (v.contains("Lambda")) r.catalog.Lambda = as_number(v.at("Lambda"), join(field, "Lambda"));
  if (v.contains("B")) r.catalog.B = as_number(v.at("B"), join(field, "B"));
  if (v.contains("geometry_optimized")) {
    r.catalog.geometry_optimized = as_bool(v.at("geometry_optimized"), join(field, "geometry_optimized"));
  }
  return r;
}

std::vector<VerifyCheck> parse_verify(const json& v, const std::string& field) {
  check_keys(v, field, {"checks"});
  const std::string f = join(field, "checks");
  const json& a = require(v, field, "checks");
  if (!a.is_array() || a.empty()) throw ConfigError(f, "expected a nonempty array");
  std::vector<VerifyCheck> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::string cf = at_index(f, i);
    const json& c = a[i];
    check_keys(c, cf, {"kind", "case", "theorem", "quantity", "mode", "L_scale", "tail", "tail_n"});
    const std::string kind = as_string(require(c, cf, "kind"), join(cf, "kind"));
    VerifyCheck k;
    if (kind == "catalog") k.kind = CheckKind::Catalog;
    else if (kind == "fast_bound") k.kind = CheckKind::FastBound;
    else if (kind == "mean_rate") k.kind = CheckKind::MeanRate;
    else if (kind == "as_rate") k.kind = CheckKind::AsRate;
    else if (kind == "zero_rate") k.kind = CheckKind::ZeroRate;
    else throw ConfigError(join(cf, "kind"), "expected catalog | fast_bound | mean_rate | as_rate | zero_rate");
    if (k.kind == CheckKind::FastBound) {
      const std::string cs = as_string(require(c, cf, "case"), join(cf, "case"));
      k.fast_case = parse_fast_case(cs);
      if (!k.fast_case) throw ConfigError(join(cf, "case"), "expected dx | dy | halpern_residual | kmt_residual");
    }
    if (k.kind == CheckKind::MeanRate || k.kind == CheckKind::AsRate) {
      k.theorem = as_string(require(c, cf, "theorem"), join(cf, "theorem"));
    }
    if (c.contains("quantity")) k.quantity = parse_q(c.at("quantity"), join(cf, "quantity"));
    if (k.kind == CheckKind::ZeroRate && !k.quantity) throw ConfigError(join(cf, "quantity"), "missing");
    if (c.contains("mode")) {
      const std::string m = as_string(c.at("mode"), join(cf, "mode"));
      if (m != "mean" && m != "as") throw ConfigError(join(cf, "mode"), "expected mean | as");
      k.as_mode = m == "as";
    }
    if (c.contains("L_scale")) {
      k.L_scale = as_number(c.at("L_scale"), join(cf, "L_scale"));
      if (!(k.L_scale > 0.0)) throw ConfigError(join(cf, "L_scale"), "must be > 0");
    }
    if (c.contains("tail")) k.tail = as_bool(c.at("tail"), join(cf, "tail"));
    if (c.contains("tail_n")) {
      const json& t = c.at("tail_n");
      if (!t.is_array()) throw ConfigError(join(cf, "tail_n"), "expected an array");
      std::vector<Index> ns;
      for (std::size_t j = 0; j < t.size(); ++j) ns.push_back(as_uint(t[j], at_index(join(cf, "tail_n"), j)));
      k.tail_n = ns;
    }
    out.push_back(k);
  }
  return out;
}

QlearnSection parse_qlearn(const json& v, const std::string& field) {
  check_keys(v, field,
             {"mdp", "f", "alpha", "beta", "batch_divisor", "steps", "seeds", "residual_threshold",
              "cross_check", "cross_steps"});
  QlearnSection q;
  q.mdp = std::make_shared<const Mdp>(parse_mdp(require(v, field, "mdp"), join(field, "mdp")));
  if (v.contains("f")) q.f = parse_f(v.at("f"), join(field, "f"));
  wrap(join(field, "f"), [&] { return evaluate_f(*q.mdp, q.f, Point(q.mdp->table_size(), 0.0)); });
  if (v.contains("alpha")) q.alpha = parse_schedule(v.at("alpha"), join(field, "alpha"));
  if (v.contains("beta")) q.beta = parse_schedule(v.at("beta"), join(field, "beta"));
  q.batch_divisor = num_or(v, field, "batch_divisor", 100.0);
  if (!(q.batch_divisor > 0.0)) throw ConfigError(join(field, "batch_divisor"), "must be > 0");
  if (v.contains("steps")) q.steps = as_uint(v.at("steps"), join(field, "steps"));
  if (v.contains("seeds")) q.seeds = as_uint(v.at("seeds"), join(field, "seeds"));
  if (q.seeds < 1) throw ConfigError(join(field, "seeds"), "must be >= 1");
  q.residual_threshold = num_or(v, field, "residual_threshold", 0.05);
  if (v.contains("cross_check")) q.cross_check = as_bool(v.at("cross_check"), join(field, "cross_check"));
  if (v.contains("cross_steps")) q.cross_steps = as_uint(v.at("cross_steps"), join(field, "cross_steps"));
  if (q.cross_check.value_or(false) && !q.mdp->deterministic()) {
    throw ConfigError(join(field, "cross_check"), "requires a deterministic MDP");
  }
  return q;
}

OutputSection parse_output(const json& v, const std::string& field) {
  check_keys(v, field, {"dir", "formats"});
  OutputSection o;
  if (v.contains("dir")) o.dir = as_string(v.at("dir"), join(field, "dir"));
  if (v.contains("formats")) {
    const json& a = v.at("formats");
    const std::string f = join(field, "formats");
    if (!a.is_array() || a.empty()) throw ConfigError(f, "expected a nonempty array");
    o.csv = o.json = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string s = as_string(a[i], at_index(f, i));
      if (s == "csv") o.csv = true;
      else if (s == "json") o.json = true;
      else throw ConfigError(at_index(f, i), "expected csv | json");
    }
  }
  return o;
}

// --- output helpers ---------------------------------------------------------

std::string fmt(double v) { return format_double(v); }

std::string opt_fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string constants_string(const Constants& c) {
  std::string s;
  for (const auto& [k, v] : c) {
    if (!s.empty()) s += ';';
    s += k + "=" + fmt(v);
  }
  return s;
}

class Outputs {
 public:
  explicit Outputs(const ExperimentConfig& cfg) : cfg_(cfg) {
    std::error_code ec;
    fs::create_directories(cfg.output.dir, ec);
    if (ec) throw IoError("cannot create output directory '" + cfg.output.dir + "': " + ec.message());
  }
  void csv(const std::string& name, const std::string& body, CommandResult& r) {
    if (!cfg_.output.csv) return;
    write(name, provenance_line(cfg_) + "\n" + body, r);
  }
  void json_file(const std::string& name, const json& j, CommandResult& r) {
    r.summary_json = j.dump(2);
    if (!cfg_.output.json) return;
    write(name, r.summary_json + "\n", r);
  }

 private:
  void write(const std::string& name, const std::string& content, CommandResult& r) {
    const std::string path = (fs::path(cfg_.output.dir) / name).string();
    write_atomic(path, content);
    r.files.push_back(path);
  }
  const ExperimentConfig& cfg_;
};

json base_summary(const ExperimentConfig& cfg, const char* command) {
  json j;
  j["tool"] = "halpern-lab";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["config_digest"] = cfg.digest;
  j["seed"] = cfg.mc.seed;
  j["config"] = json::parse(cfg.canonical);
  return j;
}

const SchemeConfig& need_scheme(const ExperimentConfig& cfg, const char* command) {
  if (!cfg.scheme) throw ConfigError("scheme", std::string("required by ") + command);
  return *cfg.scheme;
}

McPlan make_plan(const ExperimentConfig& cfg, bool all_quantities) {
  McPlan p;
  p.config = *cfg.scheme;
  p.horizon = cfg.mc.horizon;
  p.num_paths = cfg.mc.paths;
  p.master_seed = cfg.mc.seed;
  if (!all_quantities) p.quantities = cfg.mc.quantities;
  p.eps_grid = cfg.mc.eps_grid;
  p.lambda_grid = cfg.mc.lambda_grid;
  p.threads = cfg.mc.threads;
  p.config_digest = cfg.digest;
  return p;
}

SchemeConstants constants_for(const ExperimentConfig& cfg) {
  ConstantsOptions opt = cfg.rates.constants;
  opt.pilot_horizon = cfg.mc.horizon;
  opt.pilot_seed = cfg.mc.seed ^ 0x9e3779b97f4a7c15ULL;
  try {
    return scheme_constants(*cfg.scheme, opt);
  } catch (const HypothesisError& e) {
    throw ConfigError("rates.constants_source", e.what());
  } catch (const DomainError& e) {
    throw ConfigError("rates", e.what());
  }
}

json constants_json(const SchemeConstants& c) {
  json j;
  j["source"] = std::string(to_string(c.source));
  j["K0"] = c.K0;
  j["dominated"] = c.dominated;
  j["empirical"] = c.source == ConstantsSource::Empirical;
  if (c.fixed_point) {
    j["fixed_point"] = {{"x0_dist", c.fixed_point->x0_dist}, {"u_dist", c.fixed_point->u_dist},
                        {"E", c.fixed_point->E}, {"D", c.fixed_point->D}, {"K", c.fixed_point->K}};
  }
  return j;
}

json fast_json(const NamedFastBound& f) {
  json coef = json::object();
  for (const auto& [k, v] : f.bound.coefficients) coef[k] = v;
  return {{"case", std::string(to_string(f.fast_case))}, {"L", f.bound.L}, {"first_index", f.bound.first_index},
          {"coefficients", coef}, {"tail_valid", f.tail_valid}};
}

constexpr const char* kAssembledNote =
    "L for dy, halpern_residual and kmt_residual is assembled by chaining the one-step inequalities;"
    " it is one valid choice of constant, validated here only empirically";

void count(CommandResult& r, const std::vector<VerdictRow>& rows) {
  for (const auto& row : rows) {
    switch (row.verdict) {
      case Verdict::Pass: ++r.pass; break;
      case Verdict::Fail: ++r.fail; break;
      case Verdict::Inconclusive: ++r.inconclusive; break;
      case Verdict::Skipped: ++r.skipped; break;
    }
  }
}

}  // namespace

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = hex[h & 0xf];
  return out;
}

std::string provenance_line(const ExperimentConfig& cfg) {
  return std::string("# halpern-lab ") + kToolVersion + " config=" + cfg.digest + " seed=" + std::to_string(cfg.mc.seed);
}

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + tmp + "' for writing");
    os << content;
    os.flush();
    if (!os) throw IoError("write to '" + tmp + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

ExperimentConfig parse_config(const std::string& json_text, const Overrides& ov) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("(root)", std::string("invalid JSON: ") + e.what());
  }
  check_keys(root, "", {"scheme", "mc", "rates", "verify", "qlearn", "output"});
  if (ov.seed || ov.paths || ov.horizon) {
    if (!root.contains("mc")) root["mc"] = json::object();
    check_object(root["mc"], "mc");
    if (ov.seed) root["mc"]["seed"] = *ov.seed;
    if (ov.paths) root["mc"]["paths"] = *ov.paths;
    if (ov.horizon) root["mc"]["horizon"] = *ov.horizon;
  }

  ExperimentConfig cfg;
  if (root.contains("scheme")) cfg.scheme = parse_scheme(root["scheme"], "scheme");
  if (root.contains("mc")) cfg.mc = parse_mc(root["mc"], "mc");
  if (root.contains("rates")) cfg.rates = parse_rates(root["rates"], "rates");
  if (root.contains("verify")) cfg.verify = parse_verify(root["verify"], "verify");
  if (root.contains("qlearn")) cfg.qlearn = parse_qlearn(root["qlearn"], "qlearn");
  if (root.contains("output")) cfg.output = parse_output(root["output"], "output");
  if (ov.threads) cfg.mc.threads = *ov.threads;
  if (ov.out_dir) cfg.output.dir = *ov.out_dir;

  // Thread count and output location do not change results.
  json canon = root;
  canon.erase("output");
  if (canon.contains("mc")) canon["mc"].erase("threads");
  cfg.canonical = canon.dump();
  cfg.digest = fnv1a_hex(cfg.canonical);
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const Overrides& ov) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), ov);
}

// --- commands -----------------------------------------------------------------

CommandResult cmd_simulate(const ExperimentConfig& cfg) {
  need_scheme(cfg, "simulate");
  const McReport rep = run_ensemble(make_plan(cfg, false));
  CommandResult res;
  Outputs out(cfg);

  std::ostringstream ens;
  ens << 'n';
  for (const auto& s : rep.stats) ens << ',' << to_string(s.quantity) << "_mean," << to_string(s.quantity) << "_se";
  ens << '\n';
  for (Index n = 0; n < rep.horizon; ++n) {
    ens << n;
    for (const auto& s : rep.stats) ens << ',' << fmt(s.mean[n]) << ',' << fmt(s.se[n]);
    ens << '\n';
  }
  out.csv("ensemble.csv", ens.str(), res);

  std::ostringstream tails;
  tails << "quantity,eps,n,tail_freq\n";
  for (const auto& s : rep.stats) {
    for (std::size_t e = 0; e < rep.eps_grid.size(); ++e) {
      for (Index n = 0; n < rep.horizon; ++n) {
        tails << to_string(s.quantity) << ',' << fmt(rep.eps_grid[e]) << ',' << n << ',' << fmt(s.tail[e][n]) << '\n';
      }
    }
  }
  out.csv("tails.csv", tails.str(), res);

  std::ostringstream traj;
  write_trajectory_csv(traj, run_path(*cfg.scheme, cfg.mc.horizon, path_seed(cfg.mc.seed, 0)));
  out.csv("trajectory.csv", traj.str(), res);

  json j = base_summary(cfg, "simulate");
  j["horizon"] = rep.horizon;
  j["paths"] = rep.num_paths;
  j["valid_paths"] = rep.valid_paths;
  j["invalid_notes"] = rep.invalid_notes;
  j["truncation_note"] = McReport::truncation_note();
  out.json_file("simulate.json", j, res);
  if (rep.valid_paths < rep.num_paths) {
    res.warnings.push_back(std::to_string(rep.num_paths - rep.valid_paths) + " paths failed and were dropped");
  }
  return res;
}

CommandResult cmd_rates(const ExperimentConfig& cfg) {
  const SchemeConfig& scheme = need_scheme(cfg, "rates");
  const SchemeConstants consts = constants_for(cfg);
  const RateCatalog cat = build_rate_catalog(scheme, consts, cfg.rates.catalog);
  CommandResult res;
  Outputs out(cfg);

  std::ostringstream rows;
  rows << "theorem,origin,quantity,kind,eps,lambda,index,status,reason,constants_digest\n";
  for (const auto& m : cat.mean) {
    const std::string cd = fnv1a_hex(constants_string(m.rate.constants()));
    for (double e : cfg.mc.eps_grid) {
      rows << m.theorem << ',' << m.rate.origin() << ',' << to_string(m.quantity) << ",mean," << fmt(e) << ",,"
           << m.rate(e) << ",ok,," << cd << '\n';
    }
  }
  for (const auto& a : cat.as) {
    const std::string cd = fnv1a_hex(constants_string(a.rate.constants()));
    for (double l : cfg.mc.lambda_grid) {
      for (double e : cfg.mc.eps_grid) {
        rows << a.theorem << ',' << a.rate.origin() << ',' << to_string(a.quantity) << ",as," << fmt(e) << ','
             << fmt(l) << ',' << a.rate(l, e) << ",ok,," << cd << '\n';
      }
    }
  }
  for (const auto& s : cat.skipped) {
    rows << s.theorem << ",,,,,,,SKIPPED," << csv_escape(s.reason) << ",\n";
  }
  out.csv("rates.csv", rows.str(), res);
  res.skipped = cat.skipped.size();

  std::ostringstream fb;
  fb << "case,kind,eps,n,bound,L\n";
  for (const auto& f : cat.fast) {
    const std::string c(to_string(f.fast_case));
    for (Index n = f.bound.first_index; n < cfg.mc.horizon; ++n) {
      fb << c << ",mean,," << n << ',' << fmt(f.bound.mean_bound(n)) << ',' << fmt(f.bound.L) << '\n';
    }
    if (!f.tail_valid) continue;
    for (double e : cfg.mc.eps_grid) {
      for (Index n = f.bound.first_index; n < cfg.mc.horizon; ++n) {
        fb << c << ",tail," << fmt(e) << ',' << n << ',' << fmt(f.bound.tail_bound(e, n)) << ',' << fmt(f.bound.L) << '\n';
      }
    }
  }
  out.csv("fast_bounds.csv", fb.str(), res);

  json j = base_summary(cfg, "rates");
  j["constants"] = constants_json(consts);
  j["fast_bounds"] = json::array();
  for (const auto& f : cat.fast) j["fast_bounds"].push_back(fast_json(f));
  j["rates"] = json::array();
  for (const auto& m : cat.mean) {
    j["rates"].push_back({{"theorem", m.theorem}, {"origin", m.rate.origin()}, {"kind", "mean"},
                          {"quantity", std::string(to_string(m.quantity))},
                          {"constants", m.rate.constants()}});
  }
  for (const auto& a : cat.as) {
    j["rates"].push_back({{"theorem", a.theorem}, {"origin", a.rate.origin()}, {"kind", "as"},
                          {"quantity", std::string(to_string(a.quantity))},
                          {"constants", a.rate.constants()}});
  }
  j["skipped"] = json::array();
  for (const auto& s : cat.skipped) j["skipped"].push_back({{"theorem", s.theorem}, {"reason", s.reason}});
  j["notes"] = {kAssembledNote};
  out.json_file("rates.json", j, res);
  return res;
}

CommandResult cmd_verify(const ExperimentConfig& cfg) {
  const SchemeConfig& scheme = need_scheme(cfg, "verify");
  const SchemeConstants consts = constants_for(cfg);
  const RateCatalog cat = build_rate_catalog(scheme, consts, cfg.rates.catalog);
  const McReport rep = run_ensemble(make_plan(cfg, true));
  CommandResult res;
  std::vector<VerdictRow> rows;
  auto add = [&](std::vector<VerdictRow> r) { rows.insert(rows.end(), r.begin(), r.end()); };
  auto skipped_row = [&](const std::string& check, const std::string& origin, const std::string& why) {
    VerdictRow r;
    r.check = check;
    r.origin = origin;
    r.verdict = Verdict::Skipped;
    r.note = why;
    rows.push_back(r);
  };
  auto reason_for = [&](const std::string& name) {
    for (const auto& s : cat.skipped) {
      if (s.theorem == name) return s.reason;
    }
    return std::string("not produced for this scheme");
  };

  for (const auto& chk : cfg.verify) {
    switch (chk.kind) {
      case CheckKind::Catalog:
        for (const auto& f : cat.fast) add(verify_fast_bound(rep, f.bound, f.fast_case, f.tail_valid));
        for (const auto& m : cat.mean) add(verify_mean_rate(rep, m.rate, m.quantity));
        for (const auto& a : cat.as) add(verify_as_rate(rep, a.rate, a.quantity));
        break;
      case CheckKind::FastBound: {
        const auto it = std::find_if(cat.fast.begin(), cat.fast.end(),
                                     [&](const NamedFastBound& f) { return f.fast_case == *chk.fast_case; });
        const std::string name = "fast_" + std::string(to_string(*chk.fast_case));
        if (it == cat.fast.end()) {
          skipped_row("fast_mean", name, reason_for(name));
          break;
        }
        FastBound fb = it->bound;
        if (chk.L_scale != 1.0) {
          fb.L *= chk.L_scale;
          fb.origin += "*" + fmt(chk.L_scale);
        }
        try {
          add(verify_fast_bound(rep, fb, it->fast_case, chk.tail && it->tail_valid, chk.tail_n));
        } catch (const DomainError& e) {
          throw ConfigError("verify.checks", e.what());
        }
        break;
      }
      case CheckKind::MeanRate: {
        bool any = false;
        for (const auto& m : cat.mean) {
          if (m.theorem != chk.theorem || (chk.quantity && *chk.quantity != m.quantity)) continue;
          add(verify_mean_rate(rep, m.rate, m.quantity));
          any = true;
        }
        if (!any) skipped_row("mean_rate", chk.theorem, reason_for(chk.theorem));
        break;
      }
      case CheckKind::AsRate: {
        bool any = false;
        for (const auto& a : cat.as) {
          if (a.theorem != chk.theorem || (chk.quantity && *chk.quantity != a.quantity)) continue;
          add(verify_as_rate(rep, a.rate, a.quantity));
          any = true;
        }
        if (!any) skipped_row("as_rate", chk.theorem, reason_for(chk.theorem));
        break;
      }
      case CheckKind::ZeroRate:
        if (chk.as_mode) add(verify_as_rate(rep, AsRate::zero("zero_control"), *chk.quantity));
        else add(verify_mean_rate(rep, MeanRate::zero("zero_control"), *chk.quantity));
        break;
    }
  }
  count(res, rows);
  if (res.inconclusive) res.warnings.push_back(std::to_string(res.inconclusive) + " INCONCLUSIVE verdicts");
  if (rep.valid_paths < rep.num_paths) {
    res.warnings.push_back(std::to_string(rep.num_paths - rep.valid_paths) + " paths failed and were dropped");
  }

  Outputs out(cfg);
  std::ostringstream csv;
  csv << "check,origin,quantity,eps,lambda,index,estimate,se,bound,verdict,note\n";
  for (const auto& r : rows) {
    csv << r.check << ',' << csv_escape(r.origin) << ',' << (r.check.empty() ? "" : std::string(to_string(r.quantity)))
        << ',' << opt_fmt(r.eps) << ',' << opt_fmt(r.lambda) << ',' << r.index << ',' << fmt(r.estimate) << ','
        << fmt(r.se) << ',' << fmt(r.bound) << ',' << to_string(r.verdict) << ',' << csv_escape(r.note) << '\n';
  }
  out.csv("verdicts.csv", csv.str(), res);

  json j = base_summary(cfg, "verify");
  j["overall"] = std::string(to_string(overall(rows)));
  j["counts"] = {{"PASS", res.pass}, {"FAIL", res.fail}, {"INCONCLUSIVE", res.inconclusive}, {"SKIPPED", res.skipped}};
  j["constants"] = constants_json(consts);
  j["fast_bounds"] = json::array();
  for (const auto& f : cat.fast) j["fast_bounds"].push_back(fast_json(f));
  j["horizon"] = rep.horizon;
  j["paths"] = rep.num_paths;
  j["valid_paths"] = rep.valid_paths;
  j["invalid_notes"] = rep.invalid_notes;
  j["notes"] = {McReport::truncation_note(), kAssembledNote};
  json fails = json::array();
  for (const auto& r : rows) {
    if (r.verdict != Verdict::Fail) continue;
    fails.push_back({{"check", r.check}, {"origin", r.origin}, {"quantity", std::string(to_string(r.quantity))},
                     {"index", r.index}, {"estimate", r.estimate}, {"bound", r.bound}, {"note", r.note}});
  }
  j["failures"] = fails;
  out.json_file("verdicts.json", j, res);
  return res;
}

CommandResult cmd_qlearn(const ExperimentConfig& cfg) {
  if (!cfg.qlearn) throw ConfigError("qlearn", "required by qlearn");
  const QlearnSection& q = *cfg.qlearn;
  const RviSolution oracle = rvi_oracle(*q.mdp, q.f);
  CommandResult res;
  Outputs out(cfg);

  std::ostringstream csv;
  csv << "seed,n,sup_residual,greedy_policy_digest,matches_oracle\n";
  std::uint64_t matched = 0, small = 0;
  for (std::uint64_t i = 0; i < q.seeds; ++i) {
    QRunConfig rc;
    rc.mdp = q.mdp;
    rc.f = q.f;
    rc.alpha = q.alpha;
    rc.beta = q.beta;
    rc.batch_divisor = q.batch_divisor;
    rc.steps = q.steps;
    rc.seed = path_seed(cfg.mc.seed, i);
    const QRunResult r = run_qlearning(rc, oracle);
    for (const auto& rec : r.records) {
      csv << rc.seed << ',' << rec.n << ',' << fmt(rec.sup_residual) << ',' << rec.policy << ','
          << (rec.matches_oracle ? "true" : "false") << '\n';
    }
    matched += r.records.back().matches_oracle;
    small += r.records.back().sup_residual < q.residual_threshold;
  }
  out.csv("qlearn.csv", csv.str(), res);

  json j = base_summary(cfg, "qlearn");
  j["oracle"] = {{"gain", oracle.gain}, {"policy", policy_digest(oracle.policy)}, {"iterations", oracle.iterations}};
  j["steps"] = q.steps;
  j["seeds"] = q.seeds;
  j["fraction_policy_match"] = static_cast<double>(matched) / static_cast<double>(q.seeds);
  j["fraction_residual_below"] = static_cast<double>(small) / static_cast<double>(q.seeds);
  j["residual_threshold"] = q.residual_threshold;

  if (q.cross_check.value_or(q.mdp->deterministic())) {
    QRunConfig rc;
    rc.mdp = q.mdp;
    rc.f = q.f;
    rc.alpha = q.alpha;
    rc.beta = q.beta;
    const Trajectory t = run_path(qlearning_as_scheme(rc), q.cross_steps, 0, true);
    Point qn(q.mdp->table_size(), 0.0);
    Rng rng(cfg.mc.seed);
    bool equal = true;
    double diff = 0.0;
    for (Index n = 0; n <= q.cross_steps; ++n) {
      equal &= qn == t.xs[n];
      diff = std::max(diff, distance(NormKind::Sup, qn, t.xs[n]));
      if (n < q.cross_steps) {
        qn = q_tikhonov_step(*q.mdp, q.f, qn, n, q.beta, q.alpha, default_batch(n, q.batch_divisor), rng);
      }
    }
    j["cross_check"] = {{"steps", q.cross_steps}, {"bitwise_equal", equal}, {"max_abs_diff", diff}};
    if (!equal) res.warnings.push_back("Q-learning and scheme-engine iterates differ");
  }
  out.json_file("qlearn.json", j, res);
  return res;
}

}  // namespace hlab
