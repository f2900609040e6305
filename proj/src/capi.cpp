#include "hlab/hlab.h"

#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "hlab/error.hpp"
#include "hlab/experiment.hpp"

using hlab::ExperimentConfig;
using hlab::Overrides;

struct hlab_experiment {
  std::string text;
  Overrides ov;
  ExperimentConfig cfg;
};

struct hlab_result {
  hlab::CommandResult r;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_field;

hlab_status fail(hlab_status s, const std::string& msg, const std::string& field = {}) {
  g_error = msg;
  g_field = field;
  return s;
}

template <class F>
hlab_status guarded(F&& f) {
  g_error.clear();
  g_field.clear();
  try {
    f();
    return HLAB_OK;
  } catch (const hlab::ConfigError& e) {
    return fail(HLAB_ERR_CONFIG, e.what(), e.field());
  } catch (const hlab::HypothesisError& e) {
    return fail(HLAB_ERR_HYPOTHESIS, e.what());
  } catch (const hlab::DomainError& e) {
    return fail(HLAB_ERR_DOMAIN, e.what());
  } catch (const hlab::NumericError& e) {
    return fail(HLAB_ERR_NUMERIC, e.what());
  } catch (const hlab::DimensionError& e) {
    return fail(HLAB_ERR_DIMENSION, e.what());
  } catch (const hlab::IoError& e) {
    return fail(HLAB_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(HLAB_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(HLAB_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(HLAB_ERR_INTERNAL, "unknown error");
  }
}

void reparse(hlab_experiment* e) { e->cfg = hlab::parse_config(e->text, e->ov); }

hlab_status create(std::string text, hlab_experiment** out) {
  if (!out) return fail(HLAB_ERR_INVALID_ARGUMENT, "null output pointer");
  *out = nullptr;
  auto* e = new (std::nothrow) hlab_experiment;
  if (!e) return fail(HLAB_ERR_INTERNAL, "out of memory");
  e->text = std::move(text);
  const hlab_status s = guarded([&] { reparse(e); });
  if (s != HLAB_OK) {
    delete e;
    return s;
  }
  *out = e;
  return HLAB_OK;
}

template <class F>
hlab_status set(hlab_experiment* e, F&& apply) {
  if (!e) return fail(HLAB_ERR_INVALID_ARGUMENT, "null experiment");
  return guarded([&] {
    Overrides saved = e->ov;
    apply(e->ov);
    try {
      reparse(e);
    } catch (...) {
      e->ov = saved;
      throw;
    }
  });
}

}  // namespace

extern "C" {

const char* hlab_version(void) { return hlab::kToolVersion; }
const char* hlab_last_error(void) { return g_error.c_str(); }
const char* hlab_last_error_field(void) { return g_field.c_str(); }

hlab_status hlab_experiment_load(const char* path, hlab_experiment** out) {
  if (!path) return fail(HLAB_ERR_INVALID_ARGUMENT, "null path");
  std::ifstream is(path, std::ios::binary);
  if (!is) return fail(HLAB_ERR_IO, std::string("cannot read config file '") + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return create(ss.str(), out);
}

hlab_status hlab_experiment_from_json(const char* json_text, hlab_experiment** out) {
  if (!json_text) return fail(HLAB_ERR_INVALID_ARGUMENT, "null config text");
  return create(json_text, out);
}

void hlab_experiment_free(hlab_experiment* exp) { delete exp; }

hlab_status hlab_experiment_set_seed(hlab_experiment* exp, uint64_t seed) {
  return set(exp, [&](Overrides& o) { o.seed = seed; });
}
hlab_status hlab_experiment_set_paths(hlab_experiment* exp, uint64_t paths) {
  return set(exp, [&](Overrides& o) { o.paths = paths; });
}
hlab_status hlab_experiment_set_horizon(hlab_experiment* exp, uint64_t horizon) {
  return set(exp, [&](Overrides& o) { o.horizon = horizon; });
}
hlab_status hlab_experiment_set_threads(hlab_experiment* exp, unsigned threads) {
  return set(exp, [&](Overrides& o) { o.threads = threads; });
}
hlab_status hlab_experiment_set_out_dir(hlab_experiment* exp, const char* dir) {
  if (!dir) return fail(HLAB_ERR_INVALID_ARGUMENT, "null directory");
  return set(exp, [&](Overrides& o) { o.out_dir = std::string(dir); });
}

hlab_status hlab_experiment_digest(hlab_experiment* exp, const char** digest) {
  if (!exp || !digest) return fail(HLAB_ERR_INVALID_ARGUMENT, "null argument");
  *digest = exp->cfg.digest.c_str();
  return HLAB_OK;
}

hlab_status hlab_run(hlab_experiment* exp, const char* command, hlab_result** out) {
  if (!exp || !command || !out) return fail(HLAB_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  const std::string cmd = command;
  hlab::CommandResult (*fn)(const ExperimentConfig&) = nullptr;
  if (cmd == "simulate") fn = hlab::cmd_simulate;
  else if (cmd == "rates") fn = hlab::cmd_rates;
  else if (cmd == "verify") fn = hlab::cmd_verify;
  else if (cmd == "qlearn") fn = hlab::cmd_qlearn;
  else return fail(HLAB_ERR_INVALID_ARGUMENT, "unknown command '" + cmd + "'");
  auto* r = new (std::nothrow) hlab_result;
  if (!r) return fail(HLAB_ERR_INTERNAL, "out of memory");
  const hlab_status s = guarded([&] { r->r = fn(exp->cfg); });
  if (s != HLAB_OK) {
    delete r;
    return s;
  }
  *out = r;
  return HLAB_OK;
}

void hlab_result_free(hlab_result* res) { delete res; }

hlab_status hlab_result_counts(const hlab_result* res, hlab_counts* out) {
  if (!res || !out) return fail(HLAB_ERR_INVALID_ARGUMENT, "null argument");
  out->pass = res->r.pass;
  out->fail = res->r.fail;
  out->inconclusive = res->r.inconclusive;
  out->skipped = res->r.skipped;
  return HLAB_OK;
}

const char* hlab_result_summary_json(const hlab_result* res) {
  return res ? res->r.summary_json.c_str() : "";
}
uint64_t hlab_result_num_files(const hlab_result* res) { return res ? res->r.files.size() : 0; }
const char* hlab_result_file(const hlab_result* res, uint64_t i) {
  return res && i < res->r.files.size() ? res->r.files[i].c_str() : nullptr;
}
uint64_t hlab_result_num_warnings(const hlab_result* res) { return res ? res->r.warnings.size() : 0; }
const char* hlab_result_warning(const hlab_result* res, uint64_t i) {
  return res && i < res->r.warnings.size() ? res->r.warnings[i].c_str() : nullptr;
}

}  // extern "C"
