#include "remsim/remsim.h"

#include <cstring>
#include <sstream>
#include <string>

#include "remsim/lab.hpp"
#include "remsim/matrix.hpp"
#include "remsim/sim.hpp"

struct remsim_config {
  remsim::SimConfig cfg;
};

struct remsim_result {
  remsim::SimResult r;
};

namespace {

thread_local std::string g_error;

remsim_status fail(remsim_status s, const std::string& msg) {
  g_error = msg;
  return s;
}

// Maps the library's exception types onto status codes.
template <class F>
remsim_status guard(F&& f) {
  try {
    f();
    g_error.clear();
    return REMSIM_OK;
  } catch (const remsim::ConfigError& e) {
    return fail(REMSIM_ERR_CONFIG, e.what());
  } catch (const remsim::SchemaError& e) {
    return fail(REMSIM_ERR_CONFIG, e.what());
  } catch (const remsim::ParseError& e) {
    return fail(REMSIM_ERR_CONFIG, std::string("trace: ") + e.what());
  } catch (const remsim::InvariantError& e) {
    return fail(REMSIM_ERR_CONFIG, std::string("trace: ") + e.what());
  } catch (const remsim::SimAssertion& e) {
    return fail(REMSIM_ERR_SIM, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(REMSIM_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(REMSIM_ERR_SIM, "out of memory");
  } catch (const std::exception& e) {
    return fail(REMSIM_ERR_IO, e.what());
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

bool core_ok(const remsim_result* r, unsigned core) { return r && core < r->r.stats.cores.size(); }

}  // namespace

extern "C" {

const char* remsim_last_error(void) { return g_error.c_str(); }
const char* remsim_version(void) { return "1.0.0"; }
void remsim_string_free(char* s) { std::free(s); }

remsim_status remsim_config_new(remsim_config** out) {
  if (!out) return fail(REMSIM_ERR_ARG, "out is NULL");
  return guard([&] { *out = new remsim_config{}; });
}

remsim_status remsim_config_parse(const char* text, remsim_config** out) {
  if (!text || !out) return fail(REMSIM_ERR_ARG, "NULL argument");
  return guard([&] { *out = new remsim_config{remsim::parse_config(text)}; });
}

remsim_status remsim_config_load(const char* path, remsim_config** out) {
  if (!path || !out) return fail(REMSIM_ERR_ARG, "NULL argument");
  return guard([&] { *out = new remsim_config{remsim::load_config(path)}; });
}

void remsim_config_free(remsim_config* cfg) { delete cfg; }

remsim_status remsim_config_set(remsim_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return fail(REMSIM_ERR_ARG, "NULL argument");
  return guard([&] { remsim::set_config_value(cfg->cfg, key, value); });
}

remsim_status remsim_config_get(const remsim_config* cfg, const char* key, char** out) {
  if (!cfg || !key || !out) return fail(REMSIM_ERR_ARG, "NULL argument");
  return guard([&] {
    std::istringstream is(remsim::render_config(cfg->cfg));
    std::string line, prefix = std::string(key) + "=";
    while (std::getline(is, line))
      if (line.rfind(prefix, 0) == 0) {
        *out = dup(line.substr(prefix.size()));
        return;
      }
    throw remsim::ConfigError(std::string("unknown key '") + key + "'");
  });
}

remsim_status remsim_config_validate(const remsim_config* cfg) {
  if (!cfg) return fail(REMSIM_ERR_ARG, "NULL argument");
  return guard([&] { remsim::validate_config(cfg->cfg); });
}

remsim_status remsim_config_render(const remsim_config* cfg, char** out) {
  if (!cfg || !out) return fail(REMSIM_ERR_ARG, "NULL argument");
  return guard([&] { *out = dup(remsim::render_config(cfg->cfg)); });
}

size_t remsim_config_key_count(void) { return remsim::config_keys().size(); }

const char* remsim_config_key_name(size_t i) {
  const auto& k = remsim::config_keys();
  return i < k.size() ? k[i].first.c_str() : nullptr;
}

const char* remsim_config_key_doc(size_t i) {
  const auto& k = remsim::config_keys();
  return i < k.size() ? k[i].second.c_str() : nullptr;
}

remsim_status remsim_run(const remsim_config* cfg, remsim_result** out) {
  if (!cfg || !out) return fail(REMSIM_ERR_ARG, "NULL argument");
  return guard([&] { *out = new remsim_result{remsim::simulate(cfg->cfg)}; });
}

void remsim_result_free(remsim_result* r) { delete r; }

unsigned remsim_result_cores(const remsim_result* r) {
  return r ? static_cast<unsigned>(r->r.stats.cores.size()) : 0;
}

uint64_t remsim_result_cycles(const remsim_result* r) { return r ? r->r.stats.global.cycles : 0; }

uint64_t remsim_result_retired(const remsim_result* r, unsigned core) {
  return core_ok(r, core) ? r->r.stats.cores[core].retired : 0;
}

double remsim_result_ipc(const remsim_result* r, unsigned core) {
  return core_ok(r, core) ? r->r.stats.cores[core].ipc() : 0.0;
}

uint64_t remsim_result_digest(const remsim_result* r, unsigned core) {
  return core_ok(r, core) ? r->r.stats.cores[core].digest : 0;
}

remsim_status remsim_result_stats_csv(const remsim_result* r, char** out) {
  if (!r || !out) return fail(REMSIM_ERR_ARG, "NULL argument");
  return guard([&] {
    std::ostringstream os;
    remsim::write_csv(remsim::stats_table(r->r.stats), os);
    *out = dup(os.str());
  });
}

remsim_status remsim_result_write(const remsim_result* r, const char* stats_path, const char* runahead_path,
                                  const char* emc_path) {
  if (!r) return fail(REMSIM_ERR_ARG, "NULL argument");
  return guard([&] {
    if (stats_path) remsim::write_csv(remsim::stats_table(r->r.stats), stats_path);
    if (runahead_path) remsim::write_csv(remsim::runahead_interval_table(r->r), runahead_path);
    if (emc_path && r->r.has_emc) remsim::write_csv(remsim::emc_interval_table(r->r), emc_path);
  });
}

remsim_status remsim_generate_trace(const char* spec, uint64_t seed, const char* path) {
  if (!spec || !path) return fail(REMSIM_ERR_ARG, "NULL argument");
  return guard([&] {
    std::string s = spec;
    if (s.rfind("gen:", 0) != 0) throw remsim::ConfigError("trace spec must start with gen:");
    remsim::store_trace(remsim::resolve_trace(s, seed), path);
  });
}

remsim_status remsim_matrix(const char* spec_path, const char* const* overrides, size_t n, unsigned parallelism,
                            const char* out_dir, size_t* failed_cells) {
  if (!spec_path || !out_dir || (n && !overrides)) return fail(REMSIM_ERR_ARG, "NULL argument");
  if (failed_cells) *failed_cells = 0;
  std::size_t sim_errors = 0, config_errors = 0;
  remsim_status st = guard([&] {
    std::vector<std::pair<std::string, std::string>> kv;
    for (size_t i = 0; i < n; ++i) {
      std::string s = overrides[i];
      auto eq = s.find('=');
      if (eq == std::string::npos) throw remsim::ConfigError("override '" + s + "' is not key=value");
      kv.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    auto spec = remsim::load_matrix_spec(spec_path, kv);
    auto result = remsim::run_matrix(spec, parallelism ? parallelism : 1);
    remsim::write_matrix(result, out_dir);
    sim_errors = result.sim_errors;
    config_errors = result.config_errors;
  });
  if (st != REMSIM_OK) return st;
  if (failed_cells) *failed_cells = sim_errors + config_errors;
  if (config_errors) return fail(REMSIM_ERR_CONFIG, std::to_string(config_errors) + " matrix run(s) had config errors");
  if (sim_errors) return fail(REMSIM_ERR_SIM, std::to_string(sim_errors) + " matrix run(s) failed");
  return REMSIM_OK;
}

remsim_status remsim_lab(const remsim_config* cfg, unsigned core, size_t max_stalls, const char* policy,
                         const char* csv_path, const char* summary_path) {
  if (!cfg) return fail(REMSIM_ERR_ARG, "NULL argument");
  return guard([&] {
    std::vector<remsim::LabPolicy> policies = remsim::all_lab_policies();
    if (policy) {
      auto p = remsim::lab_policy_from_name(policy);
      if (!p) throw remsim::ConfigError(std::string("unknown lab policy '") + policy + "'");
      policies = {*p};
    }
    remsim::validate_config(cfg->cfg);
    auto events = remsim::collect_lab_events(cfg->cfg, static_cast<int>(core), max_stalls);
    std::vector<remsim::LabSelection> all;
    for (auto p : policies) {
      auto sel = remsim::policy_lab(events, p);
      all.insert(all.end(), sel.begin(), sel.end());
    }
    if (csv_path) remsim::write_csv(remsim::lab_table(all), csv_path);
    if (summary_path) remsim::write_csv(remsim::lab_summary(all), summary_path);
  });
}

remsim_status remsim_compare(const char* path_a, const char* path_b, char** out) {
  if (!path_a || !path_b || !out) return fail(REMSIM_ERR_ARG, "NULL argument");
  return guard([&] {
    auto t = remsim::compare_csv(remsim::read_csv_file(path_a), remsim::read_csv_file(path_b));
    std::ostringstream os;
    remsim::write_csv(t, os);
    *out = dup(os.str());
  });
}

}  // extern "C"
