#include "remsim/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

namespace remsim {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::BASELINE: return "baseline";
    case Mode::RUNAHEAD: return "runahead";
    case Mode::RUNAHEAD_BUFFER: return "runahead-buffer";
    case Mode::HYBRID: return "hybrid";
    case Mode::EMC_DEP: return "emc-dep";
    case Mode::RA_EMC: return "ra-emc";
    case Mode::RA_EMC_DEP: return "ra-emc-dep";
  }
  return "?";
}

const std::vector<Mode>& all_modes() {
  static const std::vector<Mode> v{Mode::BASELINE, Mode::RUNAHEAD, Mode::RUNAHEAD_BUFFER, Mode::HYBRID,
                                   Mode::EMC_DEP,  Mode::RA_EMC,   Mode::RA_EMC_DEP};
  return v;
}

std::optional<Mode> mode_from_name(const std::string& s) {
  for (Mode m : all_modes())
    if (s == mode_name(m)) return m;
  return std::nullopt;
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  std::uint64_t x = 0;
  try {
    if (v.empty() || v[0] == '-') throw std::invalid_argument("");
    x = std::stoull(v, &pos, 0);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
  return x;
}

unsigned to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = to_u64(key, v);
  if (x > 0xFFFFFFFFull) throw ConfigError(key + ": value out of range");
  return static_cast<unsigned>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(v);
  while (std::getline(is, cur, ';')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

struct Key {
  const char* name;
  const char* doc;
  std::function<void(SimConfig&, const std::string&)> set;
  std::function<std::string(const SimConfig&)> get;
};

#define U64_KEY(NAME, FIELD, DOC)                                                    \
  Key {                                                                              \
    NAME, DOC, [](SimConfig& c, const std::string& v) { c.FIELD = to_u64(NAME, v); }, \
        [](const SimConfig& c) { return std::to_string(c.FIELD); }                   \
  }
#define UINT_KEY(NAME, FIELD, DOC)                                                    \
  Key {                                                                               \
    NAME, DOC, [](SimConfig& c, const std::string& v) { c.FIELD = to_uint(NAME, v); }, \
        [](const SimConfig& c) { return std::to_string(c.FIELD); }                    \
  }
#define BOOL_KEY(NAME, FIELD, DOC)                                                    \
  Key {                                                                               \
    NAME, DOC, [](SimConfig& c, const std::string& v) { c.FIELD = to_bool(NAME, v); }, \
        [](const SimConfig& c) { return std::string(c.FIELD ? "true" : "false"); }    \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> k{
      UINT_KEY("cores", cores, "number of cores (1-16)"),
      Key{"mode", "baseline|runahead|runahead-buffer|hybrid|emc-dep|ra-emc|ra-emc-dep",
          [](SimConfig& c, const std::string& v) {
            auto m = mode_from_name(v);
            if (!m) throw ConfigError("mode: unknown mode '" + v + "'");
            c.mode = *m;
          },
          [](const SimConfig& c) { return std::string(mode_name(c.mode)); }},
      Key{"prefetcher", "none|stream|ghb|markov+stream",
          [](SimConfig& c, const std::string& v) {
            auto p = prefetcher_from_name(v);
            if (!p) throw ConfigError("prefetcher: unknown prefetcher '" + v + "'");
            c.prefetcher = *p;
          },
          [](const SimConfig& c) { return std::string(prefetcher_name(c.prefetcher)); }},
      Key{"emc_policy", "runahead-core selection: round-robin|ipc|score",
          [](SimConfig& c, const std::string& v) {
            auto p = emc_policy_from_name(v);
            if (!p) throw ConfigError("emc_policy: unknown policy '" + v + "'");
            c.emc_policy = *p;
          },
          [](const SimConfig& c) { return std::string(emc_policy_name(c.emc_policy)); }},
      BOOL_KEY("enhancements", enhancements, "runahead overlap/issue filters (always on for hybrid)"),
      U64_KEY("max_instructions", max_instructions, "per-core instruction limit, 0 = whole trace"),
      U64_KEY("seed", seed, "seed for generated traces that do not set one"),
      Key{"stats", "stats CSV path",
          [](SimConfig& c, const std::string& v) { c.stats_path = v; },
          [](const SimConfig& c) { return c.stats_path; }},
      Key{"traces", "';'-separated per-core traces: file path or gen:<kind>[:k=v,...]",
          [](SimConfig& c, const std::string& v) { c.traces = split_list(v); },
          [](const SimConfig& c) {
            std::string s;
            for (std::size_t i = 0; i < c.traces.size(); ++i) s += (i ? ";" : "") + c.traces[i];
            return s;
          }},
      U64_KEY("max_cycles", max_cycles, "cycle cap before a simulation assertion, 0 = automatic"),
      U64_KEY("check_period", check_period, "cycles between LLC inclusion checks, 0 = off"),
      U64_KEY("emc_interval", emc_interval, "single-core continuous-runahead update interval (instructions)"),
      BOOL_KEY("emc_dynamic_interval", emc_dynamic_interval, "accuracy-driven intervals (always on for >1 core)"),
      BOOL_KEY("emc_coordinate", emc_coordinate, "coordinate EMC runahead with the GHB prefetcher"),
      UINT_KEY("emc_dep_contexts", emc_dep_contexts, "dependent-miss contexts at the EMC"),
      UINT_KEY("rob_size", core.rob_size, "reorder buffer entries"),
      UINT_KEY("rs_size", core.rs_size, "reservation station entries"),
      UINT_KEY("width", core.width, "fetch/issue/retire width"),
      UINT_KEY("load_ports", core.load_ports, "loads issued per cycle"),
      UINT_KEY("poison_window", core.poison_window, "dispatch window for dependent-miss origins"),
      U64_KEY("l1_bytes", mem.l1_bytes, "L1 data cache bytes"),
      UINT_KEY("l1_ways", mem.l1_ways, "L1 associativity"),
      UINT_KEY("l1_latency", mem.l1_latency, "L1 hit latency (cycles)"),
      U64_KEY("llc_bytes_per_core", mem.llc_bytes_per_core, "LLC slice bytes per core"),
      UINT_KEY("llc_ways", mem.llc_ways, "LLC associativity"),
      UINT_KEY("llc_latency", mem.llc_latency, "LLC access latency (cycles)"),
      UINT_KEY("mshrs", mem.mshrs, "L1 MSHRs per core"),
      U64_KEY("emc_cache_bytes", mem.emc_cache_bytes, "EMC data cache bytes"),
      UINT_KEY("dram_channels", mem.dram.channels, "DRAM channels"),
      UINT_KEY("dram_banks", mem.dram.banks, "banks per channel"),
      U64_KEY("dram_row_bytes", mem.dram.row_bytes, "row buffer bytes"),
      U64_KEY("dram_queue", dram_queue, "memory controller queue entries, 0 = 64 single-core / 128 multi-core"),
      Key{"dram_batching", "per-core batch scheduling: auto (multi-core only)|true|false",
          [](SimConfig& c, const std::string& v) {
            if (v == "auto")
              c.dram_batching.reset();
            else
              c.dram_batching = to_bool("dram_batching", v);
          },
          [](const SimConfig& c) {
            return std::string(!c.dram_batching ? "auto" : *c.dram_batching ? "true" : "false");
          }},
      UINT_KEY("prefetch_degree", mem.prefetch_degree, "initial prefetch degree"),
      U64_KEY("fdp_interval", mem.fdp_interval, "prefetcher feedback interval (cycles)"),
  };
  return k;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const auto v = [] {
    std::vector<std::pair<std::string, std::string>> out;
    for (const Key& k : keys()) out.emplace_back(k.name, k.doc);
    return out;
  }();
  return v;
}

void set_config_value(SimConfig& c, const std::string& key, const std::string& value) {
  for (const Key& k : keys())
    if (key == k.name) {
      k.set(c, trim(value));
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

SimConfig parse_config(const std::string& text, const std::vector<std::pair<std::string, std::string>>& overrides) {
  SimConfig c;
  std::istringstream is(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key=value");
    try {
      set_config_value(c, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  for (const auto& [k, v] : overrides) set_config_value(c, k, v);
  return c;
}

SimConfig load_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), overrides);
}

void validate_config(const SimConfig& c) {
  if (c.cores < 1 || c.cores > 16) throw ConfigError("cores must be between 1 and 16");
  if (c.traces.size() != c.cores)
    throw ConfigError("cores=" + std::to_string(c.cores) + " but " + std::to_string(c.traces.size()) +
                      " trace(s) given");
  if (c.core.rob_size < 8) throw ConfigError("rob_size must be at least 8");
  if (c.core.rs_size < 1 || c.core.width < 1 || c.core.load_ports < 1)
    throw ConfigError("rs_size, width and load_ports must be positive");
  if (c.mem.l1_ways < 1 || c.mem.llc_ways < 1) throw ConfigError("cache associativity must be positive");
  if (c.mem.l1_bytes < kLineBytes * c.mem.l1_ways) throw ConfigError("l1_bytes too small for l1_ways");
  if (c.mem.llc_bytes_per_core < kLineBytes * c.mem.llc_ways)
    throw ConfigError("llc_bytes_per_core too small for llc_ways");
  if (c.mem.mshrs < 1) throw ConfigError("mshrs must be positive");
  if (c.mem.dram.channels < 1 || c.mem.dram.banks < 1) throw ConfigError("dram channels/banks must be positive");
  if (c.mem.dram.row_bytes < kLineBytes) throw ConfigError("dram_row_bytes must be at least one line");
  if (c.mem.prefetch_degree < kMinDegree || c.mem.prefetch_degree > kMaxDegree)
    throw ConfigError("prefetch_degree must be within [1,32]");
  if (c.emc_dep_contexts < 1 || c.emc_dep_contexts > 2) throw ConfigError("emc_dep_contexts must be 1 or 2");
  if (c.emc_interval < 1) throw ConfigError("emc_interval must be positive");
  if (c.mem.emc_cache_bytes < kLineBytes * c.mem.emc_cache_ways) throw ConfigError("emc_cache_bytes too small");
}

std::string render_config(const SimConfig& c) {
  std::string s;
  for (const Key& k : keys()) s += std::string(k.name) + "=" + k.get(c) + "\n";
  return s;
}

CoreConfig derived_core_config(const SimConfig& c) {
  CoreConfig k = c.core;
  k.max_instructions = c.max_instructions;
  k.enhancements = c.enhancements;
  k.runahead = RunaheadPolicy::NONE;
  k.emc_dep = k.ra_emc = false;
  switch (c.mode) {
    case Mode::BASELINE: break;
    case Mode::RUNAHEAD: k.runahead = RunaheadPolicy::TRADITIONAL; break;
    case Mode::RUNAHEAD_BUFFER: k.runahead = RunaheadPolicy::BUFFER; break;
    case Mode::HYBRID:
      k.runahead = RunaheadPolicy::HYBRID;
      k.enhancements = true;
      break;
    case Mode::EMC_DEP: k.emc_dep = true; break;
    case Mode::RA_EMC: k.ra_emc = true; break;
    case Mode::RA_EMC_DEP: k.emc_dep = k.ra_emc = true; break;
  }
  return k;
}

EmcConfig derived_emc_config(const SimConfig& c) {
  EmcConfig e;
  e.dep = c.mode == Mode::EMC_DEP || c.mode == Mode::RA_EMC_DEP;
  e.ra = c.mode == Mode::RA_EMC || c.mode == Mode::RA_EMC_DEP;
  e.dep_contexts = c.emc_dep_contexts;
  e.policy = c.emc_policy;
  e.dynamic_interval = c.cores > 1 || c.emc_dynamic_interval;
  e.fixed_interval = c.emc_interval;
  e.coordinate_ghb = c.emc_coordinate && c.prefetcher == PrefetcherKind::GHB;
  return e;
}

MemConfig derived_mem_config(const SimConfig& c) {
  MemConfig m = c.mem;
  m.cores = c.cores;
  m.prefetcher = c.prefetcher;
  m.dram.queue_cap = c.dram_queue ? c.dram_queue : (c.cores > 1 ? 128 : 64);
  m.dram.batching = c.dram_batching.value_or(c.cores > 1);
  m.emc = c.mode == Mode::EMC_DEP || c.mode == Mode::RA_EMC || c.mode == Mode::RA_EMC_DEP;
  return m;
}

}  // namespace remsim
