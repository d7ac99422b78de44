#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "remsim/core.hpp"
#include "remsim/emc.hpp"
#include "remsim/memhier.hpp"

namespace remsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Mode : std::uint8_t { BASELINE, RUNAHEAD, RUNAHEAD_BUFFER, HYBRID, EMC_DEP, RA_EMC, RA_EMC_DEP };
const char* mode_name(Mode m);
std::optional<Mode> mode_from_name(const std::string& s);
const std::vector<Mode>& all_modes();

struct SimConfig {
  unsigned cores = 1;
  Mode mode = Mode::BASELINE;
  PrefetcherKind prefetcher = PrefetcherKind::NONE;
  EmcPolicy emc_policy = EmcPolicy::ROUND_ROBIN;
  bool enhancements = false;
  std::uint64_t max_instructions = 0;
  std::uint64_t seed = 1;
  std::string stats_path;
  std::vector<std::string> traces;  // one per core: a file path or gen:<kind>[:k=v,...]

  std::uint64_t max_cycles = 0;        // 0 = derived from the workload size
  std::uint64_t check_period = 4096;   // cycles between inclusion checks, 0 = never
  std::uint64_t emc_interval = 100000; // single-core update interval
  bool emc_dynamic_interval = false;   // forced on for multi-core
  bool emc_coordinate = true;          // throttle against GHB when both run
  unsigned emc_dep_contexts = 2;
  std::uint64_t dram_queue = 0;        // 0 = 64 single-core, 128 multi-core
  std::optional<bool> dram_batching;   // unset = on for multi-core

  CoreConfig core;
  MemConfig mem;
};

// All recognised keys with their documentation line, in help order.
const std::vector<std::pair<std::string, std::string>>& config_keys();

// Applies one key=value assignment. Throws ConfigError on unknown key or a
// malformed value.
void set_config_value(SimConfig& c, const std::string& key, const std::string& value);

// Parses the flat key=value format ('#' comments, blank lines ignored).
SimConfig parse_config(const std::string& text, const std::vector<std::pair<std::string, std::string>>& overrides = {});
SimConfig load_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Throws ConfigError on illegal combinations or a trace list that does not
// match the core count.
void validate_config(const SimConfig& c);

// Renders every key in canonical form; parse_config(render_config(c)) == c.
std::string render_config(const SimConfig& c);

// Concrete per-component settings implied by the mode axes.
CoreConfig derived_core_config(const SimConfig& c);
EmcConfig derived_emc_config(const SimConfig& c);
MemConfig derived_mem_config(const SimConfig& c);

}  // namespace remsim
