#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "remsim/config.hpp"
#include "remsim/core.hpp"
#include "remsim/emc.hpp"
#include "remsim/metrics.hpp"
#include "remsim/trace.hpp"

namespace remsim {

// Generator names: pointer-chase, linked-list, stream. Unknown parameters
// and bad values throw ConfigError.
Trace generate_trace(const std::string& kind, const std::map<std::string, std::string>& params,
                     std::uint64_t default_seed = 1);
std::map<std::string, std::string> parse_params(const std::string& text);  // "a=1,b=2"

// A file path, or gen:<kind>[:k=v,...].
Trace resolve_trace(const std::string& spec, std::uint64_t default_seed = 1);

struct SimResult {
  SimConfig config;
  SimStats stats;
  std::vector<std::vector<IntervalStats>> runahead_intervals;  // per core
  std::vector<EmcIntervalRecord> emc_intervals;
  EmcStats emc;
  bool has_emc = false;
  std::vector<std::uint64_t> digests;
};

struct SimHooks {
  CoreObserver* observer = nullptr;
  std::vector<EmcIssueRecord>* emc_issue_log = nullptr;
  std::vector<DramCommand>* dram_log = nullptr;
};

// Runs one simulation to completion. Throws ConfigError for invalid
// configurations and SimAssertion when an internal check fails.
SimResult simulate(const SimConfig& cfg, const std::vector<const Trace*>& traces, const SimHooks& hooks = {});
// Resolves cfg.traces and simulates.
SimResult simulate(const SimConfig& cfg, const SimHooks& hooks = {});

// Runahead intervals as CSV: core, interval_id, mode, start_cycle, cycles, uops, misses.
Table runahead_interval_table(const SimResult& r);
// EMC continuous-runahead intervals: cycle, owner, length, accuracy, distance_samples, distance_mean.
Table emc_interval_table(const SimResult& r);

}  // namespace remsim
