#include "remsim/sim.hpp"

#include <algorithm>
#include <sstream>

namespace remsim {

std::map<std::string, std::string> parse_params(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("generator parameter '" + item + "' is not key=value");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

namespace {

std::uint64_t param(std::map<std::string, std::string>& p, const std::string& k, std::uint64_t def) {
  auto it = p.find(k);
  if (it == p.end()) return def;
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    if (it->second.empty() || it->second[0] == '-') throw std::invalid_argument("");
    v = std::stoull(it->second, &pos, 0);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != it->second.size()) throw ConfigError("generator parameter " + k + ": bad value '" + it->second + "'");
  p.erase(it);
  return v;
}

void no_leftovers(const std::map<std::string, std::string>& p, const std::string& kind) {
  if (!p.empty()) throw ConfigError("unknown " + kind + " parameter '" + p.begin()->first + "'");
}

}  // namespace

Trace generate_trace(const std::string& kind, const std::map<std::string, std::string>& params,
                     std::uint64_t default_seed) {
  auto p = params;
  try {
    if (kind == "pointer-chase") {
      PointerChaseParams g;
      g.n_nodes = param(p, "n_nodes", g.n_nodes);
      g.footprint = param(p, "footprint", g.footprint);
      g.chain_gap = param(p, "chain_gap", g.chain_gap);
      g.seed = param(p, "seed", default_seed);
      g.iterations = param(p, "iterations", g.iterations);
      g.page_size = param(p, "page_size", g.page_size);
      no_leftovers(p, kind);
      return gen_pointer_chase(g);
    }
    if (kind == "linked-list") {
      LinkedListParams g;
      g.n_nodes = param(p, "n_nodes", g.n_nodes);
      g.node_stride = param(p, "node_stride", g.node_stride);
      g.seed = param(p, "seed", default_seed);
      g.steps = param(p, "steps", g.steps);
      g.page_size = param(p, "page_size", g.page_size);
      g.work = param(p, "work", g.work);
      g.cluster = param(p, "cluster", g.cluster);
      no_leftovers(p, kind);
      return gen_linked_list(g);
    }
    if (kind == "stream") {
      StreamParams g;
      g.lines = param(p, "lines", g.lines);
      g.stride = param(p, "stride", g.stride);
      g.work = param(p, "work", g.work);
      g.page_size = param(p, "page_size", g.page_size);
      no_leftovers(p, kind);
      return gen_stream(g);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(kind + ": " + e.what());
  }
  throw ConfigError("unknown generator '" + kind + "' (pointer-chase, linked-list, stream)");
}

Trace resolve_trace(const std::string& spec, std::uint64_t default_seed) {
  if (spec.rfind("gen:", 0) != 0) return load_trace(spec);
  std::string rest = spec.substr(4);
  auto colon = rest.find(':');
  std::string kind = rest.substr(0, colon);
  std::map<std::string, std::string> p;
  if (colon != std::string::npos) p = parse_params(rest.substr(colon + 1));
  return generate_trace(kind, p, default_seed);
}

// ---------------------------------------------------------------- simulate

namespace {

std::uint64_t auto_cycle_cap(const std::vector<const Trace*>& traces, std::uint64_t max_instr) {
  std::uint64_t ops = 0;
  for (const Trace* t : traces) {
    std::uint64_t n = t->ops.size();
    if (max_instr) n = std::min(n, max_instr);
    ops += n;
  }
  // Generous: every uop a serialized DRAM conflict on a saturated bus.
  return 100000 + ops * 2000;
}

}  // namespace

SimResult simulate(const SimConfig& cfg, const std::vector<const Trace*>& traces, const SimHooks& hooks) {
  if (cfg.cores < 1 || cfg.cores > 16) throw ConfigError("cores must be between 1 and 16");
  if (traces.size() != cfg.cores)
    throw ConfigError("cores=" + std::to_string(cfg.cores) + " but " + std::to_string(traces.size()) +
                      " trace(s) given");

  const CoreConfig ccfg = derived_core_config(cfg);
  const EmcConfig ecfg = derived_emc_config(cfg);
  const MemConfig mcfg = derived_mem_config(cfg);
  const bool emc_on = ecfg.dep || ecfg.ra;

  std::vector<std::unique_ptr<Core>> cores;
  MemorySystem mem(mcfg, [&cores](int c) { return cores[static_cast<std::size_t>(c)]->retired(); });
  if (hooks.dram_log) mem.dram().set_command_log(hooks.dram_log);

  std::unique_ptr<Emc> emc;
  std::vector<Core*> raw;
  // Cores are built before the EMC, which needs their pointers.
  struct ForwardPort : EmcPort {
    Emc* target = nullptr;
    void ship_dep_chain(int core, DependenceChain c, std::uint64_t cycle) override {
      target->ship_dep_chain(core, std::move(c), cycle);
    }
    void ship_ra_chain(int core, DependenceChain c, std::uint64_t cycle) override {
      target->ship_ra_chain(core, std::move(c), cycle);
    }
  } port;

  for (unsigned i = 0; i < cfg.cores; ++i) {
    cores.push_back(std::make_unique<Core>(static_cast<int>(i), ccfg, *traces[i], mem, emc_on ? &port : nullptr));
    if (hooks.observer) cores.back()->set_observer(hooks.observer);
    raw.push_back(cores.back().get());
  }
  if (emc_on) {
    emc = std::make_unique<Emc>(ecfg, mem, raw);
    port.target = emc.get();
    if (hooks.emc_issue_log) emc->set_issue_log(hooks.emc_issue_log);
  }

  const std::uint64_t cap = cfg.max_cycles ? cfg.max_cycles : auto_cycle_cap(traces, cfg.max_instructions);
  std::uint64_t cycle = 0;
  for (;; ++cycle) {
    mem.tick(cycle);
    bool all_done = true;
    for (auto& c : cores) {
      c->step(cycle);
      all_done = all_done && c->done();
    }
    if (emc) emc->step(cycle);
    mem.dram_tick(cycle);
    if (all_done) break;
    if (cfg.check_period && cycle % cfg.check_period == 0 && !mem.check_inclusion())
      throw SimAssertion("LLC inclusion violated at cycle " + std::to_string(cycle));
    if (cycle >= cap) throw SimAssertion("no forward progress: cycle cap " + std::to_string(cap) + " reached");
  }
  if (cfg.check_period && !mem.check_inclusion())
    throw SimAssertion("LLC inclusion violated at end of run");

  SimResult r;
  r.config = cfg;
  r.has_emc = emc_on;
  for (auto& c : cores) {
    CoreRow row = c->stats();
    if (emc) {
      row.emc_dep_latency = emc->stats().dep_latency[static_cast<std::size_t>(c->id())];
      row.emc_dep_rejected = emc->stats().dep_rejected_by_core[static_cast<std::size_t>(c->id())];
    }
    if (row.retired != c->retired()) throw SimAssertion("retired count mismatch");
    r.stats.cores.push_back(row);
    r.runahead_intervals.push_back(c->intervals());
    r.digests.push_back(row.digest);
  }
  GlobalRow& g = r.stats.global;
  g.cycles = cycle + 1;
  const DramStats& ds = mem.dram().stats();
  g.dram_reads = ds.reads;
  g.dram_writes = ds.writes;
  g.row_hits = ds.row_hits;
  g.row_closed = ds.row_closed;
  g.row_conflicts = ds.row_conflicts;
  g.ring_control = mem.ring().control_messages();
  g.ring_data = mem.ring().data_messages();
  for (unsigned i = 0; i < cfg.cores; ++i) {
    const PrefetchCounters& p = mem.prefetcher(static_cast<int>(i)).totals();
    g.pf_issued += p.issued;
    g.pf_useful += p.useful;
    g.pf_late += p.late;
    g.pf_evicted_untouched += p.evicted_untouched;
  }
  g.ra_fetched = mem.runahead_counters().fetched;
  g.ra_useful = mem.runahead_counters().useful;
  g.emc_ra_fetched = mem.emc_ra_counters().fetched;
  g.emc_ra_useful = mem.emc_ra_counters().useful;
  const EmcCacheStats& es = mem.emc_cache_stats();
  g.emc_cache_hits = es.hits;
  g.emc_cache_misses = es.misses;
  g.emc_bypasses = es.bypasses;
  for (const DistanceSample& d : mem.distance_samples()) g.emc_ra_distance.record(d.distance);
  if (emc) {
    const EmcStats& e = emc->stats();
    g.emc_dep_uops = e.dep_uops;
    g.emc_ra_uops = e.ra_uops;
    g.emc_ra_loads = e.ra_loads;
    g.emc_aborts = e.aborts;
    r.emc = e;
    r.emc_intervals = e.intervals;
  }
  return r;
}

SimResult simulate(const SimConfig& cfg, const SimHooks& hooks) {
  validate_config(cfg);
  std::vector<Trace> traces;
  traces.reserve(cfg.traces.size());
  for (const std::string& s : cfg.traces) traces.push_back(resolve_trace(s, cfg.seed));
  std::vector<const Trace*> ptrs;
  for (const Trace& t : traces) ptrs.push_back(&t);
  return simulate(cfg, ptrs, hooks);
}

Table runahead_interval_table(const SimResult& r) {
  Table t;
  t.header = {"core", "interval_id", "mode", "start_cycle", "cycles", "uops", "misses"};
  for (std::size_t c = 0; c < r.runahead_intervals.size(); ++c)
    for (const IntervalStats& s : r.runahead_intervals[c])
      t.rows.push_back({std::uint64_t(c), s.id, std::string(core_mode_name(s.mode)), s.start_cycle, s.cycles, s.uops,
                        s.misses});
  return t;
}

Table emc_interval_table(const SimResult& r) {
  Table t;
  t.header = {"cycle", "owner", "length", "accuracy", "distance_samples", "distance_mean"};
  for (const EmcIntervalRecord& e : r.emc_intervals) {
    Cell owner = std::monostate{};
    if (e.owner >= 0) owner = std::uint64_t(e.owner);
    Cell mean = std::monostate{};
    if (e.distance_mean) mean = *e.distance_mean;
    t.rows.push_back({e.cycle, owner, e.length, e.accuracy, e.distance_samples, mean});
  }
  return t;
}

}  // namespace remsim
