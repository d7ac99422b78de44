// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "dram_checker.hpp"
#include "remsim/chains.hpp"
#include "remsim/emc.hpp"
#include "remsim/matrix.hpp"
#include "remsim/prefetch.hpp"
#include "remsim/sim.hpp"
#include "test_util.hpp"

using namespace remsim;
using testutil::numbered;
using testutil::op;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::set<std::size_t> chain_indices(const DependenceChain& c) {
  std::set<std::size_t> s;
  for (const auto& o : c.ops)
    if (o.uop.op != OpClass::MAP) s.insert(o.rob_uid - 1);
  return s;
}

std::vector<RobSlot> rob_of(const std::vector<MicroOp>& ops) {
  return rename_window(ops, std::vector<std::uint64_t>(16, 0), {});
}

Outcome slicer_oracle() {
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(20240601);
  int match = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    auto w = testutil::random_window(rng, 512, 0xABC0);
    auto rob = rob_of(w);
    auto c = extract_backwards(rob, 0xABC0, kUnbounded);
    if (!c) continue;
    const std::size_t m = c->ops.back().rob_uid - 1;
    match += chain_indices(*c) == oracle_slice(w, m);
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {match == n && secs < 10.0, fmt("%d/%d windows match, %.2f s", match, n, secs)};
}

Outcome walkthroughs() {
  auto backward = rob_of(numbered({
      op(OpClass::LOAD, 0xA, 2, 7),
      op(OpClass::LOAD, 0xD, 5, 3),
      op(OpClass::IADD, 0xE, 9, 4, 5),
      op(OpClass::IADD, 0xF, 6, 9, 1),
      op(OpClass::MOVE, 0x10, 7, 6),
      op(OpClass::LOAD, 0xA, 2, 7),
  }));
  auto forward = rob_of(numbered({
      op(OpClass::LOAD, 0x100, 1, 8),
      op(OpClass::MOVE, 0x104, 9, 1),
      op(OpClass::IADD, 0x108, 12, 9, kNoReg, 0x18),
      op(OpClass::LOAD, 0x10c, 10, 12),
      op(OpClass::IADD, 0x110, 11, 10, kNoReg, 0x20),
      op(OpClass::LOAD, 0x114, 13, 11),
  }));
  auto b = extract_backwards(backward, 0xA);
  auto f = extract_forward(forward, 0);
  const unsigned bc = b ? b->gen_cycles : 0, fc = f.gen_cycles;
  return {bc == 7 && fc == 5, fmt("backward walk %u cycles, forward walk %u cycles", bc, fc)};
}

Outcome interpreter() {
  Rng rng(77);
  int done = 0, match = 0, attempts = 0;
  while (done < 100 && attempts < 100000) {
    ++attempts;
    auto lw = testutil::random_loop(rng, 0x9000, 3);
    auto rob = rename_window(lw.ops, lw.init_regs, lw.memory);
    auto c = extract_runahead_chain(rob, 0x9000);
    if (!c || c->map_count() == 0) continue;
    ++done;
    match += interpret_chain(*c, lw.memory, 8) == testutil::interpret_unrolled(c->source_ops, c->live_ins, lw.memory, 8);
  }
  return {done == 100 && match == 100, fmt("%d/%d chains with MAP match", match, done)};
}

Outcome transparency() {
  const std::vector<std::string> suite{
      "gen:pointer-chase:n_nodes=2048,iterations=3000,page_size=2097152",
      "gen:pointer-chase:n_nodes=512,chain_gap=3,iterations=1500",
      "gen:linked-list:n_nodes=2048,steps=1500,work=2",
      "gen:linked-list:n_nodes=4096,steps=1500,page_size=2097152,cluster=8",
      "gen:stream:lines=3000,work=4",
      "gen:stream:lines=2000,stride=192",
  };
  const std::vector<PrefetcherKind> pfs{PrefetcherKind::NONE, PrefetcherKind::STREAM, PrefetcherKind::GHB,
                                        PrefetcherKind::MARKOV_STREAM};
  std::size_t runs = 0, bad = 0;
  std::string first;
  for (const std::string& spec : suite) {
    Trace t = resolve_trace(spec, 1);
    SimConfig base;
    base.traces = {spec};
    const auto ref = simulate(base, {&t}).digests;
    for (Mode m : all_modes())
      for (PrefetcherKind pf : pfs) {
        SimConfig c = base;
        c.mode = m;
        c.prefetcher = pf;
        ++runs;
        if (simulate(c, {&t}).digests != ref) {
          if (!bad++) first = spec + " " + mode_name(m) + "/" + prefetcher_name(pf);
        }
      }
  }
  // Multi-core: each core's digest is independent of the others' modes.
  SimConfig mc = parse_config(
      "cores=4\ntraces=gen:stream:lines=1500;gen:stream:lines=1500,stride=128;gen:pointer-chase:iterations=800;"
      "gen:linked-list:steps=800\n");
  const auto mref = simulate(mc).digests;
  for (Mode m : all_modes()) {
    SimConfig c = mc;
    c.mode = m;
    c.prefetcher = PrefetcherKind::GHB;
    ++runs;
    if (simulate(c).digests != mref && !bad++) first = std::string("4-core ") + mode_name(m);
  }
  return {bad == 0, fmt("%zu runs, %zu digest mismatches%s%s", runs, bad, bad ? ", first: " : "", first.c_str())};
}

Outcome dram_timing() {
  DramConfig cfg;
  BankState closed;
  BankState open;
  open.open_row = 5;
  const unsigned hit = dram_latency(open, 5, cfg.timing), miss = dram_latency(closed, 5, cfg.timing),
                 conflict = dram_latency(open, 6, cfg.timing);
  // Oracle: tCAS + burst, tRCD + tCAS + burst, tRP + tRCD + tCAS + burst.
  const auto& t = cfg.timing;
  const bool lat_ok = hit == 60 && miss == 104 && conflict == 148 && hit == t.tCAS + t.burst &&
                      miss == t.tRCD + t.tCAS + t.burst && conflict == t.tRP + t.tRCD + t.tCAS + t.burst;

  cfg.queue_cap = 128;
  cfg.batching = true;
  Dram d(cfg);
  std::vector<DramCommand> log;
  log.reserve(3'200'000);
  d.set_command_log(&log);
  Rng rng(99);
  const std::uint64_t total = 1'000'000;
  std::uint64_t sent = 0, done = 0, cycle = 0;
  std::vector<std::uint64_t> hot(4);
  for (auto& h : hot) h = rng.below(1 << 22);
  while (done < total) {
    while (sent < total && d.queued() < cfg.queue_cap) {
      DramRequest r;
      r.id = ++sent;
      r.core = int(rng.below(4));
      // Mix of row-local streams and scattered lines to exercise hits,
      // closed rows and conflicts.
      if (rng.below(3)) {
        hot[r.core] += 1 + rng.below(4);
        r.line = hot[r.core];
      } else {
        r.line = rng.below(1 << 22);
      }
      r.write = rng.below(5) == 0;
      r.demand = !r.write && rng.below(4) != 0;
      r.kind = r.write ? ReqKind::STORE : r.demand ? ReqKind::LOAD : ReqKind::PREFETCH;
      r.arrival = cycle;
      d.enqueue(r);
    }
    done += d.tick(cycle).size();
    ++cycle;
  }
  auto violation = testutil::check_dram_log(log, cfg.timing);
  const auto& s = d.stats();
  return {lat_ok && !violation,
          fmt("latencies %u/%u/%u, %llu requests, %zu commands, hits %llu closed %llu conflicts %llu, %s", hit, miss,
              conflict, (unsigned long long)done, log.size(), (unsigned long long)s.row_hits,
              (unsigned long long)s.row_closed, (unsigned long long)s.row_conflicts,
              violation ? violation->c_str() : "no violations")};
}

struct MlpStats {
  double misses_per_interval = 0, uops_per_miss = 0;
  std::uint64_t intervals = 0;
};

MlpStats mlp(const SimResult& r) {
  MlpStats m;
  std::uint64_t uops = 0, misses = 0;
  for (const auto& iv : r.runahead_intervals[0]) {
    if (iv.mode == CoreMode::NORMAL) continue;
    ++m.intervals;
    uops += iv.uops;
    misses += iv.misses;
  }
  if (m.intervals) m.misses_per_interval = double(misses) / double(m.intervals);
  m.uops_per_miss = misses ? double(uops) / double(misses) : INFINITY;
  return m;
}

Outcome directional_mlp() {
  // 4 MiB of nodes against a 1 MiB LLC, eight independent ops between chain
  // iterations.
  const std::string spec = "gen:pointer-chase:n_nodes=65536,footprint=4194304,chain_gap=8,iterations=20000";
  Trace t = resolve_trace(spec, 1);
  SimConfig c;
  c.traces = {spec};
  c.mode = Mode::RUNAHEAD;
  auto trad = mlp(simulate(c, {&t}));
  c.mode = Mode::RUNAHEAD_BUFFER;
  auto buf = mlp(simulate(c, {&t}));
  const bool ok = trad.intervals && buf.intervals && buf.misses_per_interval > trad.misses_per_interval &&
                  buf.uops_per_miss < trad.uops_per_miss;
  return {ok, fmt("misses/interval buffer %.2f vs traditional %.2f; uops/miss buffer %.2f vs traditional %.2f "
                  "(%llu / %llu intervals)",
                  buf.misses_per_interval, trad.misses_per_interval, buf.uops_per_miss, trad.uops_per_miss,
                  (unsigned long long)buf.intervals, (unsigned long long)trad.intervals)};
}

Outcome dependent_latency() {
  SimConfig c = parse_config(
      "cores=4\n"
      "traces=gen:stream:lines=40000;gen:stream:lines=40000;gen:stream:lines=40000;"
      "gen:linked-list:n_nodes=65536,node_stride=64,steps=20000,page_size=2097152,work=6\n");
  auto base = simulate(c);
  c.mode = Mode::EMC_DEP;
  auto emc = simulate(c);
  auto core_mean = base.stats.cores[3].dep_latency.mean();
  auto emc_mean = emc.stats.cores[3].emc_dep_latency.mean();
  const double rb = base.stats.global.row_conflict_rate(), re = emc.stats.global.row_conflict_rate();
  if (!core_mean || !emc_mean)
    return {false, fmt("no samples (core %llu, emc %llu)", (unsigned long long)base.stats.cores[3].dep_latency.count(),
                       (unsigned long long)emc.stats.cores[3].emc_dep_latency.count())};
  const double cut = 1.0 - *emc_mean / *core_mean;
  return {cut >= 0.10 && re <= rb,
          fmt("EMC dependent-miss latency %.1f vs core %.1f cycles (%.1f%% lower, need >= 10%%); "
              "row conflict rate %.4f vs %.4f",
              *emc_mean, *core_mean, 100 * cut, re, rb)};
}

Outcome policy_tables() {
  auto oracle = [](double a) -> std::uint64_t {
    if (a > 0.95) return 100000;
    if (a > 0.90) return 50000;
    if (a > 0.85) return 20000;
    return 10000;
  };
  bool table = true;
  for (double edge : {0.95, 0.90, 0.85})
    for (double a : {std::nextafter(edge, 2.0), edge, std::nextafter(edge, -1.0)})
      table = table && update_interval(a) == oracle(a);
  table = table && update_interval(1.0) == 100000 && update_interval(0.0) == 10000;

  PcMissTable pcs;
  for (int i = 0; i < 10; ++i) pcs.update(0x40, false);
  PcMissTable pcs2 = pcs;
  const bool gate = !pcs.mark_top_pc(5.0) && !pcs.mark_top_pc(4.99) && pcs2.mark_top_pc(5.01) == 0x40u;

  Rng rng(8);
  bool bounds = true;
  for (int s = 0; s < 10000; ++s) {
    unsigned d = 1 + unsigned(rng.below(32));
    for (int i = 0; i < 20; ++i) {
      d = fdp_adjust(d, rng.unit());
      bounds = bounds && d >= 1 && d <= 32;
    }
  }
  return {table && gate && bounds, fmt("interval table %s, MPKI gate %s, FDP bounds %s", table ? "ok" : "wrong",
                                       gate ? "ok" : "wrong", bounds ? "ok" : "violated")};
}

std::string csv_text(const Table& t) {
  std::ostringstream os;
  write_csv(t, os);
  return os.str();
}

Outcome determinism() {
  MatrixSpec spec = parse_matrix_spec(
      "modes = runahead, runahead-buffer, hybrid, emc-dep, ra-emc, ra-emc-dep\n"
      "prefetchers = none, stream, ghb\n"
      "workload.chase = gen:pointer-chase:n_nodes=4096,iterations=1500,page_size=2097152\n"
      "workload.quad = gen:stream:lines=1500;gen:stream:lines=1500;gen:pointer-chase:iterations=600;"
      "gen:linked-list:n_nodes=2048,steps=600,page_size=2097152\n");
  auto a = run_matrix(spec, 1);
  auto b = run_matrix(spec, 4);
  bool same = csv_text(a.summary) == csv_text(b.summary);
  std::size_t files = 1;
  for (std::size_t i = 0; i < a.cells.size() && same; ++i) {
    const auto &ra = a.outcomes[i].result, &rb = b.outcomes[i].result;
    same = csv_text(stats_table(ra.stats)) == csv_text(stats_table(rb.stats)) &&
           csv_text(runahead_interval_table(ra)) == csv_text(runahead_interval_table(rb)) &&
           csv_text(emc_interval_table(ra)) == csv_text(emc_interval_table(rb));
    files += 3;
  }
  const bool clean = a.config_errors + a.sim_errors == 0;
  return {same && clean, fmt("%zu cells, %zu CSVs compared, %s, %zu errors", a.cells.size(), files,
                             same ? "identical" : "different", a.config_errors + a.sim_errors)};
}

Outcome continuous_reach() {
  SimConfig c = parse_config(
      "mode=ra-emc\nemc_interval=20000\n"
      "traces=gen:pointer-chase:n_nodes=65536,footprint=4194304,iterations=120000,page_size=2097152\n");
  auto r = simulate(c);
  std::vector<double> d;
  for (const auto& iv : r.emc_intervals)
    if (iv.distance_mean) d.push_back(*iv.distance_mean);
  if (d.size() < 10) return {false, fmt("only %zu intervals with distance samples", d.size())};
  std::vector<double> last(d.end() - 10, d.end());
  double mean = 0, var = 0;
  for (double x : last) mean += x / 10;
  for (double x : last) var += (x - mean) * (x - mean) / 10;
  const double cv = mean > 0 ? std::sqrt(var) / mean : INFINITY;
  return {mean > 0 && cv < 0.5, fmt("last-10 mean distance %.1f instructions, variance %.1f, stddev/mean %.3f "
                                    "(%zu intervals)",
                                    mean, var, cv, d.size())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"slicer matches the oracle on random windows", slicer_oracle},
      {"walkthrough generation latencies", walkthroughs},
      {"runahead chain interpreter matches unrolled execution", interpreter},
      {"retired state identical across modes and prefetchers", transparency},
      {"DRAM latencies and command timing", dram_timing},
      {"runahead buffer raises MLP over traditional runahead", directional_mlp},
      {"EMC cuts dependent-miss latency under contention", dependent_latency},
      {"interval table, MPKI gate and FDP bounds", policy_tables},
      {"matrix CSVs independent of parallelism", determinism},
      {"continuous runahead reaches a steady distance", continuous_reach},
  };
  int only = argc > 1 ? std::atoi(argv[1]) : 0;
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && int(i + 1) != only) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
