#include "doctest.h"
#include "remsim/emc.hpp"
#include "remsim/sim.hpp"
#include "test_util.hpp"

using namespace remsim;
using testutil::op;

namespace {

// One core, its memory system and an EMC, stepped together without running
// the core itself.
struct Rig {
  Trace trace;
  MemorySystem mem;
  Core core;
  Emc emc;
  std::vector<EmcIssueRecord> log;
  std::uint64_t cycle = 0;

  Rig(Trace t, EmcConfig cfg)
      : trace(std::move(t)),
        mem(MemConfig{}, [this](int) { return core.retired(); }),
        core(0, CoreConfig{}, trace, mem),
        emc(cfg, mem, {&core}) {
    emc.set_issue_log(&log);
  }

  void run(std::uint64_t cycles) {
    for (std::uint64_t end = cycle + cycles; cycle < end; ++cycle) {
      mem.tick(cycle);
      mem.core_deliveries(0).clear();
      emc.step(cycle);
      mem.dram_tick(cycle);
    }
  }
};

Trace empty_trace() {
  Trace t;
  t.ops.push_back(op(OpClass::IADD, 0, 1, kNoReg, kNoReg, 1));
  t.normalize();
  return t;
}

EmcConfig both() {
  EmcConfig c;
  c.dep = true;
  c.ra = true;
  return c;
}

DependenceChain dep_chain(std::size_t n_ops, std::size_t n_live_ins) {
  DependenceChain c;
  c.kind = ChainKind::EMC_DEP;
  c.source_reg = 0;
  c.source_addr = 0x100;
  for (std::size_t i = 0; i < n_ops; ++i) c.ops.push_back({op(OpClass::IADD, 0x10 + 4 * i, 1, 0, kNoReg, 1), 0});
  for (std::size_t i = 0; i < n_live_ins; ++i) c.live_ins.push_back({kNoReg, i, kNoReg});
  return c;
}

}  // namespace

TEST_CASE("update interval table") {
  CHECK(update_interval(0.93) == 50000);
  CHECK(update_interval(0.96) == 100000);
  CHECK(update_interval(0.10) == 10000);
  CHECK(update_interval(0.95) == 50000);
  CHECK(update_interval(0.90) == 20000);
  CHECK(update_interval(0.85) == 10000);
  CHECK(update_interval(0.86) == 20000);
  CHECK(update_interval(1.0) == 100000);
}

TEST_CASE("runahead core selection") {
  std::vector<CoreView> v{{9, 0.5, 3}, {1, 0.2, 50}, {12, 0.7, 8}};
  CHECK(select_runahead_core(EmcPolicy::ROUND_ROBIN, v, 0) == 2);
  CHECK(select_runahead_core(EmcPolicy::ROUND_ROBIN, v, 2) == 0);
  CHECK(select_runahead_core(EmcPolicy::ROUND_ROBIN, v, std::nullopt) == 0);
  CHECK(select_runahead_core(EmcPolicy::IPC, {{9, 0.3, 0}, {9, 0.9, 0}}, std::nullopt) == 0);
  CHECK(select_runahead_core(EmcPolicy::IPC, v, std::nullopt) == 0);
  CHECK(select_runahead_core(EmcPolicy::SCORE, v, std::nullopt) == 2);
  std::vector<CoreView> quiet{{5, 1, 9}, {0, 1, 9}};
  for (auto p : {EmcPolicy::ROUND_ROBIN, EmcPolicy::IPC, EmcPolicy::SCORE})
    CHECK_FALSE(select_runahead_core(p, quiet, 0));
}

TEST_CASE("coordinated throttling") {
  auto a = coordinate_throttle(0.9, 0.6);
  CHECK(a.halve_ghb);
  CHECK_FALSE(a.ra_width_one);
  a = coordinate_throttle(0.5, 0.9);
  CHECK_FALSE(a.halve_ghb);
  CHECK(a.ra_width_one);
  a = coordinate_throttle(0.7, 0.7);
  CHECK_FALSE(a.halve_ghb);
  CHECK_FALSE(a.ra_width_one);
}

TEST_CASE("miss predictor counters") {
  MissPredictor mp(2);
  CHECK_FALSE(mp.predict(0, 0x40));
  for (int i = 0; i < 3; ++i) mp.update(0, 0x40, true);
  CHECK_FALSE(mp.predict(0, 0x40));
  mp.update(0, 0x40, true);
  CHECK(mp.predict(0, 0x40));
  CHECK_FALSE(mp.predict(1, 0x40));
  for (int i = 0; i < 10; ++i) mp.update(0, 0x40, true);
  CHECK(mp.counter(0, 0x40) == 7);

  MissPredictor alt;
  for (int i = 0; i < 20; ++i) {
    alt.update(0, 8, false);
    alt.update(0, 8, true);
    CHECK(alt.counter(0, 8) <= 1);
    CHECK_FALSE(alt.predict(0, 8));
  }
}

TEST_CASE("EMC TLB is a per-core circular buffer") {
  EmcTlb tlb(2);
  tlb.insert(0, 7);
  CHECK(tlb.check(0, 7));
  CHECK_FALSE(tlb.check(1, 7));
  for (std::uint64_t p = 100; p < 132; ++p) tlb.insert(0, p);
  CHECK(tlb.size(0) == EmcTlb::kEntries);
  CHECK_FALSE(tlb.check(0, 7));
  CHECK(tlb.check(0, 100));
  tlb.insert(0, 200);
  CHECK_FALSE(tlb.check(0, 100));
  CHECK(tlb.check(0, 101));
  tlb.insert(0, 101);  // refresh of a present page keeps the size
  CHECK(tlb.size(0) == EmcTlb::kEntries);
}

TEST_CASE("policy names") {
  for (auto p : {EmcPolicy::ROUND_ROBIN, EmcPolicy::IPC, EmcPolicy::SCORE})
    CHECK(emc_policy_from_name(emc_policy_name(p)) == p);
  CHECK_FALSE(emc_policy_from_name("lottery"));
}

TEST_CASE("chain shipping costs data messages by size") {
  Rig r(empty_trace(), both());
  auto before = r.mem.ring().data_messages();
  r.emc.ship_dep_chain(0, dep_chain(10, 7), 0);
  CHECK(r.mem.ring().data_messages() - before == 2);
  before = r.mem.ring().data_messages();
  r.emc.ship_dep_chain(0, dep_chain(8, 0), 0);
  CHECK(r.mem.ring().data_messages() - before == 1);
}

TEST_CASE("a third concurrent dependent chain is rejected") {
  Rig r(empty_trace(), both());
  for (int i = 0; i < 3; ++i) r.emc.ship_dep_chain(0, dep_chain(4, 1), 0);
  r.run(4);
  CHECK(r.emc.stats().dep_accepted == 2);
  CHECK(r.emc.stats().dep_rejected == 1);
  CHECK(r.emc.stats().dep_rejected_by_core[0] == 1);
  r.run(100);
  CHECK(r.emc.stats().dep_completed == 2);
  CHECK(r.emc.stats().dep_uops == 8);
  CHECK(r.emc.idle());
}

TEST_CASE("dependent uops issue before runahead uops") {
  Trace t = empty_trace();
  t.memory.write(0x100, 0x200);
  Rig r(std::move(t), both());
  DependenceChain dep = dep_chain(0, 0);
  dep.ops.push_back({op(OpClass::LOAD, 0x20, 1, 0, kNoReg, 0x40), 0});
  DependenceChain ra;
  ra.kind = ChainKind::EMC_RA;
  ra.ops.push_back({op(OpClass::LOAD, 0x30, 2, 3, kNoReg, 0), 0});
  ra.live_ins.push_back({3, 0x2000, 3});
  ra.source_addr = 0x2000;
  r.emc.ship_ra_chain(0, ra, 0);
  r.emc.ship_dep_chain(0, dep, 0);
  r.run(3);
  REQUIRE(r.log.size() >= 2);
  // Both loads are ready in the same cycle; the single port goes to DEP.
  CHECK(r.log[0].kind == ChainKind::EMC_DEP);
  CHECK(r.log[0].op == OpClass::LOAD);
  CHECK(r.log[1].kind == ChainKind::EMC_RA);
  CHECK(r.log[1].cycle > r.log[0].cycle);
}

TEST_CASE("a mispredicted branch stops the dependent chain") {
  Rig r(empty_trace(), both());
  DependenceChain c = dep_chain(1, 0);
  MicroOp br = op(OpClass::BRANCH, 0x30, kNoReg, 1);
  br.taken = false;  // r1 = source + 1 is non-zero, so the branch is taken
  c.ops.push_back({br, 0});
  r.emc.ship_dep_chain(0, c, 0);
  r.run(50);
  CHECK(r.emc.stats().branch_stops == 1);
  CHECK(r.emc.stats().dep_completed == 0);
  CHECK(r.emc.idle());
}

TEST_CASE("an access outside the TLB aborts the chain") {
  Trace t = empty_trace();
  t.memory.write(0x100, 0x900000);  // pointer into another page
  Rig r(std::move(t), both());
  DependenceChain c = dep_chain(0, 0);
  c.ops.push_back({op(OpClass::LOAD, 0x20, 1, 0), 0});
  r.emc.ship_dep_chain(0, c, 0);
  r.run(50);
  CHECK(r.emc.stats().aborts == 1);
  CHECK(r.emc.tlb().check(0, 0x900000 / 4096));
  CHECK(r.emc.idle());
}

TEST_CASE("runahead chain walks the linked list") {
  LinkedListParams lp;
  lp.n_nodes = 4096;
  lp.steps = 64;
  lp.page_size = 2 << 20;
  Trace t = gen_linked_list(lp);
  auto rob = rename_window(std::span(t.ops).first(12), t.init_regs, t.memory);
  auto chain = extract_runahead_chain(rob, 0x500000);
  REQUIRE(chain);
  std::uint64_t start = 0;
  for (const auto& s : rob)
    if (s.uop.pc == 0x500000) {
      chain->source_addr = s.addr;
      start = s.value;
    }
  EmcConfig cfg;
  cfg.ra = true;
  Rig r(t, cfg);
  r.emc.ship_ra_chain(0, *chain, 0);
  r.run(20000);
  CHECK(r.emc.stats().ra_chains == 1);
  CHECK(r.emc.stats().aborts == 0);
  CHECK(r.emc.stats().ra_loads >= 20);
  // The next 20 nodes of the list are now cached.
  std::uint64_t node = start;
  for (int i = 0; i < 20; ++i) {
    CHECK(r.mem.llc_contains(line_of(r.core.paddr(node))));
    node = t.memory.read(node);
  }
  CHECK(r.mem.emc_ra_counters().fetched >= 20);
}

TEST_CASE("replacing the runahead chain restarts it") {
  LinkedListParams lp;
  lp.n_nodes = 4096;
  lp.steps = 64;
  lp.page_size = 2 << 20;
  Trace t = gen_linked_list(lp);
  auto rob = rename_window(std::span(t.ops).first(12), t.init_regs, t.memory);
  auto chain = extract_runahead_chain(rob, 0x500000);
  REQUIRE(chain);
  for (const auto& s : rob)
    if (s.uop.pc == 0x500000) chain->source_addr = s.addr;
  EmcConfig cfg;
  cfg.ra = true;
  Rig r(t, cfg);
  r.emc.ship_ra_chain(0, *chain, 0);
  r.run(3000);
  const auto iterations = r.emc.stats().ra_iterations;
  CHECK(iterations > 0);
  const auto loads = r.emc.stats().ra_loads;
  r.emc.ship_ra_chain(0, *chain, r.cycle);
  r.run(3000);
  CHECK(r.emc.stats().ra_chains == 2);
  // The replacement walks the same list again from its live-ins; those
  // nodes now hit, so it gets further than the first chain did.
  CHECK(r.emc.stats().ra_loads - loads > loads);
}

TEST_CASE("dependent-miss priority holds in full runs") {
  std::vector<Trace> traces;
  LinkedListParams lp;
  lp.n_nodes = 8192;
  lp.steps = 6000;
  lp.work = 6;
  lp.page_size = 2 << 20;
  traces.push_back(gen_linked_list(lp));
  PointerChaseParams pp;
  pp.n_nodes = 8192;
  pp.footprint = 16ull << 20;
  pp.page_size = 2 << 20;
  traces.push_back(gen_pointer_chase(pp));
  SimConfig c;
  c.cores = 2;
  c.mode = Mode::RA_EMC_DEP;
  c.emc_interval = 2000;
  std::vector<EmcIssueRecord> log;
  SimHooks h;
  h.emc_issue_log = &log;
  auto r = simulate(c, {&traces[0], &traces[1]}, h);
  CHECK(r.emc.dep_uops > 0);
  CHECK(r.emc.ra_uops > 0);
  std::map<std::uint64_t, unsigned> per_cycle;
  for (const auto& e : log) {
    CHECK_FALSE((e.kind == ChainKind::EMC_RA && e.dep_ready_left));
    REQUIRE(++per_cycle[e.cycle] <= 2);
  }
  SimConfig b = c;
  b.mode = Mode::BASELINE;
  CHECK(simulate(b, {&traces[0], &traces[1]}).digests == r.digests);
}
