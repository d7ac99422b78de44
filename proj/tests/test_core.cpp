#include <set>

#include "doctest.h"
#include "remsim/core.hpp"
#include "remsim/sim.hpp"
#include "test_util.hpp"

using namespace remsim;
using testutil::numbered;
using testutil::op;

namespace {

std::vector<RobSlot> rob_of(const std::vector<MicroOp>& ops) {
  return rename_window(ops, std::vector<std::uint64_t>(16, 0x1000), {});
}

// Load r1 <- [r8], MOV r9 <- r1, ADD r12 <- r9 + 0x18, LOAD r10 <- [r12].
std::vector<RobSlot> address_chain(bool first_misses) {
  auto rob = rob_of(numbered({op(OpClass::LOAD, 0, 1, 8), op(OpClass::MOVE, 4, 9, 1),
                              op(OpClass::IADD, 8, 12, 9, kNoReg, 0x18), op(OpClass::LOAD, 12, 10, 12)}));
  rob[0].is_llc_miss = first_misses;
  rob[3].is_llc_miss = true;
  return rob;
}

Trace from_ops(std::vector<MicroOp> ops) {
  Trace t;
  t.ops = numbered(std::move(ops));
  for (auto& o : t.ops)
    if (o.is_mem() && !o.vaddr) o.vaddr = 0;
  t.normalize();
  return t;
}

SimResult run(Mode m, const Trace& t, PrefetcherKind pf = PrefetcherKind::NONE) {
  SimConfig c;
  c.mode = m;
  c.prefetcher = pf;
  return simulate(c, {&t});
}

}  // namespace

TEST_CASE("functional unit latencies") {
  for (auto c : {OpClass::IADD, OpClass::MOVE, OpClass::LOGIC, OpClass::SHIFT, OpClass::SIGNEXT})
    CHECK(fu_latency(c) == 1);
  CHECK(fu_latency(OpClass::IMUL) == 3);
  CHECK(fu_latency(OpClass::FP) == 4);
}

TEST_CASE("miss classification follows the source load") {
  CHECK(classify_miss(address_chain(false), 3) == MissClass::INDEPENDENT);
  CHECK(classify_miss(address_chain(true), 3) == MissClass::DEPENDENT);
  CHECK_THROWS_AS(classify_miss(address_chain(true), 1), std::invalid_argument);
}

TEST_CASE("poison reaches 16 ops and no further") {
  auto build = [](std::size_t gap) {
    std::vector<MicroOp> ops{op(OpClass::LOAD, 0, 1, 8)};
    for (std::size_t i = 1; i < gap; ++i) ops.push_back(op(OpClass::IADD, 4 * i, 2, 2, kNoReg, 1));
    ops.push_back(op(OpClass::LOAD, 0x400, 3, 1));
    auto rob = rob_of(numbered(ops));
    rob.front().is_llc_miss = true;
    rob.back().is_llc_miss = true;
    return classify_miss(rob, rob.size() - 1);
  };
  CHECK(build(16) == MissClass::DEPENDENT);
  CHECK(build(17) == MissClass::INDEPENDENT);
}

TEST_CASE("runahead gating") {
  CHECK_FALSE(runahead_allowed(true, 1300, 1000, std::nullopt));
  CHECK(runahead_allowed(true, 1000, 990, std::nullopt));
  CHECK_FALSE(runahead_allowed(true, 1000, 990, 1200));
  CHECK(runahead_allowed(true, 1300, 1290, 1200));
  CHECK(runahead_allowed(false, 5000, 0, 9000));
}

TEST_CASE("runahead cache forwards, evicts LRU and clears") {
  RunaheadCache rc;
  CHECK_FALSE(rc.lookup(0x100));
  rc.write(0x100, 7, false);
  rc.write(0x108, 9, true);
  CHECK(rc.lookup(0x104)->value == 7);
  CHECK(rc.lookup(0x108)->poisoned);
  // Five lines of one set: the least recently used one is replaced.
  RunaheadCache set;
  const std::uint64_t stride = RunaheadCache::kSets * 8;
  for (std::uint64_t i = 0; i < 4; ++i) set.write(0x1000 + i * stride, i, false);
  set.lookup(0x1000);
  set.write(0x1000 + 4 * stride, 4, false);
  CHECK(set.lookup(0x1000));
  CHECK_FALSE(set.lookup(0x1000 + stride));
  for (std::uint64_t i = 0; i < 200; ++i) set.write(i * 8, i, false);
  CHECK(set.occupancy() == RunaheadCache::kSets * RunaheadCache::kWays);
  set.clear();
  CHECK(set.occupancy() == 0);
}

TEST_CASE("independent ALU ops retire four per cycle") {
  std::vector<MicroOp> ops;
  for (int i = 0; i < 16000; ++i) ops.push_back(op(OpClass::MOVE, 0x100 + 4 * (i % 16), RegId(i % 16), kNoReg, kNoReg, i));
  Trace t = from_ops(ops);
  auto r = run(Mode::BASELINE, t);
  CHECK(r.stats.cores[0].retired == 16000);
  // 4000 full-width cycles plus a short pipeline fill.
  CHECK(r.stats.cores[0].cycles >= 4000);
  CHECK(r.stats.cores[0].ipc() > 3.95);
}

TEST_CASE("dependent chain retires one op per cycle") {
  std::vector<MicroOp> ops;
  for (int i = 0; i < 4000; ++i) ops.push_back(op(OpClass::IADD, 0x100, 1, 1, kNoReg, 1));
  auto r = run(Mode::BASELINE, from_ops(ops));
  CHECK(r.stats.cores[0].ipc() == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("run finishes with every op retired and sane counters") {
  PointerChaseParams p;
  p.n_nodes = 4096;
  p.footprint = 8ull << 20;
  Trace t = gen_pointer_chase(p);
  for (Mode m : {Mode::BASELINE, Mode::RUNAHEAD, Mode::RUNAHEAD_BUFFER}) {
    auto r = run(m, t);
    const CoreRow& c = r.stats.cores[0];
    CHECK(c.retired == t.ops.size());
    CHECK(c.stall_cycles <= c.cycles);
    CHECK(c.llc_misses > 0);
  }
}

TEST_CASE("instruction limit") {
  StreamParams p;
  p.lines = 1000;
  Trace t = gen_stream(p);
  SimConfig c;
  c.max_instructions = 300;
  auto r = simulate(c, {&t});
  CHECK(r.stats.cores[0].retired == 300);
}

TEST_CASE("runahead leaves retired state untouched") {
  std::vector<Trace> traces;
  PointerChaseParams pc;
  pc.n_nodes = 2048;
  pc.footprint = 4ull << 20;
  pc.chain_gap = 2;
  traces.push_back(gen_pointer_chase(pc));
  LinkedListParams ll;
  ll.n_nodes = 2048;
  ll.work = 4;
  traces.push_back(gen_linked_list(ll));
  for (const Trace& t : traces) {
    auto base = run(Mode::BASELINE, t);
    for (Mode m : {Mode::RUNAHEAD, Mode::RUNAHEAD_BUFFER, Mode::HYBRID, Mode::EMC_DEP, Mode::RA_EMC}) {
      auto r = run(m, t);
      CHECK_MESSAGE(r.digests == base.digests, mode_name(m));
    }
  }
}

TEST_CASE("interval misses add up to the runahead fetch counter") {
  PointerChaseParams p;
  p.n_nodes = 8192;
  p.footprint = 16ull << 20;
  Trace t = gen_pointer_chase(p);
  for (Mode m : {Mode::RUNAHEAD, Mode::RUNAHEAD_BUFFER}) {
    auto r = run(m, t);
    const auto& iv = r.runahead_intervals[0];
    REQUIRE(!iv.empty());
    std::uint64_t misses = 0, uops = 0;
    std::uint64_t prev_end = 0;
    for (std::size_t i = 0; i < iv.size(); ++i) {
      CHECK(iv[i].id == i);
      CHECK(iv[i].start_cycle >= prev_end);
      prev_end = iv[i].start_cycle + iv[i].cycles;
      misses += iv[i].misses;
      uops += iv[i].uops;
    }
    CHECK(misses == r.stats.global.ra_fetched);
    CHECK(misses == r.stats.cores[0].runahead_misses);
    CHECK(uops == r.stats.cores[0].runahead_uops);
    CHECK(r.stats.global.ra_useful <= r.stats.global.ra_fetched);
  }
}

TEST_CASE("runahead loads see older runahead stores") {
  // The blocking miss is followed by enough filler to fill the ROB; past it a
  // store writes a pointer that a later load reads and dereferences. Only
  // store forwarding in runahead can prefetch the pointed-to line.
  std::vector<MicroOp> ops;
  auto load = [](std::uint64_t pc, RegId d, RegId s) { return op(OpClass::LOAD, pc, d, s); };
  ops.push_back(load(0x10, 1, 8));
  for (int i = 0; i < 300; ++i) ops.push_back(op(OpClass::IADD, 0x100 + 4 * (i % 8), RegId(2 + i % 4), kNoReg, kNoReg, i));
  ops.push_back(op(OpClass::STORE, 0x20, kNoReg, 9, 10));  // [X] <- Y
  ops.push_back(load(0x24, 11, 9));                        // r11 <- [X]
  ops.push_back(load(0x28, 12, 11));                       // r12 <- [Y]
  Trace t;
  t.ops = numbered(ops);
  t.normalize();
  t.init_regs[8] = 0x7000000;   // blocking miss
  t.init_regs[9] = 0x9000000;   // X
  t.init_regs[10] = 0xB000000;  // Y
  // Assign vaddrs from the register values.
  std::vector<std::uint64_t> regs = t.init_regs;
  MemoryImage mem;
  for (auto& o : t.ops) {
    auto v = [&](RegId r) { return r == kNoReg ? 0 : regs[r]; };
    auto res = evaluate(o, v(o.src[0]), v(o.src[1]));
    if (o.is_load()) {
      o.vaddr = res.address;
      regs[o.dst] = mem.read(res.address);
    } else if (o.is_store()) {
      o.vaddr = res.address;
      mem.write(res.address, res.value);
    } else {
      regs[o.dst] = res.value;
    }
  }
  REQUIRE_NOTHROW(validate_trace(t));
  auto r = run(Mode::RUNAHEAD, t);
  CHECK(r.stats.cores[0].runahead_intervals >= 1);
  CHECK(r.stats.global.ra_useful >= 1);
  CHECK(r.digests == run(Mode::BASELINE, t).digests);
}

TEST_CASE("snapshot reflects the ROB") {
  StreamParams p;
  p.lines = 64;
  Trace t = gen_stream(p);
  SimConfig c;
  MemorySystem mem(derived_mem_config(c), [](int) { return 0; });
  Core core(0, derived_core_config(c), t, mem);
  for (std::uint64_t cyc = 0; cyc < 3; ++cyc) {
    mem.tick(cyc);
    core.step(cyc);
    mem.dram_tick(cyc);
  }
  auto snap = core.snapshot();
  CHECK(snap.size() == core.rob_occupancy());
  CHECK(snap.size() <= 12);
  for (std::size_t i = 1; i < snap.size(); ++i) CHECK(snap[i].uop.seq == snap[i - 1].uop.seq + 1);
}
