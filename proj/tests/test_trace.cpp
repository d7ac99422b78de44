#include <fstream>
#include <set>

#include "doctest.h"
#include "remsim/chains.hpp"
#include "remsim/sim.hpp"
#include "remsim/trace.hpp"
#include "test_util.hpp"

using namespace remsim;

namespace {

std::string write_file(const std::string& name, const std::string& text) {
  auto path = testutil::scratch_dir("trace") / name;
  std::ofstream(path) << text;
  return path.string();
}

std::vector<std::size_t> load_indices(const Trace& t) {
  std::vector<std::size_t> v;
  for (std::size_t i = 0; i < t.ops.size(); ++i)
    if (t.ops[i].is_load()) v.push_back(i);
  return v;
}

}  // namespace

TEST_CASE("load_trace reads a single load") {
  auto t = load_trace(write_file("one.trace", "0 0x400 LOAD r1 r2 - - 0x1000 -\n"));
  REQUIRE(t.ops.size() == 1);
  CHECK(t.ops[0].op == OpClass::LOAD);
  CHECK(t.ops[0].dst == 1);
  CHECK(t.ops[0].src[0] == 2);
  CHECK(*t.ops[0].vaddr == 0x1000);
  CHECK(t.arch_reg_count == 16);
  CHECK(t.page_size == 4096);
}

TEST_CASE("empty trace file") {
  CHECK(load_trace(write_file("empty.trace", "")).ops.empty());
  CHECK(parse_trace("# only a comment\n\n").ops.empty());
}

TEST_CASE("load without address names its seq") {
  try {
    parse_trace("0 0x10 IADD r1 - - 1 - -\n7 0x14 LOAD r1 r2 - - - -\n");
    FAIL("expected an invariant error");
  } catch (const InvariantError& e) {
    CHECK(e.seq == 7);
    CHECK(std::string(e.what()).find("seq 7") != std::string::npos);
  }
}

TEST_CASE("parse errors carry the line number") {
  try {
    parse_trace("# header\n0 0x10 IADD r1 - -\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
  CHECK_THROWS_AS(parse_trace("0 0x10 FROB r1 - - - - -\n"), ParseError);
  CHECK_THROWS_AS(parse_trace("0 0x10 BRANCH - r1 - - - 2\n"), ParseError);
}

TEST_CASE("trace invariants") {
  CHECK_THROWS_AS(parse_trace("0 0 IADD r1 - - - - -\n0 4 IADD r1 - - - - -\n"), InvariantError);
  CHECK_THROWS_AS(parse_trace("0 0 BRANCH - r1 - - - -\n"), InvariantError);
  CHECK_THROWS_AS(parse_trace("0 0 STORE r1 r2 r3 - 0x8 -\n"), InvariantError);
  CHECK_THROWS_AS(parse_trace("0 0 IADD - r1 - - - -\n"), InvariantError);
  CHECK_THROWS_AS(parse_trace("0 0 IADD r16 - - - - -\n"), InvariantError);
  CHECK_THROWS_AS(parse_trace("0 0 IADD r1 - - - 0x8 -\n"), InvariantError);
  CHECK_NOTHROW(parse_trace("#!regs 32\n0 0 IADD r16 - - - - -\n"));
}

TEST_CASE("missing trace file") { CHECK_THROWS(load_trace("/nonexistent/remsim.trace")); }

TEST_CASE("pointer chase root loads are mutually independent") {
  PointerChaseParams p;
  p.n_nodes = 4;
  p.footprint = 4ull << 20;
  p.seed = 7;
  Trace t = gen_pointer_chase(p);
  REQUIRE(t.ops.size() == 16);
  std::vector<std::size_t> roots;
  for (std::size_t i = 3; i < t.ops.size(); i += 4) {
    CHECK(t.ops[i].is_load());
    roots.push_back(i);
  }
  for (std::size_t r : roots) {
    auto slice = oracle_slice(t.ops, r);
    for (std::size_t other : roots)
      if (other != r) CHECK(slice.count(other) == 0);
  }
}

TEST_CASE("single-node pointer chase revisits one line") {
  PointerChaseParams p;
  p.n_nodes = 1;
  p.iterations = 4096;
  Trace t = gen_pointer_chase(p);
  std::set<std::uint64_t> lines;
  for (std::size_t i = 3; i < t.ops.size(); i += 4) lines.insert(*t.ops[i].vaddr / 64);
  CHECK(lines.size() == 1);

  SimConfig c;
  auto r = simulate(c, {&t});
  // One fetch for the node line; every other DRAM read is the index array.
  std::uint64_t index_lines = 4096 * 8 / 64 + 1;
  CHECK(r.stats.global.dram_reads <= 1 + index_lines);
}

TEST_CASE("generators are deterministic") {
  PointerChaseParams p;
  p.n_nodes = 256;
  p.seed = 99;
  CHECK(format_trace(gen_pointer_chase(p)) == format_trace(gen_pointer_chase(p)));
  LinkedListParams l;
  l.n_nodes = 128;
  l.work = 3;
  CHECK(format_trace(gen_linked_list(l)) == format_trace(gen_linked_list(l)));
}

TEST_CASE("linked list loads depend on the previous list load") {
  LinkedListParams p;
  p.n_nodes = 3;
  p.node_stride = 64;
  p.seed = 1;
  p.steps = 6;
  Trace t = gen_linked_list(p);
  auto loads = load_indices(t);
  REQUIRE(loads.size() == 6);
  std::set<std::uint64_t> addrs;
  for (std::size_t k = 0; k < loads.size(); ++k) {
    addrs.insert(*t.ops[loads[k]].vaddr);
    if (k) CHECK(oracle_slice(t.ops, loads[k]).count(loads[k - 1]) == 1);
  }
  CHECK(addrs.size() == 3);
  // The walk is a cycle: step k and k+3 visit the same node.
  for (std::size_t k = 0; k + 3 < loads.size(); ++k) CHECK(*t.ops[loads[k]].vaddr == *t.ops[loads[k + 3]].vaddr);
}

TEST_CASE("two-node list alternates") {
  LinkedListParams p;
  p.n_nodes = 2;
  p.steps = 6;
  Trace t = gen_linked_list(p);
  auto loads = load_indices(t);
  auto a = *t.ops[loads[0]].vaddr, b = *t.ops[loads[1]].vaddr;
  CHECK(a != b);
  for (std::size_t k = 0; k < loads.size(); ++k) CHECK(*t.ops[loads[k]].vaddr == (k % 2 ? b : a));
}

TEST_CASE("list seeds change addresses but not dependence shape") {
  LinkedListParams p;
  p.n_nodes = 64;
  p.seed = 1;
  Trace a = gen_linked_list(p);
  p.seed = 2;
  Trace b = gen_linked_list(p);
  REQUIRE(a.ops.size() == b.ops.size());
  bool differ = false;
  for (std::size_t i = 0; i < a.ops.size(); ++i) {
    if (a.ops[i].vaddr != b.ops[i].vaddr) differ = true;
    CHECK(a.ops[i].op == b.ops[i].op);
  }
  CHECK(differ);
  for (std::size_t i : load_indices(a)) CHECK(oracle_slice(a.ops, i) == oracle_slice(b.ops, i));
}

TEST_CASE("clustered lists keep runs inside one block") {
  LinkedListParams p;
  p.n_nodes = 64;
  p.cluster = 8;
  p.node_stride = 64;
  Trace t = gen_linked_list(p);
  auto loads = load_indices(t);
  for (std::size_t k = 0; k < loads.size(); k += 8) {
    std::uint64_t block = (*t.ops[loads[k]].vaddr - 0x40000000ull) / (64 * 8);
    for (std::size_t j = k; j < k + 8; ++j) CHECK((*t.ops[loads[j]].vaddr - 0x40000000ull) / (64 * 8) == block);
  }
  p.cluster = 7;
  CHECK_THROWS_AS(gen_linked_list(p), std::invalid_argument);
}

TEST_CASE("stream addresses") {
  StreamParams p;
  p.lines = 4;
  p.stride = 64;
  auto loads = load_indices(gen_stream(p));
  CHECK(loads.size() == 4);
  Trace t = gen_stream(p);
  for (std::size_t k = 1; k < 4; ++k) CHECK(*t.ops[loads[k]].vaddr - *t.ops[loads[k - 1]].vaddr == 64);

  p.lines = 1;
  CHECK(load_indices(gen_stream(p)).size() == 1);

  p.lines = 100;
  p.stride = 128;
  Trace s = gen_stream(p);
  auto l = load_indices(s);
  for (std::size_t k = 1; k < l.size(); ++k) CHECK(*s.ops[l[k]].vaddr - *s.ops[l[k - 1]].vaddr == 128);
}

TEST_CASE("generator argument errors") {
  PointerChaseParams pc;
  pc.footprint = 32;
  CHECK_THROWS_AS(gen_pointer_chase(pc), std::invalid_argument);
  LinkedListParams ll;
  ll.node_stride = 4;
  CHECK_THROWS_AS(gen_linked_list(ll), std::invalid_argument);
  ll.node_stride = 64;
  ll.n_nodes = 1;
  CHECK_THROWS_AS(gen_linked_list(ll), std::invalid_argument);
  StreamParams st;
  st.stride = 12;
  CHECK_THROWS_AS(gen_stream(st), std::invalid_argument);
}

TEST_CASE("generated traces satisfy invariants and round trip") {
  Rng rng(2024);
  for (int i = 0; i < 60; ++i) {
    Trace t;
    switch (i % 3) {
      case 0: {
        PointerChaseParams p;
        p.n_nodes = 1 + rng.below(200);
        p.footprint = (p.n_nodes + rng.below(4096)) * 64;
        p.chain_gap = rng.below(5);
        p.seed = rng.next();
        t = gen_pointer_chase(p);
        break;
      }
      case 1: {
        LinkedListParams p;
        p.n_nodes = 2 + rng.below(200);
        p.node_stride = 8 * (1 + rng.below(32));
        p.work = rng.below(4);
        p.seed = rng.next();
        p.steps = rng.below(400);
        t = gen_linked_list(p);
        break;
      }
      default: {
        StreamParams p;
        p.lines = 1 + rng.below(300);
        p.stride = 8 * (1 + rng.below(64));
        p.work = rng.below(3);
        t = gen_stream(p);
      }
    }
    CHECK_NOTHROW(validate_trace(t));
    std::string text = format_trace(t);
    Trace back = parse_trace(text);
    CHECK(back.ops == t.ops);
    CHECK(back.init_regs == t.init_regs);
    CHECK(back.memory == t.memory);
    CHECK(format_trace(back) == text);
  }
}

TEST_CASE("store and load files byte-identically") {
  StreamParams p;
  p.lines = 10;
  Trace t = gen_stream(p);
  auto dir = testutil::scratch_dir("rt");
  store_trace(t, (dir / "a.trace").string());
  store_trace(load_trace((dir / "a.trace").string()), (dir / "b.trace").string());
  std::ifstream a(dir / "a.trace"), b(dir / "b.trace");
  std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
}

TEST_CASE("value semantics") {
  auto ev = [](OpClass c, std::uint64_t a, std::uint64_t b, std::optional<std::int64_t> imm = {},
               bool two = true) {
    MicroOp m = testutil::op(c, 0, 1, 2, two ? 3 : kNoReg, imm);
    return evaluate(m, a, b);
  };
  CHECK(ev(OpClass::IADD, 2, 3, 4).value == 9);
  CHECK(ev(OpClass::IMUL, 6, 7).value == 42);
  CHECK(ev(OpClass::IMUL, 6, 0, 5, false).value == 30);
  CHECK(ev(OpClass::LOGIC, 0b1100, 0b1010).value == 0b0110);
  CHECK(ev(OpClass::SHIFT, 1, 0, 4, false).value == 16);
  CHECK(ev(OpClass::SHIFT, 16, 0, -4, false).value == 1);
  CHECK(ev(OpClass::SIGNEXT, 0xFFFFFFFFull, 0, {}, false).value == ~0ull);
  CHECK(ev(OpClass::LOAD, 0x100, 0x20, 8).address == 0x128);
  auto st = ev(OpClass::STORE, 0x100, 77, 8);
  CHECK(st.address == 0x108);
  CHECK(st.value == 77);
  CHECK(ev(OpClass::BRANCH, 1, 1).branch_taken == false);
  CHECK(ev(OpClass::BRANCH, 1, 2).branch_taken == true);
}

TEST_CASE("memory image reads zero for unwritten words") {
  MemoryImage m;
  CHECK(m.read(0x1234) == 0);
  m.write(0x1000, 5);
  CHECK(m.read(0x1004) == 5);
  m.write(0x1000, 0);
  CHECK(m.words().empty());
}
