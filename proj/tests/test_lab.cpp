#include <map>
#include <set>

#include "doctest.h"
#include "remsim/lab.hpp"
#include "remsim/sim.hpp"
#include "test_util.hpp"

using namespace remsim;
using testutil::numbered;
using testutil::op;

namespace {

constexpr std::uint64_t kA = 0xA0, kB = 0xB0, kC = 0xC0;

// Three independent load streams: A through r7, B through r8 (two adds deep),
// C through r9.
std::vector<RobSlot> window() {
  std::vector<MicroOp> ops{
      op(OpClass::LOAD, kA, 2, 7),
      op(OpClass::IADD, 0x200, 8, 8, kNoReg, 64),
      op(OpClass::IADD, 0x204, 8, 8, kNoReg, 64),
      op(OpClass::LOAD, kB, 3, 8),
      op(OpClass::LOAD, kC, 4, 9),
      op(OpClass::IADD, 0x100, 7, 7, kNoReg, 8),
      op(OpClass::LOAD, kA, 2, 7),
  };
  return rename_window(numbered(ops), std::vector<std::uint64_t>(16, 0x4000), {});
}

LabEvent miss(std::uint64_t pc) { return {LabEvent::MISS, 0, pc, {}}; }
LabEvent stall(std::uint64_t pc, std::vector<RobSlot> rob) { return {LabEvent::STALL, 0, pc, std::move(rob)}; }

}  // namespace

TEST_CASE("policy names round trip") {
  for (LabPolicy p : all_lab_policies()) CHECK(lab_policy_from_name(lab_policy_name(p)) == p);
  CHECK_FALSE(lab_policy_from_name("random"));
}

TEST_CASE("ties go to the oldest candidate") {
  std::vector<LabEvent> ev{stall(kC, window())};
  for (LabPolicy p : {LabPolicy::PC_BASED, LabPolicy::MAX_MISSES}) {
    auto sel = policy_lab(ev, p);
    REQUIRE(sel.size() == 1);
    CHECK(sel[0].chosen_pc == kA);
    CHECK(sel[0].unique);
  }
  // The stall oracle has already counted this stall.
  CHECK(policy_lab(ev, LabPolicy::STALL_ORACLE)[0].chosen_pc == kC);
}

TEST_CASE("miss counts and stall counts pull in different directions") {
  std::vector<LabEvent> ev{miss(kA), miss(kA), miss(kA), miss(kC), stall(kB, window()), stall(kB, window())};
  auto mm = policy_lab(ev, LabPolicy::MAX_MISSES);
  auto so = policy_lab(ev, LabPolicy::STALL_ORACLE);
  auto pc = policy_lab(ev, LabPolicy::PC_BASED);
  REQUIRE(mm.size() == 2);
  CHECK(mm[0].chosen_pc == kA);
  CHECK(so[0].chosen_pc == kB);
  CHECK(pc[0].chosen_pc == kA);
  CHECK(so[0].chain_len == 3);
  CHECK(so[1].stall_seq == 1);
  CHECK(so[0].unique);
  CHECK_FALSE(so[1].unique);
}

TEST_CASE("a single load PC: every policy agrees") {
  std::vector<MicroOp> ops;
  for (int i = 0; i < 4; ++i) {
    ops.push_back(op(OpClass::IADD, 0x10, 5, 5, kNoReg, 8));
    ops.push_back(op(OpClass::LOAD, kA, 2, 5));
  }
  auto rob = rename_window(numbered(ops), std::vector<std::uint64_t>(16, 0x8000), {});
  std::vector<LabEvent> ev{miss(kA), stall(kA, rob), miss(kA), stall(kA, rob)};
  std::vector<std::vector<LabSelection>> all;
  for (LabPolicy p : all_lab_policies()) all.push_back(policy_lab(ev, p));
  for (const auto& s : all) {
    REQUIRE(s.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(s[i].chosen_pc == all[0][i].chosen_pc);
      CHECK(s[i].chain_len == all[0][i].chain_len);
    }
  }
}

TEST_CASE("max-misses picks a candidate with the highest running count") {
  Rng rng(17);
  const std::vector<std::uint64_t> pcs{kA, kB, kC};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<LabEvent> ev;
    for (int i = 0; i < 40; ++i) {
      std::uint64_t pc = pcs[rng.below(3)];
      ev.push_back(rng.below(4) ? miss(pc) : stall(pc, window()));
    }
    auto sel = policy_lab(ev, LabPolicy::MAX_MISSES);
    std::map<std::uint64_t, std::uint64_t> counts;
    std::size_t k = 0;
    for (const LabEvent& e : ev) {
      if (e.kind == LabEvent::MISS) {
        ++counts[e.pc];
        continue;
      }
      std::uint64_t best = 0;
      for (std::uint64_t p : pcs) best = std::max(best, counts[p]);
      REQUIRE(k < sel.size());
      CHECK(counts[sel[k].chosen_pc] == best);
      ++k;
    }
    CHECK(k == sel.size());
  }
}

TEST_CASE("lab tables") {
  std::vector<LabEvent> ev{miss(kA), stall(kB, window()), stall(kB, window())};
  std::vector<LabSelection> sel;
  for (LabPolicy p : all_lab_policies()) {
    auto s = policy_lab(ev, p);
    sel.insert(sel.end(), s.begin(), s.end());
  }
  Table t = lab_table(sel);
  CHECK(t.header == std::vector<std::string>{"stall_seq", "policy", "chosen_pc", "chain_len", "unique_flag"});
  CHECK(t.rows.size() == 6);
  Table s = lab_summary(sel);
  CHECK(s.header == std::vector<std::string>{"policy", "stalls", "unique_chains", "mean_chain_len"});
  REQUIRE(s.rows.size() == 3);
  for (const auto& r : s.rows) {
    CHECK(std::get<std::uint64_t>(r[1]) == 2);
    CHECK(std::get<std::uint64_t>(r[2]) == 1);
  }
  CHECK(std::get<double>(s.rows[2][3]) == doctest::Approx(3.0));  // stall-oracle picks B
}

TEST_CASE("recording a simulated run") {
  SimConfig c = parse_config("traces=gen:pointer-chase:n_nodes=4096,iterations=2000\nmode=runahead\n");
  auto ev = collect_lab_events(c, 0, 50);
  std::size_t stalls = 0, misses = 0;
  for (std::size_t i = 0; i < ev.size(); ++i) {
    CHECK(ev[i].seq == i);
    if (ev[i].kind == LabEvent::STALL) {
      ++stalls;
      CHECK_FALSE(ev[i].rob.empty());
      CHECK(ev[i].rob.front().uop.pc == ev[i].pc);
    } else {
      ++misses;
    }
  }
  CHECK(stalls == 50);
  CHECK(misses > 0);
  auto sel = policy_lab(ev, LabPolicy::STALL_ORACLE);
  CHECK(sel.size() == 50);
  CHECK_THROWS_AS(collect_lab_events(c, 1, 10), ConfigError);
}
