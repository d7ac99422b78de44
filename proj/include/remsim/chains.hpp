#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "remsim/trace.hpp"

namespace remsim {

using PhysTag = std::uint64_t;  // 0 = no register

// What chain generation sees of one ROB entry.
struct RobSlot {
  std::uint64_t uid = 0;
  MicroOp uop;
  PhysTag dst_tag = 0;
  std::array<PhysTag, 2> src_tags{0, 0};
  std::array<std::uint64_t, 2> src_values{0, 0};
  std::uint64_t value = 0;
  std::uint64_t addr = 0;  // effective address of memory ops
  bool completed = false;
  bool poisoned = false;
  bool is_llc_miss = false;
};

enum class ChainKind : std::uint8_t { RA_BUFFER, EMC_DEP, EMC_RA };

struct LiveIn {
  RegId reg = kNoReg;  // kNoReg = immediate carried in the live-in vector
  std::uint64_t value = 0;
  RegId arch = kNoReg;
};

struct RrtRow {
  RegId arch = kNoReg;
  RegId first = kNoReg;    // register holding the value produced last in the chain
  RegId current = kNoReg;  // live-in register read by the oldest consumers
  bool live_in = false;
};

struct ChainOp {
  MicroOp uop;             // registers remapped for EMC kinds
  std::uint64_t rob_uid = 0;
};

struct DependenceChain {
  ChainKind kind = ChainKind::RA_BUFFER;
  std::vector<ChainOp> ops;          // program order, MAPs last
  std::vector<MicroOp> source_ops;   // un-remapped, program order, no MAPs
  std::vector<LiveIn> live_ins;
  std::vector<RrtRow> rrt;
  std::vector<std::uint64_t> walk_order;  // rob uids in inclusion order
  std::size_t max_len = 32;
  unsigned gen_cycles = 0;
  bool truncated = false;
  std::uint64_t trigger_pc = 0;
  std::uint64_t source_uid = 0;   // EMC_DEP: the source miss
  std::uint64_t source_addr = 0;
  RegId source_reg = kNoReg;      // EMC_DEP: E0

  std::size_t map_count() const;
  unsigned reg_count() const;
  // Bytes on the ring: 8 per uop, 4 per live-in.
  std::size_t wire_bytes() const { return ops.size() * 8 + live_ins.size() * 4; }
};

inline constexpr std::size_t kUnbounded = static_cast<std::size_t>(-1);

std::optional<DependenceChain> extract_backwards(std::span<const RobSlot> rob, std::uint64_t stall_pc,
                                                 std::size_t max_len = 32);

// Source miss identified by index into rob. Returns an empty chain when no
// consumer can be accelerated.
DependenceChain extract_forward(std::span<const RobSlot> rob, std::size_t source_index, std::size_t max_len = 16,
                                unsigned width = 4);

// nullopt = marked PC not currently in the ROB (retry later).
std::optional<DependenceChain> extract_runahead_chain(std::span<const RobSlot> rob, std::uint64_t marked_pc,
                                                      std::size_t max_len = 32);

// Brute-force backward closure over architectural registers and identical
// address store->load links. The target is part of the result; its own
// memory source is not followed.
std::set<std::size_t> oracle_slice(std::span<const MicroOp> window, std::size_t target);

// Renames a uop window into ROB slots with fresh physical tags, computing
// functional values from init_regs/memory.
std::vector<RobSlot> rename_window(std::span<const MicroOp> ops, const std::vector<std::uint64_t>& init_regs,
                                   const MemoryImage& memory);

// Runs a chain for `iterations` loops; returns load addresses in execution order.
std::vector<std::uint64_t> interpret_chain(const DependenceChain& chain, const MemoryImage& memory,
                                           unsigned iterations);

class ChainCache {
 public:
  static constexpr std::size_t kEntries = 2;
  const DependenceChain* get(std::uint64_t pc);
  void put(std::uint64_t pc, DependenceChain chain);
  std::size_t size() const { return entries_.size(); }
  bool contains(std::uint64_t pc) const;

 private:
  std::vector<std::pair<std::uint64_t, DependenceChain>> entries_;  // front = MRU
};

class PcMissTable {
 public:
  static constexpr std::size_t kEntries = 32;
  struct Entry {
    std::uint64_t pc;
    std::uint64_t count;
    std::uint64_t order;
  };
  void update(std::uint64_t stall_pc, bool is_dependent);
  // Picks the marked PC for the next interval (None unless mpki > 5), then
  // halves every counter.
  std::optional<std::uint64_t> mark_top_pc(double mpki);
  std::optional<std::uint64_t> marked() const { return marked_; }
  std::uint64_t top_count() const;
  std::optional<std::uint64_t> count(std::uint64_t pc) const;
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::uint64_t next_order_ = 0;
  std::optional<std::uint64_t> marked_;
};

bool emc_allowed(OpClass c);

}  // namespace remsim
