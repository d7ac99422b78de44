#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "remsim/chains.hpp"

namespace remsim {

enum class CoreMode : std::uint8_t { NORMAL, RUNAHEAD_TRADITIONAL, RUNAHEAD_BUFFER };
const char* core_mode_name(CoreMode m);

// Loop buffer replaying a dependence chain during runahead.
struct RunaheadBuffer {
  DependenceChain chain;
  std::size_t cursor = 0;
  std::uint64_t iteration = 0;
  std::uint64_t issued = 0;

  // Next op, wrapping to the start of the chain. Chain must be non-empty.
  const MicroOp& next();
  // Next `width` ops.
  std::vector<MicroOp> step(unsigned width);
};

enum class HybridChoice : std::uint8_t { USE_BUFFER, USE_TRADITIONAL };

struct HybridResult {
  HybridChoice choice = HybridChoice::USE_TRADITIONAL;
  DependenceChain chain;
  bool cache_hit = false;
  unsigned gen_cycles = 0;  // zero on a chain-cache hit
};

// Chain for the runahead buffer: chain-cache hit, else a fresh walk. Falls
// back to traditional runahead when no chain exists or it exceeds max_len.
HybridResult hybrid_select(std::span<const RobSlot> rob, std::uint64_t stall_pc, ChainCache& cache,
                           std::size_t max_len = 32);

inline constexpr std::uint64_t kRunaheadIssueThreshold = 250;

// Gate applied at a full-window stall. load_sent_retired is the retired count
// when the blocking load went to memory; prev_reach is the farthest trace
// position the previous interval pre-executed.
bool runahead_allowed(bool enhancements_on, std::uint64_t retired_now, std::uint64_t load_sent_retired,
                      std::optional<std::uint64_t> prev_reach);

struct IntervalStats {
  std::uint64_t id = 0;
  CoreMode mode = CoreMode::NORMAL;
  std::uint64_t start_cycle = 0;
  std::uint64_t cycles = 0;
  std::uint64_t uops = 0;
  std::uint64_t misses = 0;
};

}  // namespace remsim
