#include "remsim/runahead.hpp"

namespace remsim {

const char* core_mode_name(CoreMode m) {
  switch (m) {
    case CoreMode::NORMAL: return "normal";
    case CoreMode::RUNAHEAD_TRADITIONAL: return "traditional";
    case CoreMode::RUNAHEAD_BUFFER: return "buffer";
  }
  return "?";
}

const MicroOp& RunaheadBuffer::next() {
  const MicroOp& op = chain.ops[cursor].uop;
  ++issued;
  if (++cursor == chain.ops.size()) {
    cursor = 0;
    ++iteration;
  }
  return op;
}

std::vector<MicroOp> RunaheadBuffer::step(unsigned width) {
  std::vector<MicroOp> out;
  if (chain.ops.empty()) return out;
  for (unsigned i = 0; i < width; ++i) out.push_back(next());
  return out;
}

HybridResult hybrid_select(std::span<const RobSlot> rob, std::uint64_t stall_pc, ChainCache& cache,
                           std::size_t max_len) {
  HybridResult r;
  if (const DependenceChain* c = cache.get(stall_pc)) {
    r.choice = HybridChoice::USE_BUFFER;
    r.chain = *c;
    r.cache_hit = true;
    return r;
  }
  auto chain = extract_backwards(rob, stall_pc, max_len);
  if (!chain || chain->truncated) return r;
  r.gen_cycles = chain->gen_cycles;
  r.choice = HybridChoice::USE_BUFFER;
  r.chain = *chain;
  cache.put(stall_pc, std::move(*chain));
  return r;
}

bool runahead_allowed(bool enhancements_on, std::uint64_t retired_now, std::uint64_t load_sent_retired,
                      std::optional<std::uint64_t> prev_reach) {
  if (!enhancements_on) return true;
  if (retired_now - load_sent_retired > kRunaheadIssueThreshold) return false;
  if (prev_reach && retired_now <= *prev_reach) return false;
  return true;
}

}  // namespace remsim
