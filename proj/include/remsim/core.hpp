#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "remsim/chains.hpp"
#include "remsim/memhier.hpp"
#include "remsim/metrics.hpp"
#include "remsim/runahead.hpp"
#include "remsim/trace.hpp"

namespace remsim {

// Internal consistency check failed during simulation.
struct SimAssertion : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class RunaheadPolicy : std::uint8_t { NONE, TRADITIONAL, BUFFER, HYBRID };

struct CoreConfig {
  unsigned rob_size = 256;
  unsigned rs_size = 92;
  unsigned width = 4;
  unsigned load_ports = 2;
  RunaheadPolicy runahead = RunaheadPolicy::NONE;
  bool enhancements = false;  // forced on by HYBRID
  bool emc_dep = false;       // ship dependent-miss chains at full-window stalls
  bool ra_emc = false;        // maintain the PC-miss table, build runahead chains
  unsigned poison_window = 16;
  std::uint64_t max_instructions = 0;  // 0 = whole trace
};

unsigned fu_latency(OpClass c);

enum class MissClass : std::uint8_t { INDEPENDENT, DEPENDENT };

// Snapshot form: DEPENDENT iff an in-window producer chain of `miss` reaches
// an older load marked as an LLC miss.
MissClass classify_miss(std::span<const RobSlot> rob, std::size_t miss_index, unsigned window = 16);

// 512 B, 4-way, 8 B lines: store forwarding during runahead.
class RunaheadCache {
 public:
  static constexpr unsigned kSets = 16, kWays = 4;
  struct Hit {
    std::uint64_t value;
    bool poisoned;
  };
  std::optional<Hit> lookup(std::uint64_t addr);
  void write(std::uint64_t addr, std::uint64_t value, bool poisoned);
  void clear();
  std::size_t occupancy() const;

 private:
  struct Line {
    bool valid = false;
    std::uint64_t addr = 0, value = 0, lru = 0;
    bool poisoned = false;
  };
  std::array<Line, kSets * kWays> lines_{};
  std::uint64_t clock_ = 0;
};

// Receiver of chains built by a core.
class EmcPort {
 public:
  virtual ~EmcPort() = default;
  virtual void ship_dep_chain(int core, DependenceChain chain, std::uint64_t cycle) = 0;
  virtual void ship_ra_chain(int core, DependenceChain chain, std::uint64_t cycle) = 0;
};

// Event tap used by offline analyses.
class CoreObserver {
 public:
  virtual ~CoreObserver() = default;
  virtual void on_load_retired(int core, const MicroOp& op, bool llc_miss) = 0;
  virtual void on_full_window_stall(int core, const MicroOp& head, std::span<const RobSlot> rob) = 0;
};

class Core {
 public:
  // Core `id` owns address space tag id << kSpaceShift in the shared hierarchy.
  static constexpr unsigned kSpaceShift = 44;

  Core(int id, const CoreConfig& cfg, const Trace& trace, MemorySystem& mem, EmcPort* emc = nullptr);

  void step(std::uint64_t cycle);
  bool done() const;
  int id() const { return id_; }
  CoreMode mode() const { return mode_; }
  std::uint64_t retired() const { return retired_; }
  std::uint64_t paddr(std::uint64_t vaddr) const { return vaddr + (std::uint64_t(id_) << kSpaceShift); }
  const CoreConfig& config() const { return cfg_; }
  const Trace& trace() const { return trace_; }

  std::vector<RobSlot> snapshot() const;
  std::size_t rob_occupancy() const { return rob_.size(); }
  bool full_window_stalled() const { return stalled_; }

  // Stats; cycles and digest are final once done().
  const CoreRow& stats() const { return stats_; }
  const std::vector<IntervalStats>& intervals() const { return intervals_; }
  std::uint64_t finish_cycle() const { return finish_cycle_; }
  std::uint64_t digest() const;
  const std::vector<std::uint64_t>& regs() const { return regs_; }
  const MemoryImage& memory() const { return mem_image_; }
  unsigned dependent_counter() const { return dep_counter_; }

  // ---- EMC side ----
  // Committed memory overlaid with ROB stores older than before_uid.
  std::uint64_t read_for_emc(std::uint64_t vaddr, std::uint64_t before_uid) const;
  // Live-out for ROB entry uid computed at the EMC.
  void emc_complete(std::uint64_t uid, std::uint64_t value, bool llc_miss, std::uint64_t cycle);
  // Chain rejected or aborted: the core executes these entries itself.
  void emc_release(const std::vector<std::uint64_t>& uids);
  // Build an RA chain for `pc` the next time it is dispatched.
  void request_ra_chain(std::uint64_t pc) { ra_request_ = pc; }
  void cancel_ra_request() { ra_request_.reset(); }
  std::optional<std::uint64_t> pending_ra_request() const { return ra_request_; }
  PcMissTable& pc_table() { return pc_table_; }
  const PcMissTable& pc_table() const { return pc_table_; }
  // Per-interval counters sampled by the EMC controller.
  std::uint64_t interval_misses() const { return stats_.llc_misses; }
  ChainCache& chain_cache() { return chain_cache_; }
  void set_observer(CoreObserver* o) { obs_ = o; }

 private:
  struct Origin {
    std::uint64_t uid;
    std::uint64_t dispatch_no;
  };
  struct Entry {
    std::uint64_t uid = 0;
    std::size_t trace_idx = 0;
    bool from_trace = true;
    MicroOp uop;
    std::array<std::uint64_t, 2> prod{0, 0};  // producer uid, 0 = register file
    std::array<PhysTag, 2> src_tags{0, 0};
    std::array<std::uint64_t, 2> src_values{0, 0};
    std::uint64_t value = 0, addr = 0;
    bool runahead = false;  // dispatched in a runahead mode: evaluated at issue
    bool issued = false, completed = false, poisoned = false, is_llc_miss = false;
    bool waiting_mem = false, l1_miss = false, forwarded = false, addr_poisoned = false;
    bool offloaded = false, emc_executed = false;
    std::uint64_t issue_cycle = 0, complete_cycle = 0, l1_miss_cycle = 0;
    std::uint64_t sent_retired = 0;
    std::uint64_t dispatch_no = 0;
    std::vector<Origin> origins;
  };

  Entry* find(std::uint64_t uid);
  const Entry* find(std::uint64_t uid) const;
  bool ready(const Entry& e, std::uint64_t cycle) const;
  bool src_poisoned(const Entry& e, int k) const;
  std::uint64_t src_value(const Entry& e, int k) const;

  void process_deliveries(std::uint64_t cycle);
  void retire(std::uint64_t cycle);
  void issue(std::uint64_t cycle);
  bool issue_one(Entry& e, std::uint64_t cycle, unsigned& loads);
  bool issue_runahead_load(Entry& e, std::uint64_t cycle);
  void rs_insert(std::uint64_t uid);
  void dispatch(std::uint64_t cycle);
  void dispatch_op(const MicroOp& op, std::size_t trace_idx, bool from_trace, std::uint64_t cycle);
  void detect_stall(std::uint64_t cycle);
  void on_full_window_stall(Entry& head, std::uint64_t cycle);
  void enter_runahead(CoreMode m, std::uint64_t cycle, const DependenceChain* chain, unsigned gen_cycles);
  void exit_runahead(std::uint64_t cycle);
  bool classify(const Entry& e) const;
  void note_retired_load(const Entry& e);

  int id_;
  CoreConfig cfg_;
  const Trace& trace_;
  MemorySystem& mem_;
  EmcPort* emc_;
  CoreObserver* obs_ = nullptr;
  std::size_t limit_;

  std::deque<Entry> rob_;
  std::vector<std::uint64_t> rat_;  // arch reg -> producer uid (0 = register file)
  std::vector<std::uint64_t> regs_;
  std::vector<std::uint64_t> reg_ver_;
  MemoryImage mem_image_;
  std::size_t cursor_ = 0;
  std::uint64_t next_uid_ = 1;
  std::uint64_t dispatch_no_ = 0;
  std::uint64_t retired_ = 0;
  std::uint64_t hash_ = 0xcbf29ce484222325ull;
  std::vector<std::uint64_t> rs_;  // uids waiting to issue, oldest first

  // runahead
  CoreMode mode_ = CoreMode::NORMAL;
  std::size_t checkpoint_cursor_ = 0;
  std::vector<std::uint64_t> checkpoint_regs_;
  std::vector<std::uint64_t> ra_regs_;
  std::vector<bool> ra_poison_;
  RunaheadCache ra_cache_;
  RunaheadBuffer buffer_;
  std::uint64_t buffer_start_ = 0;
  std::uint64_t blocking_uid_ = 0;
  bool exit_pending_ = false;
  std::optional<std::uint64_t> prev_reach_;
  IntervalStats cur_interval_;
  std::vector<IntervalStats> intervals_;
  ChainCache chain_cache_;

  // stall / classification state
  bool stalled_ = false;
  std::uint64_t last_stall_uid_ = 0;
  unsigned dep_counter_ = 0;
  std::deque<std::pair<std::uint64_t, bool>> recent_loads_;  // uid -> llc miss
  PcMissTable pc_table_;
  std::optional<std::uint64_t> ra_request_;
  std::uint64_t dep_chain_source_ = 0;

  CoreRow stats_;
  std::uint64_t finish_cycle_ = 0;
  bool finished_ = false;
};

}  // namespace remsim
