#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <optional>
#include <unordered_map>
#include <vector>

#include "remsim/chains.hpp"
#include "remsim/core.hpp"
#include "remsim/memhier.hpp"
#include "remsim/metrics.hpp"

namespace remsim {

enum class EmcPolicy : std::uint8_t { ROUND_ROBIN, IPC, SCORE };
const char* emc_policy_name(EmcPolicy p);
std::optional<EmcPolicy> emc_policy_from_name(const std::string& s);

inline constexpr double kRaMpkiThreshold = 5.0;

// Interval length (instructions) for a given runahead accuracy.
std::uint64_t update_interval(double accuracy);

struct CoreView {
  double mpki = 0;
  double ipc = 0;
  std::uint64_t top_count = 0;
};

std::optional<int> select_runahead_core(EmcPolicy policy, const std::vector<CoreView>& cores,
                                        std::optional<int> last_owner);

struct ThrottleAction {
  bool halve_ghb = false;
  bool ra_width_one = false;
};
ThrottleAction coordinate_throttle(double emc_acc, double ghb_acc);

class MissPredictor {
 public:
  static constexpr std::size_t kEntries = 256;
  static constexpr unsigned kThreshold = 4;
  explicit MissPredictor(unsigned cores = 1) : t_(cores) {}
  bool predict(int core, std::uint64_t pc) const { return counter(core, pc) >= kThreshold; }
  void update(int core, std::uint64_t pc, bool miss);
  unsigned counter(int core, std::uint64_t pc) const { return t_[core][pc % kEntries]; }

 private:
  std::vector<std::array<std::uint8_t, kEntries>> t_;
};

// Per-core page presence, replaced as a circular buffer.
class EmcTlb {
 public:
  static constexpr std::size_t kEntries = 32;
  explicit EmcTlb(unsigned cores = 1) : pages_(cores), next_(cores, 0) {}
  void insert(int core, std::uint64_t page);
  bool check(int core, std::uint64_t page) const;
  std::size_t size(int core) const { return pages_[core].size(); }

 private:
  std::vector<std::vector<std::uint64_t>> pages_;
  std::vector<std::size_t> next_;
};

struct EmcConfig {
  bool dep = false;
  bool ra = false;
  unsigned dep_contexts = 2;
  unsigned rs_entries = 8;
  unsigned width = 2;
  unsigned mshrs = 32;
  EmcPolicy policy = EmcPolicy::ROUND_ROBIN;
  bool dynamic_interval = false;        // multi-core accuracy-driven intervals
  std::uint64_t fixed_interval = 100000;
  bool coordinate_ghb = false;
};

struct EmcIntervalRecord {
  std::uint64_t cycle = 0;
  int owner = -1;
  std::uint64_t length = 0;
  double accuracy = 1.0;
  std::uint64_t distance_samples = 0;
  std::optional<double> distance_mean;
};

struct EmcStats {
  std::uint64_t dep_accepted = 0, dep_rejected = 0, dep_completed = 0, dep_uops = 0;
  std::uint64_t ra_chains = 0, ra_uops = 0, ra_loads = 0, ra_iterations = 0;
  std::uint64_t aborts = 0, branch_stops = 0, value_mismatches = 0;
  std::vector<Histogram> dep_latency;  // per home core: EMC issue to data arrival
  std::vector<std::uint64_t> dep_rejected_by_core;
  std::vector<EmcIntervalRecord> intervals;
};

struct EmcIssueRecord {
  std::uint64_t cycle;
  ChainKind kind;
  OpClass op;
  bool dep_ready_left;  // a ready DEP uop stayed unissued this cycle
};

class Emc : public EmcPort {
 public:
  Emc(const EmcConfig& cfg, MemorySystem& mem, std::vector<Core*> cores);

  void ship_dep_chain(int core, DependenceChain chain, std::uint64_t cycle) override;
  void ship_ra_chain(int core, DependenceChain chain, std::uint64_t cycle) override;

  void step(std::uint64_t cycle);
  bool idle() const;

  const EmcStats& stats() const { return stats_; }
  const EmcConfig& config() const { return cfg_; }
  std::optional<int> owner() const { return owner_; }
  unsigned ra_width() const { return ra_width_; }
  EmcTlb& tlb() { return tlb_; }
  MissPredictor& predictor() { return mp_; }
  void set_issue_log(std::vector<EmcIssueRecord>* log) { log_ = log; }

 private:
  static constexpr std::size_t kRing = 4096;
  struct Inst {
    std::uint64_t id = 0;
    std::size_t op = 0;
    std::array<std::int64_t, 2> src{-1, -1};
    std::array<std::uint64_t, 2> fixed{0, 0};
  };
  struct Ctx {
    bool busy = false;
    ChainKind kind = ChainKind::EMC_DEP;
    int core = 0;
    DependenceChain chain;
    std::vector<std::uint64_t> regs;
    std::vector<std::int64_t> writer;  // EMC reg -> producing instance id, -1 = regs[]
    std::deque<Inst> pending;          // un-issued instances, program order
    std::size_t next_op = 0;
    std::uint64_t iteration = 0;
    std::uint64_t outstanding = 0;  // issued, not done
    std::uint64_t generation = 0;
    std::map<std::uint64_t, std::map<std::uint64_t, std::uint64_t>> stores;  // addr -> inst id -> value
    // DEP only
    std::int64_t source_inst = -1;
    std::uint64_t source_line = 0;
    std::size_t done_ops = 0;
    struct Result {
      std::uint64_t uid, value, cycle;
      bool llc_miss;
    };
    std::vector<Result> results;
  };
  struct Slot {
    std::uint64_t id = ~0ull;
    bool done = false;
    std::uint64_t cycle = 0;
    std::uint64_t value = 0;
  };
  struct Pending {
    std::uint64_t arrival;
    int core;
    DependenceChain chain;
  };
  struct Outstanding {
    std::size_t ctx;
    std::uint64_t generation;
    std::uint64_t inst;
    std::size_t op;
    std::uint64_t issue;
    std::uint64_t value;
  };
  enum class Exec : std::uint8_t { OK, ABORT };

  void accept(Pending& p, std::uint64_t cycle);
  void load_context(Ctx& c, int core, DependenceChain chain);
  void reset_context(Ctx& c);
  void abort_context(Ctx& c, std::optional<std::uint64_t> tlb_miss_page);
  void process_deliveries(std::uint64_t cycle);
  void check_sources(std::uint64_t cycle);
  void fill_window();
  bool append_next(Ctx& c);
  bool inst_ready(const Ctx& c, std::size_t pos, std::uint64_t cycle) const;
  std::uint64_t inst_src(const Inst& i, int k) const;
  Slot& slot(std::uint64_t id) { return ring_[id % kRing]; }
  const Slot& slot(std::uint64_t id) const { return ring_[id % kRing]; }
  void complete(Ctx& c, std::uint64_t id, std::size_t op, std::uint64_t value, std::uint64_t ready,
                bool llc_miss);
  void issue_stage(std::uint64_t cycle);
  Exec execute(std::size_t ci, const Inst& in, std::uint64_t cycle);
  void maybe_finish_dep(Ctx& c, std::uint64_t cycle);
  void interval_control(std::uint64_t cycle);
  std::uint64_t page_of(int core, std::uint64_t vaddr) const;

  EmcConfig cfg_;
  MemorySystem& mem_;
  std::vector<Core*> cores_;
  std::vector<Ctx> ctx_;  // DEP contexts first, RA last
  std::vector<Pending> incoming_;
  std::array<Slot, kRing> ring_{};
  std::uint64_t next_inst_ = 0;
  std::uint64_t next_token_ = 1;
  std::unordered_map<std::uint64_t, Outstanding> tokens_;
  std::uint64_t outstanding_loads_ = 0;
  std::uint64_t generation_ = 0;
  bool port_used_ = false;
  std::vector<EmcIssueRecord>* log_ = nullptr;
  MissPredictor mp_;
  EmcTlb tlb_;
  EmcStats stats_;

  // continuous runahead control
  std::optional<int> owner_;
  std::optional<int> last_owner_;
  std::optional<std::uint64_t> marked_pc_;
  std::uint64_t interval_len_ = 100000;
  std::uint64_t last_boundary_cycle_ = 0;
  double accuracy_ = 1.0;
  unsigned ra_width_ = 2;
  std::vector<std::uint64_t> last_retired_, last_misses_, last_pf_issued_, last_pf_useful_;
  std::size_t distance_cursor_ = 0;
};

}  // namespace remsim
