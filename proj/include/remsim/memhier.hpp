#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <unordered_map>
#include <vector>

#include "remsim/prefetch.hpp"

namespace remsim {

inline constexpr std::uint64_t kLineBytes = 64;
inline std::uint64_t line_of(std::uint64_t addr) { return addr / kLineBytes; }

enum class ReqKind : std::uint8_t { LOAD, STORE, PREFETCH, RUNAHEAD, EMC_DEP, EMC_RA, WRITEBACK };
const char* req_kind_name(ReqKind k);
inline bool is_demand(ReqKind k) { return k == ReqKind::LOAD || k == ReqKind::EMC_DEP; }

// --------------------------------------------------------------------- cache

struct LineFlags {
  bool emc_resident = false;
  bool runahead_fetched = false;
  bool emc_ra_fetched = false;
  bool prefetch_fetched = false;
  bool touched = false;
};

struct CacheLine {
  std::uint64_t line = 0;
  bool valid = false;
  bool dirty = false;
  LineFlags flags;
  std::uint64_t lru = 0;
  int owner = -1;
  std::uint64_t fetch_retired = 0;
};

class CacheModel {
 public:
  // `interleave` divides the line number before set indexing (distributed
  // slices see every n-th line).
  CacheModel(std::uint64_t bytes, unsigned ways, unsigned latency, unsigned interleave = 1);

  CacheLine* find(std::uint64_t line);
  const CacheLine* find(std::uint64_t line) const;
  CacheLine* touch(std::uint64_t line);  // find + LRU update
  // Line must be absent. Returns the evicted valid line, if any; *slot gets
  // the new line's storage.
  std::optional<CacheLine> insert(std::uint64_t line, CacheLine** slot = nullptr);
  bool invalidate(std::uint64_t line);

  unsigned latency() const { return latency_; }
  std::size_t sets() const { return sets_; }
  unsigned ways() const { return ways_; }
  std::size_t valid_lines() const;
  template <class F>
  void for_each_valid(F f) const {
    for (const auto& l : lines_)
      if (l.valid) f(l);
  }

 private:
  std::size_t set_of(std::uint64_t line) const { return (line / interleave_) % sets_; }
  std::size_t sets_;
  unsigned ways_, latency_, interleave_;
  std::uint64_t clock_ = 0;
  std::vector<CacheLine> lines_;
};

// ---------------------------------------------------------------------- ring

enum class MsgSize : std::uint8_t { CONTROL, DATA };

class Ring {
 public:
  explicit Ring(unsigned stops) : stops_(stops) {}
  unsigned stops() const { return stops_; }
  unsigned hops(unsigned a, unsigned b) const;
  // Counts one message and returns its latency (1 cycle per hop).
  unsigned route(unsigned src, unsigned dst, MsgSize size);
  std::uint64_t control_messages() const { return control_; }
  std::uint64_t data_messages() const { return data_; }

 private:
  unsigned stops_;
  std::uint64_t control_ = 0, data_ = 0;
};

// ---------------------------------------------------------------------- DRAM

struct DramTiming {
  unsigned tCAS = 44, tRCD = 44, tRP = 44, tRAS = 88, burst = 16;
};

unsigned cycles_from_ns(double ns, double ghz);

struct DramConfig {
  unsigned channels = 2;
  unsigned banks = 8;
  std::uint64_t row_bytes = 8192;
  DramTiming timing;
  std::size_t queue_cap = 64;
  bool batching = false;
};

struct BankState {
  std::optional<std::uint64_t> open_row;
  std::uint64_t ready = 0;      // earliest cycle for the next command
  std::uint64_t act_cycle = 0;  // last activate
};

enum class RowOutcome : std::uint8_t { HIT, CLOSED, CONFLICT };
RowOutcome row_outcome(const BankState& b, std::uint64_t row);
unsigned dram_latency(const BankState& b, std::uint64_t row, const DramTiming& t);

struct DramAddress {
  unsigned channel = 0, bank = 0;
  std::uint64_t row = 0;
};
DramAddress map_address(std::uint64_t addr, const DramConfig& cfg);

struct DramRequest {
  std::uint64_t id = 0;
  std::uint64_t line = 0;
  ReqKind kind = ReqKind::LOAD;
  int core = 0;
  std::uint64_t arrival = 0;
  bool demand = false;
  bool write = false;
  bool marked = false;
  DramAddress where;
};

// Scheduler view of one issuable request.
struct SchedCandidate {
  std::size_t index = 0;
  bool marked = false;
  bool row_hit = false;
  bool demand = false;
  std::uint64_t arrival = 0;
  std::uint64_t id = 0;
};

// Priority: batch-marked, row hit, demand, oldest.
std::optional<std::size_t> schedule(std::span<const SchedCandidate> issuable);

struct DramCommand {
  std::uint64_t cycle;
  unsigned channel, bank;
  char cmd;  // P(recharge) A(ctivate) R(ead) W(rite)
  std::uint64_t row;
};

struct DramStats {
  std::uint64_t reads = 0, writes = 0;
  std::uint64_t row_hits = 0, row_closed = 0, row_conflicts = 0;
  double conflict_rate() const {
    auto n = row_hits + row_closed + row_conflicts;
    return n ? double(row_conflicts) / double(n) : 0.0;
  }
};

class Dram {
 public:
  explicit Dram(const DramConfig& cfg);

  void enqueue(DramRequest r);
  std::size_t queued() const { return queue_.size(); }
  bool full() const { return queue_.size() >= cfg_.queue_cap; }
  // Upgrades a queued non-demand request for `line` to demand priority.
  void promote(std::uint64_t line);

  // Starts at most one request per channel. Returns (request, completion cycle).
  std::vector<std::pair<DramRequest, std::uint64_t>> tick(std::uint64_t cycle);

  const BankState& bank(unsigned ch, unsigned b) const { return banks_[ch * cfg_.banks + b]; }
  const DramStats& stats() const { return stats_; }
  const DramConfig& config() const { return cfg_; }

  void set_command_log(std::vector<DramCommand>* log) { log_ = log; }
  void set_command_stream(std::ostream* os) { stream_ = os; }

 private:
  void log(std::uint64_t cycle, unsigned ch, unsigned b, char c, std::uint64_t row);
  void form_batch();
  DramConfig cfg_;
  std::vector<BankState> banks_;
  std::vector<std::uint64_t> bus_free_;
  std::deque<DramRequest> queue_;
  std::size_t marked_ = 0;
  DramStats stats_;
  std::vector<DramCommand>* log_ = nullptr;
  std::ostream* stream_ = nullptr;
};

// ------------------------------------------------------------- memory system

struct MemConfig {
  unsigned cores = 1;
  std::uint64_t l1_bytes = 32 * 1024;
  unsigned l1_ways = 8, l1_latency = 3;
  std::uint64_t llc_bytes_per_core = 1 << 20;
  unsigned llc_ways = 8, llc_latency = 18;
  std::uint64_t emc_cache_bytes = 4096;
  unsigned emc_cache_ways = 4, emc_cache_latency = 2;
  unsigned mshrs = 32;
  DramConfig dram;
  PrefetcherKind prefetcher = PrefetcherKind::NONE;
  unsigned prefetch_degree = 4;
  std::uint64_t fdp_interval = 100000;
  bool emc = false;  // EMC data cache present and filled on DRAM fills
};

struct Delivery {
  enum Type : std::uint8_t { DATA, LLC_MISS } type = DATA;
  std::uint64_t token = 0;
  std::uint64_t line = 0;
  std::uint64_t cycle = 0;
  bool from_dram = false;
};

struct MemCoreStats {
  std::uint64_t l1_hits = 0, l1_misses = 0;
  std::uint64_t llc_hits = 0, llc_misses = 0;
};

struct FetchCounters {
  std::uint64_t fetched = 0, useful = 0, evicted_untouched = 0, evicted_touched = 0;
};

struct EmcCacheStats {
  std::uint64_t hits = 0, misses = 0, bypasses = 0, bypass_llc_hits = 0, llc_lookups = 0;
};

struct DistanceSample {
  std::uint64_t cycle;
  int core;
  std::uint64_t distance;
};

class MemorySystem {
 public:
  using RetiredFn = std::function<std::uint64_t(int)>;
  MemorySystem(const MemConfig& cfg, RetiredFn retired);

  enum class Outcome : std::uint8_t { L1_HIT, PENDING, LLC_MISS_NOW, RETRY };
  struct Access {
    Outcome outcome;
    std::uint64_t ready = 0;  // L1_HIT only
    bool sent = false;        // LLC_MISS_NOW: a new DRAM-bound request was created
  };

  // kind is LOAD or RUNAHEAD. Runahead loads that miss the LLC return
  // LLC_MISS_NOW and are sent to memory without a token.
  Access core_load(int core, std::uint64_t addr, std::uint64_t token, std::uint64_t cycle, ReqKind kind,
                   std::uint64_t pc);
  void core_store(int core, std::uint64_t addr, std::uint64_t cycle);

  struct EmcAccess {
    bool cache_hit = false;
    bool in_llc = false;
  };
  EmcAccess emc_load(int home_core, std::uint64_t addr, std::uint64_t token, std::uint64_t cycle, ReqKind kind,
                     bool bypass, std::uint64_t retired_at_issue);
  bool emc_cache_contains(std::uint64_t line) const;

  // Processes all memory events due at `cycle`.
  void tick(std::uint64_t cycle);
  // Lets the DRAM scheduler start commands for `cycle`.
  void dram_tick(std::uint64_t cycle);

  std::vector<Delivery>& core_deliveries(int core) { return core_q_[core]; }
  std::vector<Delivery>& emc_deliveries() { return emc_q_; }
  // Lines filled from DRAM this cycle (observed by the EMC).
  std::vector<std::uint64_t>& dram_fills() { return fills_; }

  bool llc_contains(std::uint64_t line) const;
  bool l1_contains(int core, std::uint64_t line) const;
  bool in_flight(std::uint64_t line) const { return inflight_.count(line) != 0; }
  bool idle() const { return events_.empty() && inflight_.empty() && dram_.queued() == 0; }
  std::size_t mshrs_in_use(int core) const { return mshr_[core].size(); }
  bool check_inclusion() const;

  unsigned mc_stop() const { return cfg_.cores; }
  unsigned slice_of(std::uint64_t line) const { return static_cast<unsigned>(line % cfg_.cores); }
  Ring& ring() { return ring_; }
  const Ring& ring() const { return ring_; }
  Dram& dram() { return dram_; }
  const Dram& dram() const { return dram_; }
  PrefetchUnit& prefetcher(int core) { return pf_[core]; }
  const PrefetchUnit& prefetcher(int core) const { return pf_[core]; }
  const MemConfig& config() const { return cfg_; }

  const MemCoreStats& core_stats(int core) const { return cstats_[core]; }
  const FetchCounters& runahead_counters() const { return ra_; }
  const FetchCounters& emc_ra_counters() const { return emc_ra_; }
  FetchCounters& emc_ra_interval() { return emc_ra_interval_; }
  std::vector<DistanceSample>& distance_samples() { return distances_; }
  const EmcCacheStats& emc_cache_stats() const { return emc_stats_; }
  std::uint64_t llc_fills() const { return llc_fills_; }
  std::uint64_t dram_read_requests() const { return dram_reads_sent_; }

 private:
  enum class Ev : std::uint8_t { LLC_ACCESS, LLC_WRITE, EMC_LLC_ACCESS, MC_ENQUEUE, FILL, DELIVER_CORE, DELIVER_EMC };
  struct Event {
    std::uint64_t cycle, seq;
    Ev type;
    std::uint64_t req;
    bool operator>(const Event& o) const { return cycle != o.cycle ? cycle > o.cycle : seq > o.seq; }
  };
  struct Req {
    std::uint64_t line = 0;
    ReqKind kind = ReqKind::LOAD;
    int core = 0;
    std::uint64_t token = 0;
    std::uint64_t pc = 0;
    std::uint64_t retired = 0;
    bool llc_hit = false;
  };
  struct Inflight {
    ReqKind origin = ReqKind::LOAD;
    int core = 0;
    std::uint64_t retired = 0;
    bool demand = false;
    bool dirty = false;
    bool touched = false;
    bool enqueued = false;
    std::vector<int> cores;
    std::vector<std::uint64_t> emc_tokens;
  };
  struct Mshr {
    std::vector<std::uint64_t> tokens;
    bool llc_miss = false;
  };

  std::uint64_t new_req(const Req& r);
  void post(std::uint64_t cycle, Ev type, std::uint64_t req);
  CacheModel& slice(std::uint64_t line) { return llc_[slice_of(line)]; }
  const CacheModel& slice(std::uint64_t line) const { return llc_[slice_of(line)]; }

  void on_llc_access(std::uint64_t cycle, std::uint64_t id);
  void on_llc_write(std::uint64_t cycle, std::uint64_t id);
  void on_emc_llc_access(std::uint64_t cycle, std::uint64_t id);
  void on_mc_enqueue(std::uint64_t cycle, std::uint64_t id);
  void on_fill(std::uint64_t cycle, std::uint64_t id);
  void on_deliver_core(std::uint64_t cycle, std::uint64_t id);
  void on_deliver_emc(std::uint64_t cycle, std::uint64_t id);

  // Core demand touching an LLC line (hit or merge).
  void first_touch(CacheLine& l, int core, std::uint64_t cycle);
  void merge_touch(Inflight& f, int core, std::uint64_t cycle);
  // Sends a miss for `line` towards the MC, creating or merging in-flight state.
  Inflight& miss_to_mc(std::uint64_t cycle, std::uint64_t line, const Req& r, unsigned from_stop, bool& created);
  void issue_prefetches(std::uint64_t cycle, int core, std::uint64_t line, std::uint64_t pc);
  void evict_llc_line(const CacheLine& v, std::uint64_t cycle);

  MemConfig cfg_;
  RetiredFn retired_;
  std::vector<CacheModel> l1_, llc_;
  CacheModel emc_cache_;
  Ring ring_;
  Dram dram_;
  std::vector<PrefetchUnit> pf_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  std::uint64_t seq_ = 0, next_req_ = 1;
  std::unordered_map<std::uint64_t, Req> reqs_;
  std::unordered_map<std::uint64_t, Inflight> inflight_;
  std::vector<std::unordered_map<std::uint64_t, Mshr>> mshr_;
  std::vector<std::vector<Delivery>> core_q_;
  std::vector<Delivery> emc_q_;
  std::vector<std::uint64_t> fills_;
  std::vector<MemCoreStats> cstats_;
  FetchCounters ra_, emc_ra_, emc_ra_interval_;
  std::vector<DistanceSample> distances_;
  EmcCacheStats emc_stats_;
  std::uint64_t llc_fills_ = 0, dram_reads_sent_ = 0;
  std::uint64_t next_fdp_ = 0;
};

}  // namespace remsim
