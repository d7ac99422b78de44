#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "remsim/chains.hpp"
#include "remsim/config.hpp"
#include "remsim/core.hpp"
#include "remsim/metrics.hpp"

namespace remsim {

// Offline replay of chain-selection policies over a recorded miss/stall log.

enum class LabPolicy : std::uint8_t { PC_BASED, MAX_MISSES, STALL_ORACLE };
const char* lab_policy_name(LabPolicy p);
std::optional<LabPolicy> lab_policy_from_name(const std::string& s);
const std::vector<LabPolicy>& all_lab_policies();

struct LabEvent {
  enum Kind : std::uint8_t { MISS, STALL } kind = MISS;
  std::uint64_t seq = 0;  // position in the log
  std::uint64_t pc = 0;   // missing load, or the load at the ROB head
  std::vector<RobSlot> rob;  // STALL only
};

struct LabSelection {
  std::uint64_t stall_seq = 0;  // index of the stall among all stalls
  LabPolicy policy = LabPolicy::PC_BASED;
  std::uint64_t chosen_pc = 0;
  std::size_t chain_len = 0;
  bool unique = false;  // first time this chain shape was chosen
};

// Counts are running and unbounded. Candidates are the load PCs present in
// the stall snapshot; ties go to the oldest candidate in the ROB.
std::vector<LabSelection> policy_lab(std::span<const LabEvent> events, LabPolicy policy);

// Columns: stall_seq, policy, chosen_pc, chain_len, unique_flag.
Table lab_table(const std::vector<LabSelection>& sel);
// Columns: policy, stalls, unique_chains, mean_chain_len.
Table lab_summary(const std::vector<LabSelection>& sel);

class LabRecorder : public CoreObserver {
 public:
  explicit LabRecorder(int core = 0, std::size_t max_stalls = 1000) : core_(core), max_stalls_(max_stalls) {}
  void on_load_retired(int core, const MicroOp& op, bool llc_miss) override;
  void on_full_window_stall(int core, const MicroOp& head, std::span<const RobSlot> rob) override;
  const std::vector<LabEvent>& events() const { return events_; }
  std::size_t stalls() const { return stalls_; }

 private:
  int core_;
  std::size_t max_stalls_, stalls_ = 0;
  bool full() const { return stalls_ >= max_stalls_; }
  std::vector<LabEvent> events_;
};

// Simulates cfg once in baseline mode and records the log of one core.
std::vector<LabEvent> collect_lab_events(SimConfig cfg, int core, std::size_t max_stalls);

}  // namespace remsim
