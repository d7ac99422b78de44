#include "remsim/lab.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "remsim/sim.hpp"

namespace remsim {

const char* lab_policy_name(LabPolicy p) {
  switch (p) {
    case LabPolicy::PC_BASED: return "pc-based";
    case LabPolicy::MAX_MISSES: return "max-misses";
    case LabPolicy::STALL_ORACLE: return "stall-oracle";
  }
  return "?";
}

std::optional<LabPolicy> lab_policy_from_name(const std::string& s) {
  for (LabPolicy p : all_lab_policies())
    if (s == lab_policy_name(p)) return p;
  return std::nullopt;
}

const std::vector<LabPolicy>& all_lab_policies() {
  static const std::vector<LabPolicy> v{LabPolicy::PC_BASED, LabPolicy::MAX_MISSES, LabPolicy::STALL_ORACLE};
  return v;
}

std::vector<LabSelection> policy_lab(std::span<const LabEvent> events, LabPolicy policy) {
  std::map<std::uint64_t, std::uint64_t> misses, stalls;
  std::set<std::vector<std::uint64_t>> seen;
  std::vector<LabSelection> out;
  std::uint64_t stall_no = 0;

  for (const LabEvent& ev : events) {
    if (ev.kind == LabEvent::MISS) {
      ++misses[ev.pc];
      continue;
    }
    ++stalls[ev.pc];

    std::vector<std::uint64_t> cands;
    for (const RobSlot& s : ev.rob)
      if (s.uop.is_load() && std::find(cands.begin(), cands.end(), s.uop.pc) == cands.end())
        cands.push_back(s.uop.pc);

    LabSelection best;
    best.stall_seq = stall_no++;
    best.policy = policy;
    std::optional<DependenceChain> best_chain;
    std::uint64_t best_score = 0;
    for (std::uint64_t pc : cands) {
      auto chain = extract_runahead_chain(ev.rob, pc);
      if (!chain) continue;
      std::uint64_t score = 0;
      switch (policy) {
        case LabPolicy::MAX_MISSES: score = misses[pc]; break;
        case LabPolicy::STALL_ORACLE: score = stalls[pc]; break;
        case LabPolicy::PC_BASED: {
          std::set<std::uint64_t> pcs;
          for (const MicroOp& op : chain->source_ops)
            if (op.is_load()) pcs.insert(op.pc);
          for (std::uint64_t p : pcs) score += misses[p];
          break;
        }
      }
      if (!best_chain || score > best_score) {
        best_chain = std::move(chain);
        best_score = score;
        best.chosen_pc = pc;
      }
    }
    if (best_chain) {
      best.chain_len = best_chain->source_ops.size();
      std::vector<std::uint64_t> shape;
      for (const MicroOp& op : best_chain->source_ops) shape.push_back(op.pc);
      best.unique = seen.insert(shape).second;
    }
    out.push_back(best);
  }
  return out;
}

Table lab_table(const std::vector<LabSelection>& sel) {
  Table t;
  t.header = {"stall_seq", "policy", "chosen_pc", "chain_len", "unique_flag"};
  for (const LabSelection& s : sel)
    t.rows.push_back({s.stall_seq, std::string(lab_policy_name(s.policy)), s.chosen_pc, std::uint64_t(s.chain_len),
                      std::uint64_t(s.unique)});
  return t;
}

Table lab_summary(const std::vector<LabSelection>& sel) {
  Table t;
  t.header = {"policy", "stalls", "unique_chains", "mean_chain_len"};
  for (LabPolicy p : all_lab_policies()) {
    std::uint64_t n = 0, uniq = 0, len = 0;
    for (const LabSelection& s : sel)
      if (s.policy == p) {
        ++n;
        uniq += s.unique;
        len += s.chain_len;
      }
    if (n == 0) continue;
    t.rows.push_back({std::string(lab_policy_name(p)), n, uniq, double(len) / double(n)});
  }
  return t;
}

void LabRecorder::on_load_retired(int core, const MicroOp& op, bool llc_miss) {
  if (core != core_ || !llc_miss || full()) return;
  events_.push_back({LabEvent::MISS, events_.size(), op.pc, {}});
}

void LabRecorder::on_full_window_stall(int core, const MicroOp& head, std::span<const RobSlot> rob) {
  if (core != core_ || full()) return;
  ++stalls_;
  events_.push_back({LabEvent::STALL, events_.size(), head.pc, std::vector<RobSlot>(rob.begin(), rob.end())});
}

std::vector<LabEvent> collect_lab_events(SimConfig cfg, int core, std::size_t max_stalls) {
  if (core < 0 || static_cast<unsigned>(core) >= cfg.cores) throw ConfigError("lab core out of range");
  cfg.mode = Mode::BASELINE;
  LabRecorder rec(core, max_stalls);
  SimHooks hooks;
  hooks.observer = &rec;
  simulate(cfg, hooks);
  return rec.events();
}

}  // namespace remsim
