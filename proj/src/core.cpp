#include "remsim/core.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace remsim {

namespace {
void fnv(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xFF;
    h *= 0x100000001b3ull;
  }
}
constexpr std::uint64_t kArchTag = 1ull << 63;
constexpr std::size_t kMaxOrigins = 8;
constexpr std::size_t kRecentLoads = 64;
}  // namespace

unsigned fu_latency(OpClass c) {
  switch (c) {
    case OpClass::IMUL: return 3;
    case OpClass::FP: return 4;
    default: return 1;
  }
}

MissClass classify_miss(std::span<const RobSlot> rob, std::size_t miss_index, unsigned window) {
  if (miss_index >= rob.size() || !rob[miss_index].is_llc_miss)
    throw std::invalid_argument("classify_miss: entry is not an LLC miss");
  std::unordered_map<PhysTag, std::size_t> prod;
  for (std::size_t i = 0; i < miss_index; ++i)
    if (rob[i].dst_tag) prod[rob[i].dst_tag] = i;
  std::vector<std::size_t> work{miss_index};
  std::unordered_set<std::size_t> seen;
  while (!work.empty()) {
    std::size_t i = work.back();
    work.pop_back();
    for (PhysTag t : rob[i].src_tags) {
      auto it = t ? prod.find(t) : prod.end();
      if (it == prod.end()) continue;
      std::size_t p = it->second;
      if (miss_index - p > window || !seen.insert(p).second) continue;
      if (rob[p].uop.is_load() && rob[p].is_llc_miss) return MissClass::DEPENDENT;
      work.push_back(p);
    }
  }
  return MissClass::INDEPENDENT;
}

// ------------------------------------------------------------ runahead cache

std::optional<RunaheadCache::Hit> RunaheadCache::lookup(std::uint64_t addr) {
  const std::uint64_t a = MemoryImage::align(addr);
  const std::size_t set = (a >> 3) % kSets;
  for (unsigned w = 0; w < kWays; ++w) {
    Line& l = lines_[set * kWays + w];
    if (l.valid && l.addr == a) {
      l.lru = ++clock_;
      return Hit{l.value, l.poisoned};
    }
  }
  return std::nullopt;
}

void RunaheadCache::write(std::uint64_t addr, std::uint64_t value, bool poisoned) {
  const std::uint64_t a = MemoryImage::align(addr);
  const std::size_t set = (a >> 3) % kSets;
  Line* victim = nullptr;
  for (unsigned w = 0; w < kWays; ++w) {
    Line& l = lines_[set * kWays + w];
    if (l.valid && l.addr == a) {
      victim = &l;
      break;
    }
    if (!victim || (victim->valid && (!l.valid || l.lru < victim->lru))) victim = &l;
  }
  *victim = Line{true, a, value, ++clock_, poisoned};
}

void RunaheadCache::clear() { lines_.fill(Line{}); }

std::size_t RunaheadCache::occupancy() const {
  return static_cast<std::size_t>(std::count_if(lines_.begin(), lines_.end(), [](const Line& l) { return l.valid; }));
}

// ---------------------------------------------------------------------- core

Core::Core(int id, const CoreConfig& cfg, const Trace& trace, MemorySystem& mem, EmcPort* emc)
    : id_(id), cfg_(cfg), trace_(trace), mem_(mem), emc_(emc) {
  limit_ = trace_.ops.size();
  if (cfg_.max_instructions) limit_ = std::min<std::size_t>(limit_, cfg_.max_instructions);
  const std::size_t n = std::max<std::size_t>(trace_.arch_reg_count, trace_.init_regs.size());
  regs_ = trace_.init_regs;
  regs_.resize(n, 0);
  rat_.assign(n, 0);
  reg_ver_.assign(n, 0);
  ra_regs_.assign(n, 0);
  ra_poison_.assign(n, false);
  mem_image_ = trace_.memory;
  stats_.core = id;
}

Core::Entry* Core::find(std::uint64_t uid) {
  if (rob_.empty() || uid < rob_.front().uid || uid - rob_.front().uid >= rob_.size()) return nullptr;
  return &rob_[uid - rob_.front().uid];
}

const Core::Entry* Core::find(std::uint64_t uid) const { return const_cast<Core*>(this)->find(uid); }

bool Core::ready(const Entry& e, std::uint64_t cycle) const {
  for (std::uint64_t p : e.prod) {
    if (!p) continue;
    const Entry* pe = find(p);
    if (pe && !(pe->completed && pe->complete_cycle <= cycle)) return false;
  }
  return true;
}

bool Core::src_poisoned(const Entry& e, int k) const {
  RegId r = e.uop.src[k];
  if (r == kNoReg) return false;
  if (const Entry* pe = e.prod[k] ? find(e.prod[k]) : nullptr) return pe->poisoned;
  return mode_ != CoreMode::NORMAL && ra_poison_[r];
}

std::uint64_t Core::src_value(const Entry& e, int k) const {
  RegId r = e.uop.src[k];
  if (r == kNoReg) return 0;
  if (const Entry* pe = e.prod[k] ? find(e.prod[k]) : nullptr) return pe->value;
  return mode_ != CoreMode::NORMAL ? ra_regs_[r] : regs_[r];
}

bool Core::done() const { return cursor_ >= limit_ && rob_.empty() && mode_ == CoreMode::NORMAL; }

void Core::step(std::uint64_t cycle) {
  if (finished_) return;
  process_deliveries(cycle);
  if (exit_pending_) exit_runahead(cycle);
  retire(cycle);
  issue(cycle);
  dispatch(cycle);
  detect_stall(cycle);
  if (done()) {
    finished_ = true;
    finish_cycle_ = cycle + 1;
    stats_.cycles = finish_cycle_;
    stats_.retired = retired_;
    stats_.digest = digest();
  }
}

void Core::process_deliveries(std::uint64_t cycle) {
  auto& q = mem_.core_deliveries(id_);
  std::size_t keep = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const Delivery d = q[i];
    if (d.cycle > cycle) {
      q[keep++] = d;
      continue;
    }
    if (mode_ != CoreMode::NORMAL && d.type == Delivery::DATA && d.token == blocking_uid_) exit_pending_ = true;
    Entry* e = find(d.token);
    if (!e || !e->waiting_mem) continue;
    if (d.type == Delivery::DATA) {
      e->waiting_mem = false;
      e->completed = true;
      e->complete_cycle = d.cycle;
    } else if (mode_ == CoreMode::NORMAL) {
      e->is_llc_miss = true;
    } else {
      e->poisoned = true;
      e->waiting_mem = false;
      e->completed = true;
      e->complete_cycle = cycle;
    }
  }
  q.resize(keep);
}

bool Core::classify(const Entry& e) const {
  for (const Origin& o : e.origins) {
    if (const Entry* m = find(o.uid)) {
      if (m->is_llc_miss) return true;
      continue;
    }
    for (const auto& [uid, miss] : recent_loads_)
      if (uid == o.uid && miss) return true;
  }
  return false;
}

void Core::note_retired_load(const Entry& e) {
  recent_loads_.emplace_back(e.uid, e.is_llc_miss);
  if (recent_loads_.size() > kRecentLoads) recent_loads_.pop_front();
  const std::uint64_t lat = e.l1_miss ? e.complete_cycle - e.l1_miss_cycle : 0;
  if (e.l1_miss) stats_.eff_latency.record(lat);
  if (obs_) obs_->on_load_retired(id_, e.uop, e.is_llc_miss);
  if (!e.is_llc_miss) return;
  ++stats_.llc_misses;
  if (classify(e)) {
    ++stats_.dependent_misses;
    if (e.l1_miss) stats_.dep_latency.record(lat);
    dep_counter_ = std::min(7u, dep_counter_ + 1);
  } else if (dep_counter_) {
    --dep_counter_;
  }
}

void Core::retire(std::uint64_t cycle) {
  for (unsigned n = 0; n < cfg_.width && !rob_.empty(); ++n) {
    Entry& e = rob_.front();
    if (!e.completed || e.complete_cycle > cycle) break;
    const RegId dst = e.uop.dst;
    if (mode_ == CoreMode::NORMAL) {
      if (!e.from_trace || e.trace_idx != retired_) throw SimAssertion("retirement out of program order");
      if (dst != kNoReg) {
        regs_[dst] = e.value;
        ++reg_ver_[dst];
      }
      if (e.uop.is_store()) {
        mem_image_.write(e.addr, e.value);
        mem_.core_store(id_, paddr(e.addr), cycle);
      }
      if (e.uop.is_load()) note_retired_load(e);
      fnv(hash_, e.uop.seq);
      fnv(hash_, e.uop.pc);
      ++retired_;
    } else {
      if (dst != kNoReg) {
        ra_regs_[dst] = e.value;
        ra_poison_[dst] = e.poisoned;
      }
      if (e.uop.is_store() && !e.addr_poisoned) ra_cache_.write(e.addr, e.value, e.poisoned);
    }
    rob_.pop_front();
  }
}

void Core::rs_insert(std::uint64_t uid) { rs_.insert(std::lower_bound(rs_.begin(), rs_.end(), uid), uid); }

void Core::issue(std::uint64_t cycle) {
  unsigned issued = 0, loads = 0;
  for (std::size_t i = 0; i < rs_.size() && issued < cfg_.width;) {
    Entry* e = find(rs_[i]);
    if (!e) {
      rs_.erase(rs_.begin() + static_cast<std::ptrdiff_t>(i));
      continue;
    }
    if ((e->uop.is_load() && loads >= cfg_.load_ports) || !ready(*e, cycle)) {
      ++i;
      continue;
    }
    if (issue_one(*e, cycle, loads)) {
      rs_.erase(rs_.begin() + static_cast<std::ptrdiff_t>(i));
      ++issued;
    } else {
      ++i;
    }
  }
}

bool Core::issue_one(Entry& e, std::uint64_t cycle, unsigned& loads) {
  const MicroOp& u = e.uop;
  auto complete_at = [&](std::uint64_t c) {
    e.issued = true;
    e.completed = true;
    e.issue_cycle = cycle;
    e.complete_cycle = c;
    return true;
  };

  if (mode_ != CoreMode::NORMAL) {
    const bool p0 = src_poisoned(e, 0), p1 = src_poisoned(e, 1);
    if (u.is_load()) {
      ++loads;
      if (p0 || p1) {
        e.poisoned = true;
        return complete_at(cycle + 1);
      }
      return issue_runahead_load(e, cycle);
    }
    if (u.is_store()) {
      e.addr_poisoned = p0;
      e.poisoned = p0 || p1;
      if (e.runahead && !p0) {
        OpResult r = evaluate(u, src_value(e, 0), src_value(e, 1));
        e.addr = r.address;
        e.value = r.value;
      }
      return complete_at(cycle + 1);
    }
    if (p0 || p1) {
      e.poisoned = true;
      return complete_at(cycle + 1);
    }
    if (e.runahead) e.value = evaluate(u, src_value(e, 0), src_value(e, 1)).value;
    return complete_at(cycle + fu_latency(u.op));
  }

  if (u.is_load()) {
    ++loads;
    if (e.forwarded) return complete_at(cycle + mem_.config().l1_latency);
    auto a = mem_.core_load(id_, paddr(e.addr), e.uid, cycle, ReqKind::LOAD, u.pc);
    switch (a.outcome) {
      case MemorySystem::Outcome::RETRY:
        return false;
      case MemorySystem::Outcome::L1_HIT:
        e.sent_retired = retired_;
        return complete_at(a.ready);
      default:
        e.issued = true;
        e.issue_cycle = cycle;
        e.waiting_mem = true;
        e.l1_miss = true;
        e.l1_miss_cycle = cycle + mem_.config().l1_latency;
        e.sent_retired = retired_;
        return true;
    }
  }
  return complete_at(cycle + fu_latency(u.op));
}

bool Core::issue_runahead_load(Entry& e, std::uint64_t cycle) {
  const MicroOp& u = e.uop;
  if (e.runahead) e.addr = evaluate(u, src_value(e, 0), src_value(e, 1)).address;
  const std::uint64_t a = MemoryImage::align(e.addr);
  const unsigned fwd_lat = mem_.config().l1_latency;
  auto finish = [&](std::uint64_t c) {
    e.issued = true;
    e.completed = true;
    e.issue_cycle = cycle;
    e.complete_cycle = c;
    return true;
  };

  for (std::size_t k = e.uid - rob_.front().uid; k-- > 0;) {
    const Entry& s = rob_[k];
    if (!s.uop.is_store() || (s.runahead && !s.issued) || s.addr_poisoned) continue;
    if (MemoryImage::align(s.addr) != a) continue;
    e.poisoned = s.poisoned;
    if (e.runahead) e.value = s.value;
    return finish(cycle + fwd_lat);
  }
  if (auto h = ra_cache_.lookup(e.addr)) {
    e.poisoned = h->poisoned;
    if (e.runahead) e.value = h->value;
    return finish(cycle + fwd_lat);
  }
  auto acc = mem_.core_load(id_, paddr(e.addr), e.uid, cycle, ReqKind::RUNAHEAD, u.pc);
  switch (acc.outcome) {
    case MemorySystem::Outcome::RETRY:
      return false;
    case MemorySystem::Outcome::LLC_MISS_NOW:
      if (acc.sent) ++cur_interval_.misses;
      e.poisoned = true;
      return finish(cycle + 1);
    case MemorySystem::Outcome::L1_HIT:
      if (e.runahead) e.value = mem_image_.read(e.addr);
      return finish(acc.ready);
    case MemorySystem::Outcome::PENDING:
      if (e.runahead) e.value = mem_image_.read(e.addr);
      e.issued = true;
      e.issue_cycle = cycle;
      e.waiting_mem = true;
      return true;
  }
  return false;
}

void Core::dispatch(std::uint64_t cycle) {
  if (mode_ == CoreMode::RUNAHEAD_BUFFER) {
    if (cycle < buffer_start_) return;
    for (unsigned n = 0; n < cfg_.width && rob_.size() < cfg_.rob_size && rs_.size() < cfg_.rs_size; ++n) {
      dispatch_op(buffer_.next(), 0, false, cycle);
      ++cur_interval_.uops;
    }
    return;
  }
  for (unsigned n = 0;
       n < cfg_.width && cursor_ < limit_ && rob_.size() < cfg_.rob_size && rs_.size() < cfg_.rs_size; ++n) {
    dispatch_op(trace_.ops[cursor_], cursor_, true, cycle);
    ++cursor_;
    if (mode_ != CoreMode::NORMAL) ++cur_interval_.uops;
  }
}

void Core::dispatch_op(const MicroOp& op, std::size_t trace_idx, bool from_trace, std::uint64_t cycle) {
  Entry e;
  e.uid = next_uid_++;
  e.trace_idx = trace_idx;
  e.from_trace = from_trace;
  e.uop = op;
  e.runahead = mode_ != CoreMode::NORMAL;
  e.dispatch_no = dispatch_no_++;

  for (int k = 0; k < 2; ++k) {
    const RegId r = op.src[k];
    if (r == kNoReg) continue;
    const Entry* pe = rat_[r] ? find(rat_[r]) : nullptr;
    if (pe) {
      e.prod[k] = pe->uid;
      e.src_tags[k] = pe->uid;
      e.src_values[k] = pe->value;
      if (!(pe->completed && pe->complete_cycle <= cycle)) {
        if (pe->uop.is_load()) e.origins.push_back({pe->uid, pe->dispatch_no});
        e.origins.insert(e.origins.end(), pe->origins.begin(), pe->origins.end());
      }
    } else {
      e.src_tags[k] = kArchTag | (std::uint64_t(r) << 40) | reg_ver_[r];
      e.src_values[k] = regs_[r];
    }
  }
  if (!e.origins.empty()) {
    std::erase_if(e.origins, [&](const Origin& o) { return e.dispatch_no - o.dispatch_no > cfg_.poison_window; });
    std::sort(e.origins.begin(), e.origins.end(), [](const Origin& a, const Origin& b) { return a.uid > b.uid; });
    e.origins.erase(std::unique(e.origins.begin(), e.origins.end(),
                                [](const Origin& a, const Origin& b) { return a.uid == b.uid; }),
                    e.origins.end());
    if (e.origins.size() > kMaxOrigins) e.origins.resize(kMaxOrigins);
  }

  if (!e.runahead) {
    const OpResult r = evaluate(op, e.src_values[0], e.src_values[1]);
    if (op.is_mem()) e.addr = op.vaddr.value_or(r.address);
    if (op.is_load()) {
      const std::uint64_t a = MemoryImage::align(e.addr);
      e.value = mem_image_.read(e.addr);
      for (auto it = rob_.rbegin(); it != rob_.rend(); ++it)
        if (it->uop.is_store() && MemoryImage::align(it->addr) == a) {
          e.value = it->value;
          e.forwarded = true;
          break;
        }
    } else {
      e.value = r.value;
    }
  }
  if (op.dst != kNoReg) rat_[op.dst] = e.uid;
  rob_.push_back(std::move(e));
  rs_.push_back(rob_.back().uid);

  if (mode_ == CoreMode::NORMAL && ra_request_ && op.pc == *ra_request_ && emc_) {
    auto snap = snapshot();
    if (auto c = extract_runahead_chain(snap, op.pc)) {
      c->source_addr = rob_.back().addr;
      ra_request_.reset();
      ++stats_.emc_ra_chains;
      emc_->ship_ra_chain(id_, std::move(*c), cycle);
    }
  }
}

void Core::detect_stall(std::uint64_t cycle) {
  stalled_ = false;
  if (mode_ != CoreMode::NORMAL || rob_.size() < cfg_.rob_size) return;
  Entry& h = rob_.front();
  if (!h.uop.is_load() || !h.is_llc_miss || h.completed) return;
  stalled_ = true;
  ++stats_.stall_cycles;
  if (h.uid != last_stall_uid_) {
    last_stall_uid_ = h.uid;
    on_full_window_stall(h, cycle);
  }
}

void Core::on_full_window_stall(Entry& h, std::uint64_t cycle) {
  ++stats_.full_window_stalls;
  if (obs_) obs_->on_full_window_stall(id_, h.uop, snapshot());
  const bool dep = classify(h);
  if (cfg_.ra_emc) pc_table_.update(h.uop.pc, dep);

  if (cfg_.emc_dep && emc_ && dep_counter_ >= 2 && dep_chain_source_ != h.uid) {
    auto snap = snapshot();
    DependenceChain c = extract_forward(snap, 0);
    if (!c.ops.empty()) {
      dep_chain_source_ = h.uid;
      for (const ChainOp& op : c.ops) {
        Entry* x = find(op.rob_uid);
        if (!x || x->issued || x->completed) continue;
        x->offloaded = true;
        std::erase(rs_, x->uid);
      }
      ++stats_.emc_dep_chains;
      emc_->ship_dep_chain(id_, std::move(c), cycle);
    }
  }

  if (cfg_.runahead == RunaheadPolicy::NONE) return;
  const bool enh = cfg_.enhancements || cfg_.runahead == RunaheadPolicy::HYBRID;
  if (!runahead_allowed(enh, retired_, h.sent_retired, prev_reach_)) return;
  if (cfg_.runahead == RunaheadPolicy::TRADITIONAL) {
    enter_runahead(CoreMode::RUNAHEAD_TRADITIONAL, cycle, nullptr, 0);
    return;
  }
  auto snap = snapshot();
  HybridResult r = hybrid_select(snap, h.uop.pc, chain_cache_);
  if (r.choice == HybridChoice::USE_BUFFER)
    enter_runahead(CoreMode::RUNAHEAD_BUFFER, cycle, &r.chain, r.gen_cycles);
  else if (cfg_.runahead == RunaheadPolicy::HYBRID)
    enter_runahead(CoreMode::RUNAHEAD_TRADITIONAL, cycle, nullptr, 0);
}

void Core::enter_runahead(CoreMode m, std::uint64_t cycle, const DependenceChain* chain, unsigned gen_cycles) {
  if (mode_ != CoreMode::NORMAL) throw SimAssertion("runahead re-entry");
  mode_ = m;
  blocking_uid_ = rob_.front().uid;
  checkpoint_cursor_ = rob_.front().trace_idx;
  checkpoint_regs_ = regs_;
  ra_regs_ = regs_;
  std::fill(ra_poison_.begin(), ra_poison_.end(), false);
  ra_cache_.clear();
  for (Entry& e : rob_)
    if (e.waiting_mem && e.is_llc_miss) {
      e.is_llc_miss = false;
      e.poisoned = true;
      e.waiting_mem = false;
      e.completed = true;
      e.complete_cycle = cycle;
    }
  cur_interval_ = IntervalStats{intervals_.size(), m, cycle, 0, 0, 0};
  if (m == CoreMode::RUNAHEAD_BUFFER) {
    buffer_ = RunaheadBuffer{};
    buffer_.chain = *chain;
    buffer_start_ = cycle + gen_cycles;
  }
  stalled_ = false;
}

void Core::exit_runahead(std::uint64_t cycle) {
  exit_pending_ = false;
  cur_interval_.cycles = cycle - cur_interval_.start_cycle;
  intervals_.push_back(cur_interval_);
  ++stats_.runahead_intervals;
  stats_.runahead_cycles += cur_interval_.cycles;
  stats_.runahead_uops += cur_interval_.uops;
  stats_.runahead_misses += cur_interval_.misses;
  prev_reach_ = cursor_;

  rob_.clear();
  rs_.clear();
  std::fill(rat_.begin(), rat_.end(), 0);
  cursor_ = checkpoint_cursor_;
  mode_ = CoreMode::NORMAL;
  ra_cache_.clear();
  if (regs_ != checkpoint_regs_) throw SimAssertion("architectural state changed during runahead");
  checkpoint_regs_.clear();
}

std::vector<RobSlot> Core::snapshot() const {
  std::vector<RobSlot> out;
  out.reserve(rob_.size());
  for (const Entry& e : rob_) {
    RobSlot s;
    s.uid = e.uid;
    s.uop = e.uop;
    s.dst_tag = e.uop.dst != kNoReg ? e.uid : 0;
    s.src_tags = e.src_tags;
    s.src_values = e.src_values;
    s.value = e.value;
    s.addr = e.addr;
    s.completed = e.completed;
    s.poisoned = e.poisoned;
    s.is_llc_miss = e.is_llc_miss;
    out.push_back(s);
  }
  return out;
}

std::uint64_t Core::digest() const {
  std::uint64_t h = hash_;
  fnv(h, retired_);
  for (std::uint64_t r : regs_) fnv(h, r);
  for (const auto& [a, v] : mem_image_.words()) {
    fnv(h, a);
    fnv(h, v);
  }
  return h;
}

// ------------------------------------------------------------------ EMC side

std::uint64_t Core::read_for_emc(std::uint64_t vaddr, std::uint64_t before_uid) const {
  if (mode_ == CoreMode::NORMAL) {
    const std::uint64_t a = MemoryImage::align(vaddr);
    for (auto it = rob_.rbegin(); it != rob_.rend(); ++it)
      if (it->uid < before_uid && it->uop.is_store() && MemoryImage::align(it->addr) == a) return it->value;
  }
  return mem_image_.read(vaddr);
}

void Core::emc_complete(std::uint64_t uid, std::uint64_t value, bool llc_miss, std::uint64_t cycle) {
  Entry* e = find(uid);
  if (!e || !e->offloaded || e->completed) return;
  e->offloaded = false;
  if (e->uop.dst != kNoReg && e->value != value) {
    rs_insert(uid);
    return;
  }
  e->issued = true;
  e->completed = true;
  e->emc_executed = true;
  e->issue_cycle = std::min(e->issue_cycle ? e->issue_cycle : cycle, cycle);
  e->complete_cycle = cycle;
  if (e->uop.is_load()) e->is_llc_miss = llc_miss;
}

void Core::emc_release(const std::vector<std::uint64_t>& uids) {
  for (std::uint64_t uid : uids) {
    Entry* e = find(uid);
    if (!e || !e->offloaded || e->completed) continue;
    e->offloaded = false;
    rs_insert(uid);
  }
}

}  // namespace remsim
