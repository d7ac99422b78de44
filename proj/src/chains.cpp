#include "remsim/chains.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace remsim {

namespace {
constexpr std::size_t npos = static_cast<std::size_t>(-1);

// Youngest store older than rob[load] with an identical address.
std::size_t find_spill_store(std::span<const RobSlot> rob, std::size_t load) {
  for (std::size_t k = load; k-- > 0;)
    if (rob[k].uop.is_store() && rob[k].addr == rob[load].addr) return k;
  return npos;
}

std::unordered_map<PhysTag, std::size_t> producers(std::span<const RobSlot> rob, std::size_t end) {
  std::unordered_map<PhysTag, std::size_t> m;
  m.reserve(end * 2);
  for (std::size_t i = 0; i < end; ++i)
    if (rob[i].dst_tag) m[rob[i].dst_tag] = i;
  return m;
}
}  // namespace

bool emc_allowed(OpClass c) {
  switch (c) {
    case OpClass::IADD:
    case OpClass::MOVE:
    case OpClass::LOGIC:
    case OpClass::SHIFT:
    case OpClass::SIGNEXT:
    case OpClass::LOAD:
    case OpClass::STORE:
    case OpClass::BRANCH:
      return true;
    default:
      return false;
  }
}

std::size_t DependenceChain::map_count() const {
  return static_cast<std::size_t>(
      std::count_if(ops.begin(), ops.end(), [](const ChainOp& o) { return o.uop.op == OpClass::MAP; }));
}

unsigned DependenceChain::reg_count() const {
  int hi = -1;
  for (const auto& o : ops)
    for (RegId r : {o.uop.dst, o.uop.src[0], o.uop.src[1]})
      if (r != kNoReg) hi = std::max(hi, int(r));
  for (const auto& l : live_ins)
    if (l.reg != kNoReg) hi = std::max(hi, int(l.reg));
  return static_cast<unsigned>(hi + 1);
}

// ------------------------------------------------------------ backward walk

std::optional<DependenceChain> extract_backwards(std::span<const RobSlot> rob, std::uint64_t stall_pc,
                                                 std::size_t max_len) {
  std::size_t stall = npos, match = npos;
  for (std::size_t i = 0; i < rob.size(); ++i) {
    if (rob[i].uop.pc != stall_pc) continue;
    if (stall == npos) {
      stall = i;
    } else {
      match = i;
      break;
    }
  }
  if (match == npos) return std::nullopt;

  auto prod = producers(rob, match);
  std::vector<bool> included(match + 1, false);
  std::vector<std::size_t> chain;
  std::deque<PhysTag> q;
  std::unordered_set<PhysTag> seen;
  auto enqueue_sources = [&](std::size_t i) {
    for (PhysTag t : rob[i].src_tags)
      if (t && seen.insert(t).second) q.push_back(t);
  };

  DependenceChain out;
  out.kind = ChainKind::RA_BUFFER;
  out.max_len = max_len;
  out.trigger_pc = stall_pc;

  auto include = [&](std::size_t i) {
    if (chain.size() >= max_len) {
      out.truncated = true;
      return false;
    }
    included[i] = true;
    chain.push_back(i);
    enqueue_sources(i);
    return true;
  };

  include(match);
  while (!q.empty()) {
    PhysTag t = q.front();
    q.pop_front();
    ++out.gen_cycles;
    auto it = prod.find(t);
    if (it == prod.end() || included[it->second]) continue;
    std::size_t i = it->second;
    if (!include(i)) break;
    if (rob[i].uop.is_load()) {
      std::size_t k = find_spill_store(rob, i);
      if (k != npos && !included[k] && !include(k)) break;
    }
  }

  for (std::size_t i : chain) out.walk_order.push_back(rob[i].uid);
  std::sort(chain.begin(), chain.end());
  for (std::size_t i : chain) {
    out.ops.push_back({rob[i].uop, rob[i].uid});
    out.source_ops.push_back(rob[i].uop);
  }
  return out;
}

// ------------------------------------------------------------- forward walk

DependenceChain extract_forward(std::span<const RobSlot> rob, std::size_t source_index, std::size_t max_len,
                                unsigned width) {
  constexpr unsigned kEmcDepRegs = 16;
  DependenceChain out;
  out.kind = ChainKind::EMC_DEP;
  out.max_len = max_len;
  const RobSlot& src = rob[source_index];
  out.source_uid = src.uid;
  out.source_addr = src.addr;
  out.trigger_pc = src.uop.pc;
  if (!src.dst_tag) return out;

  auto prod = producers(rob, rob.size());
  auto ready = [&](PhysTag t) {
    if (!t) return true;
    auto it = prod.find(t);
    if (it == prod.end()) return true;
    const RobSlot& p = rob[it->second];
    return p.completed && !p.poisoned;
  };

  std::unordered_map<PhysTag, RegId> epr;
  RegId next = 0;
  epr[src.dst_tag] = next++;
  out.source_reg = 0;

  std::unordered_set<PhysTag> broadcast;
  std::deque<PhysTag> pending{src.dst_tag};
  std::vector<std::size_t> mem_wake;
  std::vector<bool> in_chain(rob.size(), false);
  std::vector<std::size_t> chain;
  bool stop = false;

  while (!stop && (!pending.empty() || !mem_wake.empty())) {
    std::unordered_set<PhysTag> round;
    for (unsigned w = 0; w < width && !pending.empty(); ++w) {
      round.insert(pending.front());
      broadcast.insert(pending.front());
      pending.pop_front();
    }
    std::vector<std::size_t> mem_now;
    mem_now.swap(mem_wake);
    bool woke = false;

    for (std::size_t j = source_index + 1; j < rob.size() && !stop; ++j) {
      if (in_chain[j]) continue;
      const RobSlot& s = rob[j];
      bool hit = std::find(mem_now.begin(), mem_now.end(), j) != mem_now.end();
      for (PhysTag t : s.src_tags)
        if (t && round.count(t)) hit = true;
      if (!hit || !emc_allowed(s.uop.op)) continue;

      bool ok = true;
      unsigned new_regs = s.dst_tag ? 1 : 0;
      for (PhysTag t : s.src_tags) {
        if (!t || broadcast.count(t)) continue;
        if (!ready(t)) ok = false;
        else if (!epr.count(t)) ++new_regs;
      }
      if (!ok) continue;

      std::size_t fill = npos;
      if (s.uop.is_store()) {
        for (std::size_t k = j + 1; k < rob.size(); ++k)
          if (rob[k].uop.is_load() && rob[k].addr == s.addr) {
            fill = k;
            break;
          }
        if (fill == npos) continue;  // not a register spill
      }
      if (chain.size() >= max_len || next + new_regs > kEmcDepRegs) {
        out.truncated = true;
        stop = true;
        break;
      }

      in_chain[j] = true;
      chain.push_back(j);
      out.walk_order.push_back(s.uid);
      woke = true;
      for (int k = 0; k < 2; ++k) {
        PhysTag t = s.src_tags[k];
        if (!t || epr.count(t)) continue;
        epr[t] = next;
        out.live_ins.push_back({next, s.src_values[k], s.uop.src[k]});
        ++next;
      }
      if (s.uop.imm) out.live_ins.push_back({kNoReg, static_cast<std::uint64_t>(*s.uop.imm), kNoReg});
      if (s.dst_tag) {
        epr[s.dst_tag] = next++;
        pending.push_back(s.dst_tag);
      }
      if (fill != npos) mem_wake.push_back(fill);
    }
    if (woke) ++out.gen_cycles;
  }

  std::sort(chain.begin(), chain.end());
  for (std::size_t i : chain) {
    const RobSlot& s = rob[i];
    MicroOp u = s.uop;
    u.dst = s.dst_tag ? epr.at(s.dst_tag) : kNoReg;
    for (int k = 0; k < 2; ++k) u.src[k] = s.src_tags[k] ? epr.at(s.src_tags[k]) : kNoReg;
    out.ops.push_back({u, s.uid});
    out.source_ops.push_back(s.uop);
  }
  return out;
}

// ------------------------------------------------------- runahead chain walk

namespace {

DependenceChain build_ra_chain(std::span<const RobSlot> rob, std::size_t target, std::size_t limit,
                               std::size_t max_len) {
  constexpr unsigned kEmcRaRegs = 32;
  DependenceChain out;
  out.kind = ChainKind::EMC_RA;
  out.max_len = max_len;
  out.trigger_pc = rob[target].uop.pc;

  auto prod = producers(rob, target);
  std::unordered_map<PhysTag, RegId> epr;
  std::unordered_map<PhysTag, std::pair<RegId, std::uint64_t>> tag_info;  // arch reg, value
  RegId next = 0;
  std::deque<PhysTag> q;
  std::unordered_set<std::uint64_t> pcs{rob[target].uop.pc};
  std::vector<std::size_t> chain;
  std::vector<PhysTag> live_in_tags;
  std::vector<bool> included(target + 1, false);

  auto new_sources = [&](std::size_t i) {
    unsigned n = 0;
    for (PhysTag t : rob[i].src_tags)
      if (t && !epr.count(t)) ++n;
    return n;
  };
  auto enqueue_sources = [&](std::size_t i) {
    for (int k = 0; k < 2; ++k) {
      PhysTag t = rob[i].src_tags[k];
      if (!t || epr.count(t)) continue;
      epr[t] = next++;
      tag_info[t] = {rob[i].uop.src[k], rob[i].src_values[k]};
      q.push_back(t);
    }
  };
  auto include = [&](std::size_t i) {
    included[i] = true;
    chain.push_back(i);
    pcs.insert(rob[i].uop.pc);
    out.walk_order.push_back(rob[i].uid);
    enqueue_sources(i);
  };
  auto can_include = [&](std::size_t i) {
    if (included[i] || pcs.count(rob[i].uop.pc)) return false;
    if (chain.size() >= limit || next + new_sources(i) > kEmcRaRegs) {
      out.truncated = true;
      return false;
    }
    return true;
  };

  if (rob[target].dst_tag) epr[rob[target].dst_tag] = next++;
  include(target);
  while (!q.empty()) {
    PhysTag t = q.front();
    q.pop_front();
    ++out.gen_cycles;
    auto it = prod.find(t);
    if (it == prod.end() || !can_include(it->second)) {
      live_in_tags.push_back(t);
      continue;
    }
    std::size_t i = it->second;
    include(i);
    if (rob[i].uop.is_load()) {
      std::size_t k = find_spill_store(rob, i);
      if (k != npos && can_include(k)) include(k);
    }
  }

  std::sort(chain.begin(), chain.end());
  std::map<RegId, RegId> live_out;  // arch -> EPR written last in program order
  for (std::size_t i : chain) {
    const RobSlot& s = rob[i];
    MicroOp u = s.uop;
    u.dst = s.dst_tag ? epr.at(s.dst_tag) : kNoReg;
    for (int k = 0; k < 2; ++k) u.src[k] = s.src_tags[k] ? epr.at(s.src_tags[k]) : kNoReg;
    out.ops.push_back({u, s.uid});
    out.source_ops.push_back(s.uop);
    if (s.uop.dst != kNoReg) live_out[s.uop.dst] = u.dst;
  }

  std::sort(live_in_tags.begin(), live_in_tags.end(),
            [&](PhysTag a, PhysTag b) { return epr.at(a) < epr.at(b); });
  for (PhysTag t : live_in_tags) {
    auto [arch, value] = tag_info.at(t);
    RegId e = epr.at(t);
    out.live_ins.push_back({e, value, arch});
    auto lo = live_out.find(arch);
    out.rrt.push_back({arch, lo == live_out.end() ? e : lo->second, e, true});
    if (lo != live_out.end()) {
      MicroOp m;
      m.op = OpClass::MAP;
      m.pc = out.trigger_pc;
      m.dst = e;
      m.src = {lo->second, kNoReg};
      out.ops.push_back({m, 0});
    }
  }
  for (auto [arch, e] : live_out) {
    bool has_row = std::any_of(out.rrt.begin(), out.rrt.end(), [&](const RrtRow& r) { return r.arch == arch; });
    if (!has_row) out.rrt.push_back({arch, e, e, false});
  }
  return out;
}

}  // namespace

std::optional<DependenceChain> extract_runahead_chain(std::span<const RobSlot> rob, std::uint64_t marked_pc,
                                                      std::size_t max_len) {
  std::size_t target = npos;
  for (std::size_t i = rob.size(); i-- > 0;)
    if (rob[i].uop.pc == marked_pc) {
      target = i;
      break;
    }
  if (target == npos) return std::nullopt;
  std::size_t limit = max_len;
  for (;;) {
    DependenceChain c = build_ra_chain(rob, target, limit, max_len);
    if (c.ops.size() <= max_len || limit <= 1) return c;
    limit -= std::min(limit - 1, c.ops.size() - max_len);
  }
}

// -------------------------------------------------------------------- oracle

std::set<std::size_t> oracle_slice(std::span<const MicroOp> window, std::size_t target) {
  std::set<std::size_t> slice{target};
  std::vector<std::size_t> work{target};
  auto last_writer = [&](RegId r, std::size_t before) -> std::size_t {
    for (std::size_t k = before; k-- > 0;)
      if (window[k].dst == r) return k;
    return npos;
  };
  while (!work.empty()) {
    std::size_t i = work.back();
    work.pop_back();
    const MicroOp& op = window[i];
    for (RegId r : op.src) {
      if (r == kNoReg) continue;
      std::size_t w = last_writer(r, i);
      if (w != npos && slice.insert(w).second) work.push_back(w);
    }
    if (op.is_load() && i != target) {
      for (std::size_t k = i; k-- > 0;)
        if (window[k].is_store() && window[k].vaddr == op.vaddr) {
          if (slice.insert(k).second) work.push_back(k);
          break;
        }
    }
  }
  return slice;
}

std::vector<RobSlot> rename_window(std::span<const MicroOp> ops, const std::vector<std::uint64_t>& init_regs,
                                   const MemoryImage& memory) {
  std::vector<PhysTag> rat(init_regs.size());
  std::vector<std::uint64_t> regs = init_regs;
  for (std::size_t r = 0; r < rat.size(); ++r) rat[r] = r + 1;
  PhysTag next_tag = rat.size() + 1;
  MemoryImage mem = memory;
  std::vector<RobSlot> out;
  out.reserve(ops.size());
  std::uint64_t uid = 1;
  for (const MicroOp& op : ops) {
    RobSlot s;
    s.uid = uid++;
    s.uop = op;
    for (int k = 0; k < 2; ++k)
      if (op.src[k] != kNoReg) {
        s.src_tags[k] = rat[op.src[k]];
        s.src_values[k] = regs[op.src[k]];
      }
    OpResult r = evaluate(op, s.src_values[0], s.src_values[1]);
    if (op.is_mem()) s.addr = op.vaddr.value_or(r.address);
    if (op.is_load())
      s.value = mem.read(s.addr);
    else if (op.is_store())
      mem.write(s.addr, r.value);
    else
      s.value = r.value;
    if (op.dst != kNoReg) {
      s.dst_tag = next_tag++;
      rat[op.dst] = s.dst_tag;
      regs[op.dst] = s.value;
    }
    out.push_back(s);
  }
  return out;
}

std::vector<std::uint64_t> interpret_chain(const DependenceChain& chain, const MemoryImage& memory,
                                           unsigned iterations) {
  std::vector<std::uint64_t> regs(256, 0), addrs;
  for (const auto& l : chain.live_ins)
    if (l.reg != kNoReg) regs[l.reg] = l.value;
  for (unsigned it = 0; it < iterations; ++it) {
    std::map<std::uint64_t, std::uint64_t> stores;
    for (const auto& c : chain.ops) {
      const MicroOp& u = c.uop;
      auto v = [&](RegId r) { return r == kNoReg ? 0 : regs[r]; };
      OpResult r = evaluate(u, v(u.src[0]), v(u.src[1]));
      if (u.is_load()) {
        addrs.push_back(r.address);
        auto s = stores.find(MemoryImage::align(r.address));
        regs[u.dst] = s != stores.end() ? s->second : memory.read(r.address);
      } else if (u.is_store()) {
        stores[MemoryImage::align(r.address)] = r.value;
      } else if (u.dst != kNoReg) {
        regs[u.dst] = r.value;
      }
    }
  }
  return addrs;
}

// --------------------------------------------------------------- chain cache

const DependenceChain* ChainCache::get(std::uint64_t pc) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == pc; });
  if (it == entries_.end()) return nullptr;
  std::rotate(entries_.begin(), it, it + 1);
  return &entries_.front().second;
}

bool ChainCache::contains(std::uint64_t pc) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == pc; });
}

void ChainCache::put(std::uint64_t pc, DependenceChain chain) {
  std::erase_if(entries_, [&](const auto& e) { return e.first == pc; });
  entries_.insert(entries_.begin(), {pc, std::move(chain)});
  if (entries_.size() > kEntries) entries_.pop_back();
}

// ------------------------------------------------------------- PC-miss table

void PcMissTable::update(std::uint64_t stall_pc, bool is_dependent) {
  if (is_dependent) return;
  for (auto& e : entries_)
    if (e.pc == stall_pc) {
      ++e.count;
      return;
    }
  if (entries_.size() >= kEntries) {
    auto victim = std::min_element(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
      return a.count != b.count ? a.count < b.count : a.order < b.order;
    });
    entries_.erase(victim);
  }
  entries_.push_back({stall_pc, 1, next_order_++});
}

std::optional<std::uint64_t> PcMissTable::mark_top_pc(double mpki) {
  std::optional<std::uint64_t> pick;
  if (mpki > 5.0 && !entries_.empty()) {
    const Entry* best = nullptr;
    for (const auto& e : entries_)
      if (!best || e.count > best->count || (e.count == best->count && e.order < best->order)) best = &e;
    if (best->count > 0) pick = best->pc;
  }
  for (auto& e : entries_) e.count /= 2;
  marked_ = pick;
  return pick;
}

std::uint64_t PcMissTable::top_count() const {
  std::uint64_t m = 0;
  for (const auto& e : entries_) m = std::max(m, e.count);
  return m;
}

std::optional<std::uint64_t> PcMissTable::count(std::uint64_t pc) const {
  for (const auto& e : entries_)
    if (e.pc == pc) return e.count;
  return std::nullopt;
}

}  // namespace remsim
