#include "remsim/emc.hpp"

#include <algorithm>
#include <cmath>

namespace remsim {

const char* emc_policy_name(EmcPolicy p) {
  switch (p) {
    case EmcPolicy::ROUND_ROBIN: return "round-robin";
    case EmcPolicy::IPC: return "ipc";
    case EmcPolicy::SCORE: return "score";
  }
  return "?";
}

std::optional<EmcPolicy> emc_policy_from_name(const std::string& s) {
  if (s == "round-robin" || s == "rr") return EmcPolicy::ROUND_ROBIN;
  if (s == "ipc") return EmcPolicy::IPC;
  if (s == "score") return EmcPolicy::SCORE;
  return std::nullopt;
}

std::uint64_t update_interval(double accuracy) {
  if (accuracy > 0.95) return 100000;
  if (accuracy > 0.90) return 50000;
  if (accuracy > 0.85) return 20000;
  return 10000;
}

std::optional<int> select_runahead_core(EmcPolicy policy, const std::vector<CoreView>& cores,
                                        std::optional<int> last_owner) {
  const int n = static_cast<int>(cores.size());
  auto eligible = [&](int i) { return cores[i].mpki > kRaMpkiThreshold; };
  std::optional<int> pick;
  switch (policy) {
    case EmcPolicy::ROUND_ROBIN: {
      int start = last_owner ? *last_owner + 1 : 0;
      for (int k = 0; k < n; ++k) {
        int i = ((start + k) % n + n) % n;
        if (eligible(i)) return i;
      }
      return std::nullopt;
    }
    case EmcPolicy::IPC:
      for (int i = 0; i < n; ++i)
        if (eligible(i) && (!pick || cores[i].ipc < cores[*pick].ipc)) pick = i;
      return pick;
    case EmcPolicy::SCORE:
      for (int i = 0; i < n; ++i)
        if (eligible(i) && (!pick || cores[i].top_count > cores[*pick].top_count)) pick = i;
      return pick;
  }
  return pick;
}

ThrottleAction coordinate_throttle(double emc_acc, double ghb_acc) {
  ThrottleAction a;
  if (emc_acc > ghb_acc) a.halve_ghb = true;
  else if (ghb_acc > emc_acc) a.ra_width_one = true;
  return a;
}

void MissPredictor::update(int core, std::uint64_t pc, bool miss) {
  std::uint8_t& c = t_[core][pc % kEntries];
  if (miss) {
    if (c < 7) ++c;
  } else if (c > 0) {
    --c;
  }
}

void EmcTlb::insert(int core, std::uint64_t page) {
  auto& p = pages_[core];
  if (std::find(p.begin(), p.end(), page) != p.end()) return;
  if (p.size() < kEntries) {
    p.push_back(page);
    return;
  }
  p[next_[core]] = page;
  next_[core] = (next_[core] + 1) % kEntries;
}

bool EmcTlb::check(int core, std::uint64_t page) const {
  const auto& p = pages_[core];
  return std::find(p.begin(), p.end(), page) != p.end();
}

// ----------------------------------------------------------------------- EMC

Emc::Emc(const EmcConfig& cfg, MemorySystem& mem, std::vector<Core*> cores)
    : cfg_(cfg),
      mem_(mem),
      cores_(std::move(cores)),
      mp_(static_cast<unsigned>(cores_.size())),
      tlb_(static_cast<unsigned>(cores_.size())) {
  ctx_.resize(cfg_.dep_contexts + 1);
  ctx_.back().kind = ChainKind::EMC_RA;
  stats_.dep_latency.resize(cores_.size());
  stats_.dep_rejected_by_core.resize(cores_.size());
  const std::size_t n = cores_.size();
  last_retired_.assign(n, 0);
  last_misses_.assign(n, 0);
  last_pf_issued_.assign(n, 0);
  last_pf_useful_.assign(n, 0);
  interval_len_ = cfg_.fixed_interval;
}

std::uint64_t Emc::page_of(int core, std::uint64_t vaddr) const {
  const std::uint64_t ps = cores_[core]->trace().page_size;
  return ps ? vaddr / ps : 0;
}

void Emc::ship_dep_chain(int core, DependenceChain chain, std::uint64_t cycle) {
  Ring& ring = mem_.ring();
  const unsigned mc = mem_.mc_stop();
  unsigned hops = 0;
  const std::size_t msgs = (chain.wire_bytes() + kLineBytes - 1) / kLineBytes;
  for (std::size_t i = 0; i < msgs; ++i) hops = ring.route(static_cast<unsigned>(core), mc, MsgSize::DATA);
  incoming_.push_back({cycle + chain.gen_cycles + hops, core, std::move(chain)});
}

void Emc::ship_ra_chain(int core, DependenceChain chain, std::uint64_t cycle) {
  ship_dep_chain(core, std::move(chain), cycle);
}

void Emc::reset_context(Ctx& c) {
  c.busy = false;
  c.chain = {};
  c.pending.clear();
  c.stores.clear();
  c.results.clear();
  c.next_op = 0;
  c.iteration = 0;
  c.outstanding = 0;
  c.done_ops = 0;
  c.source_inst = -1;
  c.generation = ++generation_;
}

void Emc::load_context(Ctx& c, int core, DependenceChain chain) {
  reset_context(c);
  c.busy = true;
  c.core = core;
  c.chain = std::move(chain);
  unsigned nregs = 32;
  for (const auto& op : c.chain.ops) {
    if (op.uop.dst != kNoReg) nregs = std::max<unsigned>(nregs, op.uop.dst + 1u);
    for (RegId r : op.uop.src)
      if (r != kNoReg) nregs = std::max<unsigned>(nregs, r + 1u);
  }
  c.regs.assign(nregs, 0);
  c.writer.assign(nregs, -1);
  for (const LiveIn& l : c.chain.live_ins)
    if (l.reg != kNoReg) c.regs[l.reg] = l.value;
  tlb_.insert(core, page_of(core, c.chain.source_addr));
  if (c.kind == ChainKind::EMC_DEP) {
    std::uint64_t id = next_inst_++;
    slot(id) = {id, false, 0, 0};
    c.source_inst = static_cast<std::int64_t>(id);
    c.source_line = line_of(cores_[core]->paddr(c.chain.source_addr));
    if (c.chain.source_reg != kNoReg) c.writer[c.chain.source_reg] = c.source_inst;
  }
}

void Emc::accept(Pending& p, std::uint64_t cycle) {
  (void)cycle;
  Core& core = *cores_[p.core];
  if (p.chain.kind == ChainKind::EMC_DEP) {
    auto free = std::find_if(ctx_.begin(), ctx_.end() - 1, [](const Ctx& c) { return !c.busy; });
    if (!cfg_.dep || free == ctx_.end() - 1) {
      ++stats_.dep_rejected;
      ++stats_.dep_rejected_by_core[p.core];
      std::vector<std::uint64_t> uids;
      for (const ChainOp& op : p.chain.ops)
        if (op.rob_uid) uids.push_back(op.rob_uid);
      core.emc_release(uids);
      return;
    }
    ++stats_.dep_accepted;
    free->kind = ChainKind::EMC_DEP;
    load_context(*free, p.core, std::move(p.chain));
    return;
  }
  if (!cfg_.ra || p.chain.ops.empty()) return;
  ++stats_.ra_chains;
  Ctx& ra = ctx_.back();
  load_context(ra, p.core, std::move(p.chain));
}

void Emc::abort_context(Ctx& c, std::optional<std::uint64_t> tlb_miss_page) {
  if (tlb_miss_page) {
    ++stats_.aborts;
    tlb_.insert(c.core, *tlb_miss_page);
  }
  if (c.kind == ChainKind::EMC_DEP) {
    std::vector<std::uint64_t> uids;
    for (const ChainOp& op : c.chain.ops)
      if (op.rob_uid) uids.push_back(op.rob_uid);
    cores_[c.core]->emc_release(uids);
  } else if (owner_ && *owner_ == c.core && marked_pc_) {
    cores_[c.core]->request_ra_chain(*marked_pc_);
  }
  reset_context(c);
}

void Emc::complete(Ctx& c, std::uint64_t id, std::size_t op, std::uint64_t value, std::uint64_t ready,
                   bool llc_miss) {
  slot(id) = {id, true, ready, value};
  const MicroOp& u = c.chain.ops[op].uop;
  if (u.dst != kNoReg && c.writer[u.dst] == static_cast<std::int64_t>(id)) c.regs[u.dst] = value;
  if (c.kind == ChainKind::EMC_DEP) {
    ++c.done_ops;
    if (c.chain.ops[op].rob_uid) c.results.push_back({c.chain.ops[op].rob_uid, value, ready, llc_miss});
  }
}

void Emc::process_deliveries(std::uint64_t cycle) {
  auto& q = mem_.emc_deliveries();
  std::vector<Delivery> later;
  for (const Delivery& d : q) {
    if (d.cycle > cycle) {
      later.push_back(d);
      continue;
    }
    auto it = tokens_.find(d.token);
    if (it == tokens_.end()) continue;
    Outstanding o = it->second;
    tokens_.erase(it);
    --outstanding_loads_;
    Ctx& c = ctx_[o.ctx];
    if (!c.busy || c.generation != o.generation) continue;
    --c.outstanding;
    if (c.kind == ChainKind::EMC_DEP && d.from_dram) stats_.dep_latency[c.core].record(d.cycle - o.issue);
    complete(c, o.inst, o.op, o.value, d.cycle, d.from_dram);
  }
  q.swap(later);
}

void Emc::check_sources(std::uint64_t cycle) {
  const auto& fills = mem_.dram_fills();
  for (Ctx& c : ctx_) {
    if (!c.busy || c.kind != ChainKind::EMC_DEP || c.source_inst < 0) continue;
    Slot& s = slot(static_cast<std::uint64_t>(c.source_inst));
    if (s.done) continue;
    bool arrived = std::find(fills.begin(), fills.end(), c.source_line) != fills.end() || !mem_.in_flight(c.source_line);
    if (!arrived) continue;
    std::uint64_t v = cores_[c.core]->read_for_emc(c.chain.source_addr, c.chain.source_uid);
    s = {static_cast<std::uint64_t>(c.source_inst), true, cycle, v};
    if (c.chain.source_reg != kNoReg && c.writer[c.chain.source_reg] == c.source_inst) c.regs[c.chain.source_reg] = v;
  }
}

bool Emc::append_next(Ctx& c) {
  if (!c.busy || c.chain.ops.empty()) return false;
  if (c.next_op == c.chain.ops.size()) {
    if (c.kind == ChainKind::EMC_DEP) return false;
    c.next_op = 0;
    ++c.iteration;
    ++stats_.ra_iterations;
  }
  Inst in;
  in.id = next_inst_++;
  in.op = c.next_op++;
  const MicroOp& u = c.chain.ops[in.op].uop;
  for (int k = 0; k < 2; ++k) {
    RegId r = u.src[k];
    if (r == kNoReg) continue;
    std::int64_t w = c.writer[r];
    if (w >= 0 && slot(static_cast<std::uint64_t>(w)).id == static_cast<std::uint64_t>(w))
      in.src[k] = w;
    else
      in.fixed[k] = c.regs[r];
  }
  if (u.dst != kNoReg) c.writer[u.dst] = static_cast<std::int64_t>(in.id);
  slot(in.id) = {in.id, false, 0, 0};
  c.pending.push_back(in);
  return true;
}

void Emc::fill_window() {
  std::size_t used = 0;
  for (const Ctx& c : ctx_) used += c.pending.size();
  for (Ctx& c : ctx_)
    while (used < cfg_.rs_entries && append_next(c)) ++used;
}

bool Emc::inst_ready(const Ctx& c, std::size_t pos, std::uint64_t cycle) const {
  const Inst& in = c.pending[pos];
  const MicroOp& u = c.chain.ops[in.op].uop;
  if (u.op == OpClass::MAP && pos != 0) return false;
  if (u.is_load())
    for (std::size_t k = 0; k < pos; ++k)
      if (c.chain.ops[c.pending[k].op].uop.is_store()) return false;
  for (int k = 0; k < 2; ++k) {
    if (in.src[k] < 0) continue;
    const Slot& s = slot(static_cast<std::uint64_t>(in.src[k]));
    if (s.id != static_cast<std::uint64_t>(in.src[k])) throw SimAssertion("emc: producer slot overwritten");
    if (!s.done || s.cycle > cycle) return false;
  }
  return true;
}

std::uint64_t Emc::inst_src(const Inst& in, int k) const {
  return in.src[k] >= 0 ? slot(static_cast<std::uint64_t>(in.src[k])).value : in.fixed[k];
}

Emc::Exec Emc::execute(std::size_t ci, const Inst& in, std::uint64_t cycle) {
  Ctx& c = ctx_[ci];
  Core& core = *cores_[c.core];
  const MicroOp& u = c.chain.ops[in.op].uop;
  const bool dep = c.kind == ChainKind::EMC_DEP;
  (dep ? stats_.dep_uops : stats_.ra_uops)++;
  OpResult r = evaluate(u, inst_src(in, 0), inst_src(in, 1));
  Ring& ring = mem_.ring();
  const unsigned mc = mem_.mc_stop();

  if (u.is_mem()) {
    const std::uint64_t page = page_of(c.core, r.address);
    if (!tlb_.check(c.core, page)) {
      abort_context(c, page);
      return Exec::ABORT;
    }
    port_used_ = true;
    ring.route(mc, static_cast<unsigned>(c.core), MsgSize::CONTROL);
  }
  if (u.is_load()) {
    const std::uint64_t a = MemoryImage::align(r.address);
    std::optional<std::uint64_t> fwd;
    if (auto it = c.stores.find(a); it != c.stores.end()) {
      auto s = it->second.lower_bound(in.id);
      if (s != it->second.begin()) fwd = std::prev(s)->second;
    }
    std::uint64_t value = fwd ? *fwd : core.read_for_emc(r.address, dep ? c.chain.ops[in.op].rob_uid : 0);
    const std::uint64_t tok = next_token_++;
    const bool bypass = mp_.predict(c.core, u.pc);
    auto acc = mem_.emc_load(c.core, core.paddr(r.address), tok, cycle, dep ? ReqKind::EMC_DEP : ReqKind::EMC_RA,
                             bypass, core.retired());
    mp_.update(c.core, u.pc, !acc.in_llc);
    tokens_[tok] = {ci, c.generation, in.id, in.op, cycle, value};
    ++outstanding_loads_;
    ++c.outstanding;
    if (!dep) ++stats_.ra_loads;
    return Exec::OK;
  }
  if (u.is_store()) {
    auto& m = c.stores[MemoryImage::align(r.address)];
    m[in.id] = r.value;
    while (m.size() > 8) m.erase(m.begin());
    complete(c, in.id, in.op, r.value, cycle + 1, false);
    return Exec::OK;
  }
  if (u.op == OpClass::BRANCH) {
    complete(c, in.id, in.op, 0, cycle + 1, false);
    if (dep && u.taken && *u.taken != r.branch_taken) {
      ++stats_.branch_stops;
      abort_context(c, std::nullopt);
      return Exec::ABORT;
    }
    return Exec::OK;
  }
  complete(c, in.id, in.op, r.value, cycle + std::max(1u, fu_latency(u.op)), false);
  return Exec::OK;
}

void Emc::issue_stage(std::uint64_t cycle) {
  port_used_ = false;
  unsigned issued = 0;
  bool dep_left = false;
  std::vector<std::pair<ChainKind, OpClass>> log_now;

  for (std::size_t ci = 0; ci < ctx_.size(); ++ci) {
    Ctx& c = ctx_[ci];
    const bool ra = c.kind == ChainKind::EMC_RA;
    if (ra && dep_left) break;
    unsigned ra_issued = 0;
    std::size_t pos = 0;
    while (c.busy && pos < c.pending.size()) {
      if (!inst_ready(c, pos, cycle)) {
        ++pos;
        continue;
      }
      const Inst in = c.pending[pos];
      const MicroOp& u = c.chain.ops[in.op].uop;
      bool blocked = issued >= cfg_.width || (ra && ra_issued >= ra_width_) ||
                     (u.is_mem() && port_used_) || (u.is_load() && outstanding_loads_ >= cfg_.mshrs);
      if (blocked) {
        if (!ra) dep_left = true;
        ++pos;
        continue;
      }
      c.pending.erase(c.pending.begin() + static_cast<std::ptrdiff_t>(pos));
      ++issued;
      if (ra) ++ra_issued;
      log_now.emplace_back(c.kind, u.op);
      if (execute(ci, in, cycle) == Exec::ABORT) break;
    }
  }
  if (log_)
    for (auto [k, op] : log_now) log_->push_back({cycle, k, op, dep_left});
}

void Emc::maybe_finish_dep(Ctx& c, std::uint64_t cycle) {
  if (!c.busy || c.kind != ChainKind::EMC_DEP) return;
  if (c.done_ops < c.chain.ops.size() || c.outstanding) return;
  if (!slot(static_cast<std::uint64_t>(c.source_inst)).done) return;
  std::uint64_t t = cycle;
  std::size_t regs = 0;
  for (const auto& r : c.results) {
    t = std::max(t, r.cycle);
    if (c.chain.ops.size() && r.uid) ++regs;
  }
  Ring& ring = mem_.ring();
  unsigned hops = ring.hops(mem_.mc_stop(), static_cast<unsigned>(c.core));
  const std::size_t msgs = std::max<std::size_t>(1, (regs + 15) / 16);
  for (std::size_t i = 0; i < msgs; ++i) ring.route(mem_.mc_stop(), static_cast<unsigned>(c.core), MsgSize::DATA);
  for (const auto& r : c.results) cores_[c.core]->emc_complete(r.uid, r.value, r.llc_miss, t + hops);
  ++stats_.dep_completed;
  reset_context(c);
}

void Emc::step(std::uint64_t cycle) {
  process_deliveries(cycle);
  for (std::size_t i = 0; i < incoming_.size();) {
    if (incoming_[i].arrival <= cycle) {
      Pending p = std::move(incoming_[i]);
      incoming_.erase(incoming_.begin() + static_cast<std::ptrdiff_t>(i));
      accept(p, cycle);
    } else {
      ++i;
    }
  }
  check_sources(cycle);
  fill_window();
  issue_stage(cycle);
  for (Ctx& c : ctx_) maybe_finish_dep(c, cycle);
  if (cfg_.ra) interval_control(cycle);
}

bool Emc::idle() const {
  if (!incoming_.empty() || !tokens_.empty()) return false;
  return std::none_of(ctx_.begin(), ctx_.end(), [](const Ctx& c) { return c.busy; });
}

void Emc::interval_control(std::uint64_t cycle) {
  const int n = static_cast<int>(cores_.size());
  int ref = -1;
  if (owner_ && !cores_[*owner_]->done()) {
    ref = *owner_;
  } else {
    for (int i = 0; i < n; ++i)
      if (!cores_[i]->done()) {
        ref = i;
        break;
      }
  }
  if (ref < 0) return;
  // While no core owns the context, re-evaluate at the shortest interval.
  const std::uint64_t len = owner_ ? interval_len_ : std::min<std::uint64_t>(interval_len_, 10000);
  const bool owner_done = owner_ && cores_[*owner_]->done();
  if (!owner_done && cores_[ref]->retired() < last_retired_[ref] + len) return;

  FetchCounters& fc = mem_.emc_ra_interval();
  const std::uint64_t ev = fc.evicted_touched + fc.evicted_untouched;
  if (ev) accuracy_ = double(fc.evicted_touched) / double(ev);
  fc = {};

  std::vector<CoreView> views(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Core& c = *cores_[i];
    const std::uint64_t dr = c.retired() - last_retired_[i];
    const std::uint64_t dm = c.interval_misses() - last_misses_[i];
    views[i].mpki = dr ? 1000.0 * double(dm) / double(dr) : 0.0;
    views[i].ipc = cycle > last_boundary_cycle_ ? double(dr) / double(cycle - last_boundary_cycle_) : 0.0;
    views[i].top_count = c.pc_table().top_count();
    if (c.done()) views[i].mpki = 0;
  }

  EmcIntervalRecord rec;
  rec.cycle = cycle;
  rec.accuracy = accuracy_;
  auto& ds = mem_.distance_samples();
  if (distance_cursor_ < ds.size()) {
    double sum = 0;
    for (std::size_t i = distance_cursor_; i < ds.size(); ++i) sum += double(ds[i].distance);
    rec.distance_samples = ds.size() - distance_cursor_;
    rec.distance_mean = sum / double(rec.distance_samples);
  }
  distance_cursor_ = ds.size();

  if (cfg_.dynamic_interval) interval_len_ = update_interval(accuracy_);
  else interval_len_ = cfg_.fixed_interval;

  std::optional<int> pick = select_runahead_core(cfg_.policy, views, last_owner_);
  std::optional<std::uint64_t> pc;
  for (int i = 0; i < n; ++i) {
    auto m = cores_[i]->pc_table().mark_top_pc(views[i].mpki);
    if (pick && i == *pick) pc = m;
  }
  Ctx& ra = ctx_.back();
  if (owner_ && (!pick || *pick != *owner_ || !pc)) cores_[*owner_]->cancel_ra_request();
  if (pick && pc) {
    owner_ = pick;
    last_owner_ = pick;
    marked_pc_ = pc;
    reset_context(ra);
    cores_[*pick]->request_ra_chain(*pc);
    mem_.ring().route(static_cast<unsigned>(*pick), mem_.mc_stop(), MsgSize::CONTROL);
  } else {
    owner_.reset();
    marked_pc_.reset();
    reset_context(ra);
  }

  ra_width_ = cfg_.width;
  if (cfg_.coordinate_ghb) {
    double issued = 0, useful = 0;
    for (int i = 0; i < n; ++i) {
      PrefetchUnit& pf = mem_.prefetcher(i);
      issued += double(pf.totals().issued - last_pf_issued_[i]);
      useful += double(pf.totals().useful - last_pf_useful_[i]);
      pf.set_throttle(false);
    }
    if (issued > 0) {
      ThrottleAction a = coordinate_throttle(accuracy_, useful / issued);
      if (a.halve_ghb)
        for (int i = 0; i < n; ++i) mem_.prefetcher(i).set_throttle(true);
      if (a.ra_width_one) ra_width_ = 1;
    }
  }
  for (int i = 0; i < n; ++i) {
    last_retired_[i] = cores_[i]->retired();
    last_misses_[i] = cores_[i]->interval_misses();
    last_pf_issued_[i] = mem_.prefetcher(i).totals().issued;
    last_pf_useful_[i] = mem_.prefetcher(i).totals().useful;
  }
  last_boundary_cycle_ = cycle;
  rec.owner = owner_ ? *owner_ : -1;
  rec.length = interval_len_;
  stats_.intervals.push_back(rec);
}

}  // namespace remsim
