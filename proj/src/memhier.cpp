#include "remsim/memhier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace remsim {

const char* req_kind_name(ReqKind k) {
  switch (k) {
    case ReqKind::LOAD: return "LOAD";
    case ReqKind::STORE: return "STORE";
    case ReqKind::PREFETCH: return "PREFETCH";
    case ReqKind::RUNAHEAD: return "RUNAHEAD";
    case ReqKind::EMC_DEP: return "EMC_DEP";
    case ReqKind::EMC_RA: return "EMC_RA";
    case ReqKind::WRITEBACK: return "WRITEBACK";
  }
  return "?";
}

// --------------------------------------------------------------------- cache

CacheModel::CacheModel(std::uint64_t bytes, unsigned ways, unsigned latency, unsigned interleave)
    : sets_(std::max<std::uint64_t>(1, bytes / (kLineBytes * std::max(1u, ways)))),
      ways_(std::max(1u, ways)),
      latency_(latency),
      interleave_(std::max(1u, interleave)),
      lines_(sets_ * ways_) {}

CacheLine* CacheModel::find(std::uint64_t line) {
  CacheLine* base = &lines_[set_of(line) * ways_];
  for (unsigned w = 0; w < ways_; ++w)
    if (base[w].valid && base[w].line == line) return &base[w];
  return nullptr;
}

const CacheLine* CacheModel::find(std::uint64_t line) const { return const_cast<CacheModel*>(this)->find(line); }

CacheLine* CacheModel::touch(std::uint64_t line) {
  CacheLine* l = find(line);
  if (l) l->lru = ++clock_;
  return l;
}

std::optional<CacheLine> CacheModel::insert(std::uint64_t line, CacheLine** slot) {
  CacheLine* base = &lines_[set_of(line) * ways_];
  CacheLine* victim = base;
  for (unsigned w = 0; w < ways_; ++w) {
    if (!base[w].valid) {
      victim = &base[w];
      break;
    }
    if (base[w].lru < victim->lru) victim = &base[w];
  }
  std::optional<CacheLine> out;
  if (victim->valid) out = *victim;
  *victim = CacheLine{};
  victim->valid = true;
  victim->line = line;
  victim->lru = ++clock_;
  if (slot) *slot = victim;
  return out;
}

bool CacheModel::invalidate(std::uint64_t line) {
  CacheLine* l = find(line);
  if (!l) return false;
  l->valid = false;
  return true;
}

std::size_t CacheModel::valid_lines() const {
  return static_cast<std::size_t>(std::count_if(lines_.begin(), lines_.end(), [](const CacheLine& l) { return l.valid; }));
}

// ---------------------------------------------------------------------- ring

unsigned Ring::hops(unsigned a, unsigned b) const {
  unsigned d = a > b ? a - b : b - a;
  return std::min(d, stops_ - d);
}

unsigned Ring::route(unsigned src, unsigned dst, MsgSize size) {
  if (src == dst) return 0;
  (size == MsgSize::DATA ? data_ : control_)++;
  return hops(src, dst);
}

// ---------------------------------------------------------------------- DRAM

unsigned cycles_from_ns(double ns, double ghz) { return static_cast<unsigned>(std::lround(ns * ghz)); }

RowOutcome row_outcome(const BankState& b, std::uint64_t row) {
  if (!b.open_row) return RowOutcome::CLOSED;
  return *b.open_row == row ? RowOutcome::HIT : RowOutcome::CONFLICT;
}

unsigned dram_latency(const BankState& b, std::uint64_t row, const DramTiming& t) {
  switch (row_outcome(b, row)) {
    case RowOutcome::HIT: return t.tCAS + t.burst;
    case RowOutcome::CLOSED: return t.tRCD + t.tCAS + t.burst;
    case RowOutcome::CONFLICT: return t.tRP + t.tRCD + t.tCAS + t.burst;
  }
  return 0;
}

DramAddress map_address(std::uint64_t addr, const DramConfig& cfg) {
  std::uint64_t line = line_of(addr);
  std::uint64_t lines_per_row = cfg.row_bytes / kLineBytes;
  DramAddress a;
  a.channel = static_cast<unsigned>(line % cfg.channels);
  a.bank = static_cast<unsigned>((line / cfg.channels) % cfg.banks);
  a.row = line / (std::uint64_t{cfg.channels} * cfg.banks * lines_per_row);
  return a;
}

std::optional<std::size_t> schedule(std::span<const SchedCandidate> c) {
  if (c.empty()) return std::nullopt;
  auto better = [](const SchedCandidate& a, const SchedCandidate& b) {
    if (a.marked != b.marked) return a.marked;
    if (a.row_hit != b.row_hit) return a.row_hit;
    if (a.demand != b.demand) return a.demand;
    if (a.arrival != b.arrival) return a.arrival < b.arrival;
    return a.id < b.id;
  };
  const SchedCandidate* best = &c[0];
  for (const auto& x : c)
    if (better(x, *best)) best = &x;
  return best->index;
}

Dram::Dram(const DramConfig& cfg)
    : cfg_(cfg), banks_(std::size_t{cfg.channels} * cfg.banks), bus_free_(cfg.channels, 0) {}

void Dram::enqueue(DramRequest r) {
  r.where = map_address(r.line * kLineBytes, cfg_);
  queue_.push_back(r);
}

void Dram::promote(std::uint64_t line) {
  for (auto& r : queue_)
    if (r.line == line && !r.write) r.demand = true;
}

void Dram::log(std::uint64_t cycle, unsigned ch, unsigned b, char c, std::uint64_t row) {
  if (log_) log_->push_back({cycle, ch, b, c, row});
  if (stream_) *stream_ << cycle << ' ' << ch << ' ' << b << ' ' << c << ' ' << row << '\n';
}

void Dram::form_batch() {
  constexpr unsigned kPerCore = 5;
  std::map<int, unsigned> taken;
  for (auto& r : queue_)
    if (taken[r.core] < kPerCore) {
      ++taken[r.core];
      r.marked = true;
      ++marked_;
    }
}

std::vector<std::pair<DramRequest, std::uint64_t>> Dram::tick(std::uint64_t cycle) {
  std::vector<std::pair<DramRequest, std::uint64_t>> started;
  if (queue_.empty()) return started;
  if (cfg_.batching && marked_ == 0) form_batch();
  const DramTiming& t = cfg_.timing;
  std::vector<SchedCandidate> cands;
  for (unsigned ch = 0; ch < cfg_.channels; ++ch) {
    if (bus_free_[ch] > cycle + t.tCAS + t.tRCD + t.tRP) continue;
    cands.clear();
    std::size_t window = std::min(queue_.size(), cfg_.queue_cap);
    for (std::size_t i = 0; i < window; ++i) {
      const DramRequest& r = queue_[i];
      if (r.where.channel != ch) continue;
      const BankState& b = bank(ch, r.where.bank);
      if (b.ready > cycle) continue;
      RowOutcome o = row_outcome(b, r.where.row);
      if (o == RowOutcome::CONFLICT && cycle < b.act_cycle + t.tRAS) continue;
      cands.push_back({i, r.marked, o == RowOutcome::HIT, r.demand, r.arrival, r.id});
    }
    auto pick = schedule(cands);
    if (!pick) continue;
    DramRequest r = queue_[*pick];
    queue_.erase(queue_.begin() + static_cast<std::ptrdiff_t>(*pick));
    if (r.marked) --marked_;
    BankState& b = banks_[ch * cfg_.banks + r.where.bank];
    std::uint64_t cas = cycle;
    switch (row_outcome(b, r.where.row)) {
      case RowOutcome::HIT:
        ++stats_.row_hits;
        break;
      case RowOutcome::CLOSED:
        ++stats_.row_closed;
        log(cycle, ch, r.where.bank, 'A', r.where.row);
        b.act_cycle = cycle;
        cas = cycle + t.tRCD;
        break;
      case RowOutcome::CONFLICT:
        ++stats_.row_conflicts;
        log(cycle, ch, r.where.bank, 'P', *b.open_row);
        log(cycle + t.tRP, ch, r.where.bank, 'A', r.where.row);
        b.act_cycle = cycle + t.tRP;
        cas = cycle + t.tRP + t.tRCD;
        break;
    }
    // The column command waits until its burst can follow the previous one.
    if (cas + t.tCAS < bus_free_[ch]) cas = bus_free_[ch] - t.tCAS;
    log(cas, ch, r.where.bank, r.write ? 'W' : 'R', r.where.row);
    b.open_row = r.where.row;
    b.ready = cas + t.burst;
    bus_free_[ch] = cas + t.tCAS + t.burst;
    (r.write ? stats_.writes : stats_.reads)++;
    started.emplace_back(r, cas + t.tCAS + t.burst);
  }
  return started;
}

// ------------------------------------------------------------- memory system

MemorySystem::MemorySystem(const MemConfig& cfg, RetiredFn retired)
    : cfg_(cfg),
      retired_(std::move(retired)),
      emc_cache_(cfg.emc_cache_bytes, cfg.emc_cache_ways, cfg.emc_cache_latency),
      ring_(cfg.cores + 1),
      dram_(cfg.dram),
      mshr_(cfg.cores),
      core_q_(cfg.cores),
      cstats_(cfg.cores) {
  if (cfg_.cores == 0) throw std::invalid_argument("cores must be >= 1");
  for (unsigned c = 0; c < cfg_.cores; ++c) {
    l1_.emplace_back(cfg_.l1_bytes, cfg_.l1_ways, cfg_.l1_latency);
    llc_.emplace_back(cfg_.llc_bytes_per_core, cfg_.llc_ways, cfg_.llc_latency, cfg_.cores);
    pf_.emplace_back(cfg_.prefetcher, cfg_.prefetch_degree);
  }
  next_fdp_ = cfg_.fdp_interval;
}

std::uint64_t MemorySystem::new_req(const Req& r) {
  std::uint64_t id = next_req_++;
  reqs_.emplace(id, r);
  return id;
}

void MemorySystem::post(std::uint64_t cycle, Ev type, std::uint64_t req) { events_.push({cycle, seq_++, type, req}); }

bool MemorySystem::llc_contains(std::uint64_t line) const { return slice(line).find(line) != nullptr; }

bool MemorySystem::l1_contains(int core, std::uint64_t line) const { return l1_[core].find(line) != nullptr; }

bool MemorySystem::emc_cache_contains(std::uint64_t line) const { return emc_cache_.find(line) != nullptr; }

bool MemorySystem::check_inclusion() const {
  bool ok = true;
  for (const auto& l1 : l1_) l1.for_each_valid([&](const CacheLine& l) { ok = ok && llc_contains(l.line); });
  emc_cache_.for_each_valid([&](const CacheLine& l) { ok = ok && llc_contains(l.line); });
  return ok;
}

MemorySystem::Access MemorySystem::core_load(int core, std::uint64_t addr, std::uint64_t token, std::uint64_t cycle,
                                             ReqKind kind, std::uint64_t pc) {
  const std::uint64_t line = line_of(addr);
  const bool demand = kind == ReqKind::LOAD;
  if (l1_[core].touch(line)) {
    if (demand) {
      ++cstats_[core].l1_hits;
      // Lines brought in by runahead or prefetch also land in L1, so the
      // first demand use may never reach the LLC.
      if (CacheLine* l = slice(line).find(line)) first_touch(*l, core, cycle);
    }
    return {Outcome::L1_HIT, cycle + cfg_.l1_latency};
  }
  auto& m = mshr_[core];
  auto it = m.find(line);
  const unsigned s = slice_of(line);

  if (kind == ReqKind::RUNAHEAD && !llc_contains(line)) {
    if (it != m.end() || in_flight(line)) return {Outcome::LLC_MISS_NOW};
    if (m.size() >= cfg_.mshrs) return {Outcome::RETRY};
    m[line] = Mshr{{}, true};
    std::uint64_t id = new_req({line, ReqKind::RUNAHEAD, core, 0, pc, 0, false});
    post(cycle + cfg_.l1_latency + ring_.route(core, s, MsgSize::CONTROL), Ev::LLC_ACCESS, id);
    return {Outcome::LLC_MISS_NOW, 0, true};
  }

  if (it != m.end()) {
    if (demand) {
      ++cstats_[core].l1_misses;
      // A demand merging into a runahead MSHR never reaches the LLC itself.
      if (auto f = inflight_.find(line); f != inflight_.end())
        merge_touch(f->second, core, cycle);
      else if (CacheLine* l = slice(line).find(line))
        first_touch(*l, core, cycle);
    }
    it->second.tokens.push_back(token);
    if (it->second.llc_miss && token)
      core_q_[core].push_back({Delivery::LLC_MISS, token, line, cycle + cfg_.l1_latency, false});
    return {Outcome::PENDING};
  }
  if (m.size() >= cfg_.mshrs) return {Outcome::RETRY};
  if (demand) ++cstats_[core].l1_misses;
  m[line] = Mshr{{token}, false};
  std::uint64_t id = new_req({line, kind, core, token, pc, 0, false});
  post(cycle + cfg_.l1_latency + ring_.route(core, s, MsgSize::CONTROL), Ev::LLC_ACCESS, id);
  return {Outcome::PENDING};
}

void MemorySystem::core_store(int core, std::uint64_t addr, std::uint64_t cycle) {
  const std::uint64_t line = line_of(addr);
  l1_[core].touch(line);
  std::uint64_t id = new_req({line, ReqKind::STORE, core, 0, 0, 0, false});
  post(cycle + ring_.route(core, slice_of(line), MsgSize::DATA), Ev::LLC_WRITE, id);
}

MemorySystem::EmcAccess MemorySystem::emc_load(int home_core, std::uint64_t addr, std::uint64_t token,
                                               std::uint64_t cycle, ReqKind kind, bool bypass,
                                               std::uint64_t retired_at_issue) {
  const std::uint64_t line = line_of(addr);
  EmcAccess out;
  out.in_llc = llc_contains(line);
  if (emc_cache_.touch(line)) {
    ++emc_stats_.hits;
    out.cache_hit = true;
    emc_q_.push_back({Delivery::DATA, token, line, cycle + cfg_.emc_cache_latency, false});
    return out;
  }
  ++emc_stats_.misses;
  Req r{line, kind, home_core, token, 0, retired_at_issue, false};
  const std::uint64_t t = cycle + cfg_.emc_cache_latency;
  if (bypass) {
    ++emc_stats_.bypasses;
    if (out.in_llc) ++emc_stats_.bypass_llc_hits;
    bool created;
    Inflight& f = miss_to_mc(t, line, r, mc_stop(), created);
    f.emc_tokens.push_back(token);
    if (is_demand(kind) && !f.demand) {
      f.demand = true;
      dram_.promote(line);
    }
    return out;
  }
  std::uint64_t id = new_req(r);
  post(t + ring_.route(mc_stop(), slice_of(line), MsgSize::CONTROL), Ev::EMC_LLC_ACCESS, id);
  return out;
}

void MemorySystem::tick(std::uint64_t cycle) {
  fills_.clear();
  while (!events_.empty() && events_.top().cycle <= cycle) {
    Event e = events_.top();
    events_.pop();
    switch (e.type) {
      case Ev::LLC_ACCESS: on_llc_access(e.cycle, e.req); break;
      case Ev::LLC_WRITE: on_llc_write(e.cycle, e.req); break;
      case Ev::EMC_LLC_ACCESS: on_emc_llc_access(e.cycle, e.req); break;
      case Ev::MC_ENQUEUE: on_mc_enqueue(e.cycle, e.req); break;
      case Ev::FILL: on_fill(e.cycle, e.req); break;
      case Ev::DELIVER_CORE: on_deliver_core(e.cycle, e.req); break;
      case Ev::DELIVER_EMC: on_deliver_emc(e.cycle, e.req); break;
    }
  }
  if (cfg_.fdp_interval && cycle >= next_fdp_) {
    for (auto& p : pf_) p.end_interval();
    next_fdp_ = cycle + cfg_.fdp_interval;
  }
}

void MemorySystem::dram_tick(std::uint64_t cycle) {
  for (auto& [r, done] : dram_.tick(cycle)) {
    if (r.write)
      reqs_.erase(r.id);
    else
      post(done, Ev::FILL, r.id);
  }
}

void MemorySystem::first_touch(CacheLine& l, int core, std::uint64_t cycle) {
  if (l.flags.touched) return;
  l.flags.touched = true;
  if (l.flags.prefetch_fetched && l.owner >= 0) pf_[l.owner].note_useful();
  if (l.flags.runahead_fetched) ++ra_.useful;
  if (l.flags.emc_ra_fetched) {
    ++emc_ra_.useful;
    ++emc_ra_interval_.useful;
    if (core == l.owner) distances_.push_back({cycle, core, retired_(core) - l.fetch_retired});
  }
}

void MemorySystem::merge_touch(Inflight& f, int core, std::uint64_t cycle) {
  if (f.touched) return;
  f.touched = true;
  switch (f.origin) {
    case ReqKind::PREFETCH:
      pf_[f.core].note_useful();
      pf_[f.core].note_late();
      break;
    case ReqKind::RUNAHEAD:
      ++ra_.useful;
      break;
    case ReqKind::EMC_RA:
      ++emc_ra_.useful;
      ++emc_ra_interval_.useful;
      if (core == f.core) distances_.push_back({cycle, core, retired_(core) - f.retired});
      break;
    default:
      break;
  }
}

MemorySystem::Inflight& MemorySystem::miss_to_mc(std::uint64_t cycle, std::uint64_t line, const Req& r,
                                                 unsigned from_stop, bool& created) {
  auto it = inflight_.find(line);
  if (it != inflight_.end()) {
    created = false;
    return it->second;
  }
  created = true;
  Inflight& f = inflight_[line];
  f.origin = r.kind;
  f.core = r.core;
  f.retired = r.retired;
  f.demand = is_demand(r.kind);
  f.dirty = r.kind == ReqKind::STORE;
  Req mr = r;
  mr.line = line;
  std::uint64_t id = new_req(mr);
  post(cycle + ring_.route(from_stop, mc_stop(), MsgSize::CONTROL), Ev::MC_ENQUEUE, id);
  return f;
}

void MemorySystem::issue_prefetches(std::uint64_t cycle, int core, std::uint64_t line, std::uint64_t pc) {
  PrefetchUnit& pf = pf_[core];
  if (pf.kind() == PrefetcherKind::NONE) return;
  for (std::uint64_t pl : pf.train(line, pc)) {
    if (llc_contains(pl) || in_flight(pl)) continue;
    if (dram_.full()) break;
    pf.note_issued();
    bool created;
    miss_to_mc(cycle, pl, Req{pl, ReqKind::PREFETCH, core, 0, pc, 0, false}, slice_of(line), created);
  }
}

void MemorySystem::on_llc_access(std::uint64_t cycle, std::uint64_t id) {
  Req& r = reqs_.at(id);
  const unsigned s = slice_of(r.line);
  const int core = r.core;
  const bool demand = r.kind == ReqKind::LOAD;
  if (CacheLine* l = slice(r.line).touch(r.line)) {
    r.llc_hit = true;
    if (demand) {
      ++cstats_[core].llc_hits;
      bool was_pf = l->flags.prefetch_fetched && !l->flags.touched;
      first_touch(*l, core, cycle);
      if (was_pf) issue_prefetches(cycle + cfg_.llc_latency, core, r.line, r.pc);
    }
    post(cycle + cfg_.llc_latency + ring_.route(s, core, MsgSize::DATA), Ev::DELIVER_CORE, id);
    return;
  }
  auto& m = mshr_[core];
  auto mit = m.find(r.line);
  if (mit != m.end()) {
    mit->second.llc_miss = true;
    for (std::uint64_t tok : mit->second.tokens)
      if (tok) core_q_[core].push_back({Delivery::LLC_MISS, tok, r.line, cycle + cfg_.llc_latency, true});
  }
  if (demand) ++cstats_[core].llc_misses;
  bool created;
  Req copy = r;
  reqs_.erase(id);
  Inflight& f = miss_to_mc(cycle + cfg_.llc_latency, copy.line, copy, s, created);
  if (std::find(f.cores.begin(), f.cores.end(), core) == f.cores.end()) f.cores.push_back(core);
  // A demand load may already wait in the MSHR of this runahead request.
  const bool merged_demand = copy.kind == ReqKind::RUNAHEAD && mit != m.end() &&
                             std::any_of(mit->second.tokens.begin(), mit->second.tokens.end(),
                                         [](std::uint64_t t) { return t != 0; });
  if (merged_demand) {
    merge_touch(f, core, cycle);
    if (!f.demand) {
      f.demand = true;
      dram_.promote(copy.line);
    }
  }
  if (demand) {
    if (!created) merge_touch(f, core, cycle);
    else f.touched = true;
    if (!f.demand) {
      f.demand = true;
      dram_.promote(copy.line);
    }
    issue_prefetches(cycle + cfg_.llc_latency, core, copy.line, copy.pc);
  }
}

void MemorySystem::on_llc_write(std::uint64_t cycle, std::uint64_t id) {
  Req r = reqs_.at(id);
  reqs_.erase(id);
  if (CacheLine* l = slice(r.line).touch(r.line)) {
    l->dirty = true;
    if (l->flags.emc_resident) {
      emc_cache_.invalidate(r.line);
      l->flags.emc_resident = false;
    }
    return;
  }
  auto it = inflight_.find(r.line);
  if (it != inflight_.end()) {
    it->second.dirty = true;
    return;
  }
  bool created;
  miss_to_mc(cycle + cfg_.llc_latency, r.line, r, slice_of(r.line), created);
}

void MemorySystem::on_emc_llc_access(std::uint64_t cycle, std::uint64_t id) {
  Req& r = reqs_.at(id);
  ++emc_stats_.llc_lookups;
  const unsigned s = slice_of(r.line);
  if (slice(r.line).touch(r.line)) {
    r.llc_hit = true;
    post(cycle + cfg_.llc_latency + ring_.route(s, mc_stop(), MsgSize::DATA), Ev::DELIVER_EMC, id);
    return;
  }
  Req copy = r;
  reqs_.erase(id);
  bool created;
  Inflight& f = miss_to_mc(cycle + cfg_.llc_latency, copy.line, copy, s, created);
  f.emc_tokens.push_back(copy.token);
  if (is_demand(copy.kind) && !f.demand) {
    f.demand = true;
    dram_.promote(copy.line);
  }
}

void MemorySystem::on_mc_enqueue(std::uint64_t cycle, std::uint64_t id) {
  Req& r = reqs_.at(id);
  DramRequest d;
  d.id = id;
  d.line = r.line;
  d.kind = r.kind;
  d.core = r.core;
  d.arrival = cycle;
  if (r.kind == ReqKind::WRITEBACK) {
    d.write = true;
    dram_.enqueue(d);
    return;
  }
  auto it = inflight_.find(r.line);
  Inflight& f = it->second;
  if (r.kind == ReqKind::PREFETCH && dram_.full() && !f.demand && f.cores.empty() && f.emc_tokens.empty()) {
    inflight_.erase(it);
    reqs_.erase(id);
    return;
  }
  d.demand = f.demand;
  f.enqueued = true;
  ++dram_reads_sent_;
  dram_.enqueue(d);
}

void MemorySystem::evict_llc_line(const CacheLine& v, std::uint64_t cycle) {
  for (auto& l1 : l1_) l1.invalidate(v.line);
  emc_cache_.invalidate(v.line);
  if (v.dirty) {
    std::uint64_t id = new_req({v.line, ReqKind::WRITEBACK, std::max(0, v.owner), 0, 0, 0, false});
    post(cycle + ring_.route(slice_of(v.line), mc_stop(), MsgSize::DATA), Ev::MC_ENQUEUE, id);
  }
  if (v.flags.prefetch_fetched && !v.flags.touched && v.owner >= 0) pf_[v.owner].note_evicted_untouched();
  if (v.flags.runahead_fetched) (v.flags.touched ? ra_.evicted_touched : ra_.evicted_untouched)++;
  if (v.flags.emc_ra_fetched) {
    (v.flags.touched ? emc_ra_.evicted_touched : emc_ra_.evicted_untouched)++;
    (v.flags.touched ? emc_ra_interval_.evicted_touched : emc_ra_interval_.evicted_untouched)++;
  }
}

void MemorySystem::on_fill(std::uint64_t cycle, std::uint64_t id) {
  Req r = reqs_.at(id);
  reqs_.erase(id);
  auto fit = inflight_.find(r.line);
  Inflight f = std::move(fit->second);
  inflight_.erase(fit);
  ++llc_fills_;

  CacheModel& sl = slice(r.line);
  CacheLine* slot = sl.find(r.line);
  if (!slot) {
    auto victim = sl.insert(r.line, &slot);
    if (victim) evict_llc_line(*victim, cycle);
    slot->flags.runahead_fetched = f.origin == ReqKind::RUNAHEAD;
    slot->flags.emc_ra_fetched = f.origin == ReqKind::EMC_RA;
    slot->flags.prefetch_fetched = f.origin == ReqKind::PREFETCH;
    slot->flags.touched = f.touched;
    slot->owner = f.core;
    slot->fetch_retired = f.retired;
    if (f.origin == ReqKind::RUNAHEAD) ++ra_.fetched;
    if (f.origin == ReqKind::EMC_RA) {
      ++emc_ra_.fetched;
      ++emc_ra_interval_.fetched;
    }
  }
  slot->dirty = slot->dirty || f.dirty;

  if (cfg_.emc && !f.dirty) {
    if (!emc_cache_.find(r.line)) {
      auto v = emc_cache_.insert(r.line);
      if (v)
        if (CacheLine* ll = slice(v->line).find(v->line)) ll->flags.emc_resident = false;
    }
    slot = sl.find(r.line);
    slot->flags.emc_resident = true;
  }
  fills_.push_back(r.line);

  for (int c : f.cores) {
    std::uint64_t nid = new_req({r.line, ReqKind::LOAD, c, 0, 0, 0, false});
    post(cycle + ring_.route(mc_stop(), static_cast<unsigned>(c), MsgSize::DATA), Ev::DELIVER_CORE, nid);
  }
  for (std::uint64_t tok : f.emc_tokens) emc_q_.push_back({Delivery::DATA, tok, r.line, cycle, true});
}

void MemorySystem::on_deliver_core(std::uint64_t cycle, std::uint64_t id) {
  Req r = reqs_.at(id);
  reqs_.erase(id);
  if (llc_contains(r.line) && !l1_[r.core].find(r.line)) l1_[r.core].insert(r.line);
  auto& m = mshr_[r.core];
  auto it = m.find(r.line);
  if (it == m.end()) return;
  for (std::uint64_t tok : it->second.tokens)
    if (tok) core_q_[r.core].push_back({Delivery::DATA, tok, r.line, cycle, !r.llc_hit});
  m.erase(it);
}

void MemorySystem::on_deliver_emc(std::uint64_t cycle, std::uint64_t id) {
  Req r = reqs_.at(id);
  reqs_.erase(id);
  emc_q_.push_back({Delivery::DATA, r.token, r.line, cycle, !r.llc_hit});
}

}  // namespace remsim
