#include "remsim/prefetch.hpp"

#include <algorithm>

namespace remsim {

const char* prefetcher_name(PrefetcherKind k) {
  switch (k) {
    case PrefetcherKind::NONE: return "none";
    case PrefetcherKind::STREAM: return "stream";
    case PrefetcherKind::GHB: return "ghb";
    case PrefetcherKind::MARKOV_STREAM: return "markov+stream";
  }
  return "?";
}

std::optional<PrefetcherKind> prefetcher_from_name(const std::string& s) {
  for (auto k : {PrefetcherKind::NONE, PrefetcherKind::STREAM, PrefetcherKind::GHB, PrefetcherKind::MARKOV_STREAM})
    if (s == prefetcher_name(k)) return k;
  return std::nullopt;
}

unsigned fdp_adjust(unsigned degree, double accuracy) {
  degree = std::clamp(degree, kMinDegree, kMaxDegree);
  if (accuracy >= 0.75) return std::min(kMaxDegree, degree * 2);
  if (accuracy < 0.40) return std::max(kMinDegree, degree / 2);
  return degree;
}

// ------------------------------------------------------------------- stream

std::vector<std::uint64_t> StreamPrefetcher::train(std::uint64_t line, unsigned degree) {
  ++clock_;
  std::vector<std::uint64_t> out;
  const auto l = static_cast<std::int64_t>(line);
  auto issue = [&](Entry& e) {
    for (unsigned i = 0; i < degree; ++i) {
      auto n = static_cast<std::int64_t>(e.next);
      if ((n - l) / e.stride > kDistance || n < 0) break;
      out.push_back(e.next);
      e.next = static_cast<std::uint64_t>(n + e.stride);
    }
  };

  for (auto& e : e_) {
    if (!e.valid || e.stride == 0) continue;
    std::int64_t ahead = (l - static_cast<std::int64_t>(e.last)) / e.stride;
    bool same_dir = (l - static_cast<std::int64_t>(e.last)) * e.stride > 0;
    if (same_dir && ahead <= kDistance) {
      e.last = line;
      e.lru = clock_;
      if ((static_cast<std::int64_t>(e.next) - l) * e.stride <= 0) e.next = static_cast<std::uint64_t>(l + e.stride);
      issue(e);
      return out;
    }
  }
  for (auto& e : e_) {
    if (!e.valid || e.stride != 0) continue;
    std::int64_t d = l - static_cast<std::int64_t>(e.last);
    if (d != 0 && d >= -kTrainWindow && d <= kTrainWindow) {
      e.stride = d;
      e.last = line;
      e.next = static_cast<std::uint64_t>(l + d);
      e.lru = clock_;
      issue(e);
      return out;
    }
  }
  auto victim = std::min_element(e_.begin(), e_.end(), [](const Entry& a, const Entry& b) {
    if (a.valid != b.valid) return !a.valid;
    return a.lru < b.lru;
  });
  *victim = Entry{true, 0, line, 0, clock_};
  return out;
}

// ---------------------------------------------------------------------- GHB

std::vector<std::uint64_t> GhbPrefetcher::train(std::uint64_t line, unsigned degree) {
  std::vector<std::uint64_t> out;
  const std::uint64_t p = count_++;
  buf_[p % kBuffer] = {line, 0};
  if (p < 2) return out;
  auto d = [&](std::uint64_t pos) { return static_cast<std::int64_t>(at(pos) - at(pos - 1)); };
  const std::int64_t d1 = d(p), d2 = d(p - 1);
  const std::size_t slot = static_cast<std::size_t>((static_cast<std::uint64_t>(d2) * 0x9E3779B1u) ^
                                                    (static_cast<std::uint64_t>(d1) * 0x85EBCA77u)) %
                           kIndex;
  IndexEntry& ie = index_[slot];
  if (ie.valid && ie.d1 == d1 && ie.d2 == d2 && p - ie.pos < kBuffer - 1) {
    buf_[p % kBuffer].link = ie.pos + 1;
    std::uint64_t pred = line;
    for (std::uint64_t j = ie.pos + 1; j <= p && out.size() < degree; ++j) {
      pred += static_cast<std::uint64_t>(d(j));
      out.push_back(pred);
    }
  }
  ie = {true, d2, d1, p};
  return out;
}

// ------------------------------------------------------------------- Markov

std::size_t MarkovPrefetcher::table_entries() {
  std::size_t n = kBudgetBytes / (8 + kSuccessors * 8);
  std::size_t p = 1;
  while (p * 2 <= n) p *= 2;
  return p;
}

MarkovPrefetcher::MarkovPrefetcher() : table_(table_entries()) {}

std::vector<std::uint64_t> MarkovPrefetcher::train(std::uint64_t line, unsigned degree) {
  if (prev_ && *prev_ != line) {
    Entry& e = slot(*prev_);
    if (!e.valid || e.tag != *prev_) e = Entry{true, *prev_, {}, 0};
    auto end = e.succ.begin() + e.n;
    auto it = std::find(e.succ.begin(), end, line);
    if (it != end) {
      std::rotate(e.succ.begin(), it, it + 1);
    } else {
      if (e.n < kSuccessors) ++e.n;
      std::move_backward(e.succ.begin(), e.succ.begin() + (e.n - 1), e.succ.begin() + e.n);
      e.succ[0] = line;
    }
  }
  prev_ = line;
  std::vector<std::uint64_t> out;
  const Entry& e = slot(line);
  if (e.valid && e.tag == line)
    for (unsigned i = 0; i < e.n && out.size() < degree; ++i) out.push_back(e.succ[i]);
  return out;
}

// ------------------------------------------------------------- prefetch unit

PrefetchUnit::PrefetchUnit(PrefetcherKind kind, unsigned initial_degree)
    : kind_(kind), degree_(std::clamp(initial_degree, kMinDegree, kMaxDegree)) {
  if (kind_ == PrefetcherKind::MARKOV_STREAM) markov_ = std::make_unique<MarkovPrefetcher>();
}

unsigned PrefetchUnit::effective_degree() const {
  if (throttled_ && kind_ == PrefetcherKind::GHB) return std::max(kMinDegree, degree_ / 2);
  return degree_;
}

std::vector<std::uint64_t> PrefetchUnit::train(std::uint64_t line, std::uint64_t) {
  const unsigned deg = effective_degree();
  switch (kind_) {
    case PrefetcherKind::NONE:
      return {};
    case PrefetcherKind::STREAM:
      return stream_.train(line, deg);
    case PrefetcherKind::GHB:
      return ghb_.train(line, deg);
    case PrefetcherKind::MARKOV_STREAM: {
      auto a = markov_->train(line, deg);
      auto b = stream_.train(line, deg);
      for (auto x : b)
        if (a.size() < deg && std::find(a.begin(), a.end(), x) == a.end()) a.push_back(x);
      return a;
    }
  }
  return {};
}

double PrefetchUnit::interval_accuracy() const {
  return interval_.issued ? double(interval_.useful) / double(interval_.issued) : 0.0;
}

unsigned PrefetchUnit::end_interval() {
  if (interval_.issued > 0) degree_ = fdp_adjust(degree_, std::min(1.0, interval_accuracy()));
  interval_ = {};
  return degree_;
}

}  // namespace remsim
