#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace remsim {

enum class PrefetcherKind : std::uint8_t { NONE, STREAM, GHB, MARKOV_STREAM };

const char* prefetcher_name(PrefetcherKind k);
std::optional<PrefetcherKind> prefetcher_from_name(const std::string& s);

inline constexpr unsigned kMinDegree = 1;
inline constexpr unsigned kMaxDegree = 32;

// Accuracy-driven degree throttling.
unsigned fdp_adjust(unsigned degree, double accuracy);

// All prefetchers work on line numbers (byte address >> 6).
class StreamPrefetcher {
 public:
  static constexpr unsigned kStreams = 32;
  static constexpr std::int64_t kDistance = 32;
  static constexpr std::int64_t kTrainWindow = 16;

  std::vector<std::uint64_t> train(std::uint64_t line, unsigned degree);

 private:
  struct Entry {
    bool valid = false;
    std::int64_t stride = 0;  // 0 while training
    std::uint64_t last = 0;
    std::uint64_t next = 0;
    std::uint64_t lru = 0;
  };
  std::array<Entry, kStreams> e_{};
  std::uint64_t clock_ = 0;
};

class GhbPrefetcher {
 public:
  static constexpr std::size_t kBuffer = 1024;
  static constexpr std::size_t kIndex = 256;

  std::vector<std::uint64_t> train(std::uint64_t line, unsigned degree);
  std::size_t occupancy() const { return count_ < kBuffer ? count_ : kBuffer; }

 private:
  struct Entry {
    std::uint64_t line = 0;
    std::uint64_t link = 0;  // position + 1 of previous same-key entry, 0 = none
  };
  struct IndexEntry {
    bool valid = false;
    std::int64_t d2 = 0, d1 = 0;
    std::uint64_t pos = 0;
  };
  std::uint64_t at(std::uint64_t pos) const { return buf_[pos % kBuffer].line; }
  std::array<Entry, kBuffer> buf_{};
  std::array<IndexEntry, kIndex> index_{};
  std::uint64_t count_ = 0;
};

class MarkovPrefetcher {
 public:
  static constexpr std::size_t kSuccessors = 4;
  static constexpr std::size_t kBudgetBytes = 1u << 20;
  static std::size_t table_entries();

  MarkovPrefetcher();
  std::vector<std::uint64_t> train(std::uint64_t line, unsigned degree);

 private:
  struct Entry {
    bool valid = false;
    std::uint64_t tag = 0;
    std::array<std::uint64_t, kSuccessors> succ{};
    unsigned n = 0;
  };
  Entry& slot(std::uint64_t line) { return table_[line & (table_.size() - 1)]; }
  std::vector<Entry> table_;
  std::optional<std::uint64_t> prev_;
};

struct PrefetchCounters {
  std::uint64_t issued = 0;
  std::uint64_t useful = 0;
  std::uint64_t late = 0;
  std::uint64_t evicted_untouched = 0;
};

// One core's prefetch engine with FDP throttling.
class PrefetchUnit {
 public:
  explicit PrefetchUnit(PrefetcherKind kind = PrefetcherKind::NONE, unsigned initial_degree = 4);

  PrefetcherKind kind() const { return kind_; }
  unsigned degree() const { return degree_; }
  unsigned effective_degree() const;

  // Demand LLC miss, or first demand hit to a prefetched line.
  std::vector<std::uint64_t> train(std::uint64_t line, std::uint64_t pc);

  void note_issued() { ++interval_.issued, ++total_.issued; }
  void note_useful() { ++interval_.useful, ++total_.useful; }
  void note_late() { ++total_.late; }
  void note_evicted_untouched() { ++total_.evicted_untouched; }

  double interval_accuracy() const;
  // Closes an FDP interval; returns the new degree.
  unsigned end_interval();
  // Coordinated throttling: while set, a GHB unit runs at half degree.
  void set_throttle(bool on) { throttled_ = on; }
  bool throttled() const { return throttled_; }

  const PrefetchCounters& totals() const { return total_; }

 private:
  PrefetcherKind kind_;
  unsigned degree_;
  bool throttled_ = false;
  StreamPrefetcher stream_;
  GhbPrefetcher ghb_;
  std::unique_ptr<MarkovPrefetcher> markov_;
  PrefetchCounters interval_, total_;
};

}  // namespace remsim
