#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace remsim {

// Log-spaced latency histogram over [1, 4096] cycles plus exact sum/count.
class Histogram {
 public:
  static constexpr unsigned kBuckets = 32;
  static constexpr std::uint64_t kMax = 4096;

  static unsigned bucket_of(std::uint64_t v);
  // Inclusive lower edge of bucket i.
  static double lower_edge(unsigned i);

  void record(std::uint64_t v);
  void merge(const Histogram& o);
  std::uint64_t count() const { return count_; }
  std::uint64_t sum() const { return sum_; }
  // Absent when empty.
  std::optional<double> mean() const;
  const std::array<std::uint64_t, kBuckets>& buckets() const { return b_; }

 private:
  std::array<std::uint64_t, kBuckets> b_{};
  std::uint64_t count_ = 0, sum_ = 0;
};

double weighted_speedup(const std::vector<double>& shared_ipc, const std::vector<double>& alone_ipc);

// ------------------------------------------------------------------- tables

using Cell = std::variant<std::monostate, std::uint64_t, double, std::string>;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
};

std::string format_cell(const Cell& c);
void write_csv(const Table& t, std::ostream& os);
// Throws std::runtime_error naming the path on I/O failure.
void write_csv(const Table& t, const std::string& path);

struct CsvData {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvData read_csv(std::istream& is);
CsvData read_csv_file(const std::string& path);

inline constexpr const char* kStatsSchema = "remsim_stats_v1";

struct CoreRow {
  int core = 0;
  std::uint64_t cycles = 0, retired = 0;
  std::uint64_t llc_misses = 0, dependent_misses = 0, stall_cycles = 0;
  std::uint64_t full_window_stalls = 0;
  Histogram eff_latency;
  Histogram dep_latency;      // dependent LLC misses serviced through the core
  Histogram emc_dep_latency;  // dependent misses issued by the EMC for this core
  std::uint64_t runahead_intervals = 0, runahead_cycles = 0, runahead_uops = 0, runahead_misses = 0;
  std::uint64_t emc_dep_chains = 0, emc_dep_rejected = 0, emc_ra_chains = 0;
  std::uint64_t digest = 0;

  double ipc() const { return cycles ? double(retired) / double(cycles) : 0.0; }
  double mpki() const { return retired ? 1000.0 * double(llc_misses) / double(retired) : 0.0; }
};

struct GlobalRow {
  std::uint64_t cycles = 0;
  std::uint64_t dram_reads = 0, dram_writes = 0;
  std::uint64_t row_hits = 0, row_closed = 0, row_conflicts = 0;
  std::uint64_t ring_control = 0, ring_data = 0;
  std::uint64_t pf_issued = 0, pf_useful = 0, pf_late = 0, pf_evicted_untouched = 0;
  std::uint64_t ra_fetched = 0, ra_useful = 0;
  std::uint64_t emc_ra_fetched = 0, emc_ra_useful = 0;
  std::uint64_t emc_dep_uops = 0, emc_ra_uops = 0;
  std::uint64_t emc_cache_hits = 0, emc_cache_misses = 0, emc_bypasses = 0, emc_aborts = 0;
  std::uint64_t emc_ra_loads = 0;
  Histogram emc_ra_distance;

  double row_conflict_rate() const {
    auto n = row_hits + row_closed + row_conflicts;
    return n ? double(row_conflicts) / double(n) : 0.0;
  }
};

struct SimStats {
  std::vector<CoreRow> cores;
  GlobalRow global;
};

Table stats_table(const SimStats& s);

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-metric deltas between two stats CSVs of the same schema. Columns:
// row, metric, a, b, abs_delta, rel_delta.
Table compare_csv(const CsvData& a, const CsvData& b);

}  // namespace remsim
