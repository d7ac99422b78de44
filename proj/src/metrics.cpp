#include "remsim/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace remsim {

unsigned Histogram::bucket_of(std::uint64_t v) {
  if (v <= 1) return 0;
  if (v >= kMax) return kBuckets - 1;
  double x = std::log2(double(v)) * kBuckets / std::log2(double(kMax));
  unsigned b = static_cast<unsigned>(x);
  return b < kBuckets ? b : kBuckets - 1;
}

double Histogram::lower_edge(unsigned i) { return std::pow(double(kMax), double(i) / kBuckets); }

void Histogram::record(std::uint64_t v) {
  ++b_[bucket_of(v)];
  ++count_;
  sum_ += v;
}

void Histogram::merge(const Histogram& o) {
  for (unsigned i = 0; i < kBuckets; ++i) b_[i] += o.b_[i];
  count_ += o.count_;
  sum_ += o.sum_;
}

std::optional<double> Histogram::mean() const {
  if (!count_) return std::nullopt;
  return double(sum_) / double(count_);
}

double weighted_speedup(const std::vector<double>& shared_ipc, const std::vector<double>& alone_ipc) {
  if (shared_ipc.size() != alone_ipc.size()) throw std::invalid_argument("weighted_speedup: length mismatch");
  double ws = 0;
  for (std::size_t i = 0; i < shared_ipc.size(); ++i) {
    if (!(alone_ipc[i] > 0)) throw std::invalid_argument("weighted_speedup: alone IPC must be > 0");
    ws += shared_ipc[i] / alone_ipc[i];
  }
  return ws;
}

// ------------------------------------------------------------------ csv i/o

std::string format_cell(const Cell& c) {
  struct V {
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(std::uint64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", v);
      return buf;
    }
    std::string operator()(const std::string& s) const { return s; }
  };
  return std::visit(V{}, c);
}

void write_csv(const Table& t, std::ostream& os) {
  for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
  os << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_cell(r[i]);
    os << '\n';
  }
}

void write_csv(const Table& t, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(t, f);
  if (!f) throw std::runtime_error("write failed: " + path);
}

namespace {
std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace

CsvData read_csv(std::istream& is) {
  CsvData d;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (first) {
      d.header = split(line);
      first = false;
    } else {
      d.rows.push_back(split(line));
    }
  }
  return d;
}

CsvData read_csv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return read_csv(f);
}

// ------------------------------------------------------------- stats table

Table stats_table(const SimStats& s) {
  Table t;
  t.header = {kStatsSchema,      "core",           "cycles",         "retired",         "ipc",
              "llc_misses",      "dependent_misses", "mpki",         "stall_cycles",    "full_window_stalls",
              "eff_lat_mean",    "eff_lat_count",  "dep_lat_mean",   "dep_lat_count",   "emc_dep_lat_mean",
              "emc_dep_lat_count", "runahead_intervals", "runahead_cycles", "runahead_uops", "runahead_misses",
              "emc_dep_chains",  "emc_dep_rejected", "emc_ra_chains", "digest",
              "dram_reads",      "dram_writes",    "row_hits",       "row_closed",      "row_conflicts",
              "row_conflict_rate", "ring_control", "ring_data",      "pf_issued",       "pf_useful",
              "pf_late",         "pf_evicted_untouched", "ra_fetched", "ra_useful",     "emc_ra_fetched",
              "emc_ra_useful",   "emc_dep_uops",   "emc_ra_uops",    "emc_ra_loads",    "emc_cache_hits",
              "emc_cache_misses", "emc_bypasses",  "emc_aborts",     "emc_ra_distance_mean"};
  for (unsigned i = 0; i < Histogram::kBuckets; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "eff_lat_b%02u", i);
    t.header.emplace_back(buf);
  }
  const std::size_t global_first = 24;  // index of dram_reads
  const std::size_t hist_first = t.header.size() - Histogram::kBuckets;

  auto opt = [](std::optional<double> v) -> Cell {
    if (v) return *v;
    return std::monostate{};
  };
  Histogram total_eff;
  for (const CoreRow& c : s.cores) {
    std::vector<Cell> r{std::string("core"),
                        std::uint64_t(c.core),
                        c.cycles,
                        c.retired,
                        c.ipc(),
                        c.llc_misses,
                        c.dependent_misses,
                        c.mpki(),
                        c.stall_cycles,
                        c.full_window_stalls,
                        opt(c.eff_latency.mean()),
                        c.eff_latency.count(),
                        opt(c.dep_latency.mean()),
                        c.dep_latency.count(),
                        opt(c.emc_dep_latency.mean()),
                        c.emc_dep_latency.count(),
                        c.runahead_intervals,
                        c.runahead_cycles,
                        c.runahead_uops,
                        c.runahead_misses,
                        c.emc_dep_chains,
                        c.emc_dep_rejected,
                        c.emc_ra_chains,
                        c.digest};
    r.resize(hist_first);
    for (auto b : c.eff_latency.buckets()) r.emplace_back(b);
    t.rows.push_back(std::move(r));
    total_eff.merge(c.eff_latency);
  }

  const GlobalRow& g = s.global;
  std::uint64_t retired = 0, misses = 0, dep = 0, stalls = 0;
  Histogram dep_lat, emc_lat;
  for (const CoreRow& c : s.cores) {
    retired += c.retired;
    misses += c.llc_misses;
    dep += c.dependent_misses;
    stalls += c.stall_cycles;
    dep_lat.merge(c.dep_latency);
    emc_lat.merge(c.emc_dep_latency);
  }
  std::vector<Cell> r{std::string("global"),
                      std::monostate{},
                      g.cycles,
                      retired,
                      g.cycles ? double(retired) / double(g.cycles) : 0.0,
                      misses,
                      dep,
                      retired ? 1000.0 * double(misses) / double(retired) : 0.0,
                      stalls,
                      std::monostate{},
                      opt(total_eff.mean()),
                      total_eff.count(),
                      opt(dep_lat.mean()),
                      dep_lat.count(),
                      opt(emc_lat.mean()),
                      emc_lat.count()};
  r.resize(global_first);
  for (Cell c : std::initializer_list<Cell>{g.dram_reads,     g.dram_writes,      g.row_hits,
                                            g.row_closed,     g.row_conflicts,    g.row_conflict_rate(),
                                            g.ring_control,   g.ring_data,        g.pf_issued,
                                            g.pf_useful,      g.pf_late,          g.pf_evicted_untouched,
                                            g.ra_fetched,     g.ra_useful,        g.emc_ra_fetched,
                                            g.emc_ra_useful,  g.emc_dep_uops,     g.emc_ra_uops,
                                            g.emc_ra_loads,   g.emc_cache_hits,   g.emc_cache_misses,
                                            g.emc_bypasses,   g.emc_aborts,       opt(g.emc_ra_distance.mean())})
    r.push_back(c);
  for (auto b : total_eff.buckets()) r.emplace_back(b);
  t.rows.push_back(std::move(r));
  return t;
}

Table compare_csv(const CsvData& a, const CsvData& b) {
  if (a.header.empty() || b.header.empty()) throw SchemaError("compare: empty input");
  if (a.header != b.header) throw SchemaError("compare: schema mismatch (" + a.header[0] + " vs " + b.header[0] + ")");
  auto key = [](const std::vector<std::string>& r) { return r.size() > 1 ? r[0] + ":" + r[1] : r[0]; };
  std::map<std::string, const std::vector<std::string>*> bm;
  for (const auto& r : b.rows) bm[key(r)] = &r;
  std::set<std::string> ak;
  for (const auto& r : a.rows) ak.insert(key(r));
  for (const auto& [k, r] : bm)
    if (!ak.count(k)) throw SchemaError("compare: row " + k + " missing in first file");

  Table t;
  t.header = {"row", "metric", "a", "b", "abs_delta", "rel_delta"};
  for (const auto& ra : a.rows) {
    auto it = bm.find(key(ra));
    if (it == bm.end()) throw SchemaError("compare: row " + key(ra) + " missing in second file");
    const auto& rb = *it->second;
    for (std::size_t i = 2; i < a.header.size() && i < ra.size() && i < rb.size(); ++i) {
      if (ra[i].empty() || rb[i].empty()) continue;
      char* e1 = nullptr;
      char* e2 = nullptr;
      double x = std::strtod(ra[i].c_str(), &e1);
      double y = std::strtod(rb[i].c_str(), &e2);
      if (*e1 || *e2) continue;
      Cell rel = std::monostate{};
      if (x != 0) rel = (y - x) / std::fabs(x);
      else if (y == 0) rel = 0.0;
      t.rows.push_back({key(ra), a.header[i], ra[i], rb[i], y - x, rel});
    }
  }
  return t;
}

}  // namespace remsim
