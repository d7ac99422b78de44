#include "remsim/matrix.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

namespace remsim {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& v, char sep) {
  std::vector<std::string> out;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool valid_workload_name(const std::string& n) {
  if (n.empty()) return false;
  return std::all_of(n.begin(), n.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_';
  });
}

void apply(MatrixSpec& m, const std::string& key, const std::string& value) {
  if (key == "modes") {
    m.modes.clear();
    for (const std::string& s : split(value, ',')) {
      auto mode = mode_from_name(s);
      if (!mode) throw ConfigError("modes: unknown mode '" + s + "'");
      if (std::find(m.modes.begin(), m.modes.end(), *mode) == m.modes.end()) m.modes.push_back(*mode);
    }
  } else if (key == "prefetchers") {
    m.prefetchers.clear();
    for (const std::string& s : split(value, ',')) {
      auto p = prefetcher_from_name(s);
      if (!p) throw ConfigError("prefetchers: unknown prefetcher '" + s + "'");
      if (std::find(m.prefetchers.begin(), m.prefetchers.end(), *p) == m.prefetchers.end())
        m.prefetchers.push_back(*p);
    }
  } else if (key.rfind("workload.", 0) == 0) {
    std::string name = key.substr(9);
    if (!valid_workload_name(name)) throw ConfigError("workload name '" + name + "' must be [A-Za-z0-9_-]+");
    auto traces = split(value, ';');
    if (traces.empty()) throw ConfigError("workload." + name + " has no traces");
    auto it = std::find_if(m.workloads.begin(), m.workloads.end(), [&](const auto& w) { return w.first == name; });
    if (it != m.workloads.end())
      it->second = traces;
    else
      m.workloads.emplace_back(name, traces);
  } else if (key == "mode" || key == "prefetcher" || key == "traces" || key == "cores" || key == "stats") {
    throw ConfigError(key + " is set per cell in a matrix; use modes, prefetchers and workload.<name>");
  } else {
    set_config_value(m.base, key, value);
  }
}

}  // namespace

MatrixSpec parse_matrix_spec(const std::string& text,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
  MatrixSpec m;
  std::istringstream is(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key=value");
    try {
      apply(m, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  for (const auto& [k, v] : overrides) apply(m, k, v);

  if (m.workloads.empty()) throw ConfigError("matrix has no workload.<name> entries");
  if (m.modes.empty()) m.modes.push_back(Mode::BASELINE);
  if (m.prefetchers.empty()) m.prefetchers.push_back(PrefetcherKind::NONE);
  if (std::find(m.modes.begin(), m.modes.end(), Mode::BASELINE) == m.modes.end())
    m.modes.insert(m.modes.begin(), Mode::BASELINE);
  if (std::find(m.prefetchers.begin(), m.prefetchers.end(), PrefetcherKind::NONE) == m.prefetchers.end())
    m.prefetchers.insert(m.prefetchers.begin(), PrefetcherKind::NONE);
  return m;
}

MatrixSpec load_matrix_spec(const std::string& path,
                            const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read matrix spec " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_matrix_spec(ss.str(), overrides);
}

std::vector<MatrixCell> expand_matrix(const MatrixSpec& spec) {
  std::vector<MatrixCell> cells;
  for (const auto& [name, traces] : spec.workloads)
    for (PrefetcherKind pf : spec.prefetchers)
      for (Mode mode : spec.modes) {
        MatrixCell c;
        c.index = cells.size();
        c.workload = name;
        c.prefetcher = pf;
        c.mode = mode;
        c.config = spec.base;
        c.config.cores = static_cast<unsigned>(traces.size());
        c.config.traces = traces;
        c.config.prefetcher = pf;
        c.config.mode = mode;
        c.config.stats_path.clear();
        cells.push_back(std::move(c));
      }
  return cells;
}

std::string cell_name(const MatrixCell& c) {
  char idx[16];
  std::snprintf(idx, sizeof idx, "%03zu", c.index);
  std::string pf = prefetcher_name(c.prefetcher);
  std::replace(pf.begin(), pf.end(), '+', '-');
  return std::string(idx) + "_" + c.workload + "_" + pf + "_" + mode_name(c.mode);
}

namespace {

CellOutcome run_one(const SimConfig& cfg) {
  CellOutcome o;
  try {
    o.result = simulate(cfg);
  } catch (const ConfigError& e) {
    o.status = CellOutcome::CONFIG_ERROR;
    o.error = e.what();
  } catch (const std::exception& e) {
    o.status = CellOutcome::SIM_ERROR;
    o.error = e.what();
  }
  return o;
}

void run_pool(std::size_t n, unsigned parallelism, const std::function<void(std::size_t)>& job) {
  unsigned workers = std::max(1u, std::min<unsigned>(parallelism, static_cast<unsigned>(n)));
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < n; i = next++) job(i);
  };
  if (workers == 1) {
    loop();
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(loop);
  for (auto& t : pool) t.join();
}

double total_ipc(const SimResult& r) {
  double s = 0;
  for (const CoreRow& c : r.stats.cores) s += c.ipc();
  return s;
}

Cell mean_of(const Histogram& h) {
  if (auto m = h.mean()) return *m;
  return std::monostate{};
}

Table build_summary(const MatrixResult& mr) {
  Table t;
  t.header = {"cell",          "workload",         "prefetcher",       "mode",
              "cores",         "status",           "cycles",           "retired",
              "ipc",           "ipc_vs_baseline",  "weighted_speedup", "mean_eff_latency",
              "mean_dep_latency", "mean_emc_dep_latency", "dram_requests", "bandwidth_overhead",
              "row_conflict_rate", "digest_match"};

  std::map<std::string, double> alone(mr.alone_ipc.begin(), mr.alone_ipc.end());
  std::map<std::string, std::size_t> reference;
  for (const MatrixCell& c : mr.cells)
    if (c.mode == Mode::BASELINE && c.prefetcher == PrefetcherKind::NONE) reference[c.workload] = c.index;

  for (const MatrixCell& c : mr.cells) {
    const CellOutcome& o = mr.outcomes[c.index];
    std::vector<Cell> row{std::uint64_t(c.index), c.workload, std::string(prefetcher_name(c.prefetcher)),
                          std::string(mode_name(c.mode)), std::uint64_t(c.config.cores)};
    if (o.status != CellOutcome::OK) {
      row.push_back(std::string("error: ") + o.error);
      row.resize(t.header.size());
      t.rows.push_back(std::move(row));
      continue;
    }
    const SimResult& r = o.result;
    const CellOutcome* ref = nullptr;
    if (auto it = reference.find(c.workload); it != reference.end())
      if (mr.outcomes[it->second].status == CellOutcome::OK) ref = &mr.outcomes[it->second];

    std::uint64_t retired = 0;
    Histogram eff, dep, emc_dep;
    for (const CoreRow& k : r.stats.cores) {
      retired += k.retired;
      eff.merge(k.eff_latency);
      dep.merge(k.dep_latency);
      emc_dep.merge(k.emc_dep_latency);
    }
    const double ipc = total_ipc(r);
    const std::uint64_t dram = r.stats.global.dram_reads + r.stats.global.dram_writes;

    Cell ipc_ratio = std::monostate{}, bw = std::monostate{}, ws = std::monostate{}, match = std::monostate{};
    if (ref) {
      double base_ipc = total_ipc(ref->result);
      if (base_ipc > 0) ipc_ratio = ipc / base_ipc;
      std::uint64_t base_dram = ref->result.stats.global.dram_reads + ref->result.stats.global.dram_writes;
      if (base_dram > 0) bw = (double(dram) - double(base_dram)) / double(base_dram);
      match = std::uint64_t(r.digests == ref->result.digests);
    }
    if (c.config.cores == 1) {
      if (ref && total_ipc(ref->result) > 0) ws = ipc / total_ipc(ref->result);
    } else {
      std::vector<double> shared, solo;
      bool have = true;
      for (std::size_t i = 0; i < c.config.traces.size(); ++i) {
        auto it = alone.find(c.config.traces[i]);
        if (it == alone.end() || it->second <= 0) {
          have = false;
          break;
        }
        shared.push_back(r.stats.cores[i].ipc());
        solo.push_back(it->second);
      }
      if (have) ws = weighted_speedup(shared, solo);
    }

    row.push_back(std::string("ok"));
    row.push_back(r.stats.global.cycles);
    row.push_back(retired);
    row.push_back(ipc);
    row.push_back(ipc_ratio);
    row.push_back(ws);
    row.push_back(mean_of(eff));
    row.push_back(mean_of(dep));
    row.push_back(mean_of(emc_dep));
    row.push_back(dram);
    row.push_back(bw);
    row.push_back(r.stats.global.row_conflict_rate());
    row.push_back(match);
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

MatrixResult run_matrix(const MatrixSpec& spec, unsigned parallelism) {
  MatrixResult mr;
  mr.cells = expand_matrix(spec);

  // Validate everything up front so a config error never leaves half a matrix.
  for (const MatrixCell& c : mr.cells) validate_config(c.config);

  // Solo runs: every trace of a multi-core workload, baseline mode, no prefetcher.
  std::vector<std::string> solo_traces;
  for (const auto& [name, traces] : spec.workloads)
    if (traces.size() > 1)
      for (const std::string& t : traces)
        if (std::find(solo_traces.begin(), solo_traces.end(), t) == solo_traces.end()) solo_traces.push_back(t);

  const std::size_t n_solo = solo_traces.size();
  std::vector<CellOutcome> solo(n_solo);
  mr.outcomes.resize(mr.cells.size());
  run_pool(n_solo + mr.cells.size(), parallelism, [&](std::size_t i) {
    if (i < n_solo) {
      SimConfig cfg = spec.base;
      cfg.cores = 1;
      cfg.traces = {solo_traces[i]};
      cfg.mode = Mode::BASELINE;
      cfg.prefetcher = PrefetcherKind::NONE;
      cfg.stats_path.clear();
      solo[i] = run_one(cfg);
    } else {
      mr.outcomes[i - n_solo] = run_one(mr.cells[i - n_solo].config);
    }
  });

  for (std::size_t i = 0; i < n_solo; ++i)
    if (solo[i].status == CellOutcome::OK) mr.alone_ipc.emplace_back(solo_traces[i], total_ipc(solo[i].result));
    else if (solo[i].status == CellOutcome::CONFIG_ERROR) ++mr.config_errors;
    else ++mr.sim_errors;
  for (const CellOutcome& o : mr.outcomes)
    if (o.status == CellOutcome::CONFIG_ERROR) ++mr.config_errors;
    else if (o.status == CellOutcome::SIM_ERROR) ++mr.sim_errors;
  mr.summary = build_summary(mr);
  return mr;
}

void write_matrix(const MatrixResult& r, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "cells", ec);
  if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
  write_csv(r.summary, (fs::path(dir) / "summary.csv").string());
  for (const MatrixCell& c : r.cells) {
    const CellOutcome& o = r.outcomes[c.index];
    if (o.status != CellOutcome::OK) continue;
    fs::path base = fs::path(dir) / "cells" / cell_name(c);
    write_csv(stats_table(o.result.stats), base.string() + ".stats.csv");
    write_csv(runahead_interval_table(o.result), base.string() + ".runahead.csv");
    if (o.result.has_emc) write_csv(emc_interval_table(o.result), base.string() + ".emc.csv");
  }
}

}  // namespace remsim
