#pragma once

#include <string>
#include <utility>
#include <vector>

#include "remsim/config.hpp"
#include "remsim/metrics.hpp"
#include "remsim/sim.hpp"

namespace remsim {

// A matrix spec uses the config file format plus three list keys:
//   modes       = baseline, runahead, ...
//   prefetchers = none, stream, ...
//   workload.<name> = trace[;trace...]   (one trace per core)
// Every other key sets the shared base configuration. The baseline/none
// reference cell of each workload is always run.
struct MatrixSpec {
  SimConfig base;
  std::vector<Mode> modes;
  std::vector<PrefetcherKind> prefetchers;
  std::vector<std::pair<std::string, std::vector<std::string>>> workloads;
};

MatrixSpec parse_matrix_spec(const std::string& text,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {});
MatrixSpec load_matrix_spec(const std::string& path,
                            const std::vector<std::pair<std::string, std::string>>& overrides = {});

struct MatrixCell {
  std::size_t index = 0;
  std::string workload;
  PrefetcherKind prefetcher = PrefetcherKind::NONE;
  Mode mode = Mode::BASELINE;
  SimConfig config;
};

// Workload-major, then prefetcher, then mode, in spec order.
std::vector<MatrixCell> expand_matrix(const MatrixSpec& spec);
std::string cell_name(const MatrixCell& c);

struct CellOutcome {
  enum Status { OK, CONFIG_ERROR, SIM_ERROR } status = OK;
  std::string error;
  SimResult result;
};

struct MatrixResult {
  std::vector<MatrixCell> cells;
  std::vector<CellOutcome> outcomes;
  // Solo IPC per trace spec, for the weighted speedup of multi-core workloads.
  std::vector<std::pair<std::string, double>> alone_ipc;
  Table summary;
  std::size_t config_errors = 0, sim_errors = 0;
};

// Runs every cell on `parallelism` worker threads. Results do not depend on
// the thread count.
MatrixResult run_matrix(const MatrixSpec& spec, unsigned parallelism);

// Writes <dir>/summary.csv and per-cell CSVs under <dir>/cells/.
void write_matrix(const MatrixResult& r, const std::string& dir);

}  // namespace remsim
