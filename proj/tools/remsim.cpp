// remsim command-line front end. Talks to the simulator only through the C API.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "remsim/remsim.h"

namespace fs = std::filesystem;

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("REMSIM_OUT_DIR");
  return env && *env ? env : "remsim-out";
}

int report(remsim_status s) {
  if (s != REMSIM_OK) std::cerr << "remsim: " << remsim_last_error() << "\n";
  return s;
}

bool make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) std::cerr << "remsim: cannot create " << dir << ": " << ec.message() << "\n";
  return !ec;
}

std::string keys_help() {
  std::string s = "\nConfig keys (file lines or --set key=value):\n";
  for (size_t i = 0; i < remsim_config_key_count(); ++i) {
    std::string name = remsim_config_key_name(i);
    s += "  " + name + std::string(name.size() < 22 ? 22 - name.size() : 1, ' ') + remsim_config_key_doc(i) + "\n";
  }
  return s;
}

// Options shared by run and lab.
struct ConfigArgs {
  std::string file;
  std::vector<std::string> sets;
  std::string mode, prefetcher;
  std::vector<std::string> traces;
  unsigned cores = 0;
  long long seed = -1;
  unsigned long long max_instructions = 0;

  void add(CLI::App* app) {
    app->add_option("config", file, "config file (key=value lines); defaults apply when omitted")
        ->check(CLI::ExistingFile);
    app->add_option("-s,--set", sets, "override one key, e.g. --set rob_size=128 (repeatable)");
    app->add_option("--mode", mode, "baseline|runahead|runahead-buffer|hybrid|emc-dep|ra-emc|ra-emc-dep");
    app->add_option("--prefetcher", prefetcher, "none|stream|ghb|markov+stream");
    app->add_option("--trace", traces, "per-core trace: file or gen:<kind>[:k=v,...] (repeat once per core)");
    app->add_option("--cores", cores, "core count (default: number of --trace options)");
    app->add_option("--seed", seed, "seed for generated traces");
    app->add_option("--max-instructions", max_instructions, "per-core instruction limit");
  }

  // Returns a config handle or nullptr after printing the error.
  remsim_config* build(remsim_status& st) const {
    remsim_config* cfg = nullptr;
    st = file.empty() ? remsim_config_new(&cfg) : remsim_config_load(file.c_str(), &cfg);
    if (st != REMSIM_OK) return nullptr;
    auto set = [&](const std::string& k, const std::string& v) {
      if (st == REMSIM_OK) st = remsim_config_set(cfg, k.c_str(), v.c_str());
    };
    if (!mode.empty()) set("mode", mode);
    if (!prefetcher.empty()) set("prefetcher", prefetcher);
    if (!traces.empty()) {
      std::string joined;
      for (size_t i = 0; i < traces.size(); ++i) joined += (i ? ";" : "") + traces[i];
      set("traces", joined);
      if (!cores) set("cores", std::to_string(traces.size()));
    }
    if (cores) set("cores", std::to_string(cores));
    if (seed >= 0) set("seed", std::to_string(seed));
    if (max_instructions) set("max_instructions", std::to_string(max_instructions));
    for (const std::string& kv : sets) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) {
        remsim_config_free(cfg);
        std::cerr << "remsim: --set expects key=value, got '" << kv << "'\n";
        st = REMSIM_ERR_CONFIG;
        return nullptr;
      }
      set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (st != REMSIM_OK) {
      remsim_config_free(cfg);
      return nullptr;
    }
    return cfg;
  }
};

int cmd_gen(const std::string& spec, const std::string& out, unsigned long long seed) {
  std::string path = out;
  if (path.empty()) {
    std::string dir = default_out_dir();
    if (!make_dir(dir)) return REMSIM_ERR_IO;
    path = (fs::path(dir) / "generated.trace").string();
  }
  remsim_status st = remsim_generate_trace(spec.c_str(), seed, path.c_str());
  if (st == REMSIM_OK) std::cout << path << "\n";
  return report(st);
}

int cmd_run(const ConfigArgs& a, std::string out_dir, bool quiet) {
  remsim_status st;
  remsim_config* cfg = a.build(st);
  if (!cfg) return report(st);
  if (out_dir.empty()) out_dir = default_out_dir();
  char* stats_key = nullptr;
  remsim_config_get(cfg, "stats", &stats_key);
  std::string stats_path = stats_key && *stats_key ? stats_key : (fs::path(out_dir) / "stats.csv").string();
  remsim_string_free(stats_key);

  remsim_result* r = nullptr;
  st = remsim_run(cfg, &r);
  remsim_config_free(cfg);
  if (st != REMSIM_OK) return report(st);
  if (!make_dir(out_dir)) {
    remsim_result_free(r);
    return REMSIM_ERR_IO;
  }
  if (fs::path(stats_path).has_parent_path()) make_dir(fs::path(stats_path).parent_path().string());
  std::string ra = (fs::path(out_dir) / "runahead_intervals.csv").string();
  std::string emc = (fs::path(out_dir) / "emc_intervals.csv").string();
  st = remsim_result_write(r, stats_path.c_str(), ra.c_str(), emc.c_str());
  if (st == REMSIM_OK && !quiet) {
    std::cout << "cycles " << remsim_result_cycles(r) << "\n";
    for (unsigned c = 0; c < remsim_result_cores(r); ++c) {
      char digest[32];
      std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(remsim_result_digest(r, c)));
      std::cout << "core " << c << " retired " << remsim_result_retired(r, c) << " ipc " << remsim_result_ipc(r, c)
                << " digest " << digest << "\n";
    }
    std::cout << "stats " << stats_path << "\n";
  }
  remsim_result_free(r);
  return report(st);
}

int cmd_matrix(const std::string& spec, const std::vector<std::string>& sets, unsigned jobs, std::string out_dir) {
  if (out_dir.empty()) out_dir = default_out_dir();
  std::vector<const char*> kv;
  for (const std::string& s : sets) kv.push_back(s.c_str());
  size_t failed = 0;
  remsim_status st = remsim_matrix(spec.c_str(), kv.data(), kv.size(), jobs, out_dir.c_str(), &failed);
  if (st == REMSIM_OK || failed) std::cout << (fs::path(out_dir) / "summary.csv").string() << "\n";
  return report(st);
}

int cmd_lab(const ConfigArgs& a, unsigned core, size_t max_stalls, const std::string& policy, std::string out_dir) {
  remsim_status st;
  remsim_config* cfg = a.build(st);
  if (!cfg) return report(st);
  if (out_dir.empty()) out_dir = default_out_dir();
  if (!make_dir(out_dir)) {
    remsim_config_free(cfg);
    return REMSIM_ERR_IO;
  }
  std::string csv = (fs::path(out_dir) / "lab.csv").string();
  std::string summary = (fs::path(out_dir) / "lab_summary.csv").string();
  st = remsim_lab(cfg, core, max_stalls, policy.empty() ? nullptr : policy.c_str(), csv.c_str(), summary.c_str());
  remsim_config_free(cfg);
  if (st == REMSIM_OK) {
    std::ifstream f(summary);
    std::cout << f.rdbuf();
  }
  return report(st);
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& out) {
  char* text = nullptr;
  remsim_status st = remsim_compare(a.c_str(), b.c_str(), &text);
  if (st != REMSIM_OK) return report(st);
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out);
    f << text;
    if (!f) {
      remsim_string_free(text);
      std::cerr << "remsim: cannot write " << out << "\n";
      return REMSIM_ERR_IO;
    }
  }
  remsim_string_free(text);
  return REMSIM_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"remsim: trace-driven multi-core simulator for runahead and enhanced-memory-controller studies"};
  app.require_subcommand(1);
  app.footer("Output directory defaults to $REMSIM_OUT_DIR, else ./remsim-out.\n"
             "Exit codes: 0 success, 1 I/O error, 2 configuration error, 3 simulation assertion failure.");

  std::string out_dir;

  auto* gen = app.add_subcommand("gen", "write a synthetic trace file");
  std::string gen_spec, gen_out;
  unsigned long long gen_seed = 1;
  gen->add_option("spec", gen_spec,
                  "gen:pointer-chase|linked-list|stream[:k=v,...]\n"
                  "  pointer-chase: n_nodes footprint chain_gap iterations seed page_size\n"
                  "  linked-list: n_nodes node_stride steps work cluster seed page_size\n"
                  "  stream: lines stride work page_size")
      ->required();
  gen->add_option("-o,--output", gen_out, "trace file to write (default <out-dir>/generated.trace)");
  gen->add_option("--seed", gen_seed, "seed when the spec does not set one");

  auto* run = app.add_subcommand("run", "simulate one configuration");
  ConfigArgs run_args;
  bool quiet = false;
  run_args.add(run);
  run->add_option("-o,--out-dir", out_dir, "directory for stats.csv, runahead_intervals.csv, emc_intervals.csv");
  run->add_flag("-q,--quiet", quiet, "print nothing on success");
  run->footer(keys_help());

  auto* matrix = app.add_subcommand("matrix", "run a mode x prefetcher x workload matrix");
  std::string matrix_spec;
  std::vector<std::string> matrix_sets;
  unsigned jobs = 1;
  matrix->add_option("spec", matrix_spec, "matrix spec: config keys plus modes=, prefetchers=, workload.<name>=")
      ->required()
      ->check(CLI::ExistingFile);
  matrix->add_option("-s,--set", matrix_sets, "override one spec key (repeatable)");
  matrix->add_option("-j,--jobs", jobs, "worker threads")->check(CLI::Range(1u, 256u));
  matrix->add_option("-o,--out-dir", out_dir, "directory for summary.csv and cells/");

  auto* lab = app.add_subcommand("lab", "replay chain-selection policies over one baseline run");
  ConfigArgs lab_args;
  unsigned lab_core = 0;
  size_t max_stalls = 1000;
  std::string policy;
  lab_args.add(lab);
  lab->add_option("--core", lab_core, "core whose stalls are analysed");
  lab->add_option("--max-stalls", max_stalls, "stop recording after this many full-window stalls");
  lab->add_option("--policy", policy, "pc-based|max-misses|stall-oracle (default: all)");
  lab->add_option("-o,--out-dir", out_dir, "directory for lab.csv and lab_summary.csv");

  auto* compare = app.add_subcommand("compare", "per-metric deltas between two stats CSVs");
  std::string cmp_a, cmp_b, cmp_out;
  compare->add_option("a", cmp_a, "reference stats CSV")->required()->check(CLI::ExistingFile);
  compare->add_option("b", cmp_b, "compared stats CSV")->required()->check(CLI::ExistingFile);
  compare->add_option("-o,--output", cmp_out, "write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : REMSIM_ERR_CONFIG;
  }

  if (*gen) return cmd_gen(gen_spec, gen_out, gen_seed);
  if (*run) return cmd_run(run_args, out_dir, quiet);
  if (*matrix) return cmd_matrix(matrix_spec, matrix_sets, jobs, out_dir);
  if (*lab) return cmd_lab(lab_args, lab_core, max_stalls, policy, out_dir);
  return cmd_compare(cmp_a, cmp_b, cmp_out);
}
