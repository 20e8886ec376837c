// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

// Command-line front end: simulation runs, differential oracles and the
// connection table benchmark.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "splicelb/bench/config.hpp"
#include "splicelb/bench/metrics.hpp"
#include "splicelb/bench/oracles.hpp"
#include "splicelb/bench/table_bench.hpp"
#include "splicelb/bench/workload.hpp"
#include "splicelb/packet/codec.hpp"

namespace {

using namespace splicelb;

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed_flag, const std::string& out_dir) {
  bench::BenchConfig cfg = bench::load_config(config_path);
  const std::uint64_t seed = seed_flag.value_or(cfg.seed);
  netsim::Simulation sim(cfg.sim, seed);
  for (netsim::SessionSpec& s : bench::build_sessions(cfg.workload, seed)) sim.add_session(std::move(s));
  sim.run(kTimeZero + cfg.until);

  const bench::MetricsReport report = bench::collect(sim);
  std::cout << "config " << config_path << " seed " << seed << "\n";
  bench::print_table(std::cout, report);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    nlohmann::ordered_json j = bench::to_json(report);
    j["seed"] = seed;
    j["metrics_digest"] = bench::hex64(bench::digest(report));
    std::ofstream(std::filesystem::path(out_dir) / "metrics.json") << j.dump(2) << "\n";
    if (cfg.sim.record_trace) write_trace_file((std::filesystem::path(out_dir) / "trace.bin").string(), sim.trace());
  }
  return 0;
}

int cmd_oracle(const std::string& kind, std::uint64_t cases, std::uint64_t seed, std::size_t threads) {
  const auto start = std::chrono::steady_clock::now();
  bench::OracleResult res;
  if (kind == "mapping") {
    res = bench::run_mapping_oracle(cases, seed);
  } else if (kind == "engine-diff") {
    res = bench::run_engine_diff_oracle(cases, seed);
  } else {
    res = bench::run_table_oracle(threads, cases, seed);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << res.kind << ": " << (res.passed() ? "PASS" : "FAIL") << "  cases=" << res.cases
            << " checks=" << res.checks << " failures=" << res.failures << " time=" << secs << "s\n";
  for (const std::string& c : res.counterexamples) std::cout << "  counterexample: " << c << "\n";
  return res.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splicelb: splicing layer-7 load balancer simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "simulate a configured topology and workload");
  std::string config_path, out_dir;
  std::optional<std::uint64_t> run_seed;
  run->add_option("--config", config_path, "YAML configuration file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", run_seed, "overrides the seed in the configuration");
  run->add_option("--out", out_dir, "directory for metrics.json (and trace.bin)");

  auto* oracle = app.add_subcommand("oracle", "run a differential oracle");
  std::string kind;
  std::uint64_t cases = 10000, oracle_seed = 1;
  std::size_t oracle_threads = 8;
  oracle->add_option("--kind", kind, "mapping, engine-diff or table")
      ->required()
      ->check(CLI::IsMember({"mapping", "engine-diff", "table"}));
  oracle->add_option("--cases", cases, "cases (for table: operations per worker)");
  oracle->add_option("--seed", oracle_seed);
  oracle->add_option("--threads", oracle_threads, "table workers");

  auto* tb = app.add_subcommand("table-bench", "connection table throughput");
  std::size_t threads = 4;
  std::uint64_t ops = 4'000'000;
  tb->add_option("--threads", threads)->check(CLI::Range(1, 256));
  tb->add_option("--ops", ops, "lookups per thread count");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(config_path, run_seed, out_dir);
    if (*oracle) return cmd_oracle(kind, cases, oracle_seed, oracle_threads);
    if (*tb) {
      bench::print_table_bench(std::cout, bench::run_table_bench(threads, ops));
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
