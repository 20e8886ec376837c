// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace splicelb::bench {

struct TableBenchRow {
  const char* op;  // "insert" or "lookup"
  std::size_t threads = 0;
  std::uint64_t ops = 0;
  double seconds = 0.0;
  std::uint64_t table_full = 0;  // inserts that found no room
  double load = 0.0;             // table occupancy after the phase

  double ops_per_sec() const { return seconds > 0 ? static_cast<double>(ops) / seconds : 0.0; }
};

struct TableBenchResult {
  std::vector<TableBenchRow> rows;
  std::size_t hardware_threads = 0;
  // Lookup throughput with `threads` workers over one worker.
  double lookup_scaling = 0.0;
};

// Wall-clock throughput of the connection table. Each thread count runs an
// insert phase that fills a fresh table to `load` and then a lookup phase of
// `ops` lookups split evenly over the threads. Runs for 1 thread and for
// `threads` threads.
TableBenchResult run_table_bench(std::size_t threads, std::uint64_t ops, double load = 0.6,
                                 std::uint64_t seed = 1);

void print_table_bench(std::ostream& out, const TableBenchResult& result);

}  // namespace splicelb::bench
