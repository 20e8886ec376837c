// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace splicelb::bench {

struct OracleResult {
  std::string kind;
  std::uint64_t cases = 0;
  std::uint64_t checks = 0;
  std::uint64_t failures = 0;
  std::vector<std::string> counterexamples;  // the first few failures, human readable

  bool passed() const { return cases > 0 && failures == 0; }
  void fail(std::string what);
};

// Random insertion lists and ACK sequences; map_ack_s2c, map_seq_c2s and the
// SACK range mapping are compared with a model that materializes the receiver
// byte stream and labels every byte. The fixed anchor and boundary cases run
// first and count toward `cases`.
OracleResult run_mapping_oracle(std::uint64_t cases, std::uint64_t seed);

// Random connections are offloaded to a fresh flow engine and random
// server-to-client packets are pushed through it; the engine output must be
// bit-identical (encoded) to the worker rewrite. Packets the engine must not
// match (SYN/FIN/RST, SACK, foreign flows) are checked to fall through.
OracleResult run_engine_diff_oracle(std::uint64_t packets, std::uint64_t seed);

// Random single-threaded operations against a std::unordered_map reference,
// including TTL refresh and sweeping.
OracleResult run_table_sequential(std::uint64_t ops, std::uint64_t seed);

struct TableStressReport {
  std::uint64_t ops = 0;
  std::uint64_t projection_mismatches = 0;  // own-key results differing from the per-thread reference
  std::uint64_t torn_reads = 0;             // (key, value) pairs that were never written together
  std::uint64_t foreign_lookups = 0;        // lookups of keys owned by other threads
  std::uint64_t table_full = 0;
  std::uint64_t relocations = 0;
  std::uint64_t lookup_retries = 0;
  std::vector<std::string> counterexamples;
};

// `threads` workers each run `ops_per_thread` mixed operations on a table
// filled to about `load`. Each worker owns a disjoint key set and checks every
// result for its own keys against a sequential reference; lookups of other
// workers' keys check only that key and value belong together.
TableStressReport run_table_stress(std::size_t threads, std::uint64_t ops_per_thread, double load,
                                   std::uint64_t seed);

struct TtlLivenessReport {
  std::uint64_t steps = 0;  // half-TTL steps simulated
  std::uint64_t missed_lookups = 0;
  std::uint64_t sweeps = 0;
  std::uint64_t swept_entries = 0;
  std::uint64_t relocations = 0;
  bool watched_present_at_end = false;
};

// Watched flows are looked up every ttl/2 of simulated time for
// `ttl_multiple` TTLs while a sweeper thread and churn threads run
// concurrently. None of the watched flows may ever be swept.
TtlLivenessReport run_ttl_liveness(std::size_t ttl_multiple, std::uint64_t seed);

// All three table checks with the given sizes.
OracleResult run_table_oracle(std::size_t threads, std::uint64_t ops_per_thread, std::uint64_t seed);

}  // namespace splicelb::bench
