// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "splicelb/netsim/simulation.hpp"

namespace splicelb::bench {

struct Percentiles {
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
};

// Nearest-rank percentiles; all zero for an empty sample.
Percentiles percentiles(std::vector<double> samples);

struct SizeBucket {
  std::string label;
  std::uint64_t lower = 0;  // inclusive, bytes
  std::uint64_t upper = 0;  // exclusive; 0 means unbounded
  std::uint64_t requests = 0;
  std::uint64_t completed = 0;
  std::uint64_t response_bytes = 0;
  Percentiles fct_us;
};

struct MetricsReport {
  std::uint64_t sessions = 0;
  std::uint64_t sessions_completed = 0;
  std::uint64_t sessions_reset = 0;
  std::uint64_t sessions_timed_out = 0;

  std::uint64_t requests = 0;
  std::uint64_t requests_completed = 0;
  std::uint64_t requests_failed = 0;     // on a reset or timed-out session
  std::uint64_t requests_in_flight = 0;  // session still pending or running at the end

  std::uint64_t response_bytes = 0;  // heads and bodies received by clients
  std::int64_t duration_ns = 0;      // first session start to last event that mattered
  double goodput = 0.0;              // response_bytes per simulated second
  double rps = 0.0;
  Percentiles fct_us;
  std::vector<SizeBucket> buckets;

  std::uint64_t lb_ingress_packets = 0;
  std::uint64_t worker_c2s_packets = 0;
  std::uint64_t worker_s2c_packets = 0;
  std::uint64_t worker_s2c_data_packets = 0;
  std::uint64_t engine_matched_packets = 0;

  std::uint64_t offload_threshold = 0;
  std::uint64_t rule_installs = 0;
  std::uint64_t rule_install_failures = 0;
  std::uint64_t rule_deletes = 0;
  std::uint64_t rule_delete_batches = 0;
  std::uint64_t rules_aged = 0;
  double mean_install_latency_us = 0.0;
  double max_install_latency_us = 0.0;
  double mean_delete_latency_us = 0.0;

  std::uint64_t table_size = 0;
  std::uint64_t table_capacity = 0;
  std::uint64_t table_relocations = 0;
  std::uint64_t table_lookup_retries = 0;

  std::uint64_t entries_created = 0;
  std::uint64_t syn_cookies_issued = 0;
  std::uint64_t resets_sent = 0;
  std::uint64_t inserted_bytes_sent = 0;
  std::uint64_t inserted_bytes_retransmitted = 0;
  std::uint64_t requests_deferred = 0;

  std::uint64_t client_retransmitted_segments = 0;
  std::uint64_t server_retransmitted_segments = 0;

  std::uint64_t events = 0;
  std::uint64_t trace_digest = 0;  // packets in and out of the load balancer
};

MetricsReport collect(netsim::Simulation& sim);

nlohmann::ordered_json to_json(const MetricsReport& report);
// FNV-1a of the JSON serialization: equal digests mean equal reports.
std::uint64_t digest(const MetricsReport& report);
std::string hex64(std::uint64_t value);

void print_table(std::ostream& out, const MetricsReport& report);

}  // namespace splicelb::bench
