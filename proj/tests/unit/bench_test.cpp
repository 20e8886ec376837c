// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "splicelb/bench/config.hpp"
#include "splicelb/bench/metrics.hpp"
#include "splicelb/bench/oracles.hpp"
#include "splicelb/bench/workload.hpp"

namespace splicelb::bench {
namespace {

constexpr const char* kSmall = R"(
seed: 7
topology:
  clients: 4
  client_link: {latency_us: 10, bandwidth_gbps: 10, loss: 0.0}
  server_link: {latency_us: 5, bandwidth_gbps: 10}
lb:
  workers: 2
offload:
  enabled: true
  threshold_override_bytes: 200000
  insert_mode: non-blocking
workload:
  mode: fixed
  size_bytes: 2048
  requests: 40
  connections: 8
  requests_per_connection: 3
)";

std::string with_line(const std::string& extra) { return std::string(kSmall) + extra; }

TEST(BenchConfig, ParsesSmallConfig) {
  const BenchConfig cfg = parse_config(kSmall);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.sim.n_clients, 4u);
  EXPECT_EQ(cfg.sim.client_link.latency, from_us(10));
  EXPECT_EQ(cfg.sim.server_link.latency, from_us(5));
  EXPECT_EQ(cfg.sim.agent.n_workers, 2u);
  EXPECT_TRUE(cfg.sim.offload.enabled);
  ASSERT_TRUE(cfg.sim.offload.threshold_override.has_value());
  EXPECT_EQ(*cfg.sim.offload.threshold_override, 200000u);
  EXPECT_EQ(cfg.sim.offload.insert_mode, UpdateMode::kNonBlocking);
  EXPECT_EQ(cfg.workload.mode, WorkloadSpec::Mode::kFixed);
  EXPECT_EQ(cfg.workload.size, 2048u);
  EXPECT_EQ(cfg.workload.requests, 40u);
  EXPECT_EQ(cfg.sim.concurrency, 8u);
}

TEST(BenchConfig, EmptyDocumentGivesDefaults) {
  const BenchConfig cfg = parse_config("{}");
  const netsim::SimConfig def = default_sim_config();
  EXPECT_EQ(cfg.sim.n_clients, def.n_clients);
  EXPECT_EQ(cfg.sim.table.bucket_count, def.table.bucket_count);
  EXPECT_EQ(cfg.sim.routes.default_pool, def.routes.default_pool);
}

TEST(BenchConfig, RejectsBadInput) {
  EXPECT_THROW(parse_config(with_line("bogus: 1\n")), ConfigError);
  EXPECT_THROW(parse_config("lb: {workers: many}\n"), ConfigError);
  EXPECT_THROW(parse_config("lb: {vip: 10.0.0.300}\n"), ConfigError);
  EXPECT_THROW(parse_config("table: {buckets: 1000}\n"), ConfigError);
  EXPECT_THROW(parse_config("offload: {insert_mode: sometimes}\n"), ConfigError);
  EXPECT_THROW(parse_config("offload: {per_packet_us: 0}\n"), ConfigError);
  EXPECT_THROW(parse_config("offload: {delete_batch_max: 0}\n"), ConfigError);
  EXPECT_THROW(parse_config("workload: {mode: bursty}\n"), ConfigError);
  EXPECT_THROW(parse_config("workload: {mode: empirical}\n"), ConfigError);
  EXPECT_THROW(parse_config("workload: {connections: 0}\n"), ConfigError);
  EXPECT_THROW(parse_config("topology: {client_link: {latency_us: 1, jitter: 2}}\n"), ConfigError);
}

TEST(BenchConfig, UnknownKeyMessageNamesTheKey) {
  try {
    parse_config("lb: {wrokers: 4}\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("wrokers"), std::string::npos) << e.what();
  }
}

TEST(SizeDistribution, ParsesAndNormalizes) {
  std::istringstream in("# comment\nsize_bytes weight\n100 1\n\n  # another\n1000 3\n");
  const SizeDistribution d = SizeDistribution::parse(in);
  ASSERT_EQ(d.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(d.rows[0].weight, 0.25);
  EXPECT_DOUBLE_EQ(d.rows[1].weight, 0.75);
  EXPECT_DOUBLE_EQ(d.mean(), 25.0 + 750.0);
}

TEST(SizeDistribution, RejectsBadRows) {
  for (const char* text : {"h\n100\n", "h\n100 1 2\n", "h\n100 -1\n", "h\n", "h\n100 0\n", "h\nabc 1\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(SizeDistribution::parse(in), ConfigError) << text;
  }
}

TEST(Workload, FixedSplitsRequestsOverSessions) {
  WorkloadSpec spec;
  spec.size = 777;
  spec.requests = 10;
  spec.requests_per_connection = 3;
  const auto sessions = build_sessions(spec, 1);
  ASSERT_EQ(sessions.size(), 4u);
  std::size_t total = 0;
  for (const auto& s : sessions) {
    EXPECT_GE(s.sizes.size(), 1u);
    EXPECT_LE(s.sizes.size(), 3u);
    for (auto size : s.sizes) EXPECT_EQ(size, 777u);
    total += s.sizes.size();
  }
  EXPECT_EQ(total, 10u);
  spec.requests = 0;
  EXPECT_TRUE(build_sessions(spec, 1).empty());
}

TEST(Workload, EmpiricalFollowsWeightsAndIsSeeded) {
  WorkloadSpec spec;
  spec.mode = WorkloadSpec::Mode::kEmpirical;
  spec.distribution.rows = {{100, 0.5}, {10000, 0.3}, {1000000, 0.2}};
  spec.requests = 20000;
  spec.requests_per_connection = 4;
  const auto a = build_sessions(spec, 9);
  const auto b = build_sessions(spec, 9);
  const auto c = build_sessions(spec, 10);
  std::map<std::uint64_t, double> freq;
  std::size_t total = 0;
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].sizes, b[i].sizes);
    if (a[i].sizes != c[i].sizes) differs = true;
    for (auto size : a[i].sizes) {
      freq[size] += 1;
      ++total;
    }
  }
  EXPECT_TRUE(differs);
  ASSERT_EQ(total, 20000u);
  ASSERT_EQ(freq.size(), 3u);
  // Binomial standard deviation at n=20000 is at most 0.0036; allow 5 of them.
  for (const SizeWeight& sw : spec.distribution.rows) EXPECT_NEAR(freq[sw.size] / total, sw.weight, 0.018);
}

TEST(Workload, EmpiricalWithoutRowsThrows) {
  WorkloadSpec spec;
  spec.mode = WorkloadSpec::Mode::kEmpirical;
  EXPECT_THROW(build_sessions(spec, 1), ConfigError);
}

MetricsReport run_small(const BenchConfig& cfg, std::uint64_t seed) {
  netsim::Simulation sim(cfg.sim, seed);
  for (netsim::SessionSpec& s : build_sessions(cfg.workload, seed)) sim.add_session(std::move(s));
  sim.run(kTimeZero + cfg.until);
  return collect(sim);
}

TEST(Metrics, AccountingInvariants) {
  const BenchConfig cfg = parse_config(kSmall);
  const MetricsReport r = run_small(cfg, cfg.seed);
  EXPECT_EQ(r.sessions, 14u);
  EXPECT_EQ(r.requests, 40u);
  EXPECT_EQ(r.requests_completed + r.requests_failed + r.requests_in_flight, r.requests);
  EXPECT_EQ(r.requests_completed, 40u);
  EXPECT_EQ(r.sessions_completed + r.sessions_reset + r.sessions_timed_out, r.sessions);
  const std::uint64_t head = netsim::response_head(2048).size();
  EXPECT_EQ(r.response_bytes, 40u * (head + 2048));
  ASSERT_GT(r.duration_ns, 0);
  EXPECT_NEAR(r.goodput * static_cast<double>(r.duration_ns) / 1e9, static_cast<double>(r.response_bytes),
              1e-6 * static_cast<double>(r.response_bytes));
  EXPECT_NEAR(r.rps * static_cast<double>(r.duration_ns) / 1e9, 40.0, 1e-6 * 40.0);
  std::uint64_t bucket_requests = 0, bucket_bytes = 0;
  for (const SizeBucket& b : r.buckets) {
    bucket_requests += b.requests;
    bucket_bytes += b.response_bytes;
    EXPECT_LE(b.completed, b.requests);
    if (b.completed > 0) {
      EXPECT_LE(b.fct_us.p50, b.fct_us.p90);
      EXPECT_LE(b.fct_us.p90, b.fct_us.p99);
    }
  }
  EXPECT_EQ(bucket_requests, r.requests);
  EXPECT_LE(r.fct_us.p50, r.fct_us.p99);
  // 2 KiB responses stay under the threshold.
  EXPECT_EQ(r.rule_installs, 0u);
  EXPECT_EQ(r.engine_matched_packets, 0u);
  EXPECT_EQ(r.offload_threshold, 200000u);
}

TEST(Metrics, SameSeedSameDigest) {
  const BenchConfig cfg = parse_config(kSmall);
  const MetricsReport a = run_small(cfg, 3);
  const MetricsReport b = run_small(cfg, 3);
  EXPECT_EQ(digest(a), digest(b));
  EXPECT_EQ(a.trace_digest, b.trace_digest);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Metrics, JsonHasCoreKeys) {
  const BenchConfig cfg = parse_config(kSmall);
  const MetricsReport r = run_small(cfg, 1);
  const nlohmann::ordered_json j = to_json(r);
  for (const char* key : {"sessions", "requests", "response_bytes", "duration_ns", "goodput_bytes_per_s", "rps",
                          "fct_us", "size_buckets", "offload", "trace_digest"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  std::ostringstream table;
  print_table(table, r);
  EXPECT_FALSE(table.str().empty());
}

TEST(Metrics, PercentilesOfKnownSamples) {
  std::vector<double> s;
  for (int i = 1; i <= 100; ++i) s.push_back(i);
  const Percentiles p = percentiles(s);
  EXPECT_NEAR(p.p50, 50.0, 1.0);
  EXPECT_NEAR(p.p90, 90.0, 1.0);
  EXPECT_NEAR(p.p99, 99.0, 1.0);
  const Percentiles empty = percentiles({});
  EXPECT_EQ(empty.p50, 0.0);
}

TEST(Oracles, EngineDifferentialSmoke) {
  const OracleResult r = run_engine_diff_oracle(2000, 5);
  EXPECT_TRUE(r.passed()) << (r.counterexamples.empty() ? "" : r.counterexamples.front());
}

TEST(Oracles, TableSequentialSmoke) {
  const OracleResult r = run_table_sequential(20000, 5);
  EXPECT_TRUE(r.passed()) << (r.counterexamples.empty() ? "" : r.counterexamples.front());
}

TEST(Oracles, TableStressSmoke) {
  const TableStressReport r = run_table_stress(2, 20000, 0.6, 5);
  EXPECT_EQ(r.projection_mismatches, 0u);
  EXPECT_EQ(r.torn_reads, 0u);
  EXPECT_GT(r.ops, 0u);
}

TEST(Oracles, TtlLivenessSmoke) {
  const TtlLivenessReport r = run_ttl_liveness(4, 5);
  EXPECT_EQ(r.missed_lookups, 0u);
  EXPECT_TRUE(r.watched_present_at_end);
  EXPECT_GT(r.sweeps, 0u);
}

}  // namespace
}  // namespace splicelb::bench
