// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "splicelb/bench/metrics.hpp"
#include "splicelb/bench/oracles.hpp"
#include "splicelb/bench/table_bench.hpp"
#include "splicelb/offload/offload.hpp"
#include "support/fixtures.hpp"

namespace {

using namespace splicelb;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
};

int failures = 0;

void report(const char* id, const char* name, const Outcome& o) {
  std::printf("[%s] %s %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.summary.c_str());
  for (const std::string& d : o.details) std::printf("         %s\n", d.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Stream equality under loss with keep-alive requests and header insertion.
Outcome stream_equality() {
  const auto start = Clock::now();
  const std::uint64_t sizes[] = {1024, 64 * 1024, 1 << 20, 16 << 20};
  const double losses[] = {0.0, 0.01, 0.05};
  constexpr int kSessions = 1000;
  std::mt19937_64 rng(20260101);
  Outcome o;
  std::uint64_t sessions = 0, requests = 0, mismatched = 0, unfinished = 0, retransmits = 0, offloaded = 0;
  for (std::size_t li = 0; li < 3; ++li) {
    netsim::SimConfig cfg = testing::small_config(4, losses[li]);
    cfg.n_clients = 16;
    cfg.concurrency = 32;
    // A 16 MiB response at 5% loss spends minutes in RTO backoff; only the run horizon bounds a session here.
    cfg.session_timeout = std::chrono::seconds(3600);
    netsim::Simulation sim(cfg, 100 + li);
    const int n = kSessions / 3 + (li < kSessions % 3 ? 1 : 0);
    for (int i = 0; i < n; ++i) {
      netsim::SessionSpec s;
      const auto k = 1 + rng() % 4;
      for (std::uint64_t j = 0; j < k; ++j) s.sizes.push_back(sizes[rng() % 4]);
      requests += k;
      sim.add_session(std::move(s));
    }
    sim.run();
    for (const netsim::SessionRecord& rec : sim.sessions()) {
      ++sessions;
      if (rec.state != netsim::SessionState::kCompleted) {
        ++unfinished;
        if (o.details.size() < 6) o.details.push_back(fmt("session %llu ended %s", (unsigned long long)rec.id, netsim::to_string(rec.state)));
        continue;
      }
      const testing::StreamCheck c = testing::check_streams(rec, cfg.routes);
      if (!c.ok) {
        ++mismatched;
        if (o.details.size() < 6) o.details.push_back(c.why);
      }
    }
    retransmits += sim.endpoint_totals(false).retransmitted_segments + sim.endpoint_totals(true).retransmitted_segments;
    offloaded += sim.offload().stats().installs;
  }
  const double secs = seconds_since(start);
  o.pass = sessions == kSessions && mismatched == 0 && unfinished == 0 && secs < 120.0;
  o.summary = fmt("%llu sessions, %llu requests, loss {0, 1%%, 5%%}: %llu mismatched, %llu unfinished; %.1f s (limit 120 s)",
                  (unsigned long long)sessions, (unsigned long long)requests, (unsigned long long)mismatched,
                  (unsigned long long)unfinished, secs);
  o.details.push_back(fmt("endpoint retransmitted segments %llu, offloaded responses %llu",
                          (unsigned long long)retransmits, (unsigned long long)offloaded));
  return o;
}

Outcome oracle_outcome(const bench::OracleResult& r, double secs, double limit) {
  Outcome o;
  o.pass = r.passed() && secs < limit;
  o.summary = fmt("%llu cases, %llu checks, %llu failures; %.2f s (limit %.0f s)", (unsigned long long)r.cases,
                  (unsigned long long)r.checks, (unsigned long long)r.failures, secs, limit);
  for (const std::string& c : r.counterexamples) o.details.push_back(c);
  return o;
}

// 2. and 3.
Outcome mapping() {
  const auto start = Clock::now();
  const bench::OracleResult r = bench::run_mapping_oracle(10'000, 2);
  return oracle_outcome(r, seconds_since(start), 10.0);
}

Outcome engine_diff() {
  const auto start = Clock::now();
  const bench::OracleResult r = bench::run_engine_diff_oracle(10'000, 3);
  return oracle_outcome(r, seconds_since(start), 10.0);
}

double mean_fct_us(netsim::Simulation& sim) {
  double sum = 0;
  std::size_t n = 0;
  for (const netsim::SessionRecord& rec : sim.sessions()) {
    for (const netsim::RequestTiming& t : rec.client_app->timings()) {
      if (!t.completed) return INFINITY;
      sum += to_us(*t.completed - t.sent);
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : INFINITY;
}

// 4. Offload economics.
Outcome offload_economics() {
  Outcome o;
  bool ok = true;

  // Threshold from the calibrated latencies, recomputed here by hand.
  const double p_us = 25.39 + 18.08;
  const double t_us = 0.333;
  const double mss = 1460;
  const double expected = p_us / t_us * mss;
  const LatencyModel model = LatencyModel::calibrated();
  OffloadParams params;
  const std::uint64_t formula = formula_threshold(model, params);
  const bool threshold_ok = std::abs(static_cast<double>(formula) - expected) <= mss;
  ok &= threshold_ok;
  o.details.push_back(fmt("formula threshold %llu bytes, hand computed %.0f (tolerance 1 MSS): %s",
                          (unsigned long long)formula, expected, threshold_ok ? "ok" : "off"));
  const bool table_ok = model.insert_us(1) == 305.40 && model.delete_us(1) == 57.49 && model.insert_us(16) == 25.39 &&
                        model.delete_us(16) == 18.08;
  ok &= table_ok;

  bool monotone = true;
  for (std::uint64_t th : {formula, effective_threshold(model, params)}) {
    bool seen_true = false;
    for (std::uint64_t len = 0; len <= (32u << 20); len += 997) {
      const bool v = should_offload(len, th);
      if (seen_true && !v) monotone = false;
      seen_true |= v;
    }
    monotone &= !should_offload(std::nullopt, th);
  }
  ok &= monotone;
  o.details.push_back(fmt("should_offload monotone over [0, 32 MiB], unknown length never offloaded: %s",
                          monotone ? "ok" : "violated"));

  // A 16 MiB response: worker data packets bounded by the install window.
  {
    netsim::SimConfig cfg = testing::small_config(2, 0.0);
    netsim::Simulation sim(cfg, 41);
    sim.add_session(netsim::SessionSpec{{16u << 20}, std::nullopt});
    sim.run();
    const netsim::SessionRecord& rec = sim.sessions().at(0);
    const bool streams = rec.state == netsim::SessionState::kCompleted && testing::check_streams(rec, cfg.routes).ok;
    const OffloadStats& st = sim.offload().stats();
    std::optional<Timestamp> requested;
    for (const OffloadEvent& e : sim.offload().events()) {
      if (e.kind == OffloadEventKind::kInstallRequested && !requested) requested = e.at;
    }
    const auto& flows = sim.lb().s2c_flows;
    bool bound_ok = false;
    if (st.installs == 1 && requested && flows.size() == 1) {
      const netsim::S2cFlowCounters& f = flows.begin()->second;
      const Timestamp ready = *requested + st.max_install_latency;
      const double window_us = to_us(ready - *f.first_data_arrival);
      // Back-to-back full segments arrive one server-link serialization time apart.
      const double frame_bits = 8.0 * (40.0 + cfg.server_tcp.mss);
      const double gap_us = frame_bits / cfg.server_link.bandwidth_gbps / 1000.0;
      const double bound = window_us / gap_us + 1.0;
      bound_ok = static_cast<double>(f.worker_data_packets) <= bound && f.engine_data_packets > 0;
      o.details.push_back(fmt("16 MiB: %llu data packets, %llu on workers, %llu hairpinned; install window %.2f us, "
                              "interarrival %.3f us (observed min %.3f us), bound %.1f: %s",
                              (unsigned long long)f.data_packets, (unsigned long long)f.worker_data_packets,
                              (unsigned long long)f.engine_data_packets, window_us, gap_us,
                              to_us(*f.min_interarrival), bound,
                              bound_ok ? "ok" : "exceeded"));
    } else {
      o.details.push_back(fmt("16 MiB: expected one install on one flow, saw %llu installs on %zu flows",
                              (unsigned long long)st.installs, flows.size()));
    }
    ok &= bound_ok && streams;
  }

  // 1 KB responses: offloading anyway only adds rule churn and latch waits.
  {
    auto run = [](bool force) {
      netsim::SimConfig cfg = testing::small_config(2, 0.0);
      cfg.offload.enabled = force;
      cfg.offload.force = force;
      netsim::Simulation sim(cfg, 42);
      for (int i = 0; i < 8; ++i) sim.add_session(netsim::SessionSpec{{1024, 1024, 1024, 1024}, std::nullopt});
      sim.run();
      return std::make_pair(mean_fct_us(sim), sim.offload().stats().installs);
    };
    const auto [plain, plain_installs] = run(false);
    const auto [forced, forced_installs] = run(true);
    const bool faster = plain < forced && plain_installs == 0 && forced_installs > 0;
    ok &= faster;
    o.details.push_back(fmt("1 KB keep-alive responses: mean completion %.1f us without offload, %.1f us forced "
                            "(%llu rules): %s",
                            plain, forced, (unsigned long long)forced_installs, faster ? "ok" : "not faster"));
  }
  o.pass = ok;
  o.summary = fmt("threshold %llu B, monotone, worker-packet bound and small-response cost", (unsigned long long)formula);
  return o;
}

// 5. No state before payload.
Outcome syn_flood() {
  ConnTable table(TableConfig{});
  netsim::SimConfig cfg = testing::small_config();
  SpliceAgent agent(cfg.agent, cfg.routes, table);
  std::mt19937_64 rng(5);
  const Timestamp now = at_ns(1'000'000);
  std::uint64_t synacks = 0;
  for (int i = 0; i < 10'000; ++i) {
    Packet syn;
    syn.key = FlowKey{make_addr(172, 16, static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng())),
                      cfg.agent.vip, static_cast<Port>(1024 + rng() % 60000), cfg.agent.vip_port, kProtoTcp};
    syn.seq = static_cast<Seq>(rng());
    syn.flags = kSyn;
    syn.options.mss = 1460;
    const AgentOutput out = agent.handle_packet(syn, now);
    for (const Packet& p : out.packets) synacks += p.has(kSyn) && p.has(kAck);
  }
  const std::size_t after_flood = agent.entry_count() + table.size();

  // Complete 300 handshakes; only the 100 that send a request create state.
  std::uint64_t with_payload = 0;
  for (int i = 0; i < 300; ++i) {
    Packet syn;
    syn.key = FlowKey{make_addr(10, 1, 9, static_cast<std::uint8_t>(1 + i % 200)), cfg.agent.vip,
                      static_cast<Port>(2000 + i), cfg.agent.vip_port, kProtoTcp};
    syn.seq = static_cast<Seq>(rng());
    syn.flags = kSyn;
    syn.options.mss = 1460;
    const Packet synack = agent.handle_packet(syn, now).packets.at(0);
    Packet ack;
    ack.key = syn.key;
    ack.seq = seq_add(syn.seq, 1);
    ack.ack = seq_add(synack.seq, 1);
    ack.flags = kAck;
    agent.handle_packet(ack, now);
    if (i % 3 == 0) {
      Packet data = ack;
      data.flags = kAck | kPsh;
      data.payload = Payload(std::string_view("GET /obj/1 HTTP/1.1\r\nHost: vip\r\n\r\n"));
      agent.handle_packet(data, now);
      ++with_payload;
    }
  }
  Outcome o;
  o.pass = after_flood == 0 && synacks == 10'000 && agent.entry_count() == with_payload;
  o.summary = fmt("10000 SYNs -> %llu SYN-ACKs, %zu entries; %llu of 300 handshakes sent payload -> %zu entries",
                  (unsigned long long)synacks, after_flood, (unsigned long long)with_payload, agent.entry_count());
  return o;
}

// 6. Concurrent table.
Outcome concurrent_table() {
  Outcome o;
  const auto start = Clock::now();
  const bench::OracleResult seq = bench::run_table_sequential(200'000, 6);
  const bench::TableStressReport stress = bench::run_table_stress(8, 1'000'000, 0.6, 6);
  const bench::TtlLivenessReport ttl = bench::run_ttl_liveness(100, 6);
  const bench::TableBenchResult tb = bench::run_table_bench(4, 4'000'000, 0.6, 6);

  const bool seq_ok = seq.passed();
  const bool stress_ok = stress.projection_mismatches == 0 && stress.torn_reads == 0;
  const bool ttl_ok = ttl.missed_lookups == 0 && ttl.watched_present_at_end;
  const bool scale_ok = tb.lookup_scaling >= 2.5;
  o.details.push_back(fmt("sequential reference: %llu ops, %llu failures", (unsigned long long)seq.cases,
                          (unsigned long long)seq.failures));
  o.details.push_back(fmt("8 workers x 1M ops: %llu projection mismatches, %llu torn reads, %llu relocations, "
                          "%llu lookup retries",
                          (unsigned long long)stress.projection_mismatches, (unsigned long long)stress.torn_reads,
                          (unsigned long long)stress.relocations, (unsigned long long)stress.lookup_retries));
  for (const std::string& c : stress.counterexamples) o.details.push_back(c);
  o.details.push_back(fmt("TTL liveness over %llu half-TTL steps: %llu missed lookups, %llu sweeps evicted %llu, "
                          "%llu relocations",
                          (unsigned long long)ttl.steps, (unsigned long long)ttl.missed_lookups,
                          (unsigned long long)ttl.sweeps, (unsigned long long)ttl.swept_entries,
                          (unsigned long long)ttl.relocations));
  const bench::TableBenchRow& one = tb.rows.at(1);
  const bench::TableBenchRow& four = tb.rows.back();
  o.details.push_back(fmt("lookups: 1 thread %.2f Mops/s, 4 threads %.2f Mops/s, scaling %.2fx (need 2.5x; "
                          "%zu hardware threads available)",
                          one.ops_per_sec() / 1e6, four.ops_per_sec() / 1e6, tb.lookup_scaling, tb.hardware_threads));
  o.pass = seq_ok && stress_ok && ttl_ok && scale_ok;
  o.summary = fmt("reference %s, stress %s, TTL liveness %s, 4-thread scaling %.2fx %s; %.1f s", seq_ok ? "ok" : "FAIL",
                  stress_ok ? "ok" : "FAIL", ttl_ok ? "ok" : "FAIL", tb.lookup_scaling, scale_ok ? "ok" : "FAIL",
                  seconds_since(start));
  return o;
}

// 7. Determinism.
Outcome determinism() {
  auto once = [] {
    netsim::SimConfig cfg = testing::small_config(4, 0.01);
    netsim::Simulation sim(cfg, 77);
    std::mt19937_64 rng(77);
    const std::uint64_t sizes[] = {1024, 64 * 1024, 2 << 20};
    for (int i = 0; i < 60; ++i) sim.add_session(netsim::SessionSpec{{sizes[rng() % 3], sizes[rng() % 3]}, std::nullopt});
    sim.run();
    return bench::collect(sim);
  };
  const bench::MetricsReport a = once();
  const bench::MetricsReport b = once();
  const std::string ja = bench::to_json(a).dump();
  const std::string jb = bench::to_json(b).dump();
  Outcome o;
  o.pass = ja == jb && bench::digest(a) == bench::digest(b) && a.requests_completed == a.requests;
  o.summary = fmt("metrics digests %s / %s, %llu events, trace digest %s", bench::hex64(bench::digest(a)).c_str(),
                  bench::hex64(bench::digest(b)).c_str(), (unsigned long long)a.events,
                  bench::hex64(a.trace_digest).c_str());
  return o;
}

}  // namespace

int main() {
  const auto start = Clock::now();
  report("1", "stream equality", stream_equality());
  report("2", "mapping oracle", mapping());
  report("3", "engine differential", engine_diff());
  report("4", "offload economics", offload_economics());
  report("5", "stateless handshake / SYN flood", syn_flood());
  report("6", "concurrent table", concurrent_table());
  report("7", "determinism", determinism());
  std::printf("%d of 7 criteria failed (%.1f s)\n", failures, seconds_since(start));
  return failures;
}
