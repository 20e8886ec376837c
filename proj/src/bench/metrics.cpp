// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/bench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace splicelb::bench {
namespace {

std::vector<SizeBucket> default_buckets() {
  const std::pair<const char*, std::pair<std::uint64_t, std::uint64_t>> bounds[] = {
      {"<10KB", {0, 10'000}},
      {"10KB-100KB", {10'000, 100'000}},
      {"100KB-1MB", {100'000, 1'000'000}},
      {">=1MB", {1'000'000, 0}},
  };
  std::vector<SizeBucket> buckets;
  for (const auto& [label, range] : bounds) {
    SizeBucket b;
    b.label = label;
    b.lower = range.first;
    b.upper = range.second;
    buckets.push_back(b);
  }
  return buckets;
}

SizeBucket& bucket_for(std::vector<SizeBucket>& buckets, std::uint64_t size) {
  for (SizeBucket& b : buckets) {
    if (size >= b.lower && (b.upper == 0 || size < b.upper)) return b;
  }
  return buckets.back();
}

nlohmann::ordered_json pct_json(const Percentiles& p) {
  return {{"p50", p.p50}, {"p90", p.p90}, {"p99", p.p99}};
}

}  // namespace

Percentiles percentiles(std::vector<double> samples) {
  Percentiles p;
  if (samples.empty()) return p;
  std::sort(samples.begin(), samples.end());
  auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
    return samples[std::clamp<std::size_t>(k, 1, samples.size()) - 1];
  };
  p.p50 = rank(0.50);
  p.p90 = rank(0.90);
  p.p99 = rank(0.99);
  return p;
}

MetricsReport collect(netsim::Simulation& sim) {
  MetricsReport r;
  r.buckets = default_buckets();
  std::vector<double> fct;
  std::vector<std::vector<double>> bucket_fct(r.buckets.size());

  std::optional<Timestamp> first, last;
  for (const netsim::SessionRecord& rec : sim.sessions()) {
    ++r.sessions;
    r.requests += rec.spec.sizes.size();
    const bool ended = rec.ended.has_value();
    switch (rec.state) {
      case netsim::SessionState::kCompleted:
        ++r.sessions_completed;
        break;
      case netsim::SessionState::kReset:
        ++r.sessions_reset;
        break;
      case netsim::SessionState::kTimedOut:
        ++r.sessions_timed_out;
        break;
      default:
        break;
    }
    std::uint64_t done = 0;
    if (rec.client_app) {
      if (!first || rec.started < *first) first = rec.started;
      const Timestamp end = ended ? *rec.ended : sim.now();
      if (!last || end > *last) last = end;
      r.response_bytes += netsim::stream_size(rec.client_app->received());
      for (const netsim::RequestTiming& t : rec.client_app->timings()) {
        SizeBucket& b = bucket_for(r.buckets, t.size);
        ++b.requests;
        if (!t.completed) continue;
        ++done;
        ++b.completed;
        b.response_bytes += t.size;
        const double us = to_us(*t.completed - t.sent);
        fct.push_back(us);
        bucket_fct[static_cast<std::size_t>(&b - r.buckets.data())].push_back(us);
      }
      // Requests never sent still count toward their size bucket.
      for (std::size_t i = rec.client_app->timings().size(); i < rec.spec.sizes.size(); ++i) {
        ++bucket_for(r.buckets, rec.spec.sizes[i]).requests;
      }
    } else {
      for (std::uint64_t s : rec.spec.sizes) ++bucket_for(r.buckets, s).requests;
    }
    r.requests_completed += done;
    const std::uint64_t rest = rec.spec.sizes.size() - done;
    if (ended) {
      r.requests_failed += rest;
    } else {
      r.requests_in_flight += rest;
    }
  }
  if (first && last) r.duration_ns = to_ns(*last) - to_ns(*first);
  if (r.duration_ns > 0) {
    const double secs = static_cast<double>(r.duration_ns) * 1e-9;
    r.goodput = static_cast<double>(r.response_bytes) / secs;
    r.rps = static_cast<double>(r.requests_completed) / secs;
  }
  r.fct_us = percentiles(std::move(fct));
  for (std::size_t i = 0; i < r.buckets.size(); ++i) r.buckets[i].fct_us = percentiles(std::move(bucket_fct[i]));

  const netsim::LbCounters& lb = sim.lb();
  r.lb_ingress_packets = lb.ingress_packets;
  r.worker_c2s_packets = lb.worker_c2s;
  r.worker_s2c_packets = lb.worker_s2c;
  r.worker_s2c_data_packets = lb.worker_s2c_data;
  r.engine_matched_packets = lb.engine_matched;

  const OffloadStats& os = sim.offload().stats();
  r.offload_threshold = sim.offload().threshold();
  r.rule_installs = os.installs;
  r.rule_install_failures = os.install_failures;
  r.rule_deletes = os.deletes;
  r.rule_delete_batches = os.delete_batches;
  r.rules_aged = os.aged_rules;
  if (os.installs > 0) r.mean_install_latency_us = to_us(os.install_latency_total) / static_cast<double>(os.installs);
  r.max_install_latency_us = to_us(os.max_install_latency);
  if (os.deletes > 0) r.mean_delete_latency_us = to_us(os.delete_latency_total) / static_cast<double>(os.deletes);

  const TableStats ts = sim.table().stats();
  r.table_size = ts.size;
  r.table_capacity = ts.capacity;
  r.table_relocations = ts.relocations;
  r.table_lookup_retries = ts.lookup_retries;

  const AgentStats& as = sim.agent().stats();
  r.entries_created = as.entries_created;
  r.syn_cookies_issued = as.syn_cookies_issued;
  r.resets_sent = as.resets_sent;
  r.inserted_bytes_sent = as.inserted_bytes_sent;
  r.inserted_bytes_retransmitted = as.inserted_bytes_retransmitted;
  r.requests_deferred = as.requests_deferred;

  r.client_retransmitted_segments = sim.endpoint_totals(false).retransmitted_segments;
  r.server_retransmitted_segments = sim.endpoint_totals(true).retransmitted_segments;
  r.events = sim.events();
  r.trace_digest = sim.digest();
  return r;
}

std::string hex64(std::uint64_t value) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(value));
  return buf;
}

nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["sessions"] = {{"total", r.sessions},
                   {"completed", r.sessions_completed},
                   {"reset", r.sessions_reset},
                   {"timed_out", r.sessions_timed_out}};
  j["requests"] = {{"total", r.requests},
                   {"completed", r.requests_completed},
                   {"failed", r.requests_failed},
                   {"in_flight", r.requests_in_flight}};
  j["response_bytes"] = r.response_bytes;
  j["duration_ns"] = r.duration_ns;
  j["goodput_bytes_per_s"] = r.goodput;
  j["rps"] = r.rps;
  j["fct_us"] = pct_json(r.fct_us);
  nlohmann::ordered_json buckets = nlohmann::ordered_json::array();
  for (const SizeBucket& b : r.buckets) {
    buckets.push_back({{"label", b.label},
                       {"lower", b.lower},
                       {"upper", b.upper},
                       {"requests", b.requests},
                       {"completed", b.completed},
                       {"response_bytes", b.response_bytes},
                       {"fct_us", pct_json(b.fct_us)}});
  }
  j["size_buckets"] = buckets;
  j["packets"] = {{"lb_ingress", r.lb_ingress_packets},
                  {"worker_c2s", r.worker_c2s_packets},
                  {"worker_s2c", r.worker_s2c_packets},
                  {"worker_s2c_data", r.worker_s2c_data_packets},
                  {"engine_matched", r.engine_matched_packets}};
  j["offload"] = {{"threshold_bytes", r.offload_threshold},
                  {"installs", r.rule_installs},
                  {"install_failures", r.rule_install_failures},
                  {"deletes", r.rule_deletes},
                  {"delete_batches", r.rule_delete_batches},
                  {"aged", r.rules_aged},
                  {"mean_install_latency_us", r.mean_install_latency_us},
                  {"max_install_latency_us", r.max_install_latency_us},
                  {"mean_delete_latency_us", r.mean_delete_latency_us}};
  j["table"] = {{"size", r.table_size},
                {"capacity", r.table_capacity},
                {"relocations", r.table_relocations},
                {"lookup_retries", r.table_lookup_retries}};
  j["agent"] = {{"entries_created", r.entries_created},
                {"syn_cookies_issued", r.syn_cookies_issued},
                {"resets_sent", r.resets_sent},
                {"inserted_bytes_sent", r.inserted_bytes_sent},
                {"inserted_bytes_retransmitted", r.inserted_bytes_retransmitted},
                {"requests_deferred", r.requests_deferred}};
  j["endpoints"] = {{"client_retransmitted_segments", r.client_retransmitted_segments},
                    {"server_retransmitted_segments", r.server_retransmitted_segments}};
  j["events"] = r.events;
  j["trace_digest"] = hex64(r.trace_digest);
  return j;
}

std::uint64_t digest(const MetricsReport& report) {
  const std::string text = to_json(report).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void print_table(std::ostream& out, const MetricsReport& r) {
  char line[256];
  auto row = [&](const char* name, const std::string& value) {
    std::snprintf(line, sizeof line, "  %-32s %s\n", name, value.c_str());
    out << line;
  };
  auto num = [](auto v) { return std::to_string(v); };
  auto fixed = [](double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return std::string(buf);
  };
  out << "requests\n";
  row("sessions (completed/reset/timeout)", num(r.sessions_completed) + "/" + num(r.sessions_reset) + "/" +
                                                num(r.sessions_timed_out) + " of " + num(r.sessions));
  row("requests completed", num(r.requests_completed) + " of " + num(r.requests));
  row("requests failed / in flight", num(r.requests_failed) + " / " + num(r.requests_in_flight));
  row("simulated duration (ms)", fixed(static_cast<double>(r.duration_ns) / 1e6, 3));
  row("rps", fixed(r.rps, 1));
  row("goodput (Gbit/s)", fixed(r.goodput * 8.0 / 1e9, 3));
  row("fct p50/p90/p99 (us)", fixed(r.fct_us.p50, 1) + " / " + fixed(r.fct_us.p90, 1) + " / " + fixed(r.fct_us.p99, 1));
  out << "size buckets\n";
  for (const SizeBucket& b : r.buckets) {
    std::snprintf(line, sizeof line, "  %-12s %8llu req %8llu done  fct p50 %10.1f p99 %10.1f us\n", b.label.c_str(),
                  static_cast<unsigned long long>(b.requests), static_cast<unsigned long long>(b.completed),
                  b.fct_us.p50, b.fct_us.p99);
    out << line;
  }
  out << "load balancer\n";
  row("ingress packets", num(r.lb_ingress_packets));
  row("worker packets c2s / s2c", num(r.worker_c2s_packets) + " / " + num(r.worker_s2c_packets));
  row("worker s2c data packets", num(r.worker_s2c_data_packets));
  row("engine matched packets", num(r.engine_matched_packets));
  row("inserted bytes (retransmitted)", num(r.inserted_bytes_sent) + " (" + num(r.inserted_bytes_retransmitted) + ")");
  row("syn cookies / entries", num(r.syn_cookies_issued) + " / " + num(r.entries_created));
  row("requests deferred by latch", num(r.requests_deferred));
  out << "offload\n";
  row("threshold (bytes)", num(r.offload_threshold));
  row("rule installs / deletes", num(r.rule_installs) + " / " + num(r.rule_deletes));
  row("delete batches", num(r.rule_delete_batches));
  row("install latency mean/max (us)", fixed(r.mean_install_latency_us, 2) + " / " + fixed(r.max_install_latency_us, 2));
  row("delete latency mean (us)", fixed(r.mean_delete_latency_us, 2));
  out << "table\n";
  row("size / capacity", num(r.table_size) + " / " + num(r.table_capacity));
  row("relocations / lookup retries", num(r.table_relocations) + " / " + num(r.table_lookup_retries));
  out << "endpoints\n";
  row("retransmitted segs client/server",
      num(r.client_retransmitted_segments) + " / " + num(r.server_retransmitted_segments));
  row("events", num(r.events));
  row("trace digest", hex64(r.trace_digest));
  row("metrics digest", hex64(digest(r)));
}

}  // namespace splicelb::bench
