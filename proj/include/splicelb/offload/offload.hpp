// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "splicelb/flow_engine/flow_engine.hpp"
#include "splicelb/splice/agent.hpp"
#include "splicelb/time.hpp"

namespace splicelb {

struct OffloadParams {
  std::optional<std::uint64_t> threshold_override = std::uint64_t{1} << 20;
  std::uint32_t mss = 1460;
  double per_packet_us = 1.0 / 3.0;  // worker cost T at 3.0 Mpps
  std::size_t delete_batch_max = 16;
  Duration delete_flush_timeout = std::chrono::microseconds(100);
  UpdateMode insert_mode = UpdateMode::kNonBlocking;
  // Rules that see no traffic for this long are reclaimed by the deleter.
  std::optional<Duration> rule_idle_timeout = std::chrono::seconds(5);
  bool enabled = true;
  // Offload every response with a known length, regardless of size.
  bool force = false;
};

// P: per-rule insert plus per-rule delete latency at the deletion batch size.
double rule_cost_us(const LatencyModel& latency, const OffloadParams& params);
// (P / T) * MSS, the response size at which offloading starts paying off.
std::uint64_t formula_threshold(const LatencyModel& latency, const OffloadParams& params);
std::uint64_t effective_threshold(const LatencyModel& latency, const OffloadParams& params);
bool should_offload(std::optional<std::uint64_t> response_length, std::uint64_t threshold);

// The rule that makes the engine do exactly what the worker does to
// server-to-client packets of this connection.
RuleSpec make_offload_rule(const ConnEntry& entry, const AgentConfig& config,
                           std::optional<Duration> idle_timeout);

enum class OffloadEventKind { kInstallRequested, kInstallFailed, kDeleteEnqueued, kDeleteFlushed, kLatchClean };

struct OffloadEvent {
  Timestamp at;
  OffloadEventKind kind;
  EntryHandle handle;
  RuleId rule = 0;
  std::size_t batch = 0;
};

struct OffloadStats {
  std::uint64_t installs = 0;
  std::uint64_t install_failures = 0;
  std::uint64_t deletes = 0;
  std::uint64_t delete_batches = 0;
  std::uint64_t aged_rules = 0;
  Duration install_latency_total{0};  // request to matchable
  Duration delete_latency_total{0};   // enqueue to removed
  Duration max_install_latency{0};
};

// Decides which responses go to the flow engine, installs the rules and runs
// the deleter. The next request of a connection is held back (deferred in the
// agent) until that connection's previous rule is gone.
class OffloadManager {
 public:
  OffloadManager(OffloadParams params, FlowEngine& engine, SpliceAgent& agent);

  // Applies one agent signal. Returns when the calling worker is free again:
  // `now` unless a blocking insert was issued.
  Timestamp on_signal(const AgentSignal& signal, Timestamp now);

  // Runs due deleter work and completes deletions. Packets released by
  // resumed requests are returned for transmission.
  AgentOutput poll(Timestamp now);

  // Earliest time poll() has something to do, if anything is pending.
  std::optional<Timestamp> next_deadline() const;

  std::uint64_t threshold() const { return threshold_; }
  const OffloadParams& params() const { return params_; }
  const OffloadStats& stats() const { return stats_; }
  const std::vector<OffloadEvent>& events() const { return events_; }

 private:
  struct Tracked {
    RuleId rule = 0;
    RulePhase phase = RulePhase::kNone;
  };
  struct Queued {
    EntryHandle handle;
    RuleId rule;
    Timestamp enqueued;
  };
  struct InFlightDelete {
    Timestamp done;
    std::vector<Queued> items;
  };

  void install(ConnEntry& entry, std::uint64_t response_length, Timestamp& busy_until, Timestamp now);
  void enqueue_delete(EntryHandle handle, Timestamp now);
  void flush(Timestamp now);
  void sync_entry(EntryHandle handle);

  OffloadParams params_;
  FlowEngine& engine_;
  SpliceAgent& agent_;
  std::uint64_t threshold_;
  std::map<std::uint64_t, Tracked> tracked_;  // by entry handle
  std::deque<Queued> pending_;
  std::deque<InFlightDelete> in_flight_;
  OffloadStats stats_;
  std::vector<OffloadEvent> events_;
};

}  // namespace splicelb
