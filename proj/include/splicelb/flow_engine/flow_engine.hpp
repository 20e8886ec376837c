// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <variant>
#include <vector>

#include "splicelb/flow_engine/latency_model.hpp"
#include "splicelb/packet/packet.hpp"
#include "splicelb/time.hpp"

namespace splicelb {

using RuleId = std::uint64_t;
using WorkerId = std::uint16_t;

enum class HeaderField { kSrcAddr, kDstAddr, kSrcPort, kDstPort, kSeq, kAck };

struct SetField {
  HeaderField field;
  std::uint32_t value;
};
// Only kSeq and kAck; wraps modulo 2^32.
struct AddToField {
  HeaderField field;
  std::uint32_t delta;
};
struct SteerToQueue {
  WorkerId worker;
};
struct Hairpin {};
struct Drop {};
struct Count {};

using Action = std::variant<SetField, AddToField, SteerToQueue, Hairpin, Drop, Count>;

enum class RuleState { kInstalling, kActive, kDeleting };

struct Rule {
  RuleId id = 0;
  FlowKey match;
  std::vector<Action> actions;
  std::optional<Duration> idle_timeout;
  std::uint64_t hit_count = 0;
  RuleState state = RuleState::kInstalling;
  Timestamp ready_at{};
  std::optional<Timestamp> removed_at;  // set once a delete is scheduled
  Timestamp last_hit{};
  bool aged_reported = false;
};

// What a caller asks the engine to install.
struct RuleSpec {
  FlowKey match;
  std::vector<Action> actions;
  std::optional<Duration> idle_timeout;
};

enum class UpdateMode { kBlocking, kNonBlocking };

class RuleConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RuleCapacityExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InsertOutcome {
  std::vector<RuleId> ids;
  Timestamp returns_at;   // when the caller regains control
  Timestamp completes_at;  // when the last rule in the batch becomes matchable
};

enum class Egress { kHairpin, kWorkerQueue };

struct Matched {
  Packet packet;
  Egress egress = Egress::kHairpin;
  WorkerId worker = 0;  // meaningful for kWorkerQueue
  RuleId rule = 0;
};
struct Missed {
  WorkerId worker = 0;
};
struct Dropped {
  RuleId rule = 0;
};
using ProcessResult = std::variant<Matched, Missed, Dropped>;

struct PortRange {
  Port first = 1024;
  Port last = 65535;
};

// Which port of an incoming packet selects its worker.
enum class SteeringField { kSrcPort, kDstPort };

struct SteeringRule {
  Addr dst_addr;
  SteeringField field;
  Port port;
  WorkerId worker;
};

// Stable shard of a port number among n workers.
WorkerId port_shard(Port port, std::size_t n_workers);

struct EngineConfig {
  std::size_t rule_capacity = 65536;
  Duration per_packet_service{0};
  LatencyModel latency = LatencyModel::calibrated();
};

struct EngineStats {
  std::uint64_t matched = 0;
  std::uint64_t missed = 0;
  std::uint64_t dropped = 0;
  std::uint64_t rules_inserted = 0;
  std::uint64_t rules_deleted = 0;
  std::vector<std::uint64_t> misses_per_worker;
};

// Single exact-match table, evaluated on one device timeline. Rule updates are
// serialized: a batch starts when the previous update finished and each rule
// in it costs the calibrated per-rule latency for that batch size.
//
// Packets carrying SYN, FIN or RST never match a rule, and neither do packets
// with SACK blocks when the rule rewrites the ACK number: the device cannot
// rewrite SACK option contents. Both fall through to port steering.
class FlowEngine {
 public:
  explicit FlowEngine(EngineConfig config = {});

  std::vector<SteeringRule> install_port_shard_rules(std::size_t n_workers, PortRange ports,
                                                     Addr client_facing, Addr server_facing);
  WorkerId steer(const Packet& packet) const;
  std::size_t worker_count() const { return n_workers_; }

  InsertOutcome insert_rules(std::span<const RuleSpec> batch, UpdateMode mode, Timestamp now);
  // Unknown ids are ignored. Returns when the whole batch is removed.
  Timestamp delete_rules(std::span<const RuleId> ids, Timestamp now);

  ProcessResult process(const Packet& packet, Timestamp now);
  std::vector<RuleId> poll_aged(Timestamp now);

  const Rule* rule(RuleId id) const;
  // The rule that would match `key` at `now`, if any.
  const Rule* matching_rule(const FlowKey& key, Timestamp now) const;
  std::size_t live_rules() const { return rules_.size(); }
  Timestamp device_free_at() const { return device_free_at_; }
  const EngineConfig& config() const { return config_; }
  const EngineStats& stats() const { return stats_; }

  void dump_stats(std::ostream& out) const;

 private:
  void retire(Timestamp now);
  Rule* find_matching(const FlowKey& key, Timestamp now);

  EngineConfig config_;
  std::size_t n_workers_ = 1;
  std::vector<std::array<WorkerId, 65536>> steering_;  // [client-facing src port, server-facing dst port]
  Addr client_facing_ = 0;
  Addr server_facing_ = 0;
  bool steering_installed_ = false;

  std::map<RuleId, Rule> rules_;
  std::unordered_map<FlowKey, std::vector<RuleId>, FlowKeyHash> by_match_;
  RuleId next_id_ = 1;
  Timestamp device_free_at_{};
  EngineStats stats_;
};

// Applies the rewriting part of an action list exactly as the device would.
Packet apply_actions(const Packet& packet, std::span<const Action> actions);

}  // namespace splicelb
