// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/flow_engine/flow_engine.hpp"

#include <algorithm>
#include <ostream>

namespace splicelb {
namespace {

constexpr std::size_t kClientFacing = 0;
constexpr std::size_t kServerFacing = 1;

const char* state_name(RuleState state) {
  switch (state) {
    case RuleState::kInstalling:
      return "installing";
    case RuleState::kActive:
      return "active";
    case RuleState::kDeleting:
      return "deleting";
  }
  return "?";
}

bool rewrites_ack(std::span<const Action> actions) {
  return std::any_of(actions.begin(), actions.end(), [](const Action& a) {
    const auto* add = std::get_if<AddToField>(&a);
    const auto* set = std::get_if<SetField>(&a);
    return (add && add->field == HeaderField::kAck) || (set && set->field == HeaderField::kAck);
  });
}

}  // namespace

WorkerId port_shard(Port port, std::size_t n_workers) {
  std::uint32_t x = port;
  x ^= x >> 7;
  x *= 0x2c1b3c6dU;
  x ^= x >> 12;
  x *= 0x297a2d39U;
  x ^= x >> 15;
  return static_cast<WorkerId>(x % n_workers);
}

Packet apply_actions(const Packet& packet, std::span<const Action> actions) {
  Packet out = packet;
  for (const Action& action : actions) {
    if (const auto* set = std::get_if<SetField>(&action)) {
      switch (set->field) {
        case HeaderField::kSrcAddr:
          out.key.src_addr = set->value;
          break;
        case HeaderField::kDstAddr:
          out.key.dst_addr = set->value;
          break;
        case HeaderField::kSrcPort:
          out.key.src_port = static_cast<Port>(set->value);
          break;
        case HeaderField::kDstPort:
          out.key.dst_port = static_cast<Port>(set->value);
          break;
        case HeaderField::kSeq:
          out.seq = set->value;
          break;
        case HeaderField::kAck:
          out.ack = set->value;
          break;
      }
    } else if (const auto* add = std::get_if<AddToField>(&action)) {
      if (add->field == HeaderField::kSeq) {
        out.seq = static_cast<Seq>(out.seq + add->delta);
      } else if (add->field == HeaderField::kAck) {
        out.ack = static_cast<Seq>(out.ack + add->delta);
      }
    }
  }
  return out;
}

FlowEngine::FlowEngine(EngineConfig config) : config_(std::move(config)) {
  steering_.resize(2);
  for (auto& table : steering_) table.fill(0);
  stats_.misses_per_worker.assign(1, 0);
}

std::vector<SteeringRule> FlowEngine::install_port_shard_rules(std::size_t n_workers, PortRange ports,
                                                               Addr client_facing, Addr server_facing) {
  if (n_workers == 0) throw std::invalid_argument("need at least one worker");
  n_workers_ = n_workers;
  client_facing_ = client_facing;
  server_facing_ = server_facing;
  steering_installed_ = true;
  stats_.misses_per_worker.assign(n_workers, 0);
  for (auto& table : steering_) table.fill(0);

  std::vector<SteeringRule> installed;
  installed.reserve(2 * (std::size_t{ports.last} - ports.first + 1));
  for (std::uint32_t p = ports.first; p <= ports.last; ++p) {
    WorkerId w = port_shard(static_cast<Port>(p), n_workers);
    steering_[kClientFacing][p] = w;
    steering_[kServerFacing][p] = w;
    installed.push_back(SteeringRule{client_facing, SteeringField::kSrcPort, static_cast<Port>(p), w});
    installed.push_back(SteeringRule{server_facing, SteeringField::kDstPort, static_cast<Port>(p), w});
  }
  return installed;
}

WorkerId FlowEngine::steer(const Packet& packet) const {
  if (packet.key.dst_addr == client_facing_) return steering_[kClientFacing][packet.key.src_port];
  if (packet.key.dst_addr == server_facing_) return steering_[kServerFacing][packet.key.dst_port];
  return 0;
}

InsertOutcome FlowEngine::insert_rules(std::span<const RuleSpec> batch, UpdateMode mode, Timestamp now) {
  if (batch.empty()) throw std::invalid_argument("empty rule batch");
  retire(now);
  if (rules_.size() + batch.size() > config_.rule_capacity) {
    throw RuleCapacityExceeded("flow engine rule capacity exceeded");
  }
  // A match may coexist only with a rule that is already being deleted.
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (auto it = by_match_.find(batch[i].match); it != by_match_.end()) {
      for (RuleId id : it->second) {
        if (rules_.at(id).state != RuleState::kDeleting) {
          throw RuleConflict("rule already installed for " + batch[i].match.to_string());
        }
      }
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (batch[j].match == batch[i].match) throw RuleConflict("duplicate match within batch");
    }
  }

  const Duration per_rule = config_.latency.insert_per_rule(batch.size());
  Timestamp start = std::max(now, device_free_at_);
  InsertOutcome outcome;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Rule rule;
    rule.id = next_id_++;
    rule.match = batch[i].match;
    rule.actions = batch[i].actions;
    rule.idle_timeout = batch[i].idle_timeout;
    rule.state = RuleState::kInstalling;
    rule.ready_at = start + per_rule * static_cast<std::int64_t>(i + 1);
    rule.last_hit = rule.ready_at;
    by_match_[rule.match].push_back(rule.id);
    outcome.ids.push_back(rule.id);
    rules_.emplace(rule.id, std::move(rule));
  }
  device_free_at_ = start + per_rule * static_cast<std::int64_t>(batch.size());
  outcome.completes_at = device_free_at_;
  outcome.returns_at = mode == UpdateMode::kBlocking ? device_free_at_ : now;
  stats_.rules_inserted += batch.size();
  return outcome;
}

Timestamp FlowEngine::delete_rules(std::span<const RuleId> ids, Timestamp now) {
  retire(now);
  std::vector<RuleId> live;
  for (RuleId id : ids) {
    auto it = rules_.find(id);
    if (it != rules_.end() && it->second.state != RuleState::kDeleting &&
        std::find(live.begin(), live.end(), id) == live.end()) {
      live.push_back(id);
    }
  }
  if (live.empty()) return now;
  const Duration per_rule = config_.latency.delete_per_rule(live.size());
  Timestamp start = std::max(now, device_free_at_);
  for (std::size_t i = 0; i < live.size(); ++i) {
    Rule& rule = rules_.at(live[i]);
    rule.state = RuleState::kDeleting;
    rule.removed_at = start + per_rule * static_cast<std::int64_t>(i + 1);
  }
  device_free_at_ = start + per_rule * static_cast<std::int64_t>(live.size());
  stats_.rules_deleted += live.size();
  return device_free_at_;
}

// Drops rules whose deletion completed by `now` and promotes rules that
// finished installing.
void FlowEngine::retire(Timestamp now) {
  for (auto it = rules_.begin(); it != rules_.end();) {
    Rule& rule = it->second;
    if (rule.state == RuleState::kInstalling && rule.ready_at <= now) rule.state = RuleState::kActive;
    if (rule.removed_at && *rule.removed_at <= now) {
      auto& ids = by_match_[rule.match];
      ids.erase(std::remove(ids.begin(), ids.end(), rule.id), ids.end());
      if (ids.empty()) by_match_.erase(rule.match);
      it = rules_.erase(it);
    } else {
      ++it;
    }
  }
}

Rule* FlowEngine::find_matching(const FlowKey& key, Timestamp now) {
  auto it = by_match_.find(key);
  if (it == by_match_.end()) return nullptr;
  for (RuleId id : it->second) {
    Rule& rule = rules_.at(id);
    if (rule.ready_at > now) continue;
    if (rule.removed_at && *rule.removed_at <= now) continue;
    if (rule.state == RuleState::kInstalling) rule.state = RuleState::kActive;
    return &rule;
  }
  return nullptr;
}

const Rule* FlowEngine::matching_rule(const FlowKey& key, Timestamp now) const {
  return const_cast<FlowEngine*>(this)->find_matching(key, now);
}

ProcessResult FlowEngine::process(const Packet& packet, Timestamp now) {
  Rule* rule = nullptr;
  if (!packet.has(kSyn) && !packet.has(kFin) && !packet.has(kRst)) {
    rule = find_matching(packet.key, now);
    if (rule && !packet.options.sack_blocks.empty() && rewrites_ack(rule->actions)) rule = nullptr;
  }
  if (rule == nullptr) {
    WorkerId w = steer(packet);
    ++stats_.missed;
    ++stats_.misses_per_worker[w];
    return Missed{w};
  }

  ++rule->hit_count;
  rule->last_hit = now;
  rule->aged_reported = false;

  std::optional<WorkerId> queue;
  bool hairpin = false;
  for (const Action& action : rule->actions) {
    if (std::holds_alternative<Drop>(action)) {
      ++stats_.dropped;
      return Dropped{rule->id};
    }
    if (const auto* steer_to = std::get_if<SteerToQueue>(&action)) queue = steer_to->worker;
    if (std::holds_alternative<Hairpin>(action)) hairpin = true;
  }
  Packet out = apply_actions(packet, rule->actions);
  ++stats_.matched;
  if (hairpin) return Matched{std::move(out), Egress::kHairpin, 0, rule->id};
  WorkerId w = queue ? *queue : steer(packet);
  return Matched{std::move(out), Egress::kWorkerQueue, w, rule->id};
}

std::vector<RuleId> FlowEngine::poll_aged(Timestamp now) {
  retire(now);
  std::vector<RuleId> aged;
  for (auto& [id, rule] : rules_) {
    if (rule.state != RuleState::kActive || !rule.idle_timeout || rule.aged_reported) continue;
    if (now - rule.last_hit >= *rule.idle_timeout) {
      rule.aged_reported = true;
      aged.push_back(id);
    }
  }
  return aged;
}

const Rule* FlowEngine::rule(RuleId id) const {
  auto it = rules_.find(id);
  return it == rules_.end() ? nullptr : &it->second;
}

void FlowEngine::dump_stats(std::ostream& out) const {
  out << "# flow-engine stats v1\n";
  out << "rule_id\tstate\thits\tmatch\n";
  for (const auto& [id, rule] : rules_) {
    out << id << '\t' << state_name(rule.state) << '\t' << rule.hit_count << '\t' << rule.match.to_string()
        << '\n';
  }
  out << "worker\tmisses\n";
  for (std::size_t w = 0; w < stats_.misses_per_worker.size(); ++w) {
    out << w << '\t' << stats_.misses_per_worker[w] << '\n';
  }
  out << "totals\tmatched=" << stats_.matched << "\tmissed=" << stats_.missed << "\tdropped=" << stats_.dropped
      << "\tinserted=" << stats_.rules_inserted << "\tdeleted=" << stats_.rules_deleted << '\n';
}

}  // namespace splicelb
