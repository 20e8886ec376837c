// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/offload/offload.hpp"

#include <algorithm>
#include <cmath>

namespace splicelb {

double rule_cost_us(const LatencyModel& latency, const OffloadParams& params) {
  const std::size_t batch = std::max<std::size_t>(1, params.delete_batch_max);
  return latency.insert_us(batch) + latency.delete_us(batch);
}

std::uint64_t formula_threshold(const LatencyModel& latency, const OffloadParams& params) {
  const double bytes = rule_cost_us(latency, params) / params.per_packet_us * params.mss;
  return static_cast<std::uint64_t>(std::ceil(bytes));
}

std::uint64_t effective_threshold(const LatencyModel& latency, const OffloadParams& params) {
  const std::uint64_t formula = formula_threshold(latency, params);
  return params.threshold_override ? std::max(*params.threshold_override, formula) : formula;
}

bool should_offload(std::optional<std::uint64_t> response_length, std::uint64_t threshold) {
  return response_length.has_value() && *response_length >= threshold;
}

RuleSpec make_offload_rule(const ConnEntry& entry, const AgentConfig& config,
                           std::optional<Duration> idle_timeout) {
  RuleSpec spec;
  spec.match = entry.server_key;
  const Seq seq_delta = seq_sub(entry.isn_lb_front, entry.isn_server);
  const Seq ack_delta =
      static_cast<Seq>(entry.isn_client - entry.isn_lb_back - static_cast<Seq>(entry.insertions.total_inserted()));
  spec.actions = {
      SetField{HeaderField::kSrcAddr, config.vip},
      SetField{HeaderField::kSrcPort, config.vip_port},
      SetField{HeaderField::kDstAddr, entry.client_key.src_addr},
      SetField{HeaderField::kDstPort, entry.client_key.src_port},
      AddToField{HeaderField::kSeq, seq_delta},
      AddToField{HeaderField::kAck, ack_delta},
      Hairpin{},
  };
  spec.idle_timeout = idle_timeout;
  return spec;
}

OffloadManager::OffloadManager(OffloadParams params, FlowEngine& engine, SpliceAgent& agent)
    : params_(std::move(params)),
      engine_(engine),
      agent_(agent),
      threshold_(effective_threshold(engine.config().latency, params_)) {}

Timestamp OffloadManager::on_signal(const AgentSignal& signal, Timestamp now) {
  Timestamp busy_until = now;
  switch (signal.kind) {
    case SignalKind::kResponseStarted: {
      if (!params_.enabled) break;
      if (!params_.force && !should_offload(signal.response_length, threshold_)) break;
      ConnEntry* entry = agent_.find(signal.handle);
      if (entry == nullptr || entry->state != SpliceState::kEstablished) break;
      auto it = tracked_.find(signal.handle.id);
      if (it != tracked_.end() && it->second.phase != RulePhase::kNone) break;  // already offloaded
      install(*entry, signal.response_length, busy_until, now);
      break;
    }
    case SignalKind::kResponseComplete:
    case SignalKind::kConnectionClosed:
      enqueue_delete(signal.handle, now);
      if (signal.kind == SignalKind::kConnectionClosed) {
        auto it = tracked_.find(signal.handle.id);
        if (it != tracked_.end() && it->second.phase == RulePhase::kNone) tracked_.erase(it);
      }
      break;
  }
  return busy_until;
}

void OffloadManager::install(ConnEntry& entry, std::uint64_t response_length, Timestamp& busy_until,
                             Timestamp now) {
  (void)response_length;
  RuleSpec spec = make_offload_rule(entry, agent_.config(), params_.rule_idle_timeout);
  InsertOutcome outcome;
  try {
    outcome = engine_.insert_rules(std::span<const RuleSpec>(&spec, 1), params_.insert_mode, now);
  } catch (const RuleConflict&) {
    ++stats_.install_failures;
    events_.push_back(OffloadEvent{now, OffloadEventKind::kInstallFailed, entry.handle, 0, 1});
    return;
  } catch (const RuleCapacityExceeded&) {
    ++stats_.install_failures;
    events_.push_back(OffloadEvent{now, OffloadEventKind::kInstallFailed, entry.handle, 0, 1});
    return;
  }
  const RuleId id = outcome.ids.front();
  tracked_[entry.handle.id] = Tracked{id, RulePhase::kInstalling};
  entry.offload.rule_id = id;
  entry.offload.phase = RulePhase::kInstalling;
  entry.offload.ready_at = outcome.completes_at;
  entry.offload.latch_clean = false;
  ++stats_.installs;
  const Duration latency = outcome.completes_at - now;
  stats_.install_latency_total += latency;
  stats_.max_install_latency = std::max(stats_.max_install_latency, latency);
  busy_until = outcome.returns_at;
  events_.push_back(OffloadEvent{now, OffloadEventKind::kInstallRequested, entry.handle, id, 1});
}

void OffloadManager::enqueue_delete(EntryHandle handle, Timestamp now) {
  auto it = tracked_.find(handle.id);
  if (it == tracked_.end()) return;
  Tracked& t = it->second;
  if (t.phase != RulePhase::kInstalling && t.phase != RulePhase::kActive) return;
  t.phase = RulePhase::kPendingDelete;
  pending_.push_back(Queued{handle, t.rule, now});
  sync_entry(handle);
  events_.push_back(OffloadEvent{now, OffloadEventKind::kDeleteEnqueued, handle, t.rule, 0});
  if (pending_.size() >= params_.delete_batch_max) flush(now);
}

void OffloadManager::flush(Timestamp now) {
  while (!pending_.empty()) {
    const std::size_t n = std::min(pending_.size(), std::max<std::size_t>(1, params_.delete_batch_max));
    InFlightDelete batch;
    std::vector<RuleId> ids;
    for (std::size_t i = 0; i < n; ++i) {
      batch.items.push_back(pending_.front());
      ids.push_back(pending_.front().rule);
      pending_.pop_front();
    }
    batch.done = engine_.delete_rules(ids, now);
    for (const Queued& q : batch.items) {
      tracked_[q.handle.id].phase = RulePhase::kDeleting;
      sync_entry(q.handle);
      stats_.delete_latency_total += batch.done - q.enqueued;
    }
    stats_.deletes += n;
    ++stats_.delete_batches;
    events_.push_back(OffloadEvent{now, OffloadEventKind::kDeleteFlushed, batch.items.front().handle, ids.front(), n});
    in_flight_.push_back(std::move(batch));
  }
}

void OffloadManager::sync_entry(EntryHandle handle) {
  ConnEntry* entry = agent_.find(handle);
  auto it = tracked_.find(handle.id);
  if (entry == nullptr || it == tracked_.end()) return;
  entry->offload.phase = it->second.phase;
}

AgentOutput OffloadManager::poll(Timestamp now) {
  AgentOutput out;
  for (RuleId aged : engine_.poll_aged(now)) {
    for (auto& [handle_id, t] : tracked_) {
      if (t.rule == aged && (t.phase == RulePhase::kInstalling || t.phase == RulePhase::kActive)) {
        ++stats_.aged_rules;
        enqueue_delete(EntryHandle{handle_id}, now);
        break;
      }
    }
  }
  if (!pending_.empty() && now - pending_.front().enqueued >= params_.delete_flush_timeout) flush(now);

  // Batches complete in order: the device timeline is serial.
  while (!in_flight_.empty() && in_flight_.front().done <= now) {
    InFlightDelete batch = std::move(in_flight_.front());
    in_flight_.pop_front();
    for (const Queued& q : batch.items) {
      tracked_.erase(q.handle.id);
      events_.push_back(OffloadEvent{batch.done, OffloadEventKind::kLatchClean, q.handle, q.rule, 0});
      ConnEntry* entry = agent_.find(q.handle);
      if (entry == nullptr) continue;
      entry->offload = OffloadState{};
      AgentOutput resumed = agent_.resume(q.handle, now);
      out.packets.insert(out.packets.end(), resumed.packets.begin(), resumed.packets.end());
      out.signals.insert(out.signals.end(), resumed.signals.begin(), resumed.signals.end());
    }
  }
  // Installing rules become active once matchable.
  for (auto& [handle_id, t] : tracked_) {
    if (t.phase != RulePhase::kInstalling) continue;
    const Rule* rule = engine_.rule(t.rule);
    if (rule != nullptr && rule->ready_at <= now) {
      t.phase = RulePhase::kActive;
      sync_entry(EntryHandle{handle_id});
    }
  }
  return out;
}

std::optional<Timestamp> OffloadManager::next_deadline() const {
  std::optional<Timestamp> next;
  auto consider = [&](Timestamp t) {
    if (!next || t < *next) next = t;
  };
  if (!pending_.empty()) consider(pending_.front().enqueued + params_.delete_flush_timeout);
  if (!in_flight_.empty()) consider(in_flight_.front().done);
  return next;
}

}  // namespace splicelb
