// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/splice/agent.hpp"

#include <algorithm>

#include "splicelb/splice/http.hpp"

namespace splicelb {
namespace {

// Appends data at sender offset `off` to `buf` if it continues the buffered
// bytes; duplicates are trimmed and data beyond a gap is dropped.
void append_contiguous(StreamBuffer& buf, StreamOffset off, std::string_view data, Timestamp now) {
  if (buf.empty()) {
    if (off > buf.start) return;
    if (buf.bytes.empty()) buf.first_arrival = now;
  }
  const StreamOffset end = off + data.size();
  if (off > buf.end() || end <= buf.end()) return;
  buf.bytes.append(data.substr(buf.end() - off));
}

void consume(StreamBuffer& buf, std::size_t n) {
  buf.bytes.erase(0, n);
  buf.start += n;
}

}  // namespace

SpliceAgent::SpliceAgent(AgentConfig config, RouteConfig routes, ConnTable& table)
    : config_(std::move(config)),
      routes_(std::move(routes)),
      table_(table),
      cookie_(config_.cookie_secret),
      selector_(routes_, config_.selector_seed) {
  routes_.validate();
}

bool SpliceAgent::from_client(const Packet& packet) const {
  return packet.key.dst_addr == config_.vip && packet.key.dst_port == config_.vip_port;
}

ConnEntry* SpliceAgent::find(EntryHandle handle) {
  auto it = entries_.find(handle.id);
  return it == entries_.end() ? nullptr : it->second.get();
}

const ConnEntry* SpliceAgent::find(EntryHandle handle) const {
  auto it = entries_.find(handle.id);
  return it == entries_.end() ? nullptr : it->second.get();
}

Packet SpliceAgent::make_packet(const FlowKey& key, Seq seq, Seq ack, std::uint8_t flags,
                                std::uint16_t window) const {
  Packet p;
  p.key = key;
  p.seq = seq;
  p.ack = ack;
  p.flags = flags;
  p.window = window;
  return p;
}

AgentOutput SpliceAgent::handle_packet(const Packet& packet, Timestamp now) {
  AgentOutput out;
  if (from_client(packet)) {
    if (packet.has(kSyn) && !packet.has(kAck)) {
      out.packets.push_back(on_client_syn(packet, now));
      return out;
    }
    auto handle = table_.lookup(packet.key, now);
    ConnEntry* entry = handle ? find(*handle) : nullptr;
    if (entry == nullptr) {
      if (packet.has(kRst) || packet.has(kSyn)) return out;
      if (!packet.payload.empty()) return on_client_data(packet, now);
      if (packet.has(kFin)) {
        out.packets.push_back(make_packet(packet.key.reverse(), packet.ack, 0, kRst, 0));
        ++stats_.resets_sent;
      }
      return out;
    }
    if (packet.has(kRst)) {
      if (entry->state != SpliceState::kFrontEstablished) {
        out.packets.push_back(make_packet(entry->server_key.reverse(),
                                          seq_add(entry->backend_base(),
                                                  static_cast<std::int64_t>(
                                                      entry->insertions.to_receiver(entry->forwarded_upto))),
                                          0, kRst, 0));
      }
      remove_entry(*entry, out);
      return out;
    }
    if (entry->state == SpliceState::kEstablished) {
      table_.lookup(entry->server_key, now);
      return on_client_segment(packet, *entry, now);
    }
    if (!packet.payload.empty()) {
      const StreamOffset off = seq_sub(packet.seq, entry->client_base());
      append_contiguous(entry->pending_request, off, packet.payload.view(), now);
      if (entry->state == SpliceState::kFrontEstablished) {
        try_route(*entry, now, out);
      } else {
        // The agent keeps no timers; a client retransmission while the backend
        // handshake is pending re-sends the SYN.
        Packet syn = make_packet(entry->server_key.reverse(), entry->isn_lb_back, 0, kSyn, config_.window);
        syn.options.mss = entry->mss;
        syn.options.sack_permitted = config_.sack;
        out.packets.push_back(syn);
      }
    }
    return out;
  }

  if (packet.key.dst_addr != config_.lb_addr) return out;
  auto handle = table_.lookup(packet.key, now);
  ConnEntry* entry = handle ? find(*handle) : nullptr;
  if (entry == nullptr) {
    ++stats_.unknown_flow_drops;
    return out;
  }
  if (packet.has(kRst)) {
    if (entry->state == SpliceState::kEstablished) {
      Packet rst = make_packet(entry->client_key.reverse(),
                               seq_add(packet.seq, static_cast<std::int64_t>(
                                                       seq_sub(entry->isn_lb_front, entry->isn_server))),
                               0, kRst, 0);
      out.packets.push_back(rst);
      ++stats_.resets_sent;
    }
    remove_entry(*entry, out);
    return out;
  }
  if (packet.has(kSyn) && packet.has(kAck)) return on_backend_synack(packet, *entry, now);
  if (entry->state != SpliceState::kEstablished) return out;
  table_.lookup(entry->client_key, now);
  if (!packet.payload.empty() || packet.has(kFin)) return on_server_data(packet, *entry, now);
  return on_server_ack(packet, *entry, now);
}

Packet SpliceAgent::on_client_syn(const Packet& syn, Timestamp now) {
  const std::uint16_t offered = syn.options.mss.value_or(536);
  const auto issued = cookie_.issue(syn.key, std::min(offered, config_.backend_mss), now);
  ++stats_.syn_cookies_issued;
  Packet reply = make_packet(syn.key.reverse(), issued.isn, seq_add(syn.seq, 1), kSyn | kAck, config_.window);
  reply.options.mss = issued.mss;
  reply.options.sack_permitted = config_.sack && syn.options.sack_permitted;
  return reply;
}

AgentOutput SpliceAgent::on_client_data(const Packet& packet, Timestamp now) {
  AgentOutput out;
  const Seq cookie = seq_sub(packet.ack, 1);
  auto mss = cookie_.validate(packet.key, cookie, now);
  if (!mss) {
    ++stats_.cookie_failures;
    out.packets.push_back(make_packet(packet.key.reverse(), packet.ack, 0, kRst, 0));
    ++stats_.resets_sent;
    return out;
  }
  // Only the start of a request tells us where the client's stream begins.
  if (!http::looks_like_request_start(packet.payload.view())) return out;

  auto entry = std::make_unique<ConnEntry>();
  entry->handle = EntryHandle{next_handle_++};
  entry->client_key = packet.key;
  entry->isn_client = seq_sub(packet.seq, 1);
  entry->isn_lb_front = cookie;
  entry->mss = *mss;
  entry->created_at = now;
  if (table_.insert(entry->client_key, entry->handle, now) == InsertResult::kTableFull) {
    out.packets.push_back(make_packet(packet.key.reverse(), packet.ack, 0, kRst, 0));
    ++stats_.resets_sent;
    return out;
  }
  ++stats_.entries_created;
  ConnEntry& e = *entry;
  entries_.emplace(e.handle.id, std::move(entry));
  append_contiguous(e.pending_request, 0, packet.payload.view(), now);
  try_route(e, now, out);
  return out;
}

void SpliceAgent::try_route(ConnEntry& entry, Timestamp now, AgentOutput& out) {
  const std::string_view buffered = entry.pending_request.bytes;
  auto head = http::parse_request_head(buffered);
  if (!head) {
    if (http::find_head_end(buffered) || buffered.size() > config_.request_buffer_cap ||
        !http::looks_like_request_start(buffered)) {
      reset_connection(entry, entry.front_base(), out);
    }
    return;
  }
  RouteMatch match = match_route(routes_, head->target);
  const Backend& backend = selector_.next(*match.pool);
  auto port = allocate_backend_port(entry.client_key.src_port, backend);
  if (!port) {
    reset_connection(entry, entry.front_base(), out);
    return;
  }
  entry.backend = backend;
  entry.server_key = FlowKey{backend.addr, config_.lb_addr, backend.port, *port, entry.client_key.proto};
  entry.isn_lb_back = entry.isn_client;
  if (table_.insert(entry.server_key, entry.handle, now) == InsertResult::kTableFull) {
    reset_connection(entry, entry.front_base(), out);
    return;
  }
  prepare_insertion(entry, 0, head->request_line_len, head->target);
  entry.state = SpliceState::kSynSent;

  Packet syn = make_packet(entry.server_key.reverse(), entry.isn_lb_back, 0, kSyn, config_.window);
  syn.options.mss = entry.mss;
  syn.options.sack_permitted = config_.sack;
  out.packets.push_back(syn);
}

void SpliceAgent::prepare_insertion(ConnEntry& entry, StreamOffset head_start, std::size_t request_line_len,
                                    const std::string& target) {
  RouteMatch match = match_route(routes_, target);
  std::string text = render_edits(*match.edits, entry.client_key.src_addr);
  if (text.empty()) return;
  std::size_t index = entry.insertions.add(head_start + request_line_len, static_cast<std::uint32_t>(text.size()));
  entry.held_buffers[index] = Payload(std::string_view(text));
}

std::optional<Port> SpliceAgent::allocate_backend_port(Port client_port, const Backend& backend) const {
  const std::uint32_t first = config_.backend_ports.first;
  const std::uint32_t span = std::uint32_t{config_.backend_ports.last} - first + 1;
  const WorkerId shard = port_shard(client_port, config_.n_workers);
  const std::uint32_t start = client_port >= first ? client_port - first : 0;
  for (std::uint32_t i = 0; i < span; ++i) {
    const Port p = static_cast<Port>(first + (start + i) % span);
    if (port_shard(p, config_.n_workers) != shard) continue;
    FlowKey key{backend.addr, config_.lb_addr, backend.port, p, kProtoTcp};
    if (!table_.bucket_of(key)) return p;
  }
  return std::nullopt;
}

AgentOutput SpliceAgent::on_backend_synack(const Packet& packet, ConnEntry& entry, Timestamp now) {
  AgentOutput out;
  if (entry.state == SpliceState::kEstablished) {
    if (packet.seq == entry.isn_server) {
      out.packets.push_back(make_packet(entry.server_key.reverse(), entry.backend_base(), entry.server_base(),
                                        kAck, config_.window));
    }
    return out;
  }
  if (entry.state != SpliceState::kSynSent || packet.ack != entry.backend_base()) return out;
  entry.isn_server = packet.seq;
  entry.backend_mss = packet.options.mss.value_or(536);
  entry.state = SpliceState::kEstablished;
  entry.acked_to_server = entry.server_base();
  out.packets.push_back(
      make_packet(entry.server_key.reverse(), entry.backend_base(), entry.server_base(), kAck, config_.window));

  entry.next_request = std::move(entry.pending_request);
  entry.pending_request = StreamBuffer{};
  drain_requests(entry, now, entry.server_base(), config_.window, out);
  return out;
}

void SpliceAgent::drain_requests(ConnEntry& entry, Timestamp now, Seq ack_to_server, std::uint16_t window,
                                 AgentOutput& out) {
  (void)now;
  StreamBuffer& buf = entry.next_request;
  while (!buf.empty()) {
    if (entry.body_remaining > 0) {
      const std::size_t n = static_cast<std::size_t>(std::min<StreamOffset>(entry.body_remaining, buf.bytes.size()));
      emit_client_range(entry, buf.start, Payload(std::string_view(buf.bytes).substr(0, n)), ack_to_server, window,
                        out);
      entry.forwarded_upto = buf.start + n;
      entry.body_remaining -= n;
      consume(buf, n);
      continue;
    }
    auto head = http::parse_request_head(buf.bytes);
    if (!head) {
      if (http::find_head_end(buf.bytes) || buf.bytes.size() > config_.request_buffer_cap) {
        reset_connection(entry, seq_add(entry.front_base(), static_cast<std::int64_t>(
                                                               entry.resp_tracker.highest_client_ack)),
                         out);
      }
      return;
    }
    if (!entry.offload.latch_clean) {
      if (!entry.request_deferred) ++stats_.requests_deferred;
      entry.request_deferred = true;
      return;
    }
    entry.request_deferred = false;
    const StreamOffset head_start = buf.start;
    const auto points = entry.insertions.points();
    const bool prepared = std::any_of(points.begin(), points.end(), [&](const InsertionPoint& p) {
      return p.sender_off >= head_start && p.sender_off < head_start + head->head_len;
    });
    if (!prepared) prepare_insertion(entry, head_start, head->request_line_len, head->target);
    emit_client_range(entry, head_start, Payload(std::string_view(buf.bytes).substr(0, head->head_len)),
                      ack_to_server, window, out);
    entry.forwarded_upto = head_start + head->head_len;
    entry.body_remaining = head->content_length;
    consume(buf, head->head_len);
    ++entry.requests_seen;
    ++stats_.requests_routed;
  }
}

void SpliceAgent::emit_client_range(ConnEntry& entry, StreamOffset off, const Payload& data, Seq ack_to_server,
                                    std::uint16_t window, AgentOutput& out) {
  const StreamOffset end = off + data.size();
  const std::size_t seg = std::max<std::size_t>(1, std::min(entry.mss, entry.backend_mss));
  const FlowKey key = entry.server_key.reverse();
  auto send_fragment = [&](StreamOffset from, StreamOffset to) {
    for (StreamOffset a = from; a < to; a += seg) {
      const StreamOffset b = std::min<StreamOffset>(to, a + seg);
      Packet p = make_packet(
          key, seq_add(entry.backend_base(), static_cast<std::int64_t>(entry.insertions.to_receiver(a))),
          ack_to_server, kAck, window);
      if (b == end) p.flags |= kPsh;
      p.payload = data.slice(static_cast<std::size_t>(a - off), static_cast<std::size_t>(b - a));
      stats_.relayed_client_bytes += b - a;
      out.packets.push_back(std::move(p));
    }
  };
  StreamOffset pos = off;
  const auto points = entry.insertions.points();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const InsertionPoint& pt = points[i];
    if (pt.sender_off < off || pt.sender_off > end) continue;
    send_fragment(pos, pt.sender_off);
    pos = pt.sender_off;
    if (!pt.acked && entry.held_buffers.contains(i)) {
      emit_insertion(entry, i, ack_to_server, window, out, i < entry.insertions_sent);
    }
  }
  send_fragment(pos, end);
  entry.acked_to_server = ack_to_server;
}

void SpliceAgent::emit_insertion(ConnEntry& entry, std::size_t index, Seq ack_to_server, std::uint16_t window,
                                 AgentOutput& out, bool retransmission) {
  auto it = entry.held_buffers.find(index);
  if (it == entry.held_buffers.end()) return;
  const Payload& content = it->second;
  const InsertionPoint& pt = entry.insertions.points()[index];
  const std::size_t seg = std::max<std::size_t>(1, std::min(entry.mss, entry.backend_mss));
  for (std::size_t a = 0; a < content.size(); a += seg) {
    const std::size_t n = std::min(seg, content.size() - a);
    Packet p = make_packet(entry.server_key.reverse(),
                           seq_add(entry.backend_base(), static_cast<std::int64_t>(pt.receiver_start() + a)),
                           ack_to_server, kAck, window);
    p.payload = content.slice(a, n);
    out.packets.push_back(std::move(p));
  }
  stats_.inserted_bytes_sent += content.size();
  if (retransmission) {
    stats_.inserted_bytes_retransmitted += content.size();
    ++stats_.insertion_retransmits;
  }
  entry.insertions_sent = std::max(entry.insertions_sent, index + 1);
}

Seq SpliceAgent::map_seq_c2s(const ConnEntry& entry, Seq seq_in) const {
  const StreamOffset off = seq_sub(seq_in, entry.client_base());
  return seq_add(entry.backend_base(), static_cast<std::int64_t>(entry.insertions.to_receiver(off)));
}

Seq SpliceAgent::map_ack_c2s(const ConnEntry& entry, Seq ack_in) const {
  return seq_add(ack_in, static_cast<std::int64_t>(seq_sub(entry.server_base(), entry.front_base())));
}

void SpliceAgent::release_acked(ConnEntry& entry, StreamOffset receiver_ack) {
  auto points = entry.insertions.mutable_points();
  for (std::size_t i = 0; i < points.size(); ++i) {
    InsertionPoint& p = points[i];
    if (p.acked || p.receiver_end() > receiver_ack) continue;
    p.acked = true;
    entry.held_buffers.erase(i);
  }
}

MappedAck SpliceAgent::map_ack_s2c(ConnEntry& entry, Seq ack_in) {
  const StreamOffset r = seq_sub(ack_in, entry.backend_base());
  release_acked(entry, r);
  const AckClass cls = entry.insertions.classify(r);
  auto points = entry.insertions.mutable_points();
  // Only consecutive ACKs at the same region start count as duplicates.
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (cls.region != AckRegion::kAtStart || cls.point != i) points[i].dup_ack_count = 0;
  }
  switch (cls.region) {
    case AckRegion::kOutside:
      return MappedAck{MappedAckKind::kForward,
                       seq_add(entry.client_base(), static_cast<std::int64_t>(cls.sender_off)), 0};
    case AckRegion::kAtStart: {
      InsertionPoint& p = points[cls.point];
      if (++p.dup_ack_count >= config_.dup_ack_threshold) {
        p.dup_ack_count = 0;
        return MappedAck{MappedAckKind::kRetransmitInserted, 0, cls.point};
      }
      return MappedAck{MappedAckKind::kSuppress, 0, cls.point};
    }
    case AckRegion::kInside:
    case AckRegion::kAtEnd:
      return MappedAck{MappedAckKind::kSuppress, 0, cls.point};
  }
  return MappedAck{};
}

std::vector<SackBlock> SpliceAgent::map_server_sack(const ConnEntry& entry,
                                                    const std::vector<SackBlock>& blocks) const {
  std::vector<SackBlock> mapped;
  for (const SackBlock& b : blocks) {
    auto range = entry.insertions.to_sender_range(seq_sub(b.left, entry.backend_base()),
                                                  seq_sub(b.right, entry.backend_base()));
    if (!range) continue;
    mapped.push_back(SackBlock{seq_add(entry.client_base(), static_cast<std::int64_t>(range->first)),
                               seq_add(entry.client_base(), static_cast<std::int64_t>(range->second))});
  }
  return mapped;
}

Packet SpliceAgent::rewrite_s2c(const ConnEntry& entry, const Packet& packet) const {
  Packet out = packet;
  out.key = entry.client_key.reverse();
  out.seq = seq_add(packet.seq, static_cast<std::int64_t>(seq_sub(entry.isn_lb_front, entry.isn_server)));
  if (packet.has(kAck)) {
    const StreamOffset r = seq_sub(packet.ack, entry.backend_base());
    out.ack = seq_add(entry.client_base(), static_cast<std::int64_t>(entry.insertions.sender_prefix(r)));
  }
  out.options.mss.reset();
  out.options.sack_permitted = false;
  out.options.sack_blocks = map_server_sack(entry, packet.options.sack_blocks);
  return out;
}

AgentOutput SpliceAgent::on_server_data(const Packet& packet, ConnEntry& entry, Timestamp now) {
  (void)now;
  AgentOutput out;
  out.packets.push_back(rewrite_s2c(entry, packet));
  if (packet.has(kAck)) {
    const StreamOffset r = seq_sub(packet.ack, entry.backend_base());
    release_acked(entry, r);
    if (entry.client_fin_off && r >= entry.insertions.to_receiver(*entry.client_fin_off) + 1) {
      entry.client_fin_acked = true;
    }
  }

  const StreamOffset o = seq_sub(packet.seq, entry.server_base());
  const StreamOffset end = o + packet.payload.size();
  ResponseTracker& tracker = entry.resp_tracker;
  while (!tracker.disarmed && tracker.next_start >= o && tracker.next_start < end) {
    auto head = http::parse_response_head(packet.payload.view().substr(tracker.next_start - o));
    if (!head || !head->content_length) {
      tracker.disarmed = true;
      break;
    }
    ResponseSpan span{tracker.next_start, tracker.next_start + head->head_len + *head->content_length, true};
    tracker.next_start = span.end;
    tracker.open.push_back(span);
    out.signals.push_back(AgentSignal{SignalKind::kResponseStarted, entry.handle, *head->content_length});
  }
  if (packet.has(kFin) && !entry.server_fin_off) entry.server_fin_off = end;
  maybe_finish(entry, out);
  return out;
}

AgentOutput SpliceAgent::on_server_ack(const Packet& packet, ConnEntry& entry, Timestamp now) {
  (void)now;
  AgentOutput out;
  const MappedAck mapped = map_ack_s2c(entry, packet.ack);
  const StreamOffset r = seq_sub(packet.ack, entry.backend_base());
  if (entry.client_fin_off && r >= entry.insertions.to_receiver(*entry.client_fin_off) + 1) {
    entry.client_fin_acked = true;
  }
  switch (mapped.kind) {
    case MappedAckKind::kForward: {
      Packet ack = make_packet(
          entry.client_key.reverse(),
          seq_add(packet.seq, static_cast<std::int64_t>(seq_sub(entry.isn_lb_front, entry.isn_server))),
          mapped.ack, packet.flags, packet.window);
      ack.options.sack_blocks = map_server_sack(entry, packet.options.sack_blocks);
      out.packets.push_back(std::move(ack));
      break;
    }
    case MappedAckKind::kSuppress:
      ++stats_.acks_suppressed;
      break;
    case MappedAckKind::kRetransmitInserted:
      ++stats_.acks_suppressed;
      emit_insertion(entry, mapped.point, entry.acked_to_server, config_.window, out, true);
      break;
  }
  maybe_finish(entry, out);
  return out;
}

void SpliceAgent::track_client_ack(ConnEntry& entry, Seq ack, AgentOutput& out) {
  if (seq_lt(ack, entry.front_base())) return;
  const StreamOffset a = seq_sub(ack, entry.front_base());
  ResponseTracker& tracker = entry.resp_tracker;
  tracker.highest_client_ack = std::max(tracker.highest_client_ack, a);
  while (!tracker.open.empty() && tracker.open.front().end <= tracker.highest_client_ack) {
    tracker.open.pop_front();
    out.signals.push_back(AgentSignal{SignalKind::kResponseComplete, entry.handle, 0});
  }
  if (entry.server_fin_off && a >= *entry.server_fin_off + 1) entry.server_fin_acked = true;
}

AgentOutput SpliceAgent::on_client_segment(const Packet& packet, ConnEntry& entry, Timestamp now) {
  AgentOutput out;
  const Seq ack = packet.has(kAck) ? map_ack_c2s(entry, packet.ack) : entry.acked_to_server;
  if (packet.has(kAck)) track_client_ack(entry, packet.ack, out);

  std::vector<SackBlock> sack;
  for (const SackBlock& b : packet.options.sack_blocks) {
    sack.push_back(SackBlock{map_ack_c2s(entry, b.left), map_ack_c2s(entry, b.right)});
  }

  const EntryHandle handle = entry.handle;
  const std::size_t first_emitted = out.packets.size();
  const Seq previous_ack = entry.acked_to_server;
  const StreamOffset o = seq_sub(packet.seq, entry.client_base());
  const StreamOffset n = packet.payload.size();
  if (n > 0) {
    // Bytes already forwarded once are relayed as the client retransmits them.
    const StreamOffset old_end = std::min(o + n, entry.forwarded_upto);
    if (o < old_end) {
      emit_client_range(entry, o, packet.payload.slice(0, static_cast<std::size_t>(old_end - o)), ack,
                        packet.window, out);
    }
    if (o + n > entry.forwarded_upto) {
      StreamBuffer& buf = entry.next_request;
      if (buf.empty()) buf.start = entry.forwarded_upto;
      const StreamOffset from = std::max(o, entry.forwarded_upto);
      append_contiguous(buf, from, packet.payload.view().substr(static_cast<std::size_t>(from - o)), now);
      drain_requests(entry, now, ack, packet.window, out);
      if (find(handle) == nullptr) return out;
    }
  }

  if (packet.has(kFin)) {
    const StreamOffset fin_off = o + n;
    if (fin_off == entry.forwarded_upto && entry.next_request.empty()) {
      entry.client_fin_off = fin_off;
      out.packets.push_back(make_packet(entry.server_key.reverse(), map_seq_c2s(entry, packet.seq + n), ack,
                                        kFin | kAck, packet.window));
      entry.acked_to_server = ack;
    }
  } else if (n == 0) {
    Packet pure = make_packet(
        entry.server_key.reverse(),
        seq_add(entry.backend_base(),
                static_cast<std::int64_t>(entry.insertions.to_receiver(std::min(o, entry.forwarded_upto)))),
        ack, kAck, packet.window);
    out.packets.push_back(std::move(pure));
    entry.acked_to_server = ack;
  } else if (out.packets.size() == first_emitted && seq_gt(ack, previous_ack)) {
    // Data was only buffered; the ACK it carried must still reach the backend.
    Packet pure = make_packet(
        entry.server_key.reverse(),
        seq_add(entry.backend_base(), static_cast<std::int64_t>(entry.insertions.to_receiver(entry.forwarded_upto))),
        ack, kAck, packet.window);
    out.packets.push_back(std::move(pure));
    entry.acked_to_server = ack;
  }
  if (!sack.empty()) {
    for (std::size_t i = first_emitted; i < out.packets.size(); ++i) {
      if (out.packets[i].key == entry.server_key.reverse()) {
        out.packets[i].options.sack_blocks = sack;
        break;
      }
    }
  }
  maybe_finish(entry, out);
  return out;
}

AgentOutput SpliceAgent::resume(EntryHandle handle, Timestamp now) {
  AgentOutput out;
  ConnEntry* entry = find(handle);
  if (entry == nullptr || entry->state != SpliceState::kEstablished || !entry->request_deferred) return out;
  drain_requests(*entry, now, entry->acked_to_server, config_.window, out);
  return out;
}

void SpliceAgent::reset_connection(ConnEntry& entry, Seq client_seq, AgentOutput& out) {
  out.packets.push_back(make_packet(entry.client_key.reverse(), client_seq, 0, kRst, 0));
  ++stats_.resets_sent;
  if (entry.state != SpliceState::kFrontEstablished) {
    out.packets.push_back(make_packet(entry.server_key.reverse(), map_seq_c2s(entry, entry.client_base() +
                                                                                          static_cast<Seq>(
                                                                                              entry.forwarded_upto)),
                                      0, kRst, 0));
    ++stats_.resets_sent;
  }
  remove_entry(entry, out);
}

void SpliceAgent::maybe_finish(ConnEntry& entry, AgentOutput& out) {
  if (entry.client_fin_off && entry.server_fin_off && entry.client_fin_acked && entry.server_fin_acked) {
    remove_entry(entry, out);
  }
}

void SpliceAgent::remove_entry(ConnEntry& entry, AgentOutput& out) {
  const EntryHandle handle = entry.handle;
  table_.remove(entry.client_key);
  if (entry.state != SpliceState::kFrontEstablished) table_.remove(entry.server_key);
  out.signals.push_back(AgentSignal{SignalKind::kConnectionClosed, handle, 0});
  ++stats_.entries_removed;
  entries_.erase(handle.id);
}

AgentOutput SpliceAgent::sweep(Timestamp now) {
  AgentOutput out;
  for (const auto& [key, handle] : table_.sweep_expired(now)) {
    ConnEntry* entry = find(handle);
    if (entry == nullptr) continue;
    ++stats_.entries_swept;
    remove_entry(*entry, out);
  }
  return out;
}

}  // namespace splicelb
