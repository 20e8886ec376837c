// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "splicelb/conn_table/conn_table.hpp"
#include "splicelb/flow_engine/flow_engine.hpp"
#include "splicelb/packet/packet.hpp"
#include "splicelb/splice/conn_entry.hpp"
#include "splicelb/splice/routes.hpp"
#include "splicelb/splice/syn_cookie.hpp"
#include "splicelb/time.hpp"

namespace splicelb {

struct AgentConfig {
  Addr vip = make_addr(10, 0, 0, 100);
  Port vip_port = 80;
  Addr lb_addr = make_addr(10, 0, 1, 1);  // source address toward backends
  std::size_t n_workers = 1;
  PortRange backend_ports;
  std::uint64_t cookie_secret = 0x5eed5eed5eedULL;
  std::uint16_t backend_mss = 1460;
  bool sack = true;
  std::uint16_t window = 65535;
  std::size_t request_buffer_cap = 16 * 1024;
  std::uint8_t dup_ack_threshold = 3;
  std::uint64_t selector_seed = 1;
};

enum class SignalKind {
  kResponseStarted,   // first packet of a response with known length passed the worker
  kResponseComplete,  // client acknowledged the whole response
  kConnectionClosed,  // entry removed; any rule for it must go
};

struct AgentSignal {
  SignalKind kind;
  EntryHandle handle;
  std::uint64_t response_length = 0;  // body bytes, for kResponseStarted
};

struct AgentOutput {
  std::vector<Packet> packets;
  std::vector<AgentSignal> signals;
};

enum class MappedAckKind { kForward, kSuppress, kRetransmitInserted };

struct MappedAck {
  MappedAckKind kind = MappedAckKind::kForward;
  Seq ack = 0;            // client-space ACK for kForward
  std::size_t point = 0;  // insertion index for kRetransmitInserted

  friend bool operator==(const MappedAck&, const MappedAck&) = default;
};

struct AgentStats {
  std::uint64_t syn_cookies_issued = 0;
  std::uint64_t cookie_failures = 0;
  std::uint64_t entries_created = 0;
  std::uint64_t entries_removed = 0;
  std::uint64_t entries_swept = 0;
  std::uint64_t resets_sent = 0;
  std::uint64_t relayed_client_bytes = 0;
  std::uint64_t inserted_bytes_sent = 0;        // first transmissions and retransmissions
  std::uint64_t inserted_bytes_retransmitted = 0;
  std::uint64_t insertion_retransmits = 0;
  std::uint64_t acks_suppressed = 0;
  std::uint64_t requests_routed = 0;
  std::uint64_t requests_deferred = 0;
  std::uint64_t unknown_flow_drops = 0;
};

// The forwarding agent: splices a client connection onto a backend
// connection, inserting request headers and translating sequence and ACK
// numbers between the two. The agent keeps no per-connection state until the
// first client packet with payload and never acknowledges client data itself;
// endpoints provide reliability for everything except inserted bytes.
class SpliceAgent {
 public:
  SpliceAgent(AgentConfig config, RouteConfig routes, ConnTable& table);

  // Dispatches any packet addressed to the VIP or to the backend-facing address.
  AgentOutput handle_packet(const Packet& packet, Timestamp now);

  Packet on_client_syn(const Packet& syn, Timestamp now);
  // First payload packet of a connection with no table entry.
  AgentOutput on_client_data(const Packet& packet, Timestamp now);
  AgentOutput on_backend_synack(const Packet& packet, ConnEntry& entry, Timestamp now);
  AgentOutput on_server_data(const Packet& packet, ConnEntry& entry, Timestamp now);
  AgentOutput on_server_ack(const Packet& packet, ConnEntry& entry, Timestamp now);
  AgentOutput on_client_segment(const Packet& packet, ConnEntry& entry, Timestamp now);

  // Server-space cumulative ACK to client space, with the duplicate counting
  // and buffer release side effects.
  MappedAck map_ack_s2c(ConnEntry& entry, Seq ack_in);
  // Client sequence number to backend sequence space.
  Seq map_seq_c2s(const ConnEntry& entry, Seq seq_in) const;
  // Client ACK / SACK edge (response direction) to server space.
  Seq map_ack_c2s(const ConnEntry& entry, Seq ack_in) const;
  // The side-effect free worker rewrite of a server packet toward the client.
  Packet rewrite_s2c(const ConnEntry& entry, const Packet& packet) const;

  // Called once the connection's offload rule is gone; processes a deferred request.
  AgentOutput resume(EntryHandle handle, Timestamp now);
  AgentOutput sweep(Timestamp now);

  ConnEntry* find(EntryHandle handle);
  const ConnEntry* find(EntryHandle handle) const;
  std::size_t entry_count() const { return entries_.size(); }
  const AgentStats& stats() const { return stats_; }
  const AgentConfig& config() const { return config_; }
  const RouteConfig& routes() const { return routes_; }
  ConnTable& table() { return table_; }

 private:
  bool from_client(const Packet& packet) const;
  void reset_connection(ConnEntry& entry, Seq client_seq, AgentOutput& out);
  void remove_entry(ConnEntry& entry, AgentOutput& out);
  void maybe_finish(ConnEntry& entry, AgentOutput& out);
  void try_route(ConnEntry& entry, Timestamp now, AgentOutput& out);
  void drain_requests(ConnEntry& entry, Timestamp now, Seq ack_to_server, std::uint16_t window,
                      AgentOutput& out);
  void prepare_insertion(ConnEntry& entry, StreamOffset head_start, std::size_t request_line_len,
                         const std::string& target);
  void emit_client_range(ConnEntry& entry, StreamOffset off, const Payload& data, Seq ack_to_server,
                         std::uint16_t window, AgentOutput& out);
  void emit_insertion(ConnEntry& entry, std::size_t index, Seq ack_to_server, std::uint16_t window,
                      AgentOutput& out, bool retransmission);
  void release_acked(ConnEntry& entry, StreamOffset receiver_ack);
  void track_client_ack(ConnEntry& entry, Seq ack, AgentOutput& out);
  std::vector<SackBlock> map_server_sack(const ConnEntry& entry, const std::vector<SackBlock>& blocks) const;
  std::optional<Port> allocate_backend_port(Port client_port, const Backend& backend) const;
  Packet make_packet(const FlowKey& key, Seq seq, Seq ack, std::uint8_t flags, std::uint16_t window) const;

  AgentConfig config_;
  RouteConfig routes_;
  ConnTable& table_;
  SynCookie cookie_;
  BackendSelector selector_;
  std::unordered_map<std::uint64_t, std::unique_ptr<ConnEntry>> entries_;
  std::uint64_t next_handle_ = 1;
  AgentStats stats_;
};

}  // namespace splicelb
