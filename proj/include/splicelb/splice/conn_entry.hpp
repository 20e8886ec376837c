// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>

#include "splicelb/conn_table/conn_table.hpp"
#include "splicelb/packet/packet.hpp"
#include "splicelb/splice/routes.hpp"
#include "splicelb/splice/sequence_map.hpp"
#include "splicelb/time.hpp"

namespace splicelb {

enum class SpliceState { kFrontEstablished, kSynSent, kEstablished };

const char* to_string(SpliceState state);

// Client bytes that have not been forwarded yet, starting at sender offset
// `start`. Only contiguous data is accepted.
struct StreamBuffer {
  StreamOffset start = 0;
  std::string bytes;
  Timestamp first_arrival{};

  StreamOffset end() const { return start + bytes.size(); }
  bool empty() const { return bytes.empty(); }
};

// One server response being tracked for offload and completion detection.
struct ResponseSpan {
  StreamOffset start = 0;  // s2c offset of the status line
  StreamOffset end = 0;    // one past the last body byte
  bool offload_signaled = false;
};

struct ResponseTracker {
  // Offset where the next not-yet-parsed response begins.
  StreamOffset next_start = 0;
  std::deque<ResponseSpan> open;
  // Set after a response without Content-Length: boundaries are unknown from
  // then on, so the connection is never offloaded again.
  bool disarmed = false;
  StreamOffset highest_client_ack = 0;
};

enum class RulePhase { kNone, kInstalling, kActive, kPendingDelete, kDeleting };

struct OffloadState {
  std::optional<std::uint64_t> rule_id;
  RulePhase phase = RulePhase::kNone;
  Timestamp ready_at{};
  // False from rule installation until its deletion has completed.
  bool latch_clean = true;
};

struct ConnEntry {
  EntryHandle handle;
  SpliceState state = SpliceState::kFrontEstablished;
  FlowKey client_key;  // client -> VIP, as received
  FlowKey server_key;  // backend -> LB, as received
  Seq isn_client = 0;
  Seq isn_lb_front = 0;
  Seq isn_lb_back = 0;
  Seq isn_server = 0;
  std::uint16_t mss = 1460;          // negotiated with the client via the cookie
  std::uint16_t backend_mss = 1460;  // advertised by the backend
  Backend backend;

  // Request direction: insertion points and what has been forwarded so far.
  SequenceMap insertions;
  StreamOffset forwarded_upto = 0;
  StreamOffset body_remaining = 0;  // request body bytes still to relay unbuffered
  StreamBuffer pending_request;     // before the backend connection exists
  StreamBuffer next_request;        // keep-alive head being assembled while established
  bool request_deferred = false;    // a complete head waits for a clean rule latch
  // Inserted bytes kept until the server acknowledges them, keyed by point index.
  std::map<std::size_t, Payload> held_buffers;
  std::size_t insertions_sent = 0;  // points [0, n) have had a first transmission
  Seq acked_to_server = 0;          // last ACK number sent toward the backend
  std::uint64_t requests_seen = 0;

  ResponseTracker resp_tracker;
  OffloadState offload;

  std::optional<StreamOffset> client_fin_off;
  std::optional<StreamOffset> server_fin_off;
  bool client_fin_acked = false;
  bool server_fin_acked = false;

  Timestamp created_at{};

  // Fixed offsets between the two sequence spaces.
  Seq client_base() const { return isn_client + 1; }
  Seq backend_base() const { return isn_lb_back + 1; }
  Seq server_base() const { return isn_server + 1; }
  Seq front_base() const { return isn_lb_front + 1; }
};

}  // namespace splicelb
