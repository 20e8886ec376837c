// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splicelb/bench/config.hpp"
#include "splicelb/netsim/simulation.hpp"

namespace splicelb::testing {

// Default routes (header insertion on every request) with a small topology.
netsim::SimConfig small_config(std::size_t workers = 2, double loss = 0.0);

// The bytes the backend should receive for what the client sent: every
// request head gets the rendered edits of its longest matching route prefix
// spliced in right after the request line. Computed here without the
// splicing code.
std::string expected_server_bytes(const std::string& client_sent, const RouteConfig& routes, Addr client_addr);

struct StreamCheck {
  bool ok = true;
  std::string why;
};

// Both directions of one finished session, byte for byte.
StreamCheck check_streams(const netsim::SessionRecord& rec, const RouteConfig& routes);

std::string flatten(const std::vector<Payload>& chunks);

// One connection driven through the agent by hand up to ESTABLISHED, with the
// first request delivered to the backend.
struct SplicedConnection {
  EntryHandle handle;
  FlowKey client_key;   // client -> VIP
  FlowKey backend_key;  // LB -> backend
  Seq isn_client = 0;
  Seq isn_front = 0;
  Seq isn_back = 0;
  Seq isn_server = 0;
  std::uint64_t request_bytes = 0;  // client stream so far
  std::uint64_t server_bytes = 0;   // backend-side stream so far, insertions included

  // Client-side packet at client stream offset `off`.
  Packet client_packet(std::uint8_t flags, std::uint64_t off, std::string_view data = {}) const;
  // Server-side packet at server stream offset `off`, acknowledging the whole request stream.
  Packet server_packet(std::uint8_t flags, std::uint64_t off, std::string_view data = {}) const;
};

SplicedConnection open_spliced(SpliceAgent& agent, Port client_port, const std::string& request, Timestamp now);

}  // namespace splicelb::testing
