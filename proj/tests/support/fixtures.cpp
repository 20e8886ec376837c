// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "support/fixtures.hpp"

#include <sstream>

namespace splicelb::testing {

netsim::SimConfig small_config(std::size_t workers, double loss) {
  netsim::SimConfig c = bench::default_sim_config();
  c.n_clients = 4;
  c.agent.n_workers = workers;
  c.client_link.loss = loss;
  c.server_link.loss = loss;
  return c;
}

std::string expected_server_bytes(const std::string& client_sent, const RouteConfig& routes, Addr client_addr) {
  std::string out;
  std::size_t pos = 0;
  while (pos < client_sent.size()) {
    const std::size_t line_end = client_sent.find("\r\n", pos);
    const std::size_t head_end = client_sent.find("\r\n\r\n", pos);
    if (line_end == std::string::npos || head_end == std::string::npos) {
      out += client_sent.substr(pos);
      break;
    }
    const std::string line = client_sent.substr(pos, line_end - pos);
    const std::size_t sp1 = line.find(' ');
    const std::size_t sp2 = line.find(' ', sp1 + 1);
    const std::string target = line.substr(sp1 + 1, sp2 - sp1 - 1);

    const std::vector<HeaderEdit>* edits = &routes.default_edits;
    std::size_t best = 0;
    for (const RouteRule& r : routes.rules) {
      if (target.compare(0, r.url_prefix.size(), r.url_prefix) == 0 && r.url_prefix.size() > best) {
        best = r.url_prefix.size();
        edits = &r.edits;
      }
    }
    out += client_sent.substr(pos, line_end + 2 - pos);
    for (const HeaderEdit& e : *edits) {
      std::string value = e.value;
      const std::string placeholder = "${client_addr}";
      for (std::size_t at; (at = value.find(placeholder)) != std::string::npos;) {
        value.replace(at, placeholder.size(), addr_to_string(client_addr));
      }
      out += e.name + ": " + value + "\r\n";
    }
    // The generated requests carry no bodies.
    out += client_sent.substr(line_end + 2, head_end + 4 - (line_end + 2));
    pos = head_end + 4;
  }
  return out;
}

std::string flatten(const std::vector<Payload>& chunks) {
  std::string s;
  for (const Payload& p : chunks) s.append(p.view());
  return s;
}

StreamCheck check_streams(const netsim::SessionRecord& rec, const RouteConfig& routes) {
  StreamCheck c;
  if (rec.client_app == nullptr || rec.server_app == nullptr) {
    c.ok = false;
    c.why = "session " + std::to_string(rec.id) + " has no client or server application";
    return c;
  }
  const std::string want = expected_server_bytes(rec.client_app->sent(), routes, rec.client_key.src_addr);
  if (rec.server_app->received() != want) {
    c.ok = false;
    c.why = "session " + std::to_string(rec.id) + ": server received " +
            std::to_string(rec.server_app->received().size()) + " bytes, want " + std::to_string(want.size());
    return c;
  }
  if (!netsim::streams_equal(rec.client_app->received(), rec.server_app->sent())) {
    c.ok = false;
    c.why = "session " + std::to_string(rec.id) + ": client received " +
            std::to_string(netsim::stream_size(rec.client_app->received())) + " bytes, server sent " +
            std::to_string(netsim::stream_size(rec.server_app->sent()));
  }
  return c;
}

Packet SplicedConnection::client_packet(std::uint8_t flags, std::uint64_t off, std::string_view data) const {
  Packet p;
  p.key = client_key;
  p.seq = seq_add(isn_client + 1, static_cast<std::int64_t>(off));
  p.ack = isn_front + 1;
  p.flags = flags;
  p.window = 65535;
  if (!data.empty()) p.payload = Payload(data);
  return p;
}

Packet SplicedConnection::server_packet(std::uint8_t flags, std::uint64_t off, std::string_view data) const {
  Packet p;
  p.key = backend_key.reverse();
  p.seq = seq_add(isn_server + 1, static_cast<std::int64_t>(off));
  p.ack = seq_add(isn_back + 1, static_cast<std::int64_t>(server_bytes));
  p.flags = flags;
  p.window = 65535;
  if (!data.empty()) p.payload = Payload(data);
  return p;
}

SplicedConnection open_spliced(SpliceAgent& agent, Port client_port, const std::string& request, Timestamp now) {
  const AgentConfig& cfg = agent.config();
  SplicedConnection c;
  c.client_key = FlowKey{make_addr(10, 0, 0, 1), cfg.vip, client_port, cfg.vip_port, kProtoTcp};
  c.isn_client = 1000u * client_port;
  c.isn_server = 7000u * client_port;

  Packet syn;
  syn.key = c.client_key;
  syn.seq = c.isn_client;
  syn.flags = kSyn;
  syn.window = 65535;
  syn.options.mss = 1460;
  syn.options.sack_permitted = true;
  c.isn_front = agent.handle_packet(syn, now).packets.at(0).seq;
  agent.handle_packet(c.client_packet(kAck, 0), now);

  const AgentOutput routed = agent.handle_packet(c.client_packet(kAck | kPsh, 0, request), now);
  const Packet& bsyn = routed.packets.at(0);
  c.backend_key = bsyn.key;
  c.isn_back = bsyn.seq;

  Packet synack;
  synack.key = bsyn.key.reverse();
  synack.seq = c.isn_server;
  synack.ack = bsyn.seq + 1;
  synack.flags = kSyn | kAck;
  synack.window = 65535;
  synack.options.mss = 1460;
  synack.options.sack_permitted = true;
  for (const Packet& p : agent.handle_packet(synack, now).packets) c.server_bytes += p.payload.size();
  c.request_bytes = request.size();
  c.handle = *agent.table().lookup(c.client_key, now);
  return c;
}

}  // namespace splicelb::testing
