// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/netsim/simulation.hpp"

#include <algorithm>

namespace splicelb::netsim {
namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_link(const LinkParams& link, const char* which) {
  if (link.loss < 0.0 || link.loss >= 1.0) throw ConfigError(std::string(which) + " loss must be in [0, 1)");
  if (link.bandwidth_gbps <= 0.0) throw ConfigError(std::string(which) + " bandwidth must be positive");
  if (link.latency.count() < 0) throw ConfigError(std::string(which) + " latency must not be negative");
}

Addr client_addr(std::size_t index) {
  return make_addr(10, 1, static_cast<std::uint8_t>(index / 250), static_cast<std::uint8_t>(index % 250 + 1));
}

}  // namespace

const char* to_string(SessionState state) {
  switch (state) {
    case SessionState::kPending:
      return "pending";
    case SessionState::kRunning:
      return "running";
    case SessionState::kCompleted:
      return "completed";
    case SessionState::kReset:
      return "reset";
    case SessionState::kTimedOut:
      return "timed-out";
  }
  return "?";
}

void validate(const SimConfig& config) {
  if (config.n_clients == 0 || config.n_clients > 250 * 250) throw ConfigError("client count out of range");
  if (config.concurrency == 0) throw ConfigError("concurrency must be positive");
  if (config.agent.n_workers == 0) throw ConfigError("at least one worker is required");
  if (config.agent.vip == config.agent.lb_addr) throw ConfigError("VIP and backend-facing address must differ");
  check_link(config.client_link, "client link");
  check_link(config.server_link, "server link");
  config.routes.validate();
  for (const BackendPool& pool : config.routes.pools) {
    for (const Backend& b : pool.members) {
      if (b.addr == config.agent.vip || b.addr == config.agent.lb_addr) {
        throw ConfigError("backend " + addr_to_string(b.addr) + " collides with a load balancer address");
      }
      if (b.addr >> 16 == (make_addr(10, 1, 0, 0) >> 16)) {
        throw ConfigError("backend " + addr_to_string(b.addr) + " is inside the client range 10.1.0.0/16");
      }
    }
  }
}

Simulation::Simulation(SimConfig config, std::uint64_t seed)
    : config_(std::move(config)), rng_(mix_seed(seed, 1)), table_(config_.table), engine_(config_.engine) {
  validate(config_);
  config_.agent.selector_seed = mix_seed(seed, 2);
  engine_.install_port_shard_rules(config_.agent.n_workers, PortRange{0, 65535}, config_.agent.vip,
                                   config_.agent.lb_addr);
  agent_ = std::make_unique<SpliceAgent>(config_.agent, config_.routes, table_);
  offload_ = std::make_unique<OffloadManager>(config_.offload, engine_, *agent_);
  workers_.resize(config_.agent.n_workers);

  for (std::size_t i = 0; i < config_.n_clients; ++i) {
    Host& host = add_host(client_addr(i), false, config_.client_link);
    host.next_port = static_cast<Port>(1024 + rng_() % 60000);
    clients_.push_back(&host);
  }
  for (const BackendPool& pool : config_.routes.pools) {
    for (const Backend& b : pool.members) {
      if (!host_by_addr_.contains(b.addr)) add_host(b.addr, true, config_.server_link);
    }
  }
}

Simulation::~Simulation() = default;

Simulation::Host& Simulation::add_host(Addr addr, bool is_server, const LinkParams& params) {
  auto host = std::make_unique<Host>();
  host->addr = addr;
  host->is_server = is_server;
  Host* h = host.get();
  const std::uint64_t base = mix_seed(rng_(), links_.size());
  links_.push_back(std::make_unique<Link>(queue_, params, mix_seed(base, 1),
                                          [this](Packet p, Timestamp at) { lb_receive(std::move(p), at); }));
  h->uplink = links_.back().get();
  links_.push_back(std::make_unique<Link>(queue_, params, mix_seed(base, 2),
                                          [this, h](Packet p, Timestamp at) { host_receive(*h, std::move(p), at); }));
  h->downlink = links_.back().get();
  host_by_addr_[addr] = h;
  hosts_.push_back(std::move(host));
  return *h;
}

std::uint64_t Simulation::add_session(SessionSpec spec) {
  if (spec.sizes.empty()) throw ConfigError("a session needs at least one request");
  SessionRecord rec;
  rec.id = sessions_.size();
  rec.spec = std::move(spec);
  sessions_.push_back(std::move(rec));
  if (started_ && sessions_.back().spec.start) {
    const std::size_t index = sessions_.size() - 1;
    queue_.schedule(std::max(*sessions_.back().spec.start, queue_.now()), [this, index] {
      ++running_;
      start_session(index, queue_.now());
    });
  }
  return sessions_.back().id;
}

void Simulation::note(const Packet& packet, Timestamp now, std::uint64_t tag) {
  auto mix_in = [this](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      digest_ ^= (v >> (8 * i)) & 0xff;
      digest_ *= 0x100000001b3ULL;
    }
  };
  mix_in(tag);
  mix_in(static_cast<std::uint64_t>(to_ns(now)));
  mix_in(hash_value(packet.key));
  mix_in((std::uint64_t{packet.seq} << 32) | packet.ack);
  mix_in((std::uint64_t{packet.flags} << 32) | packet.payload.size());
}

void Simulation::lb_receive(Packet packet, Timestamp now) {
  note(packet, now, 1);
  if (config_.record_trace) trace_.push_back(TraceRecord{now, packet});
  ++lb_.ingress_packets;
  const bool from_server = packet.key.dst_addr == config_.agent.lb_addr;
  (from_server ? lb_.server_payload_in : lb_.client_payload_in) += packet.payload.size();

  S2cFlowCounters* flow = nullptr;
  if (from_server && !packet.payload.empty()) {
    flow = &lb_.s2c_flows[packet.key];
    ++flow->data_packets;
    if (flow->last_data_arrival) {
      const Duration gap = now - *flow->last_data_arrival;
      if (!flow->min_interarrival || gap < *flow->min_interarrival) flow->min_interarrival = gap;
    } else {
      flow->first_data_arrival = now;
    }
    flow->last_data_arrival = now;
  }

  ProcessResult result = engine_.process(packet, now);
  if (auto* matched = std::get_if<Matched>(&result)) {
    ++lb_.engine_matched;
    if (flow) ++flow->engine_data_packets;
    if (matched->egress == Egress::kHairpin) {
      lb_send(std::move(matched->packet), now + engine_.config().per_packet_service);
    } else {
      worker_enqueue(matched->worker, std::move(matched->packet), now);
    }
    return;
  }
  if (std::holds_alternative<Dropped>(result)) {
    ++lb_.engine_dropped;
    return;
  }
  const WorkerId w = std::get<Missed>(result).worker;
  if (from_server) {
    ++lb_.worker_s2c;
    if (flow) {
      ++lb_.worker_s2c_data;
      ++flow->worker_data_packets;
    }
  } else {
    ++lb_.worker_c2s;
  }
  worker_enqueue(w, std::move(packet), now);
}

void Simulation::worker_enqueue(WorkerId w, Packet packet, Timestamp now) {
  Worker& worker = workers_.at(w);
  worker.queue.push_back(std::move(packet));
  if (worker.scheduled) return;
  worker.scheduled = true;
  queue_.schedule(std::max(now, worker.busy_until) + config_.worker_service, [this, w] { worker_service(w); });
}

void Simulation::worker_service(WorkerId w) {
  Worker& worker = workers_.at(w);
  const Timestamp now = queue_.now();
  Packet packet = std::move(worker.queue.front());
  worker.queue.pop_front();
  worker.busy_until = now;
  AgentOutput out = agent_->handle_packet(packet, now);
  Timestamp busy = now;
  lb_emit(out, now);
  handle_signals(out.signals, now, &busy);
  worker.busy_until = std::max(worker.busy_until, busy);
  if (worker.queue.empty()) {
    worker.scheduled = false;
  } else {
    queue_.schedule(worker.busy_until + config_.worker_service, [this, w] { worker_service(w); });
  }
}

void Simulation::lb_emit(const AgentOutput& out, Timestamp now) {
  for (const Packet& p : out.packets) lb_send(p, now);
}

void Simulation::lb_send(Packet packet, Timestamp now) {
  note(packet, now, 2);
  auto it = host_by_addr_.find(packet.key.dst_addr);
  if (it == host_by_addr_.end()) {
    ++lb_.undeliverable;
    return;
  }
  if (it->second->is_server) {
    lb_.server_payload_out += packet.payload.size();
  } else {
    lb_.client_payload_out += packet.payload.size();
  }
  it->second->downlink->send(std::move(packet), now);
}

void Simulation::handle_signals(const std::vector<AgentSignal>& signals, Timestamp now, Timestamp* busy) {
  for (const AgentSignal& s : signals) {
    const Timestamp b = offload_->on_signal(s, now);
    if (busy) *busy = std::max(*busy, b);
  }
  schedule_poll(now);
}

void Simulation::schedule_poll(Timestamp now) {
  auto deadline = offload_->next_deadline();
  if (!deadline) return;
  const Timestamp at = std::max(*deadline, now);
  if (poll_at_ && *poll_at_ <= at) return;
  poll_at_ = at;
  queue_.schedule(at, [this, at] {
    if (poll_at_ == at) poll_at_.reset();
    const Timestamp t = queue_.now();
    AgentOutput out = offload_->poll(t);
    lb_emit(out, t);
    handle_signals(out.signals, t, nullptr);
  });
}

void Simulation::housekeeping() {
  const Timestamp now = queue_.now();
  AgentOutput swept = agent_->sweep(now);
  lb_emit(swept, now);
  handle_signals(swept.signals, now, nullptr);
  AgentOutput polled = offload_->poll(now);
  lb_emit(polled, now);
  handle_signals(polled.signals, now, nullptr);
  if (ended_ < sessions_.size()) {
    queue_.schedule(now + config_.housekeeping_interval, [this] { housekeeping(); });
  } else {
    housekeeping_scheduled_ = false;
  }
}

TcpEndpoint* Simulation::new_endpoint(Host& host, FlowKey key, Seq isn, const TcpConfig& tcp) {
  Host* h = &host;
  auto ep = std::make_unique<TcpEndpoint>(
      key, isn, tcp, [this, h](Packet p) { h->uplink->send(std::move(p), queue_.now()); },
      [this](Timestamp at, std::function<void()> fn) { queue_.schedule(at, std::move(fn)); });
  TcpEndpoint* raw = ep.get();
  endpoints_.push_back(std::move(ep));
  endpoint_on_server_.push_back(host.is_server);
  host.endpoints[key] = raw;
  return raw;
}

void Simulation::host_receive(Host& host, Packet packet, Timestamp now) {
  const FlowKey local = packet.key.reverse();
  auto it = host.endpoints.find(local);
  TcpEndpoint* ep = it == host.endpoints.end() ? nullptr : it->second;
  const bool finished = ep && (ep->state() == TcpState::kDone || ep->state() == TcpState::kAborted);
  if (host.is_server && packet.has(kSyn) && !packet.has(kAck) && (ep == nullptr || finished)) {
    ep = new_endpoint(host, local, static_cast<Seq>(rng_()), config_.server_tcp);
    auto app = std::make_unique<HttpServer>(*bodies_, *ep);
    HttpServer* server = app.get();
    server_apps_.push_back(std::move(app));
    TcpEndpoint::Callbacks cb;
    cb.on_data = [server](const Payload& data, Timestamp t) { server->on_data(data, t); };
    cb.on_peer_fin = [server](Timestamp t) { server->on_peer_fin(t); };
    ep->set_callbacks(std::move(cb));
    ep->accept(packet, now);
    return;
  }
  if (ep == nullptr) return;
  ep->on_segment(packet, now);
}

void Simulation::start_session(std::size_t index, Timestamp now) {
  SessionRecord& rec = sessions_[index];
  rec.state = SessionState::kRunning;
  rec.started = now;
  rec.client_index = index % clients_.size();
  Host& host = *clients_[rec.client_index];

  FlowKey key;
  for (int attempts = 0;; ++attempts) {
    if (attempts > 65536) throw std::runtime_error("client ports exhausted");
    const Port port = host.next_port;
    host.next_port = static_cast<Port>(port == 65535 ? 1024 : port + 1);
    key = FlowKey{host.addr, config_.agent.vip, port, config_.agent.vip_port, kProtoTcp};
    auto it = host.endpoints.find(key);
    if (it == host.endpoints.end() || it->second->state() == TcpState::kDone ||
        it->second->state() == TcpState::kAborted) {
      break;
    }
  }
  rec.client_key = key;
  TcpEndpoint* ep = new_endpoint(host, key, static_cast<Seq>(rng_()), config_.client_tcp);
  auto app = std::make_unique<HttpClient>(rec.id, rec.spec.sizes, *ep);
  HttpClient* client = app.get();
  client_apps_.push_back(std::move(app));
  rec.client = ep;
  rec.client_app = client;

  TcpEndpoint::Callbacks cb;
  cb.on_established = [client](Timestamp t) { client->on_established(t); };
  cb.on_data = [client](const Payload& data, Timestamp t) { client->on_data(data, t); };
  cb.on_closed = [this, index, client](bool aborted, Timestamp t) {
    end_session(index, !aborted && client->finished() ? SessionState::kCompleted : SessionState::kReset, t);
  };
  ep->set_callbacks(std::move(cb));
  ep->connect(now);

  queue_.schedule(now + config_.session_timeout, [this, index, ep] {
    if (sessions_[index].ended) return;
    end_session(index, SessionState::kTimedOut, queue_.now());
    ep->abort(queue_.now());
  });
}

void Simulation::end_session(std::size_t index, SessionState state, Timestamp now) {
  SessionRecord& rec = sessions_[index];
  if (rec.ended) return;
  rec.state = state;
  rec.ended = now;
  --running_;
  ++ended_;
  maybe_start_more(now);
  if (ended_ == sessions_.size()) queue_.stop();
}

void Simulation::maybe_start_more(Timestamp now) {
  while (running_ < config_.concurrency && next_pending_ < sessions_.size()) {
    const std::size_t index = next_pending_++;
    if (sessions_[index].spec.start) continue;
    ++running_;
    start_session(index, now);
  }
}

TcpStats Simulation::endpoint_totals(bool servers) const {
  TcpStats total;
  for (std::size_t i = 0; i < endpoints_.size(); ++i) {
    if (endpoint_on_server_[i] != servers) continue;
    const TcpStats& s = endpoints_[i]->stats();
    total.segments_sent += s.segments_sent;
    total.data_segments_sent += s.data_segments_sent;
    total.retransmitted_segments += s.retransmitted_segments;
    total.retransmitted_bytes += s.retransmitted_bytes;
    total.fast_retransmits += s.fast_retransmits;
    total.timeouts += s.timeouts;
    total.dupacks_received += s.dupacks_received;
    total.bytes_written += s.bytes_written;
    total.bytes_delivered += s.bytes_delivered;
  }
  return total;
}

void Simulation::run(Timestamp until) {
  if (!started_) {
    started_ = true;
    std::uint64_t largest = 0;
    for (const SessionRecord& rec : sessions_) {
      for (std::uint64_t s : rec.spec.sizes) largest = std::max(largest, s);
    }
    std::size_t capacity = config_.body_buffer_bytes;
    if (capacity == 0) capacity = static_cast<std::size_t>(std::max<std::uint64_t>(largest + (1u << 16), 1u << 20));
    bodies_ = std::make_unique<BodySource>(capacity, rng_());
    for (std::size_t i = 0; i < sessions_.size(); ++i) {
      if (!sessions_[i].spec.start) continue;
      queue_.schedule(*sessions_[i].spec.start, [this, i] {
        ++running_;
        start_session(i, queue_.now());
      });
    }
    maybe_start_more(queue_.now());
  }
  if (!housekeeping_scheduled_ && ended_ < sessions_.size()) {
    housekeeping_scheduled_ = true;
    queue_.schedule(queue_.now() + config_.housekeeping_interval, [this] { housekeeping(); });
  }
  if (ended_ < sessions_.size()) queue_.run_until(until);

  std::map<std::uint64_t, std::size_t> by_session;
  for (std::size_t i = 0; i < sessions_.size(); ++i) by_session[sessions_[i].id] = i;
  for (const auto& app : server_apps_) {
    if (!app->session()) continue;
    auto it = by_session.find(*app->session());
    if (it != by_session.end()) sessions_[it->second].server_app = app.get();
  }
}

}  // namespace splicelb::netsim
