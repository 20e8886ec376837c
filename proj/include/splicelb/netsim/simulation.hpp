// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "splicelb/conn_table/conn_table.hpp"
#include "splicelb/flow_engine/flow_engine.hpp"
#include "splicelb/netsim/event_queue.hpp"
#include "splicelb/netsim/http_app.hpp"
#include "splicelb/netsim/link.hpp"
#include "splicelb/netsim/tcp_endpoint.hpp"
#include "splicelb/offload/offload.hpp"
#include "splicelb/packet/codec.hpp"
#include "splicelb/splice/agent.hpp"

namespace splicelb::netsim {

struct SimConfig {
  std::size_t n_clients = 4;
  LinkParams client_link;
  LinkParams server_link;
  TcpConfig client_tcp;
  TcpConfig server_tcp;
  AgentConfig agent;
  RouteConfig routes;
  EngineConfig engine;
  OffloadParams offload;
  TableConfig table;
  Duration worker_service = from_us(1.0 / 3.0);
  Duration housekeeping_interval = std::chrono::seconds(1);
  Duration session_timeout = std::chrono::seconds(300);
  std::size_t concurrency = 16;  // sessions in flight at once
  std::size_t body_buffer_bytes = 0;  // 0: sized from the largest response
  bool record_trace = false;
};

// Throws ConfigError describing the first problem found.
void validate(const SimConfig& config);

struct SessionSpec {
  std::vector<std::uint64_t> sizes;  // one request per entry, over one connection
  std::optional<Timestamp> start;    // absent: started when a concurrency slot frees up
};

enum class SessionState { kPending, kRunning, kCompleted, kReset, kTimedOut };
const char* to_string(SessionState state);

struct SessionRecord {
  std::uint64_t id = 0;
  SessionSpec spec;
  SessionState state = SessionState::kPending;
  std::size_t client_index = 0;
  FlowKey client_key;  // client -> VIP
  Timestamp started{};
  std::optional<Timestamp> ended;
  TcpEndpoint* client = nullptr;
  HttpClient* client_app = nullptr;
  HttpServer* server_app = nullptr;
};

// Per server-side flow, what the load balancer saw of server-to-client data.
struct S2cFlowCounters {
  std::uint64_t data_packets = 0;
  std::uint64_t worker_data_packets = 0;
  std::uint64_t engine_data_packets = 0;
  std::optional<Timestamp> first_data_arrival;
  std::optional<Timestamp> last_data_arrival;
  std::optional<Duration> min_interarrival;
};

struct LbCounters {
  std::uint64_t ingress_packets = 0;
  std::uint64_t worker_c2s = 0;
  std::uint64_t worker_s2c = 0;
  std::uint64_t worker_s2c_data = 0;
  std::uint64_t engine_matched = 0;
  std::uint64_t engine_dropped = 0;
  std::uint64_t client_payload_in = 0;   // payload bytes received from clients
  std::uint64_t server_payload_in = 0;
  std::uint64_t server_payload_out = 0;  // payload bytes sent toward servers
  std::uint64_t client_payload_out = 0;
  std::uint64_t undeliverable = 0;
  std::map<FlowKey, S2cFlowCounters> s2c_flows;
};

class Simulation {
 public:
  Simulation(SimConfig config, std::uint64_t seed);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  std::uint64_t add_session(SessionSpec spec);
  // Runs until every session has ended or `until` is reached.
  void run(Timestamp until = at_ns(std::int64_t{3600} * 1'000'000'000));

  const std::vector<SessionRecord>& sessions() const { return sessions_; }
  const LbCounters& lb() const { return lb_; }
  const SimConfig& config() const { return config_; }
  Timestamp now() const { return queue_.now(); }
  std::uint64_t events() const { return queue_.executed(); }
  // Hash over every packet the load balancer received or sent and when.
  std::uint64_t digest() const { return digest_; }
  const std::vector<TraceRecord>& trace() const { return trace_; }

  SpliceAgent& agent() { return *agent_; }
  FlowEngine& engine() { return engine_; }
  OffloadManager& offload() { return *offload_; }
  ConnTable& table() { return table_; }
  const std::vector<std::unique_ptr<Link>>& links() const { return links_; }
  // Summed over every endpoint ever created on client or server hosts.
  TcpStats endpoint_totals(bool servers) const;

 private:
  struct Worker {
    std::deque<Packet> queue;
    Timestamp busy_until{};
    bool scheduled = false;
  };
  struct Host {
    Addr addr = 0;
    bool is_server = false;
    Link* uplink = nullptr;    // host -> LB
    Link* downlink = nullptr;  // LB -> host
    // Clients: by local port. Servers: by (remote addr, remote port, local port).
    std::unordered_map<FlowKey, TcpEndpoint*, FlowKeyHash> endpoints;
    Port next_port = 0;
  };

  Host& add_host(Addr addr, bool is_server, const LinkParams& params);
  void lb_receive(Packet packet, Timestamp now);
  void worker_enqueue(WorkerId w, Packet packet, Timestamp now);
  void worker_service(WorkerId w);
  void lb_emit(const AgentOutput& out, Timestamp now);
  void lb_send(Packet packet, Timestamp now);
  void handle_signals(const std::vector<AgentSignal>& signals, Timestamp now, Timestamp* busy);
  void schedule_poll(Timestamp now);
  void housekeeping();
  void host_receive(Host& host, Packet packet, Timestamp now);
  void start_session(std::size_t index, Timestamp now);
  void end_session(std::size_t index, SessionState state, Timestamp now);
  void maybe_start_more(Timestamp now);
  void note(const Packet& packet, Timestamp now, std::uint64_t tag);
  TcpEndpoint* new_endpoint(Host& host, FlowKey key, Seq isn, const TcpConfig& tcp);

  SimConfig config_;
  std::mt19937_64 rng_;
  EventQueue queue_;
  ConnTable table_;
  FlowEngine engine_;
  std::unique_ptr<SpliceAgent> agent_;
  std::unique_ptr<OffloadManager> offload_;
  std::unique_ptr<BodySource> bodies_;

  std::vector<std::unique_ptr<Link>> links_;
  std::vector<std::unique_ptr<Host>> hosts_;
  std::unordered_map<Addr, Host*> host_by_addr_;
  std::vector<Host*> clients_;
  std::vector<Worker> workers_;

  std::vector<std::unique_ptr<TcpEndpoint>> endpoints_;
  std::vector<bool> endpoint_on_server_;
  std::vector<std::unique_ptr<HttpClient>> client_apps_;
  std::vector<std::unique_ptr<HttpServer>> server_apps_;

  std::vector<SessionRecord> sessions_;
  std::size_t next_pending_ = 0;
  std::size_t running_ = 0;
  std::size_t ended_ = 0;
  bool started_ = false;
  std::optional<Timestamp> poll_at_;
  bool housekeeping_scheduled_ = false;

  LbCounters lb_;
  std::uint64_t digest_ = 0xcbf29ce484222325ULL;
  std::vector<TraceRecord> trace_;
};

}  // namespace splicelb::netsim
