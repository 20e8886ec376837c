// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/bench/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace splicelb::bench {
namespace {

std::string where(const YAML::Node& node, const std::string& path) {
  const YAML::Mark mark = node.Mark();
  if (mark.is_null()) return path;
  return path + " (line " + std::to_string(mark.line + 1) + ")";
}

void check_keys(const YAML::Node& node, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw ConfigError(where(node, path) + ": expected a mapping");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!ok.contains(key)) throw ConfigError(where(kv.first, path) + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get(const YAML::Node& node, const std::string& path) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where(node, path) + ": wrong type");
  }
}

template <typename T>
void read(const YAML::Node& parent, const char* key, const std::string& path, T& out) {
  const YAML::Node node = parent[key];
  if (node) out = get<T>(node, path + "." + key);
}

Addr read_addr(const YAML::Node& node, const std::string& path) {
  auto addr = parse_addr(get<std::string>(node, path));
  if (!addr) throw ConfigError(where(node, path) + ": not a dotted-quad address");
  return *addr;
}

Duration seconds_f(double s) { return Duration{static_cast<std::int64_t>(std::llround(s * 1e9))}; }

void read_link(const YAML::Node& node, const std::string& path, netsim::LinkParams& link) {
  if (!node) return;
  check_keys(node, path, {"latency_us", "bandwidth_gbps", "loss"});
  if (node["latency_us"]) link.latency = from_us(get<double>(node["latency_us"], path + ".latency_us"));
  read(node, "bandwidth_gbps", path, link.bandwidth_gbps);
  read(node, "loss", path, link.loss);
}

std::vector<HeaderEdit> read_edits(const YAML::Node& node, const std::string& path) {
  std::vector<HeaderEdit> edits;
  if (!node) return edits;
  if (!node.IsSequence()) throw ConfigError(where(node, path) + ": expected a list");
  for (std::size_t i = 0; i < node.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    check_keys(node[i], p, {"name", "value"});
    HeaderEdit e;
    read(node[i], "name", p, e.name);
    read(node[i], "value", p, e.value);
    if (e.name.empty()) throw ConfigError(where(node[i], p) + ": header name is empty");
    edits.push_back(std::move(e));
  }
  return edits;
}

void read_routes(const YAML::Node& node, RouteConfig& routes) {
  if (!node) return;
  check_keys(node, "routes", {"default_pool", "default_edits", "pools", "rules"});
  routes = RouteConfig{};
  read(node, "default_pool", "routes", routes.default_pool);
  routes.default_edits = read_edits(node["default_edits"], "routes.default_edits");
  const YAML::Node pools = node["pools"];
  if (pools) {
    if (!pools.IsSequence()) throw ConfigError(where(pools, "routes.pools") + ": expected a list");
    for (std::size_t i = 0; i < pools.size(); ++i) {
      const std::string p = "routes.pools[" + std::to_string(i) + "]";
      check_keys(pools[i], p, {"name", "members"});
      BackendPool pool;
      read(pools[i], "name", p, pool.name);
      const YAML::Node members = pools[i]["members"];
      if (!members || !members.IsSequence()) throw ConfigError(where(pools[i], p) + ": members must be a list");
      for (std::size_t j = 0; j < members.size(); ++j) {
        const std::string mp = p + ".members[" + std::to_string(j) + "]";
        check_keys(members[j], mp, {"addr", "port", "weight"});
        Backend b;
        if (!members[j]["addr"]) throw ConfigError(where(members[j], mp) + ": addr is required");
        b.addr = read_addr(members[j]["addr"], mp + ".addr");
        read(members[j], "port", mp, b.port);
        read(members[j], "weight", mp, b.weight);
        pool.members.push_back(b);
      }
      routes.pools.push_back(std::move(pool));
    }
  }
  const YAML::Node rules = node["rules"];
  if (rules) {
    if (!rules.IsSequence()) throw ConfigError(where(rules, "routes.rules") + ": expected a list");
    for (std::size_t i = 0; i < rules.size(); ++i) {
      const std::string p = "routes.rules[" + std::to_string(i) + "]";
      check_keys(rules[i], p, {"prefix", "pool", "edits"});
      RouteRule r;
      read(rules[i], "prefix", p, r.url_prefix);
      read(rules[i], "pool", p, r.pool);
      r.edits = read_edits(rules[i]["edits"], p + ".edits");
      routes.rules.push_back(std::move(r));
    }
  }
}

void read_workload(const YAML::Node& node, const std::string& base_dir, WorkloadSpec& w) {
  if (!node) return;
  check_keys(node, "workload",
             {"mode", "size_bytes", "distribution", "requests", "connections", "requests_per_connection"});
  std::string mode = "fixed";
  read(node, "mode", "workload", mode);
  if (mode == "fixed") {
    w.mode = WorkloadSpec::Mode::kFixed;
  } else if (mode == "empirical") {
    w.mode = WorkloadSpec::Mode::kEmpirical;
  } else {
    throw ConfigError(where(node["mode"], "workload.mode") + ": expected fixed or empirical");
  }
  read(node, "size_bytes", "workload", w.size);
  read(node, "requests", "workload", w.requests);
  read(node, "connections", "workload", w.connections);
  read(node, "requests_per_connection", "workload", w.requests_per_connection);
  if (node["distribution"]) {
    std::filesystem::path file = get<std::string>(node["distribution"], "workload.distribution");
    if (file.is_relative()) file = std::filesystem::path(base_dir) / file;
    w.distribution = SizeDistribution::load(file.string());
  }
  if (w.mode == WorkloadSpec::Mode::kEmpirical && w.distribution.rows.empty()) {
    throw ConfigError("workload: empirical mode needs a distribution file");
  }
  if (w.connections == 0) throw ConfigError("workload.connections must be positive");
  if (w.requests_per_connection == 0) throw ConfigError("workload.requests_per_connection must be positive");
}

}  // namespace

netsim::SimConfig default_sim_config() {
  netsim::SimConfig c;
  c.n_clients = 8;
  c.agent.n_workers = 4;
  c.routes.pools = {
      BackendPool{"web",
                  {Backend{make_addr(10, 0, 2, 1), 8080, 1}, Backend{make_addr(10, 0, 2, 2), 8080, 1},
                   Backend{make_addr(10, 0, 2, 3), 8080, 2}}},
      BackendPool{"static", {Backend{make_addr(10, 0, 3, 1), 8080, 1}}},
  };
  c.routes.default_pool = "web";
  c.routes.default_edits = {HeaderEdit{"X-Forwarded-For", "${client_addr}"}, HeaderEdit{"X-Via", "splicelb"}};
  c.routes.rules = {RouteRule{"/static/", "static", {HeaderEdit{"X-Tier", "static"}}}};
  return c;
}

BenchConfig parse_config(const std::string& yaml_text, const std::string& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("YAML: ") + e.what());
  }
  BenchConfig cfg;
  cfg.sim = default_sim_config();
  if (!root || root.IsNull()) return cfg;
  check_keys(root, "config", {"seed", "until_s", "topology", "lb", "table", "engine", "offload", "tcp", "routes", "workload"});
  read(root, "seed", "config", cfg.seed);
  if (root["until_s"]) cfg.until = seconds_f(get<double>(root["until_s"], "until_s"));

  netsim::SimConfig& sim = cfg.sim;
  if (const YAML::Node t = root["topology"]) {
    check_keys(t, "topology", {"clients", "client_link", "server_link", "session_timeout_s", "housekeeping_s",
                               "record_trace"});
    read(t, "clients", "topology", sim.n_clients);
    read_link(t["client_link"], "topology.client_link", sim.client_link);
    read_link(t["server_link"], "topology.server_link", sim.server_link);
    if (t["session_timeout_s"]) sim.session_timeout = seconds_f(get<double>(t["session_timeout_s"], "topology"));
    if (t["housekeeping_s"]) sim.housekeeping_interval = seconds_f(get<double>(t["housekeeping_s"], "topology"));
    read(t, "record_trace", "topology", sim.record_trace);
  }
  if (const YAML::Node lb = root["lb"]) {
    check_keys(lb, "lb", {"vip", "vip_port", "backend_address", "workers", "worker_service_us", "sack", "window",
                          "backend_mss", "request_buffer_cap", "cookie_secret"});
    if (lb["vip"]) sim.agent.vip = read_addr(lb["vip"], "lb.vip");
    read(lb, "vip_port", "lb", sim.agent.vip_port);
    if (lb["backend_address"]) sim.agent.lb_addr = read_addr(lb["backend_address"], "lb.backend_address");
    read(lb, "workers", "lb", sim.agent.n_workers);
    if (lb["worker_service_us"]) sim.worker_service = from_us(get<double>(lb["worker_service_us"], "lb"));
    read(lb, "sack", "lb", sim.agent.sack);
    read(lb, "window", "lb", sim.agent.window);
    read(lb, "backend_mss", "lb", sim.agent.backend_mss);
    read(lb, "request_buffer_cap", "lb", sim.agent.request_buffer_cap);
    read(lb, "cookie_secret", "lb", sim.agent.cookie_secret);
  }
  if (const YAML::Node t = root["table"]) {
    check_keys(t, "table", {"buckets", "slots_per_bucket", "max_relocation_path", "ttl_s"});
    read(t, "buckets", "table", sim.table.bucket_count);
    read(t, "slots_per_bucket", "table", sim.table.slots_per_bucket);
    read(t, "max_relocation_path", "table", sim.table.max_relocation_path);
    if (t["ttl_s"]) sim.table.ttl_delta = seconds_f(get<double>(t["ttl_s"], "table.ttl_s"));
    const std::size_t b = sim.table.bucket_count;
    if (b < 2 || (b & (b - 1)) != 0) throw ConfigError("table.buckets must be a power of two >= 2");
  }
  if (const YAML::Node e = root["engine"]) {
    check_keys(e, "engine", {"rule_capacity", "per_packet_us", "latency"});
    read(e, "rule_capacity", "engine", sim.engine.rule_capacity);
    if (e["per_packet_us"]) sim.engine.per_packet_service = from_us(get<double>(e["per_packet_us"], "engine"));
    if (const YAML::Node rows = e["latency"]) {
      if (!rows.IsSequence() || rows.size() == 0) throw ConfigError("engine.latency must be a non-empty list");
      std::vector<LatencyModel::Row> parsed;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::string p = "engine.latency[" + std::to_string(i) + "]";
        check_keys(rows[i], p, {"batch", "insert_us", "delete_us"});
        LatencyModel::Row r{};
        read(rows[i], "batch", p, r.batch);
        read(rows[i], "insert_us", p, r.insert_us);
        read(rows[i], "delete_us", p, r.delete_us);
        parsed.push_back(r);
      }
      try {
        sim.engine.latency = LatencyModel(std::move(parsed));
      } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("engine.latency: ") + ex.what());
      }
    }
  }
  if (const YAML::Node o = root["offload"]) {
    check_keys(o, "offload", {"enabled", "force", "threshold_override_bytes", "mss", "per_packet_us",
                              "delete_batch_max", "delete_flush_timeout_us", "insert_mode", "rule_idle_timeout_s"});
    OffloadParams& op = sim.offload;
    read(o, "enabled", "offload", op.enabled);
    read(o, "force", "offload", op.force);
    if (const YAML::Node t = o["threshold_override_bytes"]) {
      op.threshold_override = t.IsNull() ? std::nullopt : std::optional(get<std::uint64_t>(t, "offload"));
    }
    read(o, "mss", "offload", op.mss);
    read(o, "per_packet_us", "offload", op.per_packet_us);
    read(o, "delete_batch_max", "offload", op.delete_batch_max);
    if (o["delete_flush_timeout_us"]) {
      op.delete_flush_timeout = from_us(get<double>(o["delete_flush_timeout_us"], "offload"));
    }
    if (o["insert_mode"]) {
      const std::string m = get<std::string>(o["insert_mode"], "offload.insert_mode");
      if (m == "blocking") {
        op.insert_mode = UpdateMode::kBlocking;
      } else if (m == "non-blocking") {
        op.insert_mode = UpdateMode::kNonBlocking;
      } else {
        throw ConfigError("offload.insert_mode: expected blocking or non-blocking");
      }
    }
    if (const YAML::Node t = o["rule_idle_timeout_s"]) {
      op.rule_idle_timeout = t.IsNull() ? std::nullopt : std::optional(seconds_f(get<double>(t, "offload")));
    }
    if (op.per_packet_us <= 0.0) throw ConfigError("offload.per_packet_us must be positive");
    if (op.delete_batch_max == 0) throw ConfigError("offload.delete_batch_max must be positive");
  }
  if (const YAML::Node t = root["tcp"]) {
    check_keys(t, "tcp", {"mss", "sack", "window", "rto_ms", "max_rto_s", "initial_cwnd", "max_retransmissions"});
    for (netsim::TcpConfig* tcp : {&sim.client_tcp, &sim.server_tcp}) {
      read(t, "mss", "tcp", tcp->mss);
      read(t, "sack", "tcp", tcp->sack);
      read(t, "window", "tcp", tcp->window);
      if (t["rto_ms"]) tcp->rto = from_us(get<double>(t["rto_ms"], "tcp.rto_ms") * 1000.0);
      if (t["max_rto_s"]) tcp->max_rto = seconds_f(get<double>(t["max_rto_s"], "tcp.max_rto_s"));
      read(t, "initial_cwnd", "tcp", tcp->initial_cwnd_segments);
      read(t, "max_retransmissions", "tcp", tcp->max_retransmissions);
    }
  }
  read_routes(root["routes"], sim.routes);
  read_workload(root["workload"], base_dir, cfg.workload);
  sim.concurrency = cfg.workload.connections;
  netsim::validate(sim);
  return cfg;
}

BenchConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream text;
  text << in.rdbuf();
  const std::filesystem::path dir = std::filesystem::path(path).parent_path();
  return parse_config(text.str(), dir.empty() ? "." : dir.string());
}

}  // namespace splicelb::bench
