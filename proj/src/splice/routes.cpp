// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/splice/routes.hpp"

#include <random>

namespace splicelb {

std::string HeaderEdit::render(Addr client_addr) const {
  static constexpr std::string_view kPlaceholder = "${client_addr}";
  std::string out = value;
  for (std::size_t pos = out.find(kPlaceholder); pos != std::string::npos;
       pos = out.find(kPlaceholder, pos)) {
    std::string addr = addr_to_string(client_addr);
    out.replace(pos, kPlaceholder.size(), addr);
    pos += addr.size();
  }
  return out;
}

const BackendPool& RouteConfig::pool(std::string_view name) const {
  for (const BackendPool& p : pools) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown pool '" + std::string(name) + "'");
}

void RouteConfig::validate() const {
  if (default_pool.empty()) throw ConfigError("default pool not configured");
  for (const BackendPool& p : pools) {
    if (p.members.empty()) throw ConfigError("pool '" + p.name + "' has no backends");
    for (const Backend& b : p.members) {
      if (b.weight == 0) throw ConfigError("pool '" + p.name + "' has a zero-weight backend");
    }
  }
  pool(default_pool);
  for (const RouteRule& rule : rules) {
    if (rule.url_prefix.empty()) throw ConfigError("route with empty prefix");
    pool(rule.pool);
  }
}

RouteMatch match_route(const RouteConfig& config, std::string_view target) {
  RouteMatch best;
  std::size_t best_len = 0;
  for (std::size_t i = 0; i < config.rules.size(); ++i) {
    const RouteRule& rule = config.rules[i];
    if (rule.url_prefix.size() > best_len && target.substr(0, rule.url_prefix.size()) == rule.url_prefix) {
      best_len = rule.url_prefix.size();
      best.rule_index = static_cast<int>(i);
    }
  }
  if (best.rule_index >= 0) {
    const RouteRule& rule = config.rules[static_cast<std::size_t>(best.rule_index)];
    best.pool = &config.pool(rule.pool);
    best.edits = &rule.edits;
  } else {
    best.pool = &config.pool(config.default_pool);
    best.edits = &config.default_edits;
  }
  return best;
}

std::string render_edits(const std::vector<HeaderEdit>& edits, Addr client_addr) {
  std::string out;
  for (const HeaderEdit& edit : edits) {
    out += edit.name;
    out += ": ";
    out += edit.render(client_addr);
    out += "\r\n";
  }
  return out;
}

BackendSelector::BackendSelector(const RouteConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const BackendPool& pool : config.pools) {
    std::vector<std::int64_t> state(pool.members.size(), 0);
    // Pre-rotate by a seeded number of picks.
    std::int64_t total = 0;
    for (const Backend& b : pool.members) total += b.weight;
    auto rotations = total > 0 ? rng() % static_cast<std::uint64_t>(total) : 0;
    for (std::uint64_t r = 0; r < rotations; ++r) {
      std::size_t best = 0;
      for (std::size_t i = 0; i < state.size(); ++i) {
        state[i] += pool.members[i].weight;
        if (state[i] > state[best]) best = i;
      }
      state[best] -= total;
    }
    current_.emplace(pool.name, std::move(state));
  }
}

const Backend& BackendSelector::next(const BackendPool& pool) {
  auto it = current_.find(pool.name);
  if (it == current_.end()) throw ConfigError("selector has no state for pool '" + pool.name + "'");
  std::vector<std::int64_t>& state = it->second;
  std::int64_t total = 0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    state[i] += pool.members[i].weight;
    total += pool.members[i].weight;
    if (state[i] > state[best]) best = i;
  }
  state[best] -= total;
  return pool.members[best];
}

}  // namespace splicelb
