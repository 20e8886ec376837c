// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "splicelb/packet/packet.hpp"

namespace splicelb {

struct Backend {
  Addr addr = 0;
  Port port = 0;
  std::uint32_t weight = 1;

  friend bool operator==(const Backend&, const Backend&) = default;
};

struct BackendPool {
  std::string name;
  std::vector<Backend> members;
};

// One header line added to a request. The value may contain the placeholder
// "${client_addr}", replaced by the client's dotted-quad address.
struct HeaderEdit {
  std::string name;
  std::string value;

  std::string render(Addr client_addr) const;
};

struct RouteRule {
  std::string url_prefix;
  std::string pool;
  std::vector<HeaderEdit> edits;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RouteConfig {
  std::vector<BackendPool> pools;
  std::vector<RouteRule> rules;
  std::string default_pool;
  std::vector<HeaderEdit> default_edits;

  // Throws ConfigError when a referenced pool is missing or empty.
  void validate() const;
  const BackendPool& pool(std::string_view name) const;
};

struct RouteMatch {
  const BackendPool* pool = nullptr;
  const std::vector<HeaderEdit>* edits = nullptr;
  int rule_index = -1;  // -1 for the default route
};

// Longest matching prefix wins; equal lengths resolve to the earlier rule.
RouteMatch match_route(const RouteConfig& config, std::string_view target);

// The bytes to splice in after the request line for a given set of edits.
std::string render_edits(const std::vector<HeaderEdit>& edits, Addr client_addr);

// Smooth weighted round-robin per pool. The starting position of every pool is
// derived from the seed so runs are reproducible.
class BackendSelector {
 public:
  BackendSelector(const RouteConfig& config, std::uint64_t seed);

  const Backend& next(const BackendPool& pool);

 private:
  std::map<std::string, std::vector<std::int64_t>, std::less<>> current_;
};

}  // namespace splicelb
