// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/bench/workload.hpp"

#include <fstream>
#include <random>
#include <sstream>

namespace splicelb::bench {

SizeDistribution SizeDistribution::parse(std::istream& in, const std::string& origin) {
  SizeDistribution dist;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  double total = 0.0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    SizeWeight sw;
    std::string extra;
    if (!(row >> sw.size >> sw.weight) || (row >> extra)) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected `size_bytes weight`");
    }
    if (sw.weight < 0.0) throw ConfigError(origin + ":" + std::to_string(line_no) + ": negative weight");
    total += sw.weight;
    dist.rows.push_back(sw);
  }
  if (dist.rows.empty() || total <= 0.0) throw ConfigError(origin + ": distribution has no positive weight");
  for (SizeWeight& sw : dist.rows) sw.weight /= total;
  return dist;
}

SizeDistribution SizeDistribution::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open distribution file " + path);
  return parse(in, path);
}

double SizeDistribution::mean() const {
  double m = 0.0;
  for (const SizeWeight& sw : rows) m += sw.weight * static_cast<double>(sw.size);
  return m;
}

std::vector<netsim::SessionSpec> build_sessions(const WorkloadSpec& spec, std::uint64_t seed) {
  if (spec.requests == 0) return {};
  if (spec.requests_per_connection == 0) throw ConfigError("requests_per_connection must be positive");
  std::mt19937_64 rng(seed);
  std::vector<double> weights;
  for (const SizeWeight& sw : spec.distribution.rows) weights.push_back(sw.weight);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  if (spec.mode == WorkloadSpec::Mode::kEmpirical && weights.empty()) {
    throw ConfigError("empirical workload without a distribution");
  }

  std::vector<netsim::SessionSpec> sessions;
  std::size_t left = spec.requests;
  while (left > 0) {
    const std::size_t n = std::min(left, spec.requests_per_connection);
    netsim::SessionSpec s;
    for (std::size_t i = 0; i < n; ++i) {
      s.sizes.push_back(spec.mode == WorkloadSpec::Mode::kFixed ? spec.size : spec.distribution.rows[pick(rng)].size);
    }
    sessions.push_back(std::move(s));
    left -= n;
  }
  return sessions;
}

}  // namespace splicelb::bench
