// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "splicelb/bench/workload.hpp"
#include "splicelb/netsim/simulation.hpp"

namespace splicelb::bench {

struct BenchConfig {
  netsim::SimConfig sim;
  WorkloadSpec workload;
  std::uint64_t seed = 1;
  Duration until = std::chrono::seconds(3600);  // simulated time limit
};

// The topology, routes, offload and workload description documented in
// docs/config.md. Relative distribution paths resolve against `base_dir`.
// Throws ConfigError on unknown keys, wrong types or invalid values.
BenchConfig parse_config(const std::string& yaml_text, const std::string& base_dir = ".");
BenchConfig load_config(const std::string& path);

// Two backend pools and a header-inserting default route; used when no
// configuration file is given and by the tests.
netsim::SimConfig default_sim_config();

}  // namespace splicelb::bench
