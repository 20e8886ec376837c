// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include "splicelb/netsim/simulation.hpp"

namespace splicelb::bench {

struct SizeWeight {
  std::uint64_t size = 0;
  double weight = 0.0;  // normalized: the weights of a distribution sum to 1
};

// Response-size distribution read from a text file: one header line, then
// `size_bytes weight` rows. Blank lines and lines starting with '#' are
// skipped. Weights are normalized on load.
struct SizeDistribution {
  std::vector<SizeWeight> rows;

  static SizeDistribution parse(std::istream& in, const std::string& origin = "<stream>");
  static SizeDistribution load(const std::string& path);
  double mean() const;
};

struct WorkloadSpec {
  enum class Mode { kFixed, kEmpirical };
  Mode mode = Mode::kFixed;
  std::uint64_t size = 1024;        // kFixed
  SizeDistribution distribution;    // kEmpirical
  std::size_t requests = 100;       // total over all connections
  std::size_t connections = 16;     // open at once
  std::size_t requests_per_connection = 1;
};

// One SessionSpec per connection. Sizes are drawn with `seed`. When requests
// do not divide evenly the last connection gets fewer.
std::vector<netsim::SessionSpec> build_sessions(const WorkloadSpec& spec, std::uint64_t seed);

}  // namespace splicelb::bench
