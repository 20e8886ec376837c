// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include "splicelb/netsim/event_queue.hpp"
#include "splicelb/packet/packet.hpp"

namespace splicelb::netsim {

struct LinkParams {
  Duration latency = std::chrono::microseconds(10);
  double bandwidth_gbps = 10.0;
  double loss = 0.0;  // per-packet drop probability
};

// Bytes a packet occupies on the wire: payload plus IP/TCP headers.
std::size_t wire_size(const Packet& packet);

struct LinkStats {
  std::uint64_t sent = 0;
  std::uint64_t dropped = 0;
  std::uint64_t bytes = 0;
};

// One direction of a point-to-point link. Serialization is FIFO, so packets
// are delivered in the order they were sent; losses are seeded Bernoulli draws.
class Link {
 public:
  using Deliver = std::function<void(Packet, Timestamp)>;

  Link(EventQueue& queue, LinkParams params, std::uint64_t seed, Deliver deliver);

  void send(Packet packet, Timestamp now);
  Duration serialization(const Packet& packet) const;

  const LinkParams& params() const { return params_; }
  const LinkStats& stats() const { return stats_; }

 private:
  EventQueue& queue_;
  LinkParams params_;
  std::mt19937_64 rng_;
  std::bernoulli_distribution drop_;
  Deliver deliver_;
  Timestamp free_at_{};
  LinkStats stats_;
};

}  // namespace splicelb::netsim
