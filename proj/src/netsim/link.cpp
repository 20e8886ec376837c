// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/netsim/link.hpp"

#include <algorithm>
#include <cmath>

namespace splicelb::netsim {

std::size_t wire_size(const Packet& packet) {
  std::size_t options = 0;
  if (packet.options.mss) options += 4;
  if (packet.options.sack_permitted) options += 2;
  if (!packet.options.sack_blocks.empty()) options += 2 + 8 * packet.options.sack_blocks.size();
  return 40 + ((options + 3) / 4) * 4 + packet.payload.size();
}

Link::Link(EventQueue& queue, LinkParams params, std::uint64_t seed, Deliver deliver)
    : queue_(queue), params_(params), rng_(seed), drop_(params.loss), deliver_(std::move(deliver)) {}

Duration Link::serialization(const Packet& packet) const {
  if (params_.bandwidth_gbps <= 0) return Duration{0};
  const double ns = static_cast<double>(wire_size(packet)) * 8.0 / params_.bandwidth_gbps;
  return Duration{static_cast<std::int64_t>(std::ceil(ns))};
}

void Link::send(Packet packet, Timestamp now) {
  ++stats_.sent;
  const Timestamp start = std::max(now, free_at_);
  free_at_ = start + serialization(packet);
  stats_.bytes += wire_size(packet);
  if (params_.loss > 0 && drop_(rng_)) {
    ++stats_.dropped;
    return;
  }
  const Timestamp arrival = free_at_ + params_.latency;
  queue_.schedule(arrival, [this, p = std::move(packet), arrival]() mutable { deliver_(std::move(p), arrival); });
}

}  // namespace splicelb::netsim
