// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/splice/sequence_map.hpp"

#include <stdexcept>

namespace splicelb {

std::size_t SequenceMap::add(StreamOffset sender_off, std::uint32_t length) {
  if (length == 0) throw std::invalid_argument("empty insertion");
  if (!points_.empty() && sender_off <= points_.back().sender_off) {
    throw std::invalid_argument("insertion offsets must be strictly increasing");
  }
  InsertionPoint point;
  point.sender_off = sender_off;
  point.length = length;
  point.cum_before = total_;
  points_.push_back(point);
  total_ += length;
  return points_.size() - 1;
}

StreamOffset SequenceMap::to_receiver(StreamOffset sender_off) const {
  std::uint64_t shift = 0;
  for (const InsertionPoint& p : points_) {
    if (p.sender_off > sender_off) break;
    shift += p.length;
  }
  return sender_off + shift;
}

StreamOffset SequenceMap::sender_prefix(StreamOffset receiver_off) const {
  std::uint64_t inserted = 0;
  for (const InsertionPoint& p : points_) {
    if (receiver_off <= p.receiver_start()) break;
    if (receiver_off < p.receiver_end()) return p.sender_off;
    inserted += p.length;
  }
  return receiver_off - inserted;
}

AckClass SequenceMap::classify(StreamOffset receiver_ack) const {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const InsertionPoint& p = points_[i];
    const StreamOffset start = p.receiver_start();
    const StreamOffset end = p.receiver_end();
    if (receiver_ack < start) {
      return AckClass{AckRegion::kOutside, receiver_ack - p.cum_before, 0};
    }
    if (receiver_ack == start) return AckClass{AckRegion::kAtStart, p.sender_off, i};
    if (receiver_ack < end) return AckClass{AckRegion::kInside, p.sender_off, i};
    if (receiver_ack == end) return AckClass{AckRegion::kAtEnd, p.sender_off, i};
  }
  return AckClass{AckRegion::kOutside, receiver_ack - total_, 0};
}

std::optional<std::pair<StreamOffset, StreamOffset>> SequenceMap::to_sender_range(StreamOffset left,
                                                                                  StreamOffset right) const {
  StreamOffset l = sender_prefix(left);
  StreamOffset r = sender_prefix(right);
  if (l >= r) return std::nullopt;
  return std::make_pair(l, r);
}

}  // namespace splicelb
