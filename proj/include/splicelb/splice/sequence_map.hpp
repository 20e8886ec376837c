// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "splicelb/packet/packet.hpp"

namespace splicelb {

// Byte offsets inside one direction of a spliced connection, 0-based and
// relative to ISN + 1. Intervals are half-open everywhere.
using StreamOffset = std::uint64_t;

struct InsertionPoint {
  StreamOffset sender_off = 0;  // inserted bytes precede the sender byte at this offset
  std::uint32_t length = 0;
  std::uint64_t cum_before = 0;  // inserted bytes at strictly earlier points
  bool acked = false;
  std::uint8_t dup_ack_count = 0;

  StreamOffset receiver_start() const { return sender_off + cum_before; }
  StreamOffset receiver_end() const { return receiver_start() + length; }
};

enum class AckRegion {
  kOutside,     // not touching any inserted region
  kAtStart,     // exactly at the first byte of an inserted region
  kInside,      // strictly inside an inserted region
  kAtEnd,       // exactly one past the last inserted byte
};

struct AckClass {
  AckRegion region = AckRegion::kOutside;
  StreamOffset sender_off = 0;  // sender bytes covered by the receiver prefix [0, ack)
  std::size_t point = 0;        // valid unless region == kOutside
};

// Ordered list of insertion points for one direction of a connection, with
// the sender <-> receiver offset translations derived from it.
class SequenceMap {
 public:
  // Appends an insertion of `length` bytes before sender byte `sender_off`.
  // Offsets must be strictly increasing; returns the new point index.
  std::size_t add(StreamOffset sender_off, std::uint32_t length);

  std::span<const InsertionPoint> points() const { return points_; }
  std::span<InsertionPoint> mutable_points() { return points_; }
  bool empty() const { return points_.empty(); }
  std::uint64_t total_inserted() const { return total_; }

  // Receiver offset of sender byte `sender_off`. Insertions at exactly
  // `sender_off` are counted: they precede the byte.
  StreamOffset to_receiver(StreamOffset sender_off) const;

  // Number of sender bytes inside the receiver prefix [0, receiver_off).
  StreamOffset sender_prefix(StreamOffset receiver_off) const;

  // Classifies a cumulative acknowledgement expressed in receiver offsets.
  AckClass classify(StreamOffset receiver_ack) const;

  // Receiver-space interval mapped to sender space, clipping inserted bytes.
  // Returns nullopt when the interval covers only inserted bytes.
  std::optional<std::pair<StreamOffset, StreamOffset>> to_sender_range(StreamOffset left,
                                                                       StreamOffset right) const;

 private:
  std::vector<InsertionPoint> points_;
  std::uint64_t total_ = 0;
};

}  // namespace splicelb
