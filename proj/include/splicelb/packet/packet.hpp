// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splicelb/packet/seq.hpp"

namespace splicelb {

using Addr = std::uint32_t;
using Port = std::uint16_t;

constexpr std::uint8_t kProtoTcp = 6;

constexpr Addr make_addr(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
  return (Addr{a} << 24) | (Addr{b} << 16) | (Addr{c} << 8) | Addr{d};
}

std::string addr_to_string(Addr addr);
// Parses dotted-quad notation; returns nullopt on malformed input.
std::optional<Addr> parse_addr(std::string_view text);

struct FlowKey {
  Addr src_addr = 0;
  Addr dst_addr = 0;
  Port src_port = 0;
  Port dst_port = 0;
  std::uint8_t proto = kProtoTcp;

  constexpr FlowKey reverse() const {
    return FlowKey{dst_addr, src_addr, dst_port, src_port, proto};
  }

  friend constexpr auto operator<=>(const FlowKey&, const FlowKey&) = default;

  std::string to_string() const;
};

// 64-bit mix of all five tuple fields. Deterministic across runs.
std::uint64_t hash_value(const FlowKey& key, std::uint64_t seed = 0);

struct FlowKeyHash {
  std::size_t operator()(const FlowKey& key) const { return hash_value(key); }
};

enum TcpFlag : std::uint8_t {
  kFin = 0x01,
  kSyn = 0x02,
  kRst = 0x04,
  kPsh = 0x08,
  kAck = 0x10,
};

struct SackBlock {
  Seq left = 0;
  Seq right = 0;

  friend constexpr bool operator==(const SackBlock&, const SackBlock&) = default;
};

constexpr std::size_t kMaxSackBlocks = 4;

struct TcpOptions {
  std::optional<std::uint16_t> mss;
  bool sack_permitted = false;
  std::vector<SackBlock> sack_blocks;

  friend bool operator==(const TcpOptions&, const TcpOptions&) = default;
};

// Merges overlapping or adjacent blocks, keeps the most recent blocks first
// and drops the oldest ones beyond kMaxSackBlocks. Blocks with left >= right
// are discarded. The input order is taken as most-recent-first.
std::vector<SackBlock> normalize_sack(std::span<const SackBlock> blocks);

// Immutable, cheaply copyable byte slice. Packets that carry the same response
// body share one backing buffer; rewriting headers never touches payload.
class Payload {
 public:
  Payload() = default;
  explicit Payload(std::vector<std::uint8_t> bytes);
  explicit Payload(std::string_view text);
  Payload(std::shared_ptr<const std::vector<std::uint8_t>> buffer, std::size_t offset,
          std::size_t length);

  std::size_t size() const { return length_; }
  bool empty() const { return length_ == 0; }
  std::span<const std::uint8_t> bytes() const;
  std::string_view view() const;
  // Sub-slice [offset, offset + length) of this payload; shares the buffer.
  Payload slice(std::size_t offset, std::size_t length) const;

  friend bool operator==(const Payload& a, const Payload& b);

 private:
  std::shared_ptr<const std::vector<std::uint8_t>> buffer_;
  std::size_t offset_ = 0;
  std::size_t length_ = 0;
};

struct Packet {
  FlowKey key;
  Seq seq = 0;
  Seq ack = 0;
  std::uint8_t flags = 0;
  std::uint16_t window = 0;
  TcpOptions options;
  Payload payload;

  bool has(TcpFlag flag) const { return (flags & flag) != 0; }
  // Sequence space consumed: payload bytes plus one each for SYN and FIN.
  std::uint32_t seq_len() const {
    return static_cast<std::uint32_t>(payload.size()) + (has(kSyn) ? 1u : 0u) + (has(kFin) ? 1u : 0u);
  }
  // Checks the data-model invariants (no payload on SYN/RST, well-formed SACK).
  bool valid() const;

  friend bool operator==(const Packet&, const Packet&) = default;

  std::string summary() const;
};

std::string flags_to_string(std::uint8_t flags);

}  // namespace splicelb

template <>
struct std::hash<splicelb::FlowKey> {
  std::size_t operator()(const splicelb::FlowKey& key) const { return splicelb::hash_value(key); }
};
