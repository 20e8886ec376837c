// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "splicelb/packet/packet.hpp"
#include "splicelb/time.hpp"

namespace splicelb {

class MalformedPacket : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary packet layout (see docs/wire.md): a fixed 32-byte big-endian header,
// TLV-encoded options, then the payload.
constexpr std::size_t kFixedHeaderSize = 32;
constexpr std::uint16_t kCodecMagic = 0x534c;
constexpr std::uint8_t kCodecVersion = 1;

namespace tlv {
constexpr std::uint8_t kMss = 2;
constexpr std::uint8_t kSackPermitted = 4;
constexpr std::uint8_t kSackBlocks = 5;
}  // namespace tlv

std::vector<std::uint8_t> encode(const Packet& packet);
// Throws MalformedPacket on truncated, oversized or otherwise invalid input.
Packet decode(std::span<const std::uint8_t> bytes);

struct TraceRecord {
  Timestamp at;
  Packet packet;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

// Trace files: u64 LE record count, then per record a u64 LE timestamp in
// nanoseconds, a u32 LE length and the encoded packet.
std::vector<std::uint8_t> encode_trace(std::span<const TraceRecord> records);
std::vector<TraceRecord> decode_trace(std::span<const std::uint8_t> bytes);

void write_trace_file(const std::string& path, std::span<const TraceRecord> records);
std::vector<TraceRecord> read_trace_file(const std::string& path);

}  // namespace splicelb
