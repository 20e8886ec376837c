// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/packet/packet.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <sstream>

namespace splicelb {

std::string addr_to_string(Addr addr) {
  std::ostringstream out;
  out << ((addr >> 24) & 0xff) << '.' << ((addr >> 16) & 0xff) << '.' << ((addr >> 8) & 0xff)
      << '.' << (addr & 0xff);
  return out.str();
}

std::optional<Addr> parse_addr(std::string_view text) {
  Addr result = 0;
  for (int octet = 0; octet < 4; ++octet) {
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr == text.data() || value > 255) return std::nullopt;
    result = (result << 8) | value;
    text.remove_prefix(static_cast<std::size_t>(ptr - text.data()));
    if (octet < 3) {
      if (text.empty() || text.front() != '.') return std::nullopt;
      text.remove_prefix(1);
    }
  }
  if (!text.empty()) return std::nullopt;
  return result;
}

std::string FlowKey::to_string() const {
  std::ostringstream out;
  out << addr_to_string(src_addr) << ':' << src_port << "->" << addr_to_string(dst_addr) << ':'
      << dst_port;
  return out.str();
}

namespace {

constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

std::uint64_t hash_value(const FlowKey& key, std::uint64_t seed) {
  std::uint64_t hi = (std::uint64_t{key.src_addr} << 32) | key.dst_addr;
  std::uint64_t lo = (std::uint64_t{key.src_port} << 24) | (std::uint64_t{key.dst_port} << 8) | key.proto;
  return mix64(mix64(hi ^ seed ^ 0x9e3779b97f4a7c15ULL) ^ lo);
}

std::vector<SackBlock> normalize_sack(std::span<const SackBlock> blocks) {
  std::vector<SackBlock> out;
  for (SackBlock block : blocks) {
    if (!seq_lt(block.left, block.right)) continue;
    // Fold every block that touches the incoming one; the union takes the
    // position of the most recent block it absorbed.
    std::size_t anchor = out.size();
    for (std::size_t i = 0; i < out.size();) {
      const SackBlock& other = out[i];
      if (seq_le(other.left, block.right) && seq_le(block.left, other.right)) {
        block.left = seq_min(block.left, other.left);
        block.right = seq_max(block.right, other.right);
        if (anchor == out.size()) {
          anchor = i;
          ++i;
        } else {
          out.erase(out.begin() + static_cast<std::ptrdiff_t>(i));
        }
      } else {
        ++i;
      }
    }
    if (anchor == out.size()) {
      out.push_back(block);
    } else {
      out[anchor] = block;
    }
  }
  if (out.size() > kMaxSackBlocks) out.resize(kMaxSackBlocks);
  return out;
}

Payload::Payload(std::vector<std::uint8_t> bytes)
    : length_(bytes.size()) {
  if (length_ > 0) buffer_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes));
}

Payload::Payload(std::string_view text)
    : Payload(std::vector<std::uint8_t>(text.begin(), text.end())) {}

Payload::Payload(std::shared_ptr<const std::vector<std::uint8_t>> buffer, std::size_t offset,
                 std::size_t length)
    : buffer_(std::move(buffer)), offset_(offset), length_(length) {
  if (length_ == 0) {
    buffer_.reset();
    offset_ = 0;
  }
}

std::span<const std::uint8_t> Payload::bytes() const {
  if (length_ == 0) return {};
  return std::span<const std::uint8_t>(buffer_->data() + offset_, length_);
}

std::string_view Payload::view() const {
  auto span = bytes();
  return std::string_view(reinterpret_cast<const char*>(span.data()), span.size());
}

Payload Payload::slice(std::size_t offset, std::size_t length) const {
  offset = std::min(offset, length_);
  length = std::min(length, length_ - offset);
  return Payload(buffer_, offset_ + offset, length);
}

bool operator==(const Payload& a, const Payload& b) {
  if (a.length_ != b.length_) return false;
  if (a.length_ == 0) return true;
  if (a.buffer_ == b.buffer_ && a.offset_ == b.offset_) return true;
  return std::memcmp(a.buffer_->data() + a.offset_, b.buffer_->data() + b.offset_, a.length_) == 0;
}

bool Packet::valid() const {
  if (!payload.empty() && (has(kSyn) || has(kRst))) return false;
  if (options.sack_blocks.size() > kMaxSackBlocks) return false;
  for (const SackBlock& block : options.sack_blocks) {
    if (!seq_lt(block.left, block.right)) return false;
  }
  return payload.size() <= 0xffff;
}

std::string flags_to_string(std::uint8_t flags) {
  std::string out;
  if (flags & kSyn) out += 'S';
  if (flags & kAck) out += 'A';
  if (flags & kFin) out += 'F';
  if (flags & kRst) out += 'R';
  if (flags & kPsh) out += 'P';
  return out.empty() ? "." : out;
}

std::string Packet::summary() const {
  std::ostringstream out;
  out << key.to_string() << " [" << flags_to_string(flags) << "] seq=" << seq << " ack=" << ack
      << " len=" << payload.size();
  for (const SackBlock& block : options.sack_blocks) {
    out << " sack=" << block.left << '-' << block.right;
  }
  return out.str();
}

}  // namespace splicelb
