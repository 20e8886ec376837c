// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/packet/codec.hpp"

#include <fstream>
#include <iterator>

namespace splicelb {
namespace {

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void be16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void be32(std::uint32_t v) {
    be16(static_cast<std::uint16_t>(v >> 16));
    be16(static_cast<std::uint16_t>(v));
  }
  void le32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void le64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(std::span<const std::uint8_t> data) { out_.insert(out_.end(), data.begin(), data.end()); }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t remaining() const { return in_.size() - pos_; }

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint16_t be16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>((in_[pos_] << 8) | in_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t be32() {
    std::uint32_t hi = be16();
    return (hi << 16) | be16();
  }
  std::uint32_t le32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t le64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{in_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto out = in_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw MalformedPacket("truncated input");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

constexpr std::uint8_t kKnownFlags = kFin | kSyn | kRst | kPsh | kAck;

}  // namespace

std::vector<std::uint8_t> encode(const Packet& packet) {
  std::vector<std::uint8_t> options;
  Writer opt(options);
  if (packet.options.mss) {
    opt.u8(tlv::kMss);
    opt.u8(2);
    opt.be16(*packet.options.mss);
  }
  if (packet.options.sack_permitted) {
    opt.u8(tlv::kSackPermitted);
    opt.u8(0);
  }
  if (!packet.options.sack_blocks.empty()) {
    opt.u8(tlv::kSackBlocks);
    opt.u8(static_cast<std::uint8_t>(8 * packet.options.sack_blocks.size()));
    for (const SackBlock& block : packet.options.sack_blocks) {
      opt.be32(block.left);
      opt.be32(block.right);
    }
  }

  std::vector<std::uint8_t> out;
  out.reserve(kFixedHeaderSize + options.size() + packet.payload.size());
  Writer w(out);
  w.be32(packet.key.src_addr);
  w.be32(packet.key.dst_addr);
  w.be16(packet.key.src_port);
  w.be16(packet.key.dst_port);
  w.u8(packet.key.proto);
  w.u8(packet.flags);
  w.be16(packet.window);
  w.be32(packet.seq);
  w.be32(packet.ack);
  w.be16(static_cast<std::uint16_t>(options.size()));
  w.be16(static_cast<std::uint16_t>(packet.payload.size()));
  w.be16(kCodecMagic);
  w.u8(kCodecVersion);
  w.u8(0);
  w.bytes(options);
  w.bytes(packet.payload.bytes());
  return out;
}

Packet decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFixedHeaderSize) throw MalformedPacket("shorter than fixed header");
  Reader r(bytes);
  Packet p;
  p.key.src_addr = r.be32();
  p.key.dst_addr = r.be32();
  p.key.src_port = r.be16();
  p.key.dst_port = r.be16();
  p.key.proto = r.u8();
  p.flags = r.u8();
  p.window = r.be16();
  p.seq = r.be32();
  p.ack = r.be32();
  std::uint16_t options_len = r.be16();
  std::uint16_t payload_len = r.be16();
  if (r.be16() != kCodecMagic) throw MalformedPacket("bad magic");
  if (r.u8() != kCodecVersion) throw MalformedPacket("unsupported version");
  if (r.u8() != 0) throw MalformedPacket("reserved byte set");
  if ((p.flags & ~kKnownFlags) != 0) throw MalformedPacket("unknown flag bits");
  if (r.remaining() != std::size_t{options_len} + payload_len) {
    throw MalformedPacket("length fields disagree with input size");
  }

  Reader opt(r.take(options_len));
  bool seen_mss = false, seen_sackp = false, seen_blocks = false;
  while (opt.remaining() > 0) {
    std::uint8_t type = opt.u8();
    std::uint8_t len = opt.u8();
    auto value = opt.take(len);
    Reader v(value);
    switch (type) {
      case tlv::kMss:
        if (len != 2 || seen_mss) throw MalformedPacket("bad MSS option");
        p.options.mss = v.be16();
        seen_mss = true;
        break;
      case tlv::kSackPermitted:
        if (len != 0 || seen_sackp) throw MalformedPacket("bad SACK-permitted option");
        p.options.sack_permitted = true;
        seen_sackp = true;
        break;
      case tlv::kSackBlocks:
        if (len == 0 || len % 8 != 0 || len / 8 > kMaxSackBlocks || seen_blocks) {
          throw MalformedPacket("bad SACK option");
        }
        while (v.remaining() > 0) {
          SackBlock block;
          block.left = v.be32();
          block.right = v.be32();
          p.options.sack_blocks.push_back(block);
        }
        seen_blocks = true;
        break;
      default:
        throw MalformedPacket("unknown option type " + std::to_string(type));
    }
  }
  auto payload = r.take(payload_len);
  p.payload = Payload(std::vector<std::uint8_t>(payload.begin(), payload.end()));
  if (!p.valid()) throw MalformedPacket("packet violates invariants");
  return p;
}

std::vector<std::uint8_t> encode_trace(std::span<const TraceRecord> records) {
  std::vector<std::uint8_t> out;
  Writer w(out);
  w.le64(records.size());
  for (const TraceRecord& record : records) {
    auto encoded = encode(record.packet);
    w.le64(static_cast<std::uint64_t>(to_ns(record.at)));
    w.le32(static_cast<std::uint32_t>(encoded.size()));
    w.bytes(encoded);
  }
  return out;
}

std::vector<TraceRecord> decode_trace(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  std::uint64_t count = r.le64();
  // Each record needs at least a timestamp, a length and a fixed header.
  if (count > r.remaining() / (12 + kFixedHeaderSize)) throw MalformedPacket("record count too large");
  std::vector<TraceRecord> records;
  records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    TraceRecord record;
    record.at = at_ns(static_cast<std::int64_t>(r.le64()));
    std::uint32_t len = r.le32();
    record.packet = decode(r.take(len));
    records.push_back(std::move(record));
  }
  if (r.remaining() != 0) throw MalformedPacket("trailing bytes after last record");
  return records;
}

void write_trace_file(const std::string& path, std::span<const TraceRecord> records) {
  auto bytes = encode_trace(records);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open trace file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<TraceRecord> read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_trace(bytes);
}

}  // namespace splicelb
