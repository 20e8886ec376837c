// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <unordered_set>

#include "splicelb/packet/packet.hpp"

namespace splicelb {
namespace {

std::set<std::uint64_t> covered(const std::vector<SackBlock>& blocks, Seq base) {
  std::set<std::uint64_t> bytes;
  for (const SackBlock& b : blocks) {
    for (Seq s = b.left; s != b.right; ++s) bytes.insert(seq_sub(s, base));
  }
  return bytes;
}

TEST(FlowKey, ReverseIsInvolution) {
  const FlowKey k{make_addr(10, 0, 0, 1), make_addr(10, 0, 1, 1), 40000, 80, kProtoTcp};
  EXPECT_EQ(k.reverse().reverse(), k);
  EXPECT_EQ(k.reverse().src_port, 80);
  EXPECT_NE(k.reverse(), k);
  EXPECT_LT(FlowKey{}, k);
}

TEST(FlowKey, HashIsDeterministicAndSpreads) {
  std::unordered_set<std::uint64_t> seen;
  for (Port p = 1; p <= 2000; ++p) {
    const FlowKey k{make_addr(10, 0, 0, 1), make_addr(10, 0, 1, 1), p, 80, kProtoTcp};
    EXPECT_EQ(hash_value(k), hash_value(k));
    seen.insert(hash_value(k));
  }
  EXPECT_EQ(seen.size(), 2000u);
}

TEST(Addr, ParseAndFormat) {
  EXPECT_EQ(parse_addr("10.0.2.3"), make_addr(10, 0, 2, 3));
  EXPECT_EQ(addr_to_string(make_addr(192, 168, 1, 254)), "192.168.1.254");
  EXPECT_FALSE(parse_addr("10.0.2"));
  EXPECT_FALSE(parse_addr("10.0.2.256"));
  EXPECT_FALSE(parse_addr("a.b.c.d"));
  EXPECT_FALSE(parse_addr("1.2.3.4.5"));
}

TEST(Packet, Validity) {
  Packet p;
  p.flags = kSyn;
  EXPECT_TRUE(p.valid());
  p.payload = Payload(std::string_view("x"));
  EXPECT_FALSE(p.valid());
  p.flags = kRst;
  EXPECT_FALSE(p.valid());
  p.flags = kAck;
  EXPECT_TRUE(p.valid());
  p.options.sack_blocks = {{10, 10}};
  EXPECT_FALSE(p.valid());
  p.options.sack_blocks = {{0xFFFFFFF0u, 0x10u}};
  EXPECT_TRUE(p.valid());
  EXPECT_EQ(p.seq_len(), 1u);
  p.flags = kAck | kFin;
  EXPECT_EQ(p.seq_len(), 2u);
}

TEST(Payload, SlicesShareBytes) {
  const Payload whole(std::string_view("hello world"));
  const Payload tail = whole.slice(6, 5);
  EXPECT_EQ(tail.view(), "world");
  EXPECT_EQ(tail, Payload(std::string_view("world")));
  EXPECT_EQ(whole.slice(0, 0).size(), 0u);
}

TEST(Sack, NormalizeMergesAndCaps) {
  const std::vector<SackBlock> in{{100, 200}, {150, 300}, {300, 310}, {500, 600}};
  const auto out = normalize_sack(in);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], (SackBlock{100, 310}));
  EXPECT_EQ(out[1], (SackBlock{500, 600}));

  const std::vector<SackBlock> many{{10, 20}, {30, 40}, {50, 60}, {70, 80}, {90, 100}, {5, 5}};
  const auto capped = normalize_sack(many);
  ASSERT_EQ(capped.size(), kMaxSackBlocks);
  EXPECT_EQ(capped.front(), (SackBlock{10, 20}));
}

TEST(Sack, NormalizeIsIdempotentAndPreservesCoverage) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const Seq base = static_cast<Seq>(rng());
    std::vector<SackBlock> in;
    const int n = 1 + static_cast<int>(rng() % 4);
    for (int j = 0; j < n; ++j) {
      const Seq l = seq_add(base, static_cast<std::int64_t>(rng() % 400));
      in.push_back({l, seq_add(l, static_cast<std::int64_t>(1 + rng() % 80))});
    }
    const auto once = normalize_sack(in);
    EXPECT_EQ(normalize_sack(once), once);
    EXPECT_EQ(covered(once, base), covered(in, base));
    for (std::size_t a = 0; a < once.size(); ++a) {
      for (std::size_t b = a + 1; b < once.size(); ++b) {
        const bool disjoint = seq_lt(once[a].right, once[b].left) || seq_lt(once[b].right, once[a].left);
        EXPECT_TRUE(disjoint);
      }
    }
  }
}

}  // namespace
}  // namespace splicelb
