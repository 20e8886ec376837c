// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include <gtest/gtest.h>

#include <random>

#include "splicelb/packet/seq.hpp"

namespace splicelb {
namespace {

// Reference arithmetic on wide integers reduced mod 2^32.
constexpr std::int64_t kMod = std::int64_t{1} << 32;

std::int64_t wide_mod(std::int64_t v) { return ((v % kMod) + kMod) % kMod; }

TEST(Seq, Basics) {
  EXPECT_TRUE(seq_lt(5, 10));
  EXPECT_FALSE(seq_lt(10, 5));
  EXPECT_FALSE(seq_lt(7, 7));
  EXPECT_TRUE(seq_le(7, 7));
  EXPECT_TRUE(seq_lt(0xFFFFFFF0u, 0x10u));
  EXPECT_TRUE(seq_gt(0x10u, 0xFFFFFFF0u));
  EXPECT_EQ(seq_sub(0x10u, 0xFFFFFFF0u), 0x20u);
  EXPECT_EQ(seq_add(0xFFFFFFFFu, 1), 0u);
  EXPECT_EQ(seq_add(0, -1), 0xFFFFFFFFu);
  EXPECT_EQ(seq_max(0xFFFFFFF0u, 0x10u), 0x10u);
  EXPECT_EQ(seq_min(0xFFFFFFF0u, 0x10u), 0xFFFFFFF0u);
}

TEST(Seq, MatchesWideIntegerOracle) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100000; ++i) {
    const Seq a = static_cast<Seq>(rng());
    const Seq b = static_cast<Seq>(rng());
    const std::int64_t delta = static_cast<std::int64_t>(rng() % (std::uint64_t{1} << 40)) - (std::int64_t{1} << 39);
    ASSERT_EQ(seq_sub(a, b), static_cast<Seq>(wide_mod(std::int64_t{a} - std::int64_t{b})));
    ASSERT_EQ(seq_add(a, delta), static_cast<Seq>(wide_mod(std::int64_t{a} + delta)));
    const std::int64_t fwd = wide_mod(std::int64_t{b} - std::int64_t{a});
    ASSERT_EQ(seq_lt(a, b), fwd > 0 && fwd < (kMod / 2));
  }
}

TEST(Seq, OrderIsAntisymmetricWithinHalfSpace) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100000; ++i) {
    const Seq a = static_cast<Seq>(rng());
    const Seq b = seq_add(a, static_cast<std::int64_t>(rng() % 0x7FFFFFFFu));
    if (a == b) continue;
    ASSERT_NE(seq_lt(a, b), seq_lt(b, a));
  }
}

}  // namespace
}  // namespace splicelb
