// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstdint>

namespace splicelb {

// TCP sequence numbers live in modulo-2^32 serial-number space.
using Seq = std::uint32_t;

constexpr Seq seq_add(Seq a, std::int64_t delta) {
  return static_cast<Seq>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(delta));
}

// Forward distance from b to a, modulo 2^32.
constexpr Seq seq_sub(Seq a, Seq b) { return static_cast<Seq>(a - b); }

// Signed distance a - b interpreted in (-2^31, 2^31].
constexpr std::int32_t seq_diff(Seq a, Seq b) { return static_cast<std::int32_t>(a - b); }

constexpr bool seq_lt(Seq a, Seq b) { return seq_diff(a, b) < 0; }
constexpr bool seq_le(Seq a, Seq b) { return seq_diff(a, b) <= 0; }
constexpr bool seq_gt(Seq a, Seq b) { return seq_diff(a, b) > 0; }
constexpr bool seq_ge(Seq a, Seq b) { return seq_diff(a, b) >= 0; }

constexpr Seq seq_max(Seq a, Seq b) { return seq_lt(a, b) ? b : a; }
constexpr Seq seq_min(Seq a, Seq b) { return seq_lt(a, b) ? a : b; }

}  // namespace splicelb
