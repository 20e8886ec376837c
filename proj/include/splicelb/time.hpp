// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <chrono>
#include <cstdint>

namespace splicelb {

// Simulated clock. Everything in the load balancer and the simulator runs on
// simulated nanoseconds; nothing reads the wall clock except the table bench.
struct SimClock {
  using rep = std::int64_t;
  using period = std::nano;
  using duration = std::chrono::duration<rep, period>;
  using time_point = std::chrono::time_point<SimClock, duration>;
  static constexpr bool is_steady = true;
};

using Duration = SimClock::duration;
using Timestamp = SimClock::time_point;

constexpr Timestamp kTimeZero{Duration{0}};

constexpr Timestamp at_ns(std::int64_t ns) { return Timestamp{Duration{ns}}; }

constexpr std::int64_t to_ns(Timestamp t) { return t.time_since_epoch().count(); }

// Fractional microseconds rounded to the nearest nanosecond.
constexpr Duration from_us(double us) {
  return Duration{static_cast<std::int64_t>(us * 1000.0 + (us >= 0 ? 0.5 : -0.5))};
}

constexpr double to_us(Duration d) { return static_cast<double>(d.count()) / 1000.0; }

}  // namespace splicelb
