// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>

#include "splicelb/packet/packet.hpp"
#include "splicelb/time.hpp"

namespace splicelb {

// Stateless handshake: the SYN-ACK's ISN carries everything needed to accept
// the connection later.
//
//   bits 31..8  keyed hash of (client flow key, epoch, MSS index)
//   bits  7..5  index into kCookieMssTable
//   bits  4..0  low bits of the epoch counter
//
// A cookie is accepted during its own epoch and the next one.
class SynCookie {
 public:
  static constexpr std::array<std::uint16_t, 8> kCookieMssTable{536, 1024, 1220, 1360,
                                                                1440, 1460, 4312, 8960};

  explicit SynCookie(std::uint64_t secret, Duration epoch_length = std::chrono::seconds(64));

  struct Issued {
    Seq isn;
    std::uint16_t mss;
  };

  // `client_mss` is clamped down to the nearest table entry.
  Issued issue(const FlowKey& client_key, std::uint16_t client_mss, Timestamp now) const;

  // Returns the encoded MSS when `isn` is a valid cookie for `client_key`.
  std::optional<std::uint16_t> validate(const FlowKey& client_key, Seq isn, Timestamp now) const;

  std::uint64_t epoch_at(Timestamp now) const;

 private:
  std::uint32_t tag(const FlowKey& key, std::uint64_t epoch, unsigned mss_index) const;

  std::uint64_t secret_;
  Duration epoch_length_;
};

}  // namespace splicelb
