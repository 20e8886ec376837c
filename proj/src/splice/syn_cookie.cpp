// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/splice/syn_cookie.hpp"

namespace splicelb {

SynCookie::SynCookie(std::uint64_t secret, Duration epoch_length)
    : secret_(secret), epoch_length_(epoch_length) {}

std::uint64_t SynCookie::epoch_at(Timestamp now) const {
  auto ns = to_ns(now);
  return ns < 0 ? 0 : static_cast<std::uint64_t>(ns / epoch_length_.count());
}

std::uint32_t SynCookie::tag(const FlowKey& key, std::uint64_t epoch, unsigned mss_index) const {
  std::uint64_t h = hash_value(key, secret_ ^ (epoch * 0x9e3779b97f4a7c15ULL) ^ (std::uint64_t{mss_index} << 56));
  return static_cast<std::uint32_t>(h >> 40);  // 24 bits
}

SynCookie::Issued SynCookie::issue(const FlowKey& client_key, std::uint16_t client_mss, Timestamp now) const {
  unsigned index = 0;
  for (unsigned i = 0; i < kCookieMssTable.size(); ++i) {
    if (kCookieMssTable[i] <= client_mss) index = i;
  }
  std::uint64_t epoch = epoch_at(now);
  Seq isn = (tag(client_key, epoch, index) << 8) | (index << 5) | static_cast<Seq>(epoch & 0x1f);
  return Issued{isn, kCookieMssTable[index]};
}

std::optional<std::uint16_t> SynCookie::validate(const FlowKey& client_key, Seq isn, Timestamp now) const {
  const unsigned index = (isn >> 5) & 0x7;
  const std::uint64_t low = isn & 0x1f;
  const std::uint64_t current = epoch_at(now);
  for (std::uint64_t back = 0; back <= 1 && back <= current; ++back) {
    std::uint64_t epoch = current - back;
    if ((epoch & 0x1f) != low) continue;
    if ((isn >> 8) == tag(client_key, epoch, index)) return kCookieMssTable[index];
  }
  return std::nullopt;
}

}  // namespace splicelb
