// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include <gtest/gtest.h>

#include <atomic>
#include <map>
#include <random>
#include <thread>

#include "splicelb/conn_table/conn_table.hpp"

namespace splicelb {
namespace {

constexpr Duration kDelta = std::chrono::seconds(60);

FlowKey key_for(std::uint64_t i) {
  return FlowKey{make_addr(10, 1, static_cast<std::uint8_t>(i >> 16), static_cast<std::uint8_t>(i >> 8)),
                 make_addr(10, 0, 0, 100), static_cast<Port>(1024 + (i & 0xff) * 97 + (i >> 8)), 80, kProtoTcp};
}

TableConfig small_table(std::size_t buckets) {
  TableConfig c;
  c.bucket_count = buckets;
  c.ttl_delta = kDelta;
  return c;
}

TEST(ConnTable, EmptyLookupMisses) {
  ConnTable t(small_table(16));
  EXPECT_FALSE(t.lookup(key_for(1), kTimeZero));
  EXPECT_FALSE(t.remove(key_for(1)));
  EXPECT_EQ(t.size(), 0u);
}

TEST(ConnTable, LookupRefreshesTtl) {
  ConnTable t(small_table(16));
  const FlowKey k = key_for(1);
  ASSERT_EQ(t.insert(k, EntryHandle{7}, at_ns(0)), InsertResult::kInserted);
  EXPECT_EQ(t.ttl_of(k), at_ns(0) + kDelta);
  const Timestamp now = at_ns(5'000'000'000);
  ASSERT_EQ(t.lookup(k, now), EntryHandle{7});
  EXPECT_EQ(t.ttl_of(k), now + kDelta);
}

TEST(ConnTable, DuplicateInsertReplaces) {
  ConnTable t(small_table(16));
  const FlowKey k = key_for(2);
  EXPECT_EQ(t.insert(k, EntryHandle{1}, kTimeZero), InsertResult::kInserted);
  EXPECT_EQ(t.insert(k, EntryHandle{2}, kTimeZero), InsertResult::kReplaced);
  EXPECT_EQ(t.lookup(k, kTimeZero), EntryHandle{2});
  EXPECT_EQ(t.size(), 1u);
}

TEST(ConnTable, InsertThenRemoveMisses) {
  ConnTable t(small_table(16));
  const FlowKey k = key_for(3);
  t.insert(k, EntryHandle{3}, kTimeZero);
  EXPECT_TRUE(t.remove(k));
  EXPECT_FALSE(t.lookup(k, kTimeZero));
  EXPECT_FALSE(t.remove(k));
}

TEST(ConnTable, TenThousandKeysAtModerateLoad) {
  ConnTable t(small_table(4096));
  for (std::uint64_t i = 0; i < 10000; ++i) {
    ASSERT_NE(t.insert(key_for(i), EntryHandle{i}, kTimeZero), InsertResult::kTableFull) << i;
  }
  for (std::uint64_t i = 0; i < 10000; ++i) {
    ASSERT_EQ(t.lookup(key_for(i), kTimeZero), EntryHandle{i});
    const auto [b1, b2] = t.candidate_buckets(key_for(i));
    const auto at = t.bucket_of(key_for(i));
    ASSERT_TRUE(at && (*at == b1 || *at == b2));
  }
  EXPECT_EQ(t.size(), 10000u);
}

TEST(ConnTable, DepthOneMoveMakesRoom) {
  ConnTable t(small_table(64));
  const std::size_t spb = t.config().slots_per_bucket;
  // Find a key whose candidate buckets can both be filled by keys that have
  // somewhere else to go.
  std::map<std::size_t, std::vector<std::uint64_t>> by_bucket;
  for (std::uint64_t i = 1; i < 200000; ++i) {
    const auto [b1, b2] = t.candidate_buckets(key_for(i));
    if (b1 != b2) by_bucket[b1].push_back(i);
  }
  const std::uint64_t target_id = 0;
  const auto [t1, t2] = t.candidate_buckets(key_for(target_id));
  ASSERT_NE(t1, t2);
  ASSERT_GE(by_bucket[t1].size(), spb);
  ASSERT_GE(by_bucket[t2].size(), spb);
  std::vector<std::uint64_t> residents;
  for (std::size_t b : {t1, t2}) {
    for (std::size_t j = 0; j < spb; ++j) residents.push_back(by_bucket[b][j]);
  }
  for (std::uint64_t r : residents) ASSERT_EQ(t.insert(key_for(r), EntryHandle{r}, kTimeZero), InsertResult::kInserted);
  ASSERT_EQ(t.bucket_fill(t1), spb);
  ASSERT_EQ(t.bucket_fill(t2), spb);

  ASSERT_EQ(t.insert(key_for(target_id), EntryHandle{target_id}, kTimeZero), InsertResult::kInserted);
  EXPECT_GE(t.stats().relocations, 1u);
  EXPECT_EQ(t.lookup(key_for(target_id), kTimeZero), EntryHandle{target_id});
  for (std::uint64_t r : residents) EXPECT_EQ(t.lookup(key_for(r), kTimeZero), EntryHandle{r});
}

TEST(ConnTable, FillUntilFullKeepsEverything) {
  ConnTable t(small_table(64));
  std::vector<std::uint64_t> inserted;
  std::uint64_t i = 0;
  for (;; ++i) {
    const InsertResult r = t.insert(key_for(i), EntryHandle{i}, kTimeZero);
    if (r == InsertResult::kTableFull) break;
    inserted.push_back(i);
  }
  EXPECT_GT(static_cast<double>(inserted.size()) / static_cast<double>(t.stats().capacity), 0.8);
  for (std::uint64_t k : inserted) ASSERT_EQ(t.lookup(key_for(k), kTimeZero), EntryHandle{k});
  EXPECT_FALSE(t.lookup(key_for(i), kTimeZero));
  EXPECT_EQ(t.size(), inserted.size());
}

TEST(ConnTable, SweepEvictsOnlyExpired) {
  ConnTable t(small_table(16));
  const Timestamp t0 = at_ns(1000);
  t.insert(key_for(1), EntryHandle{1}, t0);
  t.insert(key_for(2), EntryHandle{2}, t0 + std::chrono::seconds(10));
  EXPECT_TRUE(t.sweep_expired(t0 + kDelta).empty());
  const auto evicted = t.sweep_expired(t0 + kDelta + Duration{1});
  ASSERT_EQ(evicted.size(), 1u);
  EXPECT_EQ(evicted[0].first, key_for(1));
  EXPECT_EQ(evicted[0].second, EntryHandle{1});
  EXPECT_TRUE(t.lookup(key_for(2), kTimeZero));
}

TEST(ConnTable, RandomSequenceMatchesReference) {
  ConnTable t(small_table(128));
  std::map<FlowKey, std::uint64_t> ref;
  std::mt19937_64 rng(9);
  for (int op = 0; op < 100000; ++op) {
    const FlowKey k = key_for(rng() % 600);
    switch (rng() % 3) {
      case 0: {
        const std::uint64_t v = rng();
        const InsertResult r = t.insert(k, EntryHandle{v}, kTimeZero);
        if (r == InsertResult::kTableFull) {
          ASSERT_FALSE(ref.contains(k));
        } else {
          ASSERT_EQ(r == InsertResult::kReplaced, ref.contains(k));
          ref[k] = v;
        }
        break;
      }
      case 1:
        ASSERT_EQ(t.remove(k), ref.erase(k) == 1);
        break;
      default: {
        const auto got = t.lookup(k, kTimeZero);
        const auto it = ref.find(k);
        ASSERT_EQ(got.has_value(), it != ref.end());
        if (got) {
          ASSERT_EQ(got->id, it->second);
        }
      }
    }
    ASSERT_EQ(t.size(), ref.size());
  }
}

// Readers refresh their own keys at time X while a writer churns victim keys
// through the same buckets at time 0. A stray refresh may land on a victim,
// but can only push its expiry to X + delta.
TEST(ConnTable, StrayRefreshDelaysVictimByAtMostDelta) {
  ConnTable t(small_table(32));
  const Timestamp x = at_ns(7'000'000'000);
  std::vector<FlowKey> owned;
  for (std::uint64_t i = 0; i < 48; ++i) {
    owned.push_back(key_for(i));
    ASSERT_NE(t.insert(owned.back(), EntryHandle{i}, kTimeZero), InsertResult::kTableFull);
  }
  std::atomic<bool> stop{false};
  std::thread writer([&] {
    for (std::uint64_t round = 0; round < 4000; ++round) {
      for (std::uint64_t v = 0; v < 16; ++v) t.insert(key_for(1000 + v), EntryHandle{v}, kTimeZero);
      if (round + 1 < 4000) {
        for (std::uint64_t v = 0; v < 16; ++v) t.remove(key_for(1000 + v));
      }
    }
    stop = true;
  });
  std::vector<std::thread> readers;
  for (int r = 0; r < 2; ++r) {
    readers.emplace_back([&] {
      while (!stop) {
        for (const FlowKey& k : owned) t.lookup(k, x);
      }
    });
  }
  writer.join();
  for (auto& th : readers) th.join();

  for (std::uint64_t v = 0; v < 16; ++v) {
    const auto ttl = t.ttl_of(key_for(1000 + v));
    if (!ttl) continue;  // table full for this victim
    EXPECT_TRUE(*ttl == kTimeZero + kDelta || *ttl == x + kDelta);
  }
  const auto evicted = t.sweep_expired(x + kDelta + Duration{1});
  EXPECT_EQ(t.size(), 0u);
  EXPECT_FALSE(evicted.empty());
}

}  // namespace
}  // namespace splicelb
