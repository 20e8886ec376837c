// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <atomic>
#include <chrono>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "splicelb/packet/packet.hpp"
#include "splicelb/time.hpp"

namespace splicelb {

struct TableConfig {
  std::size_t bucket_count = 4096;  // power of two, >= 2
  std::size_t slots_per_bucket = 4;
  std::size_t max_relocation_path = 5;
  Duration ttl_delta = std::chrono::seconds(60);
};

// Opaque reference to a connection record owned outside the table.
struct EntryHandle {
  std::uint64_t id = 0;
  friend constexpr auto operator<=>(const EntryHandle&, const EntryHandle&) = default;
};

enum class InsertResult { kInserted, kReplaced, kTableFull };

struct TableStats {
  std::size_t size = 0;
  std::size_t capacity = 0;
  std::uint64_t relocations = 0;
  std::uint64_t lookup_retries = 0;
  std::uint64_t aborted_moves = 0;
};

// Result of a lookup, including the key that was read back from the slot so
// callers can assert the (key, value) pair was observed consistently.
struct LookupResult {
  FlowKey key;
  EntryHandle handle;
};

// Concurrent two-choice cuckoo hash table keyed by FlowKey.
//
// Readers never lock: each slot carries a version counter that is odd while a
// writer is modifying it, and a read is accepted only when the version is the
// same even value before and after. A successful lookup also refreshes the
// slot's TTL with an unsynchronized store; if the slot turns out to have been
// rewritten meanwhile, the stray refresh stays and the lookup starts over.
//
// Writers lock at most two buckets at a time. Inserts that need room search a
// displacement path without locks and then execute it back to front, one
// version-guarded move at a time.
class ConnTable {
 public:
  explicit ConnTable(TableConfig config = {});
  ~ConnTable();

  ConnTable(const ConnTable&) = delete;
  ConnTable& operator=(const ConnTable&) = delete;

  std::optional<EntryHandle> lookup(const FlowKey& key, Timestamp now);
  std::optional<LookupResult> lookup_checked(const FlowKey& key, Timestamp now);

  // A key already present has its value replaced and TTL refreshed.
  InsertResult insert(const FlowKey& key, EntryHandle handle, Timestamp now);

  bool remove(const FlowKey& key);

  // Removes and returns every entry whose TTL expired before `now`.
  std::vector<std::pair<FlowKey, EntryHandle>> sweep_expired(Timestamp now);

  std::size_t size() const { return size_.load(std::memory_order_relaxed); }
  TableStats stats() const;
  const TableConfig& config() const { return config_; }

  // Introspection for tests and tools.
  std::pair<std::size_t, std::size_t> candidate_buckets(const FlowKey& key) const;
  std::optional<Timestamp> ttl_of(const FlowKey& key) const;
  // Bucket currently holding `key`, if any.
  std::optional<std::size_t> bucket_of(const FlowKey& key) const;
  std::size_t bucket_fill(std::size_t bucket) const;

 private:
  struct Slot;
  struct Bucket;
  struct PathStep {
    std::size_t bucket;
    std::size_t slot;
    FlowKey key;  // resident expected at (bucket, slot) when the path was found
  };

  Slot& slot_at(std::size_t bucket, std::size_t slot) const;
  void lock_pair(std::size_t a, std::size_t b) const;
  void unlock_pair(std::size_t a, std::size_t b) const;

  std::optional<std::pair<FlowKey, EntryHandle>> read_slot(const Slot& slot, std::uint64_t& version) const;
  std::optional<std::size_t> find_in_bucket_locked(std::size_t bucket, const FlowKey& key) const;
  std::optional<std::size_t> free_slot_locked(std::size_t bucket) const;
  bool search_path(const FlowKey& key, std::vector<PathStep>& path) const;
  bool execute_move(const PathStep& from, const PathStep& to);

  TableConfig config_;
  std::size_t mask_;
  std::unique_ptr<Slot[]> slots_;
  std::unique_ptr<Bucket[]> buckets_;
  std::atomic<std::size_t> size_{0};
  mutable std::atomic<std::uint64_t> relocations_{0};
  mutable std::atomic<std::uint64_t> lookup_retries_{0};
  mutable std::atomic<std::uint64_t> aborted_moves_{0};
};

}  // namespace splicelb
