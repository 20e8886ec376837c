// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/conn_table/conn_table.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace splicelb {
namespace {

constexpr std::uint64_t kOccupied = 1ULL << 63;
constexpr std::uint64_t kHashSeedPrimary = 0x243f6a8885a308d3ULL;
constexpr std::uint64_t kHashSeedSecondary = 0x13198a2e03707344ULL;
constexpr int kMaxInsertAttempts = 64;
constexpr std::size_t kMaxSlotsPerBucket = 16;

std::uint64_t key_hi(const FlowKey& k) { return (std::uint64_t{k.src_addr} << 32) | k.dst_addr; }

std::uint64_t key_lo(const FlowKey& k) {
  return kOccupied | (std::uint64_t{k.src_port} << 24) | (std::uint64_t{k.dst_port} << 8) | k.proto;
}

FlowKey unpack_key(std::uint64_t hi, std::uint64_t lo) {
  FlowKey k;
  k.src_addr = static_cast<Addr>(hi >> 32);
  k.dst_addr = static_cast<Addr>(hi);
  k.src_port = static_cast<Port>(lo >> 24);
  k.dst_port = static_cast<Port>(lo >> 8);
  k.proto = static_cast<std::uint8_t>(lo);
  return k;
}

void backoff(int& spins) {
  if (++spins > 64) {
    std::this_thread::yield();
    spins = 0;
  }
}

}  // namespace

struct ConnTable::Slot {
  std::atomic<std::uint64_t> version{0};
  std::atomic<std::uint64_t> key_hi{0};
  std::atomic<std::uint64_t> key_lo{0};
  std::atomic<std::uint64_t> value{0};
  std::atomic<std::int64_t> ttl{0};

  void begin_write() {
    std::uint64_t v = version.load(std::memory_order_relaxed);
    version.store(v + 1, std::memory_order_relaxed);
    std::atomic_thread_fence(std::memory_order_release);
  }
  void end_write() {
    std::uint64_t v = version.load(std::memory_order_relaxed);
    version.store(v + 1, std::memory_order_release);
  }
  bool occupied_relaxed() const { return (key_lo.load(std::memory_order_relaxed) & kOccupied) != 0; }
  bool holds_relaxed(const FlowKey& k) const {
    return key_lo.load(std::memory_order_relaxed) == splicelb::key_lo(k) &&
           key_hi.load(std::memory_order_relaxed) == splicelb::key_hi(k);
  }
};

struct ConnTable::Bucket {
  std::mutex lock;
};

ConnTable::ConnTable(TableConfig config) : config_(config) {
  if (config_.bucket_count < 2 || (config_.bucket_count & (config_.bucket_count - 1)) != 0) {
    throw std::invalid_argument("bucket_count must be a power of two >= 2");
  }
  if (config_.slots_per_bucket < 1 || config_.slots_per_bucket > kMaxSlotsPerBucket) {
    throw std::invalid_argument("slots_per_bucket must be in [1, 16]");
  }
  mask_ = config_.bucket_count - 1;
  slots_ = std::make_unique<Slot[]>(config_.bucket_count * config_.slots_per_bucket);
  buckets_ = std::make_unique<Bucket[]>(config_.bucket_count);
}

ConnTable::~ConnTable() = default;

ConnTable::Slot& ConnTable::slot_at(std::size_t bucket, std::size_t slot) const {
  return slots_[bucket * config_.slots_per_bucket + slot];
}

std::pair<std::size_t, std::size_t> ConnTable::candidate_buckets(const FlowKey& key) const {
  std::size_t first = hash_value(key, kHashSeedPrimary) & mask_;
  std::size_t second = hash_value(key, kHashSeedSecondary) & mask_;
  if (second == first) second = (first + 1) & mask_;
  return {first, second};
}

void ConnTable::lock_pair(std::size_t a, std::size_t b) const {
  if (a == b) {
    buckets_[a].lock.lock();
    return;
  }
  if (a > b) std::swap(a, b);
  buckets_[a].lock.lock();
  buckets_[b].lock.lock();
}

void ConnTable::unlock_pair(std::size_t a, std::size_t b) const {
  buckets_[a].lock.unlock();
  if (a != b) buckets_[b].lock.unlock();
}

// Version-sandwiched read. Returns nullopt for an empty slot; `version` is the
// even version the read was validated against, or odd if a writer was active.
std::optional<std::pair<FlowKey, EntryHandle>> ConnTable::read_slot(const Slot& slot,
                                                                    std::uint64_t& version) const {
  for (int spins = 0;; backoff(spins)) {
    std::uint64_t before = slot.version.load(std::memory_order_acquire);
    if (before & 1) continue;
    std::uint64_t hi = slot.key_hi.load(std::memory_order_relaxed);
    std::uint64_t lo = slot.key_lo.load(std::memory_order_relaxed);
    std::uint64_t value = slot.value.load(std::memory_order_relaxed);
    std::atomic_thread_fence(std::memory_order_acquire);
    std::uint64_t after = slot.version.load(std::memory_order_relaxed);
    if (before != after) {
      lookup_retries_.fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    version = before;
    if ((lo & kOccupied) == 0) return std::nullopt;
    return std::make_pair(unpack_key(hi, lo), EntryHandle{value});
  }
}

std::optional<EntryHandle> ConnTable::lookup(const FlowKey& key, Timestamp now) {
  auto found = lookup_checked(key, now);
  if (!found) return std::nullopt;
  return found->handle;
}

std::optional<LookupResult> ConnTable::lookup_checked(const FlowKey& key, Timestamp now) {
  const auto [b1, b2] = candidate_buckets(key);
  const std::array<std::size_t, 2> buckets{b1, b2};
  const std::size_t spb = config_.slots_per_bucket;
  std::array<std::uint64_t, 2 * kMaxSlotsPerBucket> seen{};
  const std::int64_t refreshed = to_ns(now + config_.ttl_delta);

  for (;;) {
    bool restart = false;
    for (std::size_t bi = 0; bi < 2 && !restart; ++bi) {
      for (std::size_t s = 0; s < spb; ++s) {
        Slot& slot = slot_at(buckets[bi], s);
        std::uint64_t version = 0;
        auto entry = read_slot(slot, version);
        seen[bi * spb + s] = version;
        if (!entry || entry->first != key) continue;

        // Blind TTL refresh, then confirm nobody rewrote the slot under us.
        slot.ttl.store(refreshed, std::memory_order_relaxed);
        std::atomic_thread_fence(std::memory_order_seq_cst);
        if (slot.version.load(std::memory_order_acquire) != version) {
          lookup_retries_.fetch_add(1, std::memory_order_relaxed);
          restart = true;
          break;
        }
        return LookupResult{entry->first, entry->second};
      }
    }
    if (restart) continue;

    // Full miss: valid only if no examined slot changed while we scanned,
    // otherwise a concurrent relocation may have hidden the key.
    std::atomic_thread_fence(std::memory_order_acquire);
    bool stable = true;
    for (std::size_t bi = 0; bi < 2 && stable; ++bi) {
      for (std::size_t s = 0; s < spb; ++s) {
        if (slot_at(buckets[bi], s).version.load(std::memory_order_relaxed) != seen[bi * spb + s]) {
          stable = false;
          break;
        }
      }
    }
    if (stable) return std::nullopt;
    lookup_retries_.fetch_add(1, std::memory_order_relaxed);
  }
}

std::optional<std::size_t> ConnTable::find_in_bucket_locked(std::size_t bucket, const FlowKey& key) const {
  for (std::size_t s = 0; s < config_.slots_per_bucket; ++s) {
    if (slot_at(bucket, s).holds_relaxed(key)) return s;
  }
  return std::nullopt;
}

std::optional<std::size_t> ConnTable::free_slot_locked(std::size_t bucket) const {
  for (std::size_t s = 0; s < config_.slots_per_bucket; ++s) {
    if (!slot_at(bucket, s).occupied_relaxed()) return s;
  }
  return std::nullopt;
}

InsertResult ConnTable::insert(const FlowKey& key, EntryHandle handle, Timestamp now) {
  const auto [b1, b2] = candidate_buckets(key);
  const std::int64_t ttl = to_ns(now + config_.ttl_delta);
  std::vector<PathStep> path;

  for (int attempt = 0; attempt < kMaxInsertAttempts; ++attempt) {
    lock_pair(b1, b2);
    for (std::size_t b : {b1, b2}) {
      if (auto s = find_in_bucket_locked(b, key)) {
        Slot& slot = slot_at(b, *s);
        slot.begin_write();
        slot.value.store(handle.id, std::memory_order_relaxed);
        slot.ttl.store(ttl, std::memory_order_relaxed);
        slot.end_write();
        unlock_pair(b1, b2);
        return InsertResult::kReplaced;
      }
    }
    for (std::size_t b : {b1, b2}) {
      if (auto s = free_slot_locked(b)) {
        Slot& slot = slot_at(b, *s);
        slot.begin_write();
        slot.key_hi.store(key_hi(key), std::memory_order_relaxed);
        slot.key_lo.store(key_lo(key), std::memory_order_relaxed);
        slot.value.store(handle.id, std::memory_order_relaxed);
        slot.ttl.store(ttl, std::memory_order_relaxed);
        slot.end_write();
        unlock_pair(b1, b2);
        size_.fetch_add(1, std::memory_order_relaxed);
        return InsertResult::kInserted;
      }
    }
    unlock_pair(b1, b2);

    if (!search_path(key, path)) return InsertResult::kTableFull;
    // Execute back to front so every move lands in a slot that is free.
    for (std::size_t i = path.size() - 1; i > 0; --i) {
      if (!execute_move(path[i - 1], path[i])) {
        aborted_moves_.fetch_add(1, std::memory_order_relaxed);
        break;
      }
    }
    // Either the head slot is now free or a move aborted; both retry from the top.
  }
  return InsertResult::kTableFull;
}

// Breadth-first search for a chain of displacements that frees a slot in one
// of the key's candidate buckets. path[0] is the slot that will be vacated for
// the new key; path.back() is a free slot (its key field is unused).
bool ConnTable::search_path(const FlowKey& key, std::vector<PathStep>& path) const {
  struct Node {
    std::size_t bucket;
    std::size_t slot;
    FlowKey key;
    int parent;
    std::size_t depth;
  };
  const std::size_t spb = config_.slots_per_bucket;
  std::vector<Node> nodes;
  std::deque<int> frontier;
  const auto [b1, b2] = candidate_buckets(key);

  auto expand = [&](std::size_t bucket, int parent, std::size_t depth) -> int {
    for (std::size_t s = 0; s < spb; ++s) {
      std::uint64_t version = 0;
      auto entry = read_slot(slot_at(bucket, s), version);
      nodes.push_back(Node{bucket, s, entry ? entry->first : FlowKey{}, parent, depth});
      int index = static_cast<int>(nodes.size()) - 1;
      if (!entry) return index;
      frontier.push_back(index);
    }
    return -1;
  };

  int goal = expand(b1, -1, 0);
  if (goal < 0 && b2 != b1) goal = expand(b2, -1, 0);
  while (goal < 0 && !frontier.empty()) {
    int current = frontier.front();
    frontier.pop_front();
    const Node node = nodes[static_cast<std::size_t>(current)];
    if (node.depth >= config_.max_relocation_path) continue;
    const auto [c1, c2] = candidate_buckets(node.key);
    std::size_t alt = node.bucket == c1 ? c2 : c1;
    goal = expand(alt, current, node.depth + 1);
  }
  if (goal < 0) return false;

  path.clear();
  for (int i = goal; i >= 0; i = nodes[static_cast<std::size_t>(i)].parent) {
    const Node& n = nodes[static_cast<std::size_t>(i)];
    path.push_back(PathStep{n.bucket, n.slot, n.key});
  }
  std::reverse(path.begin(), path.end());
  return true;
}

bool ConnTable::execute_move(const PathStep& from, const PathStep& to) {
  lock_pair(from.bucket, to.bucket);
  Slot& src = slot_at(from.bucket, from.slot);
  Slot& dst = slot_at(to.bucket, to.slot);
  if (!src.holds_relaxed(from.key) || dst.occupied_relaxed()) {
    unlock_pair(from.bucket, to.bucket);
    return false;
  }
  // Copy first, then clear: the key is findable at every instant.
  dst.begin_write();
  dst.key_hi.store(src.key_hi.load(std::memory_order_relaxed), std::memory_order_relaxed);
  dst.key_lo.store(src.key_lo.load(std::memory_order_relaxed), std::memory_order_relaxed);
  dst.value.store(src.value.load(std::memory_order_relaxed), std::memory_order_relaxed);
  dst.ttl.store(src.ttl.load(std::memory_order_relaxed), std::memory_order_relaxed);
  dst.end_write();
  src.begin_write();
  src.key_lo.store(0, std::memory_order_relaxed);
  src.key_hi.store(0, std::memory_order_relaxed);
  src.value.store(0, std::memory_order_relaxed);
  src.ttl.store(0, std::memory_order_relaxed);
  src.end_write();
  unlock_pair(from.bucket, to.bucket);
  relocations_.fetch_add(1, std::memory_order_relaxed);
  return true;
}

bool ConnTable::remove(const FlowKey& key) {
  const auto [b1, b2] = candidate_buckets(key);
  lock_pair(b1, b2);
  for (std::size_t b : {b1, b2}) {
    if (auto s = find_in_bucket_locked(b, key)) {
      Slot& slot = slot_at(b, *s);
      slot.begin_write();
      slot.key_lo.store(0, std::memory_order_relaxed);
      slot.key_hi.store(0, std::memory_order_relaxed);
      slot.value.store(0, std::memory_order_relaxed);
      slot.ttl.store(0, std::memory_order_relaxed);
      slot.end_write();
      unlock_pair(b1, b2);
      size_.fetch_sub(1, std::memory_order_relaxed);
      return true;
    }
  }
  unlock_pair(b1, b2);
  return false;
}

std::vector<std::pair<FlowKey, EntryHandle>> ConnTable::sweep_expired(Timestamp now) {
  std::vector<std::pair<FlowKey, EntryHandle>> evicted;
  const std::int64_t cutoff = to_ns(now);
  for (std::size_t b = 0; b < config_.bucket_count; ++b) {
    bool candidate = false;
    for (std::size_t s = 0; s < config_.slots_per_bucket && !candidate; ++s) {
      const Slot& slot = slot_at(b, s);
      candidate = slot.occupied_relaxed() && slot.ttl.load(std::memory_order_relaxed) < cutoff;
    }
    if (!candidate) continue;
    std::lock_guard<std::mutex> guard(buckets_[b].lock);
    for (std::size_t s = 0; s < config_.slots_per_bucket; ++s) {
      Slot& slot = slot_at(b, s);
      if (!slot.occupied_relaxed()) continue;
      std::atomic_thread_fence(std::memory_order_seq_cst);
      if (slot.ttl.load(std::memory_order_relaxed) >= cutoff) continue;
      FlowKey key = unpack_key(slot.key_hi.load(std::memory_order_relaxed),
                               slot.key_lo.load(std::memory_order_relaxed));
      EntryHandle handle{slot.value.load(std::memory_order_relaxed)};
      slot.begin_write();
      slot.key_lo.store(0, std::memory_order_relaxed);
      slot.key_hi.store(0, std::memory_order_relaxed);
      slot.value.store(0, std::memory_order_relaxed);
      slot.ttl.store(0, std::memory_order_relaxed);
      slot.end_write();
      size_.fetch_sub(1, std::memory_order_relaxed);
      evicted.emplace_back(key, handle);
    }
  }
  return evicted;
}

std::optional<Timestamp> ConnTable::ttl_of(const FlowKey& key) const {
  const auto [b1, b2] = candidate_buckets(key);
  lock_pair(b1, b2);
  std::optional<Timestamp> out;
  for (std::size_t b : {b1, b2}) {
    if (auto s = find_in_bucket_locked(b, key)) {
      out = at_ns(slot_at(b, *s).ttl.load(std::memory_order_relaxed));
      break;
    }
  }
  unlock_pair(b1, b2);
  return out;
}

std::optional<std::size_t> ConnTable::bucket_of(const FlowKey& key) const {
  const auto [b1, b2] = candidate_buckets(key);
  lock_pair(b1, b2);
  std::optional<std::size_t> out;
  if (find_in_bucket_locked(b1, key)) {
    out = b1;
  } else if (find_in_bucket_locked(b2, key)) {
    out = b2;
  }
  unlock_pair(b1, b2);
  return out;
}

std::size_t ConnTable::bucket_fill(std::size_t bucket) const {
  std::lock_guard<std::mutex> guard(buckets_[bucket].lock);
  std::size_t n = 0;
  for (std::size_t s = 0; s < config_.slots_per_bucket; ++s) {
    if (slot_at(bucket, s).occupied_relaxed()) ++n;
  }
  return n;
}

TableStats ConnTable::stats() const {
  TableStats out;
  out.size = size();
  out.capacity = config_.bucket_count * config_.slots_per_bucket;
  out.relocations = relocations_.load(std::memory_order_relaxed);
  out.lookup_retries = lookup_retries_.load(std::memory_order_relaxed);
  out.aborted_moves = aborted_moves_.load(std::memory_order_relaxed);
  return out;
}

}  // namespace splicelb
