// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include <gtest/gtest.h>

#include <random>

#include "splicelb/offload/offload.hpp"
#include "support/fixtures.hpp"

namespace splicelb {
namespace {

constexpr std::uint64_t k16MiB = std::uint64_t{16} << 20;

TEST(OffloadThreshold, FormulaFromRuleCosts) {
  const LatencyModel m = LatencyModel::calibrated();
  OffloadParams p;
  EXPECT_DOUBLE_EQ(rule_cost_us(m, p), 25.39 + 18.08);
  // 43.47 us / (1/3 us) * 1460
  EXPECT_EQ(formula_threshold(m, p), 190399u);
  p.per_packet_us = 0.333;
  const double by_hand = 43.47 / 0.333 * 1460.0;
  EXPECT_NEAR(static_cast<double>(formula_threshold(m, p)), by_hand, 1.0);
  p.delete_batch_max = 1;
  EXPECT_DOUBLE_EQ(rule_cost_us(m, p), 305.40 + 57.49);
}

TEST(OffloadThreshold, OverrideOnlyRaises) {
  const LatencyModel m = LatencyModel::calibrated();
  OffloadParams p;
  EXPECT_EQ(effective_threshold(m, p), std::uint64_t{1} << 20);
  p.threshold_override = 100'000;
  EXPECT_EQ(effective_threshold(m, p), formula_threshold(m, p));
  p.threshold_override.reset();
  EXPECT_EQ(effective_threshold(m, p), formula_threshold(m, p));
}

TEST(OffloadThreshold, Decisions) {
  const std::uint64_t th = std::uint64_t{1} << 20;
  EXPECT_TRUE(should_offload(k16MiB, th));
  EXPECT_FALSE(should_offload(1024, th));
  EXPECT_TRUE(should_offload(th, th));
  EXPECT_FALSE(should_offload(th - 1, th));
  EXPECT_FALSE(should_offload(std::nullopt, 0));
  std::mt19937_64 rng(2);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t x = rng() % (64u << 20), y = x + rng() % (8u << 20);
    if (should_offload(x, th)) {
      ASSERT_TRUE(should_offload(y, th));
    }
  }
}

class OffloadManagerTest : public ::testing::Test {
 protected:
  OffloadManagerTest()
      : cfg_(testing::small_config()),
        table_(cfg_.table),
        agent_(cfg_.agent, cfg_.routes, table_),
        engine_(cfg_.engine) {
    engine_.install_port_shard_rules(cfg_.agent.n_workers, cfg_.agent.backend_ports, cfg_.agent.vip,
                                     cfg_.agent.lb_addr);
  }

  OffloadManager& manager(OffloadParams params = {}) {
    manager_ = std::make_unique<OffloadManager>(params, engine_, agent_);
    return *manager_;
  }

  testing::SplicedConnection open(Port port) {
    return testing::open_spliced(agent_, port, "GET /obj/1 HTTP/1.1\r\nHost: h\r\n\r\n", t0_);
  }

  netsim::SimConfig cfg_;
  ConnTable table_;
  SpliceAgent agent_;
  FlowEngine engine_;
  std::unique_ptr<OffloadManager> manager_;
  Timestamp t0_ = at_ns(1'000'000'000);
};

TEST_F(OffloadManagerTest, RuleRewritesLikeTheWorker) {
  std::mt19937_64 rng(4);
  for (Port port = 2000; port < 2040; ++port) {
    const auto c = open(port);
    const ConnEntry& entry = *agent_.find(c.handle);
    const RuleSpec spec = make_offload_rule(entry, cfg_.agent, std::nullopt);
    EXPECT_EQ(spec.match, entry.server_key);
    for (int i = 0; i < 50; ++i) {
      Packet p = c.server_packet(kAck, rng() % 100000, "body bytes");
      // Any ACK past the last inserted region; the request tail after it is 11 bytes.
      p.ack = seq_add(p.ack, -static_cast<std::int64_t>(rng() % 11));
      ASSERT_EQ(apply_actions(p, spec.actions), agent_.rewrite_s2c(entry, p));
    }
  }
}

TEST_F(OffloadManagerTest, LargeResponseInstallsOnceSmallNever) {
  OffloadManager& m = manager();
  const auto big = open(3000);
  const auto small = open(3001);
  m.on_signal(AgentSignal{SignalKind::kResponseStarted, small.handle, 1024}, t0_);
  EXPECT_EQ(m.stats().installs, 0u);
  m.on_signal(AgentSignal{SignalKind::kResponseStarted, big.handle, k16MiB}, t0_);
  m.on_signal(AgentSignal{SignalKind::kResponseStarted, big.handle, k16MiB}, t0_);
  EXPECT_EQ(m.stats().installs, 1u);
  const ConnEntry& e = *agent_.find(big.handle);
  EXPECT_FALSE(e.offload.latch_clean);
  EXPECT_EQ(e.offload.phase, RulePhase::kInstalling);
  EXPECT_EQ(e.offload.ready_at, t0_ + from_us(305.40));
  m.poll(e.offload.ready_at);
  EXPECT_EQ(e.offload.phase, RulePhase::kActive);
}

TEST_F(OffloadManagerTest, BlockingInsertHoldsTheWorker) {
  OffloadParams p;
  p.insert_mode = UpdateMode::kBlocking;
  OffloadManager& m = manager(p);
  const auto c = open(3100);
  EXPECT_EQ(m.on_signal(AgentSignal{SignalKind::kResponseStarted, c.handle, k16MiB}, t0_), t0_ + from_us(305.40));
}

TEST_F(OffloadManagerTest, SixteenCompletionsShareOneDeleteBatch) {
  OffloadManager& m = manager();
  std::vector<testing::SplicedConnection> conns;
  for (Port port = 4000; port < 4016; ++port) conns.push_back(open(port));
  for (const auto& c : conns) m.on_signal(AgentSignal{SignalKind::kResponseStarted, c.handle, k16MiB}, t0_);
  const Timestamp t1 = engine_.device_free_at() + std::chrono::microseconds(10);
  m.poll(t1);
  for (const auto& c : conns) m.on_signal(AgentSignal{SignalKind::kResponseComplete, c.handle, 0}, t1);
  EXPECT_EQ(m.stats().delete_batches, 1u);
  EXPECT_EQ(m.stats().deletes, 16u);
  EXPECT_EQ(m.next_deadline(), t1 + from_us(18.08) * 16);
  m.poll(t1 + from_us(18.08) * 16);
  for (const auto& c : conns) EXPECT_TRUE(agent_.find(c.handle)->offload.latch_clean);
  EXPECT_EQ(engine_.live_rules(), 0u);
}

TEST_F(OffloadManagerTest, LoneCompletionFlushesAfterTimeout) {
  OffloadManager& m = manager();
  const auto c = open(4100);
  m.on_signal(AgentSignal{SignalKind::kResponseStarted, c.handle, k16MiB}, t0_);
  const Timestamp t1 = t0_ + std::chrono::milliseconds(1);
  m.on_signal(AgentSignal{SignalKind::kResponseComplete, c.handle, 0}, t1);
  EXPECT_EQ(m.next_deadline(), t1 + std::chrono::microseconds(100));
  m.poll(t1 + std::chrono::microseconds(99));
  EXPECT_EQ(m.stats().delete_batches, 0u);
  const Timestamp flush_at = t1 + std::chrono::microseconds(100);
  m.poll(flush_at);
  EXPECT_EQ(m.stats().delete_batches, 1u);
  EXPECT_EQ(m.next_deadline(), flush_at + from_us(57.49));
  EXPECT_FALSE(agent_.find(c.handle)->offload.latch_clean);
  m.poll(flush_at + from_us(57.49));
  EXPECT_TRUE(agent_.find(c.handle)->offload.latch_clean);
}

TEST_F(OffloadManagerTest, NextRequestWaitsForCleanLatch) {
  OffloadManager& m = manager();
  auto c = open(4200);
  m.on_signal(AgentSignal{SignalKind::kResponseStarted, c.handle, k16MiB}, t0_);
  const Timestamp t1 = t0_ + std::chrono::milliseconds(1);
  m.on_signal(AgentSignal{SignalKind::kResponseComplete, c.handle, 0}, t1);

  const std::string second = "GET /obj/2 HTTP/1.1\r\nHost: h\r\n\r\n";
  const AgentOutput held = agent_.handle_packet(c.client_packet(kAck | kPsh, c.request_bytes, second), t1);
  for (const Packet& p : held.packets) EXPECT_TRUE(p.payload.empty());
  EXPECT_EQ(agent_.stats().requests_deferred, 1u);

  const Timestamp clean = t1 + std::chrono::microseconds(100) + from_us(57.49);
  m.poll(t1 + std::chrono::microseconds(100));
  const AgentOutput resumed = m.poll(clean);
  std::string sent;
  for (const Packet& p : resumed.packets) {
    EXPECT_EQ(p.key, c.backend_key);
    sent += p.payload.view();
  }
  EXPECT_EQ(sent, testing::expected_server_bytes(second, cfg_.routes, c.client_key.src_addr));
  EXPECT_EQ(engine_.live_rules(), 0u);
}

TEST_F(OffloadManagerTest, IdleRuleIsReclaimed) {
  OffloadParams p;
  p.rule_idle_timeout = std::chrono::milliseconds(5);
  OffloadManager& m = manager(p);
  const auto c = open(4300);
  m.on_signal(AgentSignal{SignalKind::kResponseStarted, c.handle, k16MiB}, t0_);
  const Timestamp ready = agent_.find(c.handle)->offload.ready_at;
  m.poll(ready + std::chrono::milliseconds(4));
  EXPECT_EQ(m.stats().aged_rules, 0u);
  m.poll(ready + std::chrono::milliseconds(5));
  EXPECT_EQ(m.stats().aged_rules, 1u);
  m.poll(ready + std::chrono::milliseconds(6));  // flush
  m.poll(ready + std::chrono::milliseconds(7));  // deletion done
  EXPECT_TRUE(agent_.find(c.handle)->offload.latch_clean);
}

TEST_F(OffloadManagerTest, ConflictIsCountedNotThrown) {
  OffloadManager& m = manager();
  const auto c = open(4400);
  const RuleSpec spec = make_offload_rule(*agent_.find(c.handle), cfg_.agent, std::nullopt);
  engine_.insert_rules(std::span(&spec, 1), UpdateMode::kNonBlocking, t0_);
  m.on_signal(AgentSignal{SignalKind::kResponseStarted, c.handle, k16MiB}, t0_);
  EXPECT_EQ(m.stats().install_failures, 1u);
  EXPECT_TRUE(agent_.find(c.handle)->offload.latch_clean);
}

}  // namespace
}  // namespace splicelb
