// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>

#include "splicelb/packet/packet.hpp"
#include "splicelb/time.hpp"

namespace splicelb::netsim {

struct TcpConfig {
  std::uint16_t mss = 1460;
  bool sack = true;
  std::uint16_t window = 65535;
  Duration rto = std::chrono::milliseconds(200);
  Duration max_rto = std::chrono::seconds(30);
  std::uint32_t initial_cwnd_segments = 10;
  unsigned max_retransmissions = 15;
  std::uint8_t dupack_threshold = 3;
};

enum class TcpState { kClosed, kSynSent, kSynReceived, kEstablished, kDone, kAborted };

struct TcpStats {
  std::uint64_t segments_sent = 0;
  std::uint64_t data_segments_sent = 0;
  std::uint64_t retransmitted_segments = 0;
  std::uint64_t retransmitted_bytes = 0;
  std::uint64_t fast_retransmits = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t dupacks_received = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t bytes_delivered = 0;
};

// A small TCP: three-way handshake, cumulative and selective ACKs, fast
// retransmit with NewReno-style recovery, go-back-N on timeout with
// exponential backoff. Every data segment is acknowledged immediately.
// Offsets below are stream offsets: 0 is the byte after the SYN.
class TcpEndpoint {
 public:
  using Output = std::function<void(Packet)>;
  using TimerFn = std::function<void(Timestamp, std::function<void()>)>;

  struct Callbacks {
    std::function<void(Timestamp)> on_established;
    std::function<void(const Payload&, Timestamp)> on_data;
    std::function<void(Timestamp)> on_peer_fin;
    std::function<void(bool aborted, Timestamp)> on_closed;
  };

  // `key` is as seen on packets this endpoint sends (source = local).
  TcpEndpoint(FlowKey key, Seq isn, TcpConfig config, Output output, TimerFn timer);

  void set_callbacks(Callbacks callbacks) { callbacks_ = std::move(callbacks); }

  void connect(Timestamp now);
  void accept(const Packet& syn, Timestamp now);
  void on_segment(const Packet& packet, Timestamp now);
  void write(Payload data, Timestamp now);
  // FIN after all written data.
  void close(Timestamp now);
  void abort(Timestamp now);

  TcpState state() const { return state_; }
  const FlowKey& key() const { return key_; }
  const TcpStats& stats() const { return stats_; }
  std::uint64_t unacked_bytes() const { return snd_max_ - snd_una_; }
  std::uint32_t cwnd() const { return cwnd_; }
  bool sack_enabled() const { return sack_ok_; }
  std::uint16_t effective_mss() const { return mss_; }

 private:
  struct Chunk {
    std::uint64_t start;
    Payload data;
  };

  Seq seq_of(std::uint64_t off) const { return seq_add(isn_, static_cast<std::int64_t>(off + 1)); }
  Seq ack_value() const;
  Payload segment(std::uint64_t off, std::size_t max_len) const;
  void transmit_data(std::uint64_t off, std::size_t len, Timestamp now);
  void transmit_fin(Timestamp now);
  void send_control(std::uint8_t flags, Timestamp now);
  void send_pure_ack(Timestamp now);
  void send_available(Timestamp now);
  void retransmit_hole(Timestamp now);
  void process_ack(const Packet& packet, Timestamp now);
  void process_data(const Packet& packet, Timestamp now);
  void update_scoreboard(const Packet& packet);
  std::vector<SackBlock> sack_blocks() const;
  void arm_timer(Timestamp now);
  void stop_timer() { ++timer_gen_; timer_armed_ = false; }
  void on_timeout(Timestamp now);
  void maybe_done(Timestamp now);
  void release_acked();
  std::uint64_t send_end() const { return write_end_; }
  std::uint64_t fin_off() const { return write_end_; }

  FlowKey key_;
  Seq isn_;
  Seq irs_ = 0;
  TcpConfig config_;
  Output output_;
  TimerFn timer_;
  Callbacks callbacks_;
  TcpState state_ = TcpState::kClosed;
  std::uint16_t mss_;
  bool sack_ok_ = false;

  // Send side.
  std::deque<Chunk> chunks_;
  std::uint64_t write_end_ = 0;
  std::uint64_t snd_una_ = 0;
  std::uint64_t snd_nxt_ = 0;
  std::uint64_t snd_max_ = 0;
  bool fin_requested_ = false;
  bool fin_acked_ = false;
  std::uint32_t peer_window_ = 65535;
  std::uint32_t cwnd_ = 0;
  std::uint32_t ssthresh_ = 0xffffffffu;
  unsigned dupacks_ = 0;
  bool in_recovery_ = false;
  std::uint64_t recover_ = 0;
  std::uint64_t retx_next_ = 0;
  std::map<std::uint64_t, std::uint64_t> sacked_;  // start -> end
  Duration rto_;
  unsigned retries_ = 0;
  std::uint64_t timer_gen_ = 0;
  bool timer_armed_ = false;

  // Receive side.
  std::uint64_t rcv_nxt_ = 0;
  std::map<std::uint64_t, Payload> ooo_;
  std::optional<std::uint64_t> last_ooo_;
  std::optional<std::uint64_t> peer_fin_;
  bool peer_fin_consumed_ = false;
  std::uint64_t sent_marker_ = 0;

  TcpStats stats_;
};

}  // namespace splicelb::netsim
