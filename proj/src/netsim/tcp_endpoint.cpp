// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/netsim/tcp_endpoint.hpp"

#include <algorithm>
#include <vector>

namespace splicelb::netsim {

TcpEndpoint::TcpEndpoint(FlowKey key, Seq isn, TcpConfig config, Output output, TimerFn timer)
    : key_(key),
      isn_(isn),
      config_(config),
      output_(std::move(output)),
      timer_(std::move(timer)),
      mss_(config.mss),
      rto_(config.rto) {}

Seq TcpEndpoint::ack_value() const {
  return seq_add(irs_, static_cast<std::int64_t>(rcv_nxt_ + 1 + (peer_fin_consumed_ ? 1 : 0)));
}

void TcpEndpoint::connect(Timestamp now) {
  state_ = TcpState::kSynSent;
  send_control(kSyn, now);
  arm_timer(now);
}

void TcpEndpoint::accept(const Packet& syn, Timestamp now) {
  irs_ = syn.seq;
  mss_ = std::min<std::uint16_t>(config_.mss, syn.options.mss.value_or(536));
  sack_ok_ = config_.sack && syn.options.sack_permitted;
  cwnd_ = config_.initial_cwnd_segments * mss_;
  state_ = TcpState::kSynReceived;
  send_control(kSyn | kAck, now);
  arm_timer(now);
}

void TcpEndpoint::send_control(std::uint8_t flags, Timestamp now) {
  (void)now;
  Packet p;
  p.key = key_;
  p.seq = isn_;
  p.flags = flags;
  p.window = config_.window;
  if (flags & kAck) p.ack = ack_value();
  if (flags & kSyn) {
    p.options.mss = config_.mss;
    p.options.sack_permitted = config_.sack;
  }
  ++stats_.segments_sent;
  ++sent_marker_;
  output_(std::move(p));
}

void TcpEndpoint::send_pure_ack(Timestamp now) {
  (void)now;
  Packet p;
  p.key = key_;
  p.seq = seq_of(snd_nxt_);
  p.ack = ack_value();
  p.flags = kAck;
  p.window = config_.window;
  if (sack_ok_) p.options.sack_blocks = sack_blocks();
  ++stats_.segments_sent;
  ++sent_marker_;
  output_(std::move(p));
}

Payload TcpEndpoint::segment(std::uint64_t off, std::size_t max_len) const {
  auto it = std::upper_bound(chunks_.begin(), chunks_.end(), off,
                             [](std::uint64_t o, const Chunk& c) { return o < c.start; });
  --it;
  const std::size_t within = static_cast<std::size_t>(off - it->start);
  const std::size_t len = std::min<std::uint64_t>(max_len, write_end_ - off);
  if (within + len <= it->data.size()) return it->data.slice(within, len);
  // The segment spans chunks: copy it out.
  std::vector<std::uint8_t> bytes;
  bytes.reserve(len);
  std::uint64_t pos = off;
  while (bytes.size() < len) {
    const std::size_t in = static_cast<std::size_t>(pos - it->start);
    const std::size_t n = std::min(it->data.size() - in, len - bytes.size());
    auto view = it->data.bytes().subspan(in, n);
    bytes.insert(bytes.end(), view.begin(), view.end());
    pos += n;
    ++it;
  }
  return Payload(std::move(bytes));
}

void TcpEndpoint::transmit_data(std::uint64_t off, std::size_t len, Timestamp now) {
  (void)now;
  Packet p;
  p.key = key_;
  p.seq = seq_of(off);
  p.ack = ack_value();
  p.flags = kAck;
  p.window = config_.window;
  p.payload = segment(off, len);
  if (off + p.payload.size() == write_end_) p.flags |= kPsh;
  if (sack_ok_ && !ooo_.empty()) p.options.sack_blocks = sack_blocks();
  ++stats_.segments_sent;
  ++stats_.data_segments_sent;
  if (off < snd_max_) {
    ++stats_.retransmitted_segments;
    stats_.retransmitted_bytes += p.payload.size();
  }
  ++sent_marker_;
  output_(std::move(p));
}

void TcpEndpoint::transmit_fin(Timestamp now) {
  (void)now;
  Packet p;
  p.key = key_;
  p.seq = seq_of(fin_off());
  p.ack = ack_value();
  p.flags = kFin | kAck;
  p.window = config_.window;
  ++stats_.segments_sent;
  ++sent_marker_;
  output_(std::move(p));
}

void TcpEndpoint::write(Payload data, Timestamp now) {
  if (data.empty()) return;
  stats_.bytes_written += data.size();
  chunks_.push_back(Chunk{write_end_, std::move(data)});
  write_end_ += chunks_.back().data.size();
  if (state_ == TcpState::kEstablished) send_available(now);
}

void TcpEndpoint::close(Timestamp now) {
  fin_requested_ = true;
  if (state_ == TcpState::kEstablished) send_available(now);
}

void TcpEndpoint::abort(Timestamp now) {
  if (state_ == TcpState::kDone || state_ == TcpState::kAborted) return;
  send_control(kRst, now);
  state_ = TcpState::kAborted;
  stop_timer();
  if (callbacks_.on_closed) callbacks_.on_closed(true, now);
}

void TcpEndpoint::send_available(Timestamp now) {
  while (true) {
    const std::uint64_t window = std::min<std::uint64_t>(cwnd_, peer_window_);
    const std::uint64_t in_flight = snd_nxt_ - snd_una_;
    if (snd_nxt_ < write_end_) {
      const std::uint64_t want = std::min<std::uint64_t>(mss_, write_end_ - snd_nxt_);
      if (in_flight + want > window && in_flight > 0) break;
      transmit_data(snd_nxt_, static_cast<std::size_t>(want), now);
      snd_nxt_ += want;
    } else if (fin_requested_ && snd_nxt_ == write_end_) {
      transmit_fin(now);
      snd_nxt_ = write_end_ + 1;
    } else {
      break;
    }
    snd_max_ = std::max(snd_max_, snd_nxt_);
  }
  if (snd_max_ > snd_una_ && !timer_armed_) arm_timer(now);
}

void TcpEndpoint::retransmit_hole(Timestamp now) {
  // Next byte at or after retx_next_ that the peer has not reported.
  std::uint64_t off = std::max(retx_next_, snd_una_);
  for (const auto& [start, end] : sacked_) {
    if (end <= off) continue;
    if (start <= off) {
      off = end;
      continue;
    }
    break;
  }
  const std::uint64_t highest_sacked = sacked_.empty() ? snd_una_ : sacked_.rbegin()->second;
  if (off >= snd_max_) return;
  if (off > snd_una_ && off >= highest_sacked) return;
  if (off >= write_end_) {
    if (fin_requested_) transmit_fin(now);
    retx_next_ = write_end_ + 1;
    return;
  }
  std::uint64_t limit = write_end_;
  auto next = sacked_.upper_bound(off);
  if (next != sacked_.end()) limit = std::min(limit, next->first);
  const std::size_t len = static_cast<std::size_t>(std::min<std::uint64_t>(mss_, limit - off));
  transmit_data(off, len, now);
  retx_next_ = off + len;
}

void TcpEndpoint::update_scoreboard(const Packet& packet) {
  if (!sack_ok_) return;
  for (const SackBlock& b : packet.options.sack_blocks) {
    if (seq_lt(b.left, seq_of(0)) || seq_le(b.right, b.left)) continue;
    std::uint64_t l = seq_sub(b.left, seq_of(0));
    std::uint64_t r = seq_sub(b.right, seq_of(0));
    if (r > snd_max_ || r <= snd_una_) continue;
    l = std::max(l, snd_una_);
    // Merge into the interval map.
    auto it = sacked_.lower_bound(l);
    if (it != sacked_.begin() && std::prev(it)->second >= l) --it;
    while (it != sacked_.end() && it->first <= r) {
      l = std::min(l, it->first);
      r = std::max(r, it->second);
      it = sacked_.erase(it);
    }
    sacked_.emplace(l, r);
  }
}

void TcpEndpoint::release_acked() {
  while (!chunks_.empty() && chunks_.front().start + chunks_.front().data.size() <= snd_una_) {
    chunks_.pop_front();
  }
  while (!sacked_.empty() && sacked_.begin()->second <= snd_una_) sacked_.erase(sacked_.begin());
  if (!sacked_.empty() && sacked_.begin()->first < snd_una_) {
    auto node = sacked_.extract(sacked_.begin());
    node.key() = snd_una_;
    sacked_.insert(std::move(node));
  }
}

void TcpEndpoint::process_ack(const Packet& packet, Timestamp now) {
  if (!packet.has(kAck)) return;
  if (seq_lt(packet.ack, seq_of(0))) return;
  const std::uint64_t ack = seq_sub(packet.ack, seq_of(0));
  if (ack > snd_max_) return;
  peer_window_ = packet.window;
  update_scoreboard(packet);

  if (ack > snd_una_) {
    const std::uint64_t acked = ack - snd_una_;
    snd_una_ = ack;
    if (snd_nxt_ < snd_una_) snd_nxt_ = snd_una_;
    dupacks_ = 0;
    retries_ = 0;
    rto_ = config_.rto;
    release_acked();
    if (in_recovery_) {
      if (snd_una_ >= recover_) {
        in_recovery_ = false;
        cwnd_ = ssthresh_;
      } else {
        // Partial ACK: the next hole is lost too.
        cwnd_ = static_cast<std::uint32_t>(std::max<std::uint64_t>(cwnd_ > acked ? cwnd_ - acked : 0, mss_) + mss_);
        retx_next_ = snd_una_;
        retransmit_hole(now);
      }
    } else if (cwnd_ < ssthresh_) {
      cwnd_ += static_cast<std::uint32_t>(std::min<std::uint64_t>(acked, 2u * mss_));
    } else {
      cwnd_ += std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::uint64_t{mss_} * mss_ / cwnd_));
    }
    if (fin_requested_ && snd_una_ == write_end_ + 1) fin_acked_ = true;
    if (snd_una_ == snd_max_) {
      stop_timer();
    } else {
      stop_timer();
      arm_timer(now);
    }
  } else if (ack == snd_una_ && packet.payload.empty() && !packet.has(kSyn) && !packet.has(kFin) &&
             snd_max_ > snd_una_) {
    ++dupacks_;
    ++stats_.dupacks_received;
    if (!in_recovery_ && dupacks_ == config_.dupack_threshold) {
      const std::uint64_t flight = snd_max_ - snd_una_;
      ssthresh_ = static_cast<std::uint32_t>(std::max<std::uint64_t>(flight / 2, 2u * mss_));
      cwnd_ = ssthresh_ + 3u * mss_;
      in_recovery_ = true;
      recover_ = snd_max_;
      retx_next_ = snd_una_;
      ++stats_.fast_retransmits;
      retransmit_hole(now);
    } else if (in_recovery_) {
      cwnd_ += mss_;
      if (sack_ok_) retransmit_hole(now);
    }
  }
  send_available(now);
}

std::vector<SackBlock> TcpEndpoint::sack_blocks() const {
  // Coalesce out-of-order data into ranges; the most recently extended one goes first.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
  for (const auto& [off, data] : ooo_) {
    const std::uint64_t end = off + data.size();
    if (!ranges.empty() && off <= ranges.back().second) {
      ranges.back().second = std::max(ranges.back().second, end);
    } else {
      ranges.emplace_back(off, end);
    }
  }
  std::vector<SackBlock> blocks;
  auto to_block = [&](const std::pair<std::uint64_t, std::uint64_t>& r) {
    return SackBlock{seq_add(irs_, static_cast<std::int64_t>(r.first + 1)),
                     seq_add(irs_, static_cast<std::int64_t>(r.second + 1))};
  };
  std::size_t first = ranges.size();
  if (last_ooo_) {
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      if (ranges[i].first <= *last_ooo_ && *last_ooo_ < ranges[i].second) first = i;
    }
  }
  if (first < ranges.size()) blocks.push_back(to_block(ranges[first]));
  for (std::size_t i = ranges.size(); i-- > 0 && blocks.size() < kMaxSackBlocks;) {
    if (i != first) blocks.push_back(to_block(ranges[i]));
  }
  return blocks;
}

void TcpEndpoint::process_data(const Packet& packet, Timestamp now) {
  if (packet.payload.empty() && !packet.has(kFin)) return;
  const Seq base = seq_add(irs_, 1);
  if (seq_lt(packet.seq, base)) {
    send_pure_ack(now);
    return;
  }
  const std::uint64_t off = seq_sub(packet.seq, base);
  const std::uint64_t end = off + packet.payload.size();
  if (packet.has(kFin) && !peer_fin_) peer_fin_ = end;

  if (!packet.payload.empty()) {
    if (end <= rcv_nxt_) {
      // Duplicate.
    } else if (off <= rcv_nxt_) {
      Payload fresh = packet.payload.slice(static_cast<std::size_t>(rcv_nxt_ - off),
                                           static_cast<std::size_t>(end - rcv_nxt_));
      rcv_nxt_ = end;
      stats_.bytes_delivered += fresh.size();
      if (callbacks_.on_data) callbacks_.on_data(fresh, now);
      while (!ooo_.empty() && ooo_.begin()->first <= rcv_nxt_) {
        auto node = ooo_.extract(ooo_.begin());
        const std::uint64_t seg_end = node.key() + node.mapped().size();
        if (seg_end > rcv_nxt_) {
          Payload more = node.mapped().slice(static_cast<std::size_t>(rcv_nxt_ - node.key()),
                                             static_cast<std::size_t>(seg_end - rcv_nxt_));
          rcv_nxt_ = seg_end;
          stats_.bytes_delivered += more.size();
          if (callbacks_.on_data) callbacks_.on_data(more, now);
        }
      }
      if (ooo_.empty()) last_ooo_.reset();
    } else {
      auto [it, inserted] = ooo_.emplace(off, packet.payload);
      if (!inserted && it->second.size() < packet.payload.size()) it->second = packet.payload;
      last_ooo_ = off;
    }
  }
  if (peer_fin_ && !peer_fin_consumed_ && rcv_nxt_ == *peer_fin_) {
    peer_fin_consumed_ = true;
    if (callbacks_.on_peer_fin) callbacks_.on_peer_fin(now);
  }
}

void TcpEndpoint::on_segment(const Packet& packet, Timestamp now) {
  if (state_ == TcpState::kAborted || state_ == TcpState::kClosed) return;
  if (packet.has(kRst)) {
    state_ = TcpState::kAborted;
    stop_timer();
    if (callbacks_.on_closed) callbacks_.on_closed(true, now);
    return;
  }
  if (state_ == TcpState::kSynSent) {
    if (!packet.has(kSyn) || !packet.has(kAck) || packet.ack != seq_add(isn_, 1)) return;
    irs_ = packet.seq;
    mss_ = std::min<std::uint16_t>(config_.mss, packet.options.mss.value_or(536));
    sack_ok_ = config_.sack && packet.options.sack_permitted;
    cwnd_ = config_.initial_cwnd_segments * mss_;
    state_ = TcpState::kEstablished;
    stop_timer();
    retries_ = 0;
    rto_ = config_.rto;
    send_pure_ack(now);
    if (callbacks_.on_established) callbacks_.on_established(now);
    send_available(now);
    return;
  }
  if (state_ == TcpState::kSynReceived) {
    if (packet.has(kSyn) && !packet.has(kAck)) {
      send_control(kSyn | kAck, now);
      return;
    }
    if (!packet.has(kAck) || packet.ack != seq_add(isn_, 1)) return;
    state_ = TcpState::kEstablished;
    stop_timer();
    retries_ = 0;
    rto_ = config_.rto;
    if (callbacks_.on_established) callbacks_.on_established(now);
  }
  if (packet.has(kSyn)) {
    // Our ACK of the handshake was lost.
    if (packet.has(kAck)) send_pure_ack(now);
    return;
  }

  const std::uint64_t marker = sent_marker_;
  process_data(packet, now);
  process_ack(packet, now);
  if ((!packet.payload.empty() || packet.has(kFin)) && sent_marker_ == marker &&
      state_ != TcpState::kAborted) {
    send_pure_ack(now);
  }
  maybe_done(now);
}

void TcpEndpoint::arm_timer(Timestamp now) {
  const std::uint64_t gen = ++timer_gen_;
  timer_armed_ = true;
  timer_(now + rto_, [this, gen, at = now + rto_]() {
    if (gen != timer_gen_) return;
    timer_armed_ = false;
    on_timeout(at);
  });
}

void TcpEndpoint::on_timeout(Timestamp now) {
  if (state_ == TcpState::kDone || state_ == TcpState::kAborted || state_ == TcpState::kClosed) return;
  if (++retries_ > config_.max_retransmissions) {
    abort(now);
    return;
  }
  ++stats_.timeouts;
  rto_ = std::min(rto_ * 2, config_.max_rto);
  if (state_ == TcpState::kSynSent) {
    send_control(kSyn, now);
    arm_timer(now);
    return;
  }
  if (state_ == TcpState::kSynReceived) {
    send_control(kSyn | kAck, now);
    arm_timer(now);
    return;
  }
  if (snd_max_ == snd_una_) return;
  const std::uint64_t flight = snd_max_ - snd_una_;
  ssthresh_ = static_cast<std::uint32_t>(std::max<std::uint64_t>(flight / 2, 2u * mss_));
  cwnd_ = mss_;
  in_recovery_ = false;
  dupacks_ = 0;
  sacked_.clear();
  snd_nxt_ = snd_una_;
  send_available(now);
  if (!timer_armed_) arm_timer(now);
}

void TcpEndpoint::maybe_done(Timestamp now) {
  if (state_ != TcpState::kEstablished) return;
  if (fin_acked_ && peer_fin_consumed_) {
    state_ = TcpState::kDone;
    stop_timer();
    if (callbacks_.on_closed) callbacks_.on_closed(false, now);
  }
}

}  // namespace splicelb::netsim
