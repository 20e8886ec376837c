// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/bench/oracles.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "splicelb/conn_table/conn_table.hpp"
#include "splicelb/flow_engine/flow_engine.hpp"
#include "splicelb/offload/offload.hpp"
#include "splicelb/packet/codec.hpp"
#include "splicelb/splice/agent.hpp"

namespace splicelb::bench {

void OracleResult::fail(std::string what) {
  ++failures;
  if (counterexamples.size() < 8) counterexamples.push_back(std::move(what));
}

namespace {

constexpr std::size_t kMaxCounterexamples = 8;

RouteConfig oracle_routes() {
  RouteConfig routes;
  routes.pools = {BackendPool{"p", {Backend{make_addr(10, 0, 2, 1), 8080, 1}}}};
  routes.default_pool = "p";
  return routes;
}

// ---- mapping ---------------------------------------------------------------

struct PointSpec {
  std::uint64_t sender_off;
  std::uint32_t length;
};

// The receiver byte stream written out byte by byte. Each entry labels one
// byte: a sender offset (>= 0) or an inserted byte of point -(label + 1).
struct StreamModel {
  std::uint64_t sender_len = 0;
  std::vector<std::int64_t> labels;
  std::vector<std::uint64_t> sender_pos;  // receiver position of sender byte s, s in [0, sender_len]
  std::vector<std::uint64_t> sender_before;  // sender bytes among labels[0, r)

  StreamModel(std::uint64_t len, const std::vector<PointSpec>& points) : sender_len(len) {
    std::size_t pi = 0;
    for (std::uint64_t s = 0; s <= len; ++s) {
      while (pi < points.size() && points[pi].sender_off == s) {
        for (std::uint32_t i = 0; i < points[pi].length; ++i) labels.push_back(-static_cast<std::int64_t>(pi) - 1);
        ++pi;
      }
      sender_pos.push_back(labels.size());
      if (s < len) labels.push_back(static_cast<std::int64_t>(s));
    }
    sender_before.assign(labels.size() + 1, 0);
    for (std::size_t r = 0; r < labels.size(); ++r) sender_before[r + 1] = sender_before[r] + (labels[r] >= 0 ? 1 : 0);
  }

  std::uint64_t receiver_len() const { return labels.size(); }
  std::int64_t inserted_point(std::uint64_t r) const { return labels[r] < 0 ? -labels[r] - 1 : -1; }

  struct Class {
    AckRegion region;
    std::uint64_t forward;  // sender bytes below the ACK, for kOutside
    std::size_t point;
  };

  Class classify(std::uint64_t r) const {
    const std::uint64_t n = receiver_len();
    const std::int64_t here = r < n ? inserted_point(r) : -1;
    const std::int64_t prev = r > 0 ? inserted_point(r - 1) : -1;
    if (here >= 0 && prev != here) return {AckRegion::kAtStart, 0, static_cast<std::size_t>(here)};
    if (here >= 0 && prev == here) return {AckRegion::kInside, 0, static_cast<std::size_t>(here)};
    if (prev >= 0) return {AckRegion::kAtEnd, 0, static_cast<std::size_t>(prev)};
    return {AckRegion::kOutside, sender_before[r], 0};
  }

  std::optional<std::pair<std::uint64_t, std::uint64_t>> sender_range(std::uint64_t l, std::uint64_t r) const {
    std::optional<std::uint64_t> lo, hi;
    for (std::uint64_t i = l; i < r; ++i) {
      if (labels[i] < 0) continue;
      const auto s = static_cast<std::uint64_t>(labels[i]);
      if (!lo) lo = s;
      hi = s + 1;
    }
    if (!lo) return std::nullopt;
    return std::make_pair(*lo, *hi);
  }
};

std::string describe_case(std::uint64_t index, std::uint64_t len, const std::vector<PointSpec>& points,
                          const ConnEntry& e) {
  std::ostringstream os;
  os << "case " << index << ": sender_len=" << len << " isn_client=" << e.isn_client
     << " isn_lb_back=" << e.isn_lb_back << " points=[";
  for (std::size_t i = 0; i < points.size(); ++i) {
    os << (i ? " " : "") << "(" << points[i].sender_off << "," << points[i].length << ")";
  }
  os << "]";
  return os.str();
}

const char* kind_name(MappedAckKind k) {
  switch (k) {
    case MappedAckKind::kForward:
      return "forward";
    case MappedAckKind::kSuppress:
      return "suppress";
    case MappedAckKind::kRetransmitInserted:
      return "retransmit";
  }
  return "?";
}

// Runs one case. `acks` are receiver offsets in [0, receiver_len]; seq and
// SACK queries are chosen here.
void check_mapping_case(SpliceAgent& agent, std::uint64_t index, std::uint64_t len,
                        const std::vector<PointSpec>& points, Seq isn_client, Seq isn_back,
                        const std::vector<std::uint64_t>& acks, const std::vector<std::uint64_t>& seqs,
                        const std::vector<std::pair<std::uint64_t, std::uint64_t>>& sacks, OracleResult& res) {
  const StreamModel model(len, points);
  ConnEntry e;
  e.isn_client = isn_client;
  e.isn_lb_back = isn_back;
  for (const PointSpec& p : points) e.insertions.add(p.sender_off, p.length);
  const std::uint8_t threshold = agent.config().dup_ack_threshold;

  for (std::uint64_t s : seqs) {
    ++res.checks;
    const Seq got = agent.map_seq_c2s(e, seq_add(e.client_base(), static_cast<std::int64_t>(s)));
    const Seq want = seq_add(e.backend_base(), static_cast<std::int64_t>(model.sender_pos[s]));
    if (got != want) {
      res.fail(describe_case(index, len, points, e) + " map_seq_c2s(sender " + std::to_string(s) +
               ") = backend+" + std::to_string(seq_sub(got, e.backend_base())) + ", want backend+" +
               std::to_string(model.sender_pos[s]));
    }
  }

  for (auto [l, r] : sacks) {
    ++res.checks;
    const auto got = e.insertions.to_sender_range(l, r);
    const auto want = model.sender_range(l, r);
    if (got != want) {
      res.fail(describe_case(index, len, points, e) + " sack [" + std::to_string(l) + "," + std::to_string(r) +
               ") maps wrong");
    }
  }

  std::optional<std::size_t> run_point;
  unsigned run = 0;
  for (std::size_t i = 0; i < acks.size(); ++i) {
    const std::uint64_t r = acks[i];
    const StreamModel::Class cls = model.classify(r);
    MappedAck want;
    if (cls.region == AckRegion::kAtStart) {
      run = run_point == cls.point ? run + 1 : 1;
      run_point = cls.point;
      if (run >= threshold) {
        want = MappedAck{MappedAckKind::kRetransmitInserted, 0, cls.point};
        run = 0;
      } else {
        want = MappedAck{MappedAckKind::kSuppress, 0, cls.point};
      }
    } else {
      run_point.reset();
      run = 0;
      if (cls.region == AckRegion::kOutside) {
        want = MappedAck{MappedAckKind::kForward, seq_add(e.client_base(), static_cast<std::int64_t>(cls.forward)), 0};
      } else {
        want = MappedAck{MappedAckKind::kSuppress, 0, cls.point};
      }
    }
    ++res.checks;
    const MappedAck got = agent.map_ack_s2c(e, seq_add(e.backend_base(), static_cast<std::int64_t>(r)));
    if (got != want) {
      std::ostringstream os;
      os << describe_case(index, len, points, e) << " ack #" << i << " at receiver " << r << ": got "
         << kind_name(got.kind) << " ack=client+" << seq_sub(got.ack, e.client_base()) << " point=" << got.point
         << ", want " << kind_name(want.kind) << " ack=client+" << seq_sub(want.ack, e.client_base())
         << " point=" << want.point;
      res.fail(os.str());
    }
  }
}

// The two-insertion example: 100 bytes inserted before sender bytes 100 and
// 1000 of a 1500-byte stream, so receiver regions [100, 200) and [1100, 1200).
void anchor_cases(SpliceAgent& agent, OracleResult& res) {
  const std::vector<PointSpec> points{{100, 100}, {1000, 100}};
  const Seq isns[][2] = {{0, 0}, {1000, 5000}, {0xfffffc00u, 0xffffff00u}};
  for (const auto& isn : isns) {
    ConnEntry e;
    e.isn_client = isn[0];
    e.isn_lb_back = isn[1];
    for (const PointSpec& p : points) e.insertions.add(p.sender_off, p.length);
    auto at_back = [&](std::uint64_t r) { return seq_add(e.backend_base(), static_cast<std::int64_t>(r)); };
    auto at_client = [&](std::uint64_t s) { return seq_add(e.client_base(), static_cast<std::int64_t>(s)); };
    auto expect_seq = [&](std::uint64_t sender, std::uint64_t receiver) {
      ++res.checks;
      if (agent.map_seq_c2s(e, at_client(sender)) != at_back(receiver)) {
        res.fail("anchor: seq " + std::to_string(sender) + " should map to " + std::to_string(receiver));
      }
    };
    auto expect_ack = [&](std::uint64_t receiver, MappedAck want) {
      ++res.checks;
      const MappedAck got = agent.map_ack_s2c(e, at_back(receiver));
      if (got != want) {
        res.fail("anchor: ack " + std::to_string(receiver) + " got " + kind_name(got.kind) + " " +
                 std::to_string(seq_sub(got.ack, e.client_base())) + ", want " + kind_name(want.kind) + " " +
                 std::to_string(seq_sub(want.ack, e.client_base())));
      }
    };
    const MappedAck sup0{MappedAckKind::kSuppress, 0, 0};
    const MappedAck sup1{MappedAckKind::kSuppress, 0, 1};
    auto fwd = [&](std::uint64_t s) { return MappedAck{MappedAckKind::kForward, at_client(s), 0}; };

    expect_seq(500, 600);
    expect_seq(99, 99);
    expect_seq(100, 200);
    expect_seq(999, 1099);
    expect_seq(1000, 1200);
    expect_seq(1500, 1700);

    expect_ack(99, fwd(99));
    expect_ack(100, sup0);
    expect_ack(100, sup0);
    expect_ack(100, MappedAck{MappedAckKind::kRetransmitInserted, 0, 0});
    expect_ack(100, sup0);
    expect_ack(150, sup0);
    expect_ack(199, sup0);
    expect_ack(200, sup0);
    expect_ack(201, fwd(101));
    expect_ack(1099, fwd(999));
    expect_ack(1100, sup1);
    expect_ack(1100, sup1);
    expect_ack(1200, sup1);  // breaks the duplicate run
    expect_ack(1100, sup1);
    expect_ack(1100, sup1);
    expect_ack(1100, MappedAck{MappedAckKind::kRetransmitInserted, 0, 1});
    expect_ack(1201, fwd(1001));
    expect_ack(1700, fwd(1500));
    ++res.cases;

    // The same case through the model, all offsets.
    std::vector<std::uint64_t> all_acks, all_seqs;
    for (std::uint64_t r = 0; r <= 1700; ++r) all_acks.push_back(r);
    for (std::uint64_t s = 0; s <= 1500; ++s) all_seqs.push_back(s);
    check_mapping_case(agent, 0, 1500, points, isn[0], isn[1], all_acks, all_seqs,
                       {{100, 200}, {90, 210}, {150, 1150}, {1100, 1200}, {1199, 1700}}, res);
    ++res.cases;
  }
}

}  // namespace

OracleResult run_mapping_oracle(std::uint64_t cases, std::uint64_t seed) {
  OracleResult res;
  res.kind = "mapping";
  ConnTable table(TableConfig{});
  SpliceAgent agent(AgentConfig{}, oracle_routes(), table);
  anchor_cases(agent, res);

  std::mt19937_64 rng(seed);
  auto uniform = [&](std::uint64_t lo, std::uint64_t hi) { return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng); };
  while (res.cases < cases) {
    const std::uint64_t index = res.cases;
    const std::uint64_t len = uniform(0, 9) == 0 ? uniform(0, 8) : uniform(1, 4000);
    const std::size_t k = std::min<std::uint64_t>(uniform(0, 5), len + 1);
    std::vector<std::uint64_t> offs;
    while (offs.size() < k) {
      const std::uint64_t o = uniform(0, len);
      if (std::find(offs.begin(), offs.end(), o) == offs.end()) offs.push_back(o);
    }
    std::sort(offs.begin(), offs.end());
    std::vector<PointSpec> points;
    for (std::uint64_t o : offs) {
      points.push_back(PointSpec{o, static_cast<std::uint32_t>(uniform(0, 3) == 0 ? uniform(1, 3) : uniform(1, 300))});
    }
    const StreamModel model(len, points);
    const std::uint64_t n = model.receiver_len();

    std::vector<std::uint64_t> interesting{0, n};
    for (std::uint64_t r = 0; r < n; ++r) {
      const bool boundary = (model.labels[r] < 0) != (r == 0 || model.labels[r - 1] < 0) ||
                            (r + 1 < n && (model.labels[r] < 0) != (model.labels[r + 1] < 0));
      if (boundary) {
        for (std::uint64_t d : {r - 1, r, r + 1, r + 2}) {
          if (r + 1 >= d && d <= n) interesting.push_back(d);
        }
      }
    }
    auto pick_ack = [&] { return uniform(0, 2) == 0 ? uniform(0, n) : interesting[uniform(0, interesting.size() - 1)]; };
    std::vector<std::uint64_t> acks;
    const std::size_t m = uniform(8, 40);
    while (acks.size() < m) {
      const std::uint64_t a = pick_ack();
      const std::size_t repeat = uniform(0, 2) == 0 ? uniform(2, 5) : 1;
      for (std::size_t i = 0; i < repeat; ++i) acks.push_back(a);
    }
    if (uniform(0, 1) == 0) std::stable_sort(acks.begin(), acks.end());

    std::vector<std::uint64_t> seqs;
    if (len <= 256) {
      for (std::uint64_t s = 0; s <= len; ++s) seqs.push_back(s);
    } else {
      seqs = {0, len};
      for (std::uint64_t o : offs) {
        for (std::uint64_t d : {o - 1, o, o + 1}) {
          if (o + 1 >= d && d <= len) seqs.push_back(d);
        }
      }
      for (int i = 0; i < 32; ++i) seqs.push_back(uniform(0, len));
    }
    std::vector<std::pair<std::uint64_t, std::uint64_t>> sacks;
    for (int i = 0; i < 12; ++i) {
      std::uint64_t a = pick_ack(), b = pick_ack();
      if (a > b) std::swap(a, b);
      if (a == b) continue;
      sacks.emplace_back(a, b);
    }
    const Seq isn_client = static_cast<Seq>(uniform(0, 3) == 0 ? 0xffffffffu - uniform(0, 5000) : rng());
    const Seq isn_back = uniform(0, 1) == 0 ? isn_client : static_cast<Seq>(rng());
    check_mapping_case(agent, index, len, points, isn_client, isn_back, acks, seqs, sacks, res);
    ++res.cases;
  }
  return res;
}

// ---- engine differential -------------------------------------------------------

OracleResult run_engine_diff_oracle(std::uint64_t packets, std::uint64_t seed) {
  OracleResult res;
  res.kind = "engine-diff";
  ConnTable table(TableConfig{});
  AgentConfig config;
  SpliceAgent agent(config, oracle_routes(), table);
  std::mt19937_64 rng(seed);
  auto uniform = [&](std::uint64_t lo, std::uint64_t hi) { return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng); };

  std::vector<std::uint8_t> bytes(1 << 16);
  for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
  auto buffer = std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes));

  std::uint64_t connection = 0;
  while (res.cases < packets) {
    ++connection;
    ConnEntry e;
    e.state = SpliceState::kEstablished;
    e.client_key = FlowKey{make_addr(10, 1, static_cast<std::uint8_t>(uniform(0, 255)),
                                     static_cast<std::uint8_t>(uniform(1, 254))),
                           config.vip, static_cast<Port>(uniform(1024, 65535)), config.vip_port, kProtoTcp};
    e.server_key = FlowKey{make_addr(10, 0, 2, static_cast<std::uint8_t>(uniform(1, 254))), config.lb_addr,
                           static_cast<Port>(uniform(1, 65535)), static_cast<Port>(uniform(1024, 65535)), kProtoTcp};
    e.isn_client = static_cast<Seq>(rng());
    e.isn_lb_back = uniform(0, 1) == 0 ? e.isn_client : static_cast<Seq>(rng());
    e.isn_server = static_cast<Seq>(rng());
    e.isn_lb_front = static_cast<Seq>(rng());
    std::uint64_t off = 0;
    for (std::uint64_t k = uniform(0, 4); k > 0; --k) {
      off += uniform(1, 3000);
      e.insertions.add(off, static_cast<std::uint32_t>(uniform(1, 400)));
    }
    const std::uint64_t acked_floor =
        e.insertions.empty() ? 0 : e.insertions.points().back().receiver_end();

    FlowEngine engine;
    const RuleSpec spec = make_offload_rule(e, config, std::nullopt);
    const Timestamp t0 = at_ns(static_cast<std::int64_t>(connection) * 1000);
    const InsertOutcome outcome = engine.insert_rules(std::span(&spec, 1), UpdateMode::kNonBlocking, t0);

    auto base_packet = [&] {
      Packet p;
      p.key = e.server_key;
      p.seq = seq_add(e.server_base(), static_cast<std::int64_t>(uniform(0, 1ull << 31)));
      p.ack = seq_add(e.backend_base(), static_cast<std::int64_t>(acked_floor + uniform(0, 1ull << 24)));
      p.flags = kAck;
      if (uniform(0, 1)) p.flags |= kPsh;
      p.window = static_cast<std::uint16_t>(uniform(0, 65535));
      const std::size_t len = uniform(0, 3) == 0 ? 0 : uniform(1, 1460);
      p.payload = Payload(buffer, uniform(0, buffer->size() - len), len);
      return p;
    };

    // Before the rule is ready the packet must take the worker path.
    {
      ++res.checks;
      if (outcome.completes_at > t0 && !std::holds_alternative<Missed>(engine.process(base_packet(), t0))) {
        res.fail("connection " + std::to_string(connection) + ": packet matched before the rule was ready");
      }
    }
    const Timestamp now = outcome.completes_at;
    const std::uint64_t batch = std::min<std::uint64_t>(packets - res.cases, 10);
    for (std::uint64_t i = 0; i < batch; ++i) {
      const Packet p = base_packet();
      const Packet want = agent.rewrite_s2c(e, p);
      ProcessResult got = engine.process(p, now);
      ++res.cases;
      ++res.checks;
      const auto* m = std::get_if<Matched>(&got);
      if (m == nullptr || m->egress != Egress::kHairpin) {
        res.fail("connection " + std::to_string(connection) + ": " + p.summary() + " was not hairpinned");
        continue;
      }
      if (encode(m->packet) != encode(want) || !(m->packet == want)) {
        res.fail("connection " + std::to_string(connection) + ": engine " + m->packet.summary() + " != worker " +
                 want.summary() + " for input " + p.summary());
      }
    }

    // Packets the engine must leave to the worker.
    std::vector<Packet> negatives;
    for (std::uint8_t extra : {std::uint8_t{kFin}, std::uint8_t{kRst}, std::uint8_t{kSyn}}) {
      Packet p = base_packet();
      p.flags |= extra;
      if (extra != kFin) p.payload = Payload();
      negatives.push_back(p);
    }
    {
      Packet p = base_packet();
      p.options.sack_blocks = {SackBlock{seq_add(p.ack, 100), seq_add(p.ack, 200)}};
      negatives.push_back(p);
      Packet q = base_packet();
      q.key.src_port = static_cast<Port>(q.key.src_port + 1);
      negatives.push_back(q);
    }
    for (const Packet& p : negatives) {
      ++res.checks;
      if (!std::holds_alternative<Missed>(engine.process(p, now))) {
        res.fail("connection " + std::to_string(connection) + ": " + p.summary() + " must not match");
      }
    }
  }
  return res;
}

// ---- table -------------------------------------------------------------------

namespace {

FlowKey table_key(std::uint32_t owner, std::uint32_t index) {
  return FlowKey{make_addr(10, static_cast<std::uint8_t>(owner), static_cast<std::uint8_t>(index >> 8),
                           static_cast<std::uint8_t>(index)),
                 make_addr(10, 0, 0, 100), static_cast<Port>(1024 + (index * 7919u) % 60000), 80, kProtoTcp};
}

// Values carry a fingerprint of their key so any (key, value) pair read from
// the table can be checked for consistency without knowing who wrote it.
std::uint64_t fingerprint(const FlowKey& key) { return hash_value(key, 0x7ab1e) & 0xffffffffu; }
EntryHandle value_for(const FlowKey& key, std::uint32_t generation) {
  return EntryHandle{(fingerprint(key) << 32) | generation};
}
bool consistent(const LookupResult& r) { return (r.handle.id >> 32) == fingerprint(r.key); }

}  // namespace

OracleResult run_table_sequential(std::uint64_t ops, std::uint64_t seed) {
  OracleResult res;
  res.kind = "table-sequential";
  TableConfig cfg;
  cfg.bucket_count = 256;
  cfg.slots_per_bucket = 4;
  cfg.ttl_delta = std::chrono::seconds(10);
  ConnTable table(cfg);
  struct Ref {
    EntryHandle handle;
    Timestamp ttl;
  };
  std::unordered_map<FlowKey, Ref, FlowKeyHash> ref;
  std::mt19937_64 rng(seed);
  auto uniform = [&](std::uint64_t lo, std::uint64_t hi) { return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng); };
  Timestamp now = at_ns(1'000'000'000);
  const std::uint32_t universe = 1200;  // more keys than slots, so inserts can fail

  for (std::uint64_t i = 0; i < ops; ++i) {
    ++res.cases;
    const FlowKey key = table_key(1, static_cast<std::uint32_t>(uniform(0, universe - 1)));
    const std::uint64_t op = uniform(0, 99);
    auto it = ref.find(key);
    std::ostringstream ctx;
    ctx << "op " << i << " key " << key.to_string() << ": ";
    if (op < 35) {
      const EntryHandle h{uniform(1, 1ull << 40)};
      const InsertResult r = table.insert(key, h, now);
      ++res.checks;
      if (it != ref.end()) {
        if (r != InsertResult::kReplaced) res.fail(ctx.str() + "insert of a present key did not replace");
        it->second = Ref{h, now + cfg.ttl_delta};
      } else if (r == InsertResult::kInserted) {
        ref.emplace(key, Ref{h, now + cfg.ttl_delta});
      } else if (r == InsertResult::kTableFull) {
        for (const auto& [k, v] : ref) {
          ++res.checks;
          if (!table.bucket_of(k)) res.fail(ctx.str() + "failed insert lost " + k.to_string());
        }
      } else {
        res.fail(ctx.str() + "insert of an absent key reported replace");
      }
    } else if (op < 75) {
      const auto got = table.lookup_checked(key, now);
      ++res.checks;
      if (it == ref.end()) {
        if (got) res.fail(ctx.str() + "lookup found an absent key");
      } else if (!got || got->key != key || got->handle != it->second.handle) {
        res.fail(ctx.str() + "lookup result differs from reference");
      } else {
        it->second.ttl = now + cfg.ttl_delta;
        ++res.checks;
        if (table.ttl_of(key) != it->second.ttl) res.fail(ctx.str() + "lookup did not refresh the TTL");
      }
    } else if (op < 95) {
      ++res.checks;
      if (table.remove(key) != (it != ref.end())) res.fail(ctx.str() + "remove result differs from reference");
      if (it != ref.end()) ref.erase(it);
    } else {
      now += Duration{static_cast<std::int64_t>(uniform(0, 4'000'000'000))};
      std::vector<FlowKey> want;
      for (const auto& [k, v] : ref) {
        if (v.ttl < now) want.push_back(k);
      }
      auto swept = table.sweep_expired(now);
      std::vector<FlowKey> got;
      for (const auto& [k, h] : swept) {
        got.push_back(k);
        ++res.checks;
        auto r = ref.find(k);
        if (r == ref.end() || r->second.handle != h) res.fail(ctx.str() + "sweep returned a wrong entry");
      }
      std::sort(want.begin(), want.end());
      std::sort(got.begin(), got.end());
      ++res.checks;
      if (want != got) {
        res.fail(ctx.str() + "sweep removed " + std::to_string(got.size()) + " entries, want " +
                 std::to_string(want.size()));
      }
      for (const FlowKey& k : want) ref.erase(k);
    }
    ++res.checks;
    if (table.size() != ref.size()) {
      res.fail(ctx.str() + "size " + std::to_string(table.size()) + " != " + std::to_string(ref.size()));
      break;
    }
  }
  return res;
}

TableStressReport run_table_stress(std::size_t threads, std::uint64_t ops_per_thread, double load,
                                   std::uint64_t seed) {
  TableStressReport rep;
  TableConfig cfg;
  cfg.bucket_count = 1 << 14;
  cfg.slots_per_bucket = 4;
  cfg.ttl_delta = std::chrono::hours(1000);
  ConnTable table(cfg);
  const std::size_t capacity = cfg.bucket_count * cfg.slots_per_bucket;
  // Each worker keeps about half of its keys present, so the table sits near `load`.
  const auto keys_per_thread =
      static_cast<std::uint32_t>(std::max(1.0, 2.0 * load * static_cast<double>(capacity) / static_cast<double>(threads)));
  const Timestamp now = at_ns(1);

  struct Local {
    std::uint64_t mismatches = 0, torn = 0, foreign = 0, full = 0;
    std::vector<std::string> examples;
  };
  std::vector<Local> locals(threads);
  // Prefill: every worker's even-numbered keys.
  for (std::size_t t = 0; t < threads; ++t) {
    for (std::uint32_t i = 0; i < keys_per_thread; i += 2) {
      const FlowKey k = table_key(static_cast<std::uint32_t>(t + 1), i);
      table.insert(k, value_for(k, 0), now);
    }
  }

  std::atomic<bool> go{false};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      Local& loc = locals[t];
      const auto owner = static_cast<std::uint32_t>(t + 1);
      std::mt19937_64 rng(seed * 1000003ULL + t);
      std::vector<std::optional<EntryHandle>> mine(keys_per_thread);
      for (std::uint32_t i = 0; i < keys_per_thread; i += 2) mine[i] = value_for(table_key(owner, i), 0);
      std::uint32_t generation = 1;
      auto note = [&](std::string what) {
        if (loc.examples.size() < kMaxCounterexamples) loc.examples.push_back(std::move(what));
      };
      while (!go.load(std::memory_order_acquire)) std::this_thread::yield();
      for (std::uint64_t n = 0; n < ops_per_thread; ++n) {
        const std::uint64_t r = rng();
        const std::uint32_t op = static_cast<std::uint32_t>(r % 100);
        if (op < 15 && threads > 1) {
          // Someone else's key: only the pair's consistency is knowable.
          std::uint32_t other = static_cast<std::uint32_t>((r >> 8) % threads) + 1;
          if (other == owner) other = other % static_cast<std::uint32_t>(threads) + 1;
          const FlowKey k = table_key(other, static_cast<std::uint32_t>((r >> 20) % keys_per_thread));
          ++loc.foreign;
          auto got = table.lookup_checked(k, now);
          if (got && (got->key != k || !consistent(*got))) {
            ++loc.torn;
            note("torn read of " + k.to_string());
          }
          continue;
        }
        const std::uint32_t index = static_cast<std::uint32_t>((r >> 20) % keys_per_thread);
        const FlowKey k = table_key(owner, index);
        std::optional<EntryHandle>& expect = mine[index];
        if (op < 55) {
          auto got = table.lookup_checked(k, now);
          if (got && (got->key != k || !consistent(*got))) {
            ++loc.torn;
            note("torn read of own key " + k.to_string());
          }
          const std::optional<EntryHandle> seen = got ? std::optional(got->handle) : std::nullopt;
          if (seen != expect) {
            ++loc.mismatches;
            note("worker " + std::to_string(t) + " op " + std::to_string(n) + ": lookup of " + k.to_string() +
                 (seen ? " found a value" : " missed") + (expect ? ", reference has it" : ", reference absent"));
          }
        } else if (op < 80) {
          const EntryHandle h = value_for(k, generation++);
          const InsertResult res = table.insert(k, h, now);
          const InsertResult want = expect ? InsertResult::kReplaced : InsertResult::kInserted;
          if (res == InsertResult::kTableFull) {
            ++loc.full;
            if (expect) {
              ++loc.mismatches;
              note("table full while replacing " + k.to_string());
            }
            continue;
          }
          if (res != want) {
            ++loc.mismatches;
            note("worker " + std::to_string(t) + ": insert of " + k.to_string() + " returned the wrong result");
          }
          expect = h;
        } else {
          const bool removed = table.remove(k);
          if (removed != expect.has_value()) {
            ++loc.mismatches;
            note("worker " + std::to_string(t) + ": remove of " + k.to_string() + " disagrees with the reference");
          }
          expect.reset();
        }
      }
      // Final state of this worker's keys.
      for (std::uint32_t i = 0; i < keys_per_thread; ++i) {
        auto got = table.lookup(table_key(owner, i), now);
        if (got != mine[i]) {
          ++loc.mismatches;
          note("worker " + std::to_string(t) + ": final state of key " + std::to_string(i) + " differs");
        }
      }
    });
  }
  go.store(true, std::memory_order_release);
  for (std::thread& th : pool) th.join();

  rep.ops = threads * ops_per_thread;
  for (const Local& loc : locals) {
    rep.projection_mismatches += loc.mismatches;
    rep.torn_reads += loc.torn;
    rep.foreign_lookups += loc.foreign;
    rep.table_full += loc.full;
    for (const std::string& s : loc.examples) {
      if (rep.counterexamples.size() < kMaxCounterexamples) rep.counterexamples.push_back(s);
    }
  }
  const TableStats st = table.stats();
  rep.relocations = st.relocations;
  rep.lookup_retries = st.lookup_retries;
  return rep;
}

TtlLivenessReport run_ttl_liveness(std::size_t ttl_multiple, std::uint64_t seed) {
  TtlLivenessReport rep;
  TableConfig cfg;
  cfg.bucket_count = 64;  // small and crowded, so watched keys get relocated
  cfg.slots_per_bucket = 4;
  cfg.ttl_delta = std::chrono::seconds(2);
  ConnTable table(cfg);
  const Duration half = cfg.ttl_delta / 2;
  const std::size_t steps = 2 * ttl_multiple;
  constexpr std::uint32_t kWatched = 16;
  constexpr std::uint32_t kChurnKeys = 400;
  constexpr std::size_t kChurnThreads = 2;

  for (std::uint32_t i = 0; i < kWatched; ++i) {
    const FlowKey k = table_key(200, i);
    table.insert(k, value_for(k, 0), kTimeZero);
  }
  std::atomic<std::uint64_t> missed{0}, sweeps{0}, swept{0};
  std::barrier sync(static_cast<std::ptrdiff_t>(2 + kChurnThreads));

  std::thread refresher([&] {
    for (std::size_t k = 0; k < steps; ++k) {
      const Timestamp t = kTimeZero + half * static_cast<std::int64_t>(k + 1);
      for (std::uint32_t i = 0; i < kWatched; ++i) {
        if (!table.lookup(table_key(200, i), t)) missed.fetch_add(1);
      }
      sync.arrive_and_wait();
    }
  });
  std::thread sweeper([&] {
    std::mt19937_64 rng(seed ^ 0x5eeb);
    for (std::size_t k = 0; k < steps; ++k) {
      // Anywhere up to the next refresh: watched TTLs are at least t_k + ttl/2 away.
      const Timestamp base = kTimeZero + half * static_cast<std::int64_t>(k);
      for (int i = 0; i < 4; ++i) {
        const Timestamp t = base + Duration{static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(half.count()))};
        swept.fetch_add(table.sweep_expired(t).size());
        sweeps.fetch_add(1);
      }
      sync.arrive_and_wait();
    }
  });
  std::vector<std::thread> churn;
  for (std::size_t c = 0; c < kChurnThreads; ++c) {
    churn.emplace_back([&, c] {
      std::mt19937_64 rng(seed * 31 + c);
      for (std::size_t k = 0; k < steps; ++k) {
        const Timestamp t = kTimeZero + half * static_cast<std::int64_t>(k);
        for (int i = 0; i < 200; ++i) {
          const FlowKey key = table_key(static_cast<std::uint32_t>(201 + c), static_cast<std::uint32_t>(rng() % kChurnKeys));
          if (rng() % 3 == 0) {
            table.remove(key);
          } else {
            table.insert(key, value_for(key, 1), t);
          }
        }
        sync.arrive_and_wait();
      }
    });
  }
  refresher.join();
  sweeper.join();
  for (std::thread& th : churn) th.join();

  rep.steps = steps;
  rep.missed_lookups = missed.load();
  rep.sweeps = sweeps.load();
  rep.swept_entries = swept.load();
  rep.relocations = table.stats().relocations;
  rep.watched_present_at_end = true;
  for (std::uint32_t i = 0; i < kWatched; ++i) {
    if (!table.bucket_of(table_key(200, i))) rep.watched_present_at_end = false;
  }
  return rep;
}

OracleResult run_table_oracle(std::size_t threads, std::uint64_t ops_per_thread, std::uint64_t seed) {
  OracleResult res = run_table_sequential(std::min<std::uint64_t>(ops_per_thread, 200'000), seed);
  res.kind = "table";

  const TableStressReport stress = run_table_stress(threads, ops_per_thread, 0.6, seed);
  res.cases += stress.ops;
  res.checks += stress.ops;
  if (stress.projection_mismatches > 0 || stress.torn_reads > 0) {
    res.fail("stress: " + std::to_string(stress.projection_mismatches) + " projection mismatches, " +
             std::to_string(stress.torn_reads) + " torn reads");
    for (const std::string& s : stress.counterexamples) res.fail("stress: " + s);
  }

  const TtlLivenessReport ttl = run_ttl_liveness(100, seed);
  res.cases += ttl.steps;
  res.checks += ttl.steps;
  if (ttl.missed_lookups > 0 || !ttl.watched_present_at_end) {
    res.fail("ttl liveness: " + std::to_string(ttl.missed_lookups) + " lookups of watched flows missed");
  }
  return res;
}

}  // namespace splicelb::bench
