// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "splicelb/netsim/tcp_endpoint.hpp"
#include "splicelb/packet/packet.hpp"
#include "splicelb/time.hpp"

namespace splicelb::netsim {

// Response bodies are slices of one shared pseudo-random buffer, so packets of
// a 16 MiB response all reference the same memory.
class BodySource {
 public:
  BodySource(std::size_t size, std::uint64_t seed);

  // Deterministic slice for (session, request index).
  Payload body(std::uint64_t session, std::uint32_t index, std::uint64_t size) const;
  std::size_t capacity() const { return buffer_->size(); }

 private:
  std::shared_ptr<const std::vector<std::uint8_t>> buffer_;
};

std::string request_target(std::uint64_t session, std::uint32_t index, std::uint64_t size);
std::string request_text(std::uint64_t session, std::uint32_t index, std::uint64_t size);

struct ParsedTarget {
  std::uint64_t session = 0;
  std::uint32_t index = 0;
  std::uint64_t size = 0;
};
std::optional<ParsedTarget> parse_target(std::string_view target);

std::string response_head(std::uint64_t size);

// Byte-equality of two streams given as slice lists.
bool streams_equal(const std::vector<Payload>& a, const std::vector<Payload>& b);
std::uint64_t stream_size(const std::vector<Payload>& chunks);

struct RequestTiming {
  std::uint64_t size = 0;
  Timestamp sent{};
  std::optional<Timestamp> completed;
};

// Client side of one session: sends requests one at a time over a keep-alive
// connection and closes after the last response.
class HttpClient {
 public:
  HttpClient(std::uint64_t session, std::vector<std::uint64_t> sizes, TcpEndpoint& endpoint);

  void on_established(Timestamp now);
  void on_data(const Payload& data, Timestamp now);

  const std::string& sent() const { return sent_; }
  const std::vector<Payload>& received() const { return received_; }
  const std::vector<RequestTiming>& timings() const { return timings_; }
  std::size_t completed() const { return completed_; }
  bool finished() const { return completed_ == sizes_.size(); }

 private:
  void send_next(Timestamp now);

  std::uint64_t session_;
  std::vector<std::uint64_t> sizes_;
  TcpEndpoint& endpoint_;
  std::string sent_;
  std::vector<Payload> received_;
  std::vector<RequestTiming> timings_;
  std::size_t completed_ = 0;
  std::uint64_t response_remaining_ = 0;  // bytes of the current response not yet received
  std::uint64_t response_total_ = 0;
};

// Server side of one connection: answers each complete request head with a
// Content-Length response and closes when the client does.
class HttpServer {
 public:
  HttpServer(const BodySource& bodies, TcpEndpoint& endpoint);

  void on_data(const Payload& data, Timestamp now);
  void on_peer_fin(Timestamp now);

  const std::string& received() const { return received_; }
  const std::vector<Payload>& sent() const { return sent_; }
  std::optional<std::uint64_t> session() const { return session_; }
  std::uint64_t bad_requests() const { return bad_requests_; }

 private:
  const BodySource& bodies_;
  TcpEndpoint& endpoint_;
  std::string received_;
  std::size_t parsed_upto_ = 0;
  std::vector<Payload> sent_;
  std::optional<std::uint64_t> session_;
  std::uint64_t bad_requests_ = 0;
};

}  // namespace splicelb::netsim
