// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/netsim/http_app.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <random>

#include "splicelb/splice/http.hpp"

namespace splicelb::netsim {
namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

BodySource::BodySource(std::size_t size, std::uint64_t seed) {
  std::vector<std::uint8_t> bytes(size);
  std::mt19937_64 rng(seed);
  std::size_t i = 0;
  for (; i + 8 <= size; i += 8) {
    const std::uint64_t v = rng();
    std::memcpy(bytes.data() + i, &v, 8);
  }
  for (; i < size; ++i) bytes[i] = static_cast<std::uint8_t>(rng());
  buffer_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes));
}

Payload BodySource::body(std::uint64_t session, std::uint32_t index, std::uint64_t size) const {
  if (size > buffer_->size()) throw std::out_of_range("response larger than body buffer");
  const std::uint64_t room = buffer_->size() - size + 1;
  const std::uint64_t offset = mix(session * 1000003ULL + index) % room;
  return Payload(buffer_, static_cast<std::size_t>(offset), static_cast<std::size_t>(size));
}

std::string request_target(std::uint64_t session, std::uint32_t index, std::uint64_t size) {
  return "/obj/" + std::to_string(size) + "?s=" + std::to_string(session) + "&r=" + std::to_string(index);
}

std::string request_text(std::uint64_t session, std::uint32_t index, std::uint64_t size) {
  return "GET " + request_target(session, index, size) + " HTTP/1.1\r\nHost: vip\r\nUser-Agent: sim\r\n\r\n";
}

std::optional<ParsedTarget> parse_target(std::string_view target) {
  constexpr std::string_view kPrefix = "/obj/";
  if (!target.starts_with(kPrefix)) return std::nullopt;
  target.remove_prefix(kPrefix.size());
  const std::size_t q = target.find("?s=");
  const std::size_t r = target.find("&r=");
  if (q == std::string_view::npos || r == std::string_view::npos || r < q) return std::nullopt;
  ParsedTarget parsed;
  if (!parse_number(target.substr(0, q), parsed.size) ||
      !parse_number(target.substr(q + 3, r - q - 3), parsed.session) ||
      !parse_number(target.substr(r + 3), parsed.index)) {
    return std::nullopt;
  }
  return parsed;
}

std::string response_head(std::uint64_t size) {
  return "HTTP/1.1 200 OK\r\nContent-Length: " + std::to_string(size) + "\r\n\r\n";
}

std::uint64_t stream_size(const std::vector<Payload>& chunks) {
  std::uint64_t n = 0;
  for (const Payload& p : chunks) n += p.size();
  return n;
}

bool streams_equal(const std::vector<Payload>& a, const std::vector<Payload>& b) {
  if (stream_size(a) != stream_size(b)) return false;
  std::size_t ia = 0, ib = 0, oa = 0, ob = 0;
  while (ia < a.size() && ib < b.size()) {
    const auto va = a[ia].bytes();
    const auto vb = b[ib].bytes();
    const std::size_t n = std::min(va.size() - oa, vb.size() - ob);
    if (n > 0 && std::memcmp(va.data() + oa, vb.data() + ob, n) != 0) return false;
    oa += n;
    ob += n;
    if (oa == va.size()) {
      ++ia;
      oa = 0;
    }
    if (ob == vb.size()) {
      ++ib;
      ob = 0;
    }
  }
  return true;
}

HttpClient::HttpClient(std::uint64_t session, std::vector<std::uint64_t> sizes, TcpEndpoint& endpoint)
    : session_(session), sizes_(std::move(sizes)), endpoint_(endpoint) {}

void HttpClient::on_established(Timestamp now) { send_next(now); }

void HttpClient::send_next(Timestamp now) {
  if (timings_.size() >= sizes_.size()) {
    endpoint_.close(now);
    return;
  }
  const auto index = static_cast<std::uint32_t>(timings_.size());
  const std::uint64_t size = sizes_[index];
  std::string text = request_text(session_, index, size);
  sent_ += text;
  response_total_ = response_head(size).size() + size;
  response_remaining_ = response_total_;
  timings_.push_back(RequestTiming{size, now, std::nullopt});
  endpoint_.write(Payload(std::string_view(text)), now);
}

void HttpClient::on_data(const Payload& data, Timestamp now) {
  received_.push_back(data);
  std::uint64_t n = data.size();
  while (n > 0 && response_remaining_ > 0) {
    const std::uint64_t take = std::min(n, response_remaining_);
    response_remaining_ -= take;
    n -= take;
    if (response_remaining_ == 0) {
      timings_.back().completed = now;
      ++completed_;
      send_next(now);
    }
  }
}

HttpServer::HttpServer(const BodySource& bodies, TcpEndpoint& endpoint) : bodies_(bodies), endpoint_(endpoint) {}

void HttpServer::on_data(const Payload& data, Timestamp now) {
  received_.append(data.view());
  while (parsed_upto_ < received_.size()) {
    std::string_view rest(received_);
    rest.remove_prefix(parsed_upto_);
    auto head = http::parse_request_head(rest);
    if (!head) {
      if (http::find_head_end(rest)) {
        ++bad_requests_;
        endpoint_.abort(now);
      }
      return;
    }
    parsed_upto_ += head->head_len + head->content_length;
    auto target = parse_target(head->target);
    if (!target) {
      ++bad_requests_;
      endpoint_.abort(now);
      return;
    }
    session_ = target->session;
    std::string text = response_head(target->size);
    Payload head_bytes{std::string_view(text)};
    Payload body = bodies_.body(target->session, target->index, target->size);
    sent_.push_back(head_bytes);
    endpoint_.write(head_bytes, now);
    if (!body.empty()) {
      sent_.push_back(body);
      endpoint_.write(body, now);
    }
  }
}

void HttpServer::on_peer_fin(Timestamp now) { endpoint_.close(now); }

}  // namespace splicelb::netsim
