// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/splice/http.hpp"

#include <array>
#include <cctype>
#include <algorithm>
#include <charconv>

namespace splicelb::http {
namespace {

constexpr std::string_view kCrlf = "\r\n";
constexpr std::array<std::string_view, 8> kMethods{"GET ",    "POST ",    "PUT ",   "HEAD ",
                                                   "DELETE ", "OPTIONS ", "PATCH ", "CONNECT "};

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<std::uint64_t> parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

std::optional<std::size_t> find_head_end(std::string_view data) {
  auto pos = data.find("\r\n\r\n");
  if (pos == std::string_view::npos) return std::nullopt;
  return pos + 4;
}

bool looks_like_request_start(std::string_view data) {
  for (std::string_view method : kMethods) {
    std::size_t n = std::min(method.size(), data.size());
    if (n > 0 && data.substr(0, n) == method.substr(0, n)) return true;
  }
  return false;
}

std::optional<std::string_view> header_value(std::string_view head, std::string_view name) {
  std::size_t line_start = head.find(kCrlf);
  while (line_start != std::string_view::npos) {
    line_start += 2;
    std::size_t line_end = head.find(kCrlf, line_start);
    if (line_end == std::string_view::npos || line_end == line_start) break;
    std::string_view line = head.substr(line_start, line_end - line_start);
    std::size_t colon = line.find(':');
    if (colon != std::string_view::npos && iequals(trim(line.substr(0, colon)), name)) {
      return trim(line.substr(colon + 1));
    }
    line_start = line_end;
  }
  return std::nullopt;
}

std::optional<RequestHead> parse_request_head(std::string_view data) {
  auto end = find_head_end(data);
  if (!end) return std::nullopt;
  std::string_view head = data.substr(0, *end);
  std::size_t line_end = head.find(kCrlf);
  std::string_view line = head.substr(0, line_end);
  std::size_t sp1 = line.find(' ');
  if (sp1 == std::string_view::npos) return std::nullopt;
  std::size_t sp2 = line.find(' ', sp1 + 1);
  if (sp2 == std::string_view::npos || line.substr(sp2 + 1).substr(0, 5) != "HTTP/") return std::nullopt;

  RequestHead out;
  out.method = std::string(line.substr(0, sp1));
  out.target = std::string(line.substr(sp1 + 1, sp2 - sp1 - 1));
  out.request_line_len = line_end + 2;
  out.head_len = *end;
  if (auto cl = header_value(head, "Content-Length")) {
    auto v = parse_u64(*cl);
    if (!v) return std::nullopt;
    out.content_length = *v;
  }
  return out;
}

std::optional<ResponseHead> parse_response_head(std::string_view data) {
  auto end = find_head_end(data);
  if (!end) return std::nullopt;
  std::string_view head = data.substr(0, *end);
  if (head.substr(0, 5) != "HTTP/") return std::nullopt;
  std::size_t sp = head.find(' ');
  if (sp == std::string_view::npos || sp + 4 > head.size()) return std::nullopt;
  auto status = parse_u64(head.substr(sp + 1, 3));
  if (!status) return std::nullopt;

  ResponseHead out;
  out.status = static_cast<int>(*status);
  out.head_len = *end;
  if (auto te = header_value(head, "Transfer-Encoding"); te && iequals(*te, "chunked")) {
    out.chunked = true;
    return out;
  }
  if (auto cl = header_value(head, "Content-Length")) out.content_length = parse_u64(*cl);
  return out;
}

}  // namespace splicelb::http
