// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace splicelb::http {

// Position just past the CRLFCRLF that terminates a head, if present.
std::optional<std::size_t> find_head_end(std::string_view data);

// True if `data` could be the beginning of a request line ("GET ", "POST ", ...).
bool looks_like_request_start(std::string_view data);

struct RequestHead {
  std::string method;
  std::string target;
  std::size_t request_line_len = 0;  // including CRLF
  std::size_t head_len = 0;          // including the terminating blank line
  std::uint64_t content_length = 0;
};

// `data` must start at the first byte of a request; nullopt when the head is
// incomplete or malformed.
std::optional<RequestHead> parse_request_head(std::string_view data);

struct ResponseHead {
  int status = 0;
  std::size_t head_len = 0;
  std::optional<std::uint64_t> content_length;  // absent for chunked or unspecified
  bool chunked = false;
};

std::optional<ResponseHead> parse_response_head(std::string_view data);

// Case-insensitive header lookup within a complete head.
std::optional<std::string_view> header_value(std::string_view head, std::string_view name);

}  // namespace splicelb::http
