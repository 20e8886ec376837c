// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/splice/conn_entry.hpp"

namespace splicelb {

const char* to_string(SpliceState state) {
  switch (state) {
    case SpliceState::kFrontEstablished:
      return "FRONT_ESTABLISHED";
    case SpliceState::kSynSent:
      return "SYN_SENT";
    case SpliceState::kEstablished:
      return "ESTABLISHED";
  }
  return "?";
}

}  // namespace splicelb
