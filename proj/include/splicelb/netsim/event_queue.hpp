// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "splicelb/time.hpp"

namespace splicelb::netsim {

// Events at the same timestamp run in scheduling order, so a run is a pure
// function of its inputs.
class EventQueue {
 public:
  using Action = std::function<void()>;

  void schedule(Timestamp at, Action action);
  // Runs events until the queue is empty or the next event is after `until`.
  void run_until(Timestamp until);
  bool step();

  Timestamp now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  std::uint64_t executed() const { return executed_; }
  void stop() { stopped_ = true; }

 private:
  struct Event {
    Timestamp at;
    std::uint64_t order;
    Action action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.at != b.at ? a.at > b.at : a.order > b.order;
    }
  };

  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  Timestamp now_{};
  std::uint64_t next_order_ = 0;
  std::uint64_t executed_ = 0;
  bool stopped_ = false;
};

}  // namespace splicelb::netsim
