// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/netsim/event_queue.hpp"

#include <stdexcept>

namespace splicelb::netsim {

void EventQueue::schedule(Timestamp at, Action action) {
  if (at < now_) throw std::logic_error("event scheduled in the past");
  heap_.push(Event{at, next_order_++, std::move(action)});
}

bool EventQueue::step() {
  if (heap_.empty()) return false;
  // The action may schedule more events, so move it out before popping.
  Event event = std::move(const_cast<Event&>(heap_.top()));
  heap_.pop();
  now_ = event.at;
  ++executed_;
  event.action();
  return true;
}

void EventQueue::run_until(Timestamp until) {
  stopped_ = false;
  while (!stopped_ && !heap_.empty() && heap_.top().at <= until) step();
}

}  // namespace splicelb::netsim
