// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#pragma once

#include <cstddef>
#include <vector>

#include "splicelb/time.hpp"

namespace splicelb {

// Per-rule cost of flow-rule updates as a function of batch size. Between
// calibration rows the cost is linearly interpolated; beyond the last row it
// is clamped.
class LatencyModel {
 public:
  struct Row {
    std::size_t batch;
    double insert_us;
    double delete_us;
  };

  // Measured on an off-path SmartNIC: batch sizes 1, 2, 8 and 16.
  static LatencyModel calibrated();

  explicit LatencyModel(std::vector<Row> rows);

  double insert_us(std::size_t batch) const;
  double delete_us(std::size_t batch) const;
  Duration insert_per_rule(std::size_t batch) const { return from_us(insert_us(batch)); }
  Duration delete_per_rule(std::size_t batch) const { return from_us(delete_us(batch)); }

  const std::vector<Row>& rows() const { return rows_; }

 private:
  double interpolate(std::size_t batch, double Row::*column) const;

  std::vector<Row> rows_;
};

}  // namespace splicelb
