// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The splicelb Authors

#include "splicelb/flow_engine/latency_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace splicelb {

LatencyModel LatencyModel::calibrated() {
  return LatencyModel({
      {1, 305.40, 57.49},
      {2, 100.48, 24.48},
      {8, 38.72, 19.42},
      {16, 25.39, 18.08},
  });
}

LatencyModel::LatencyModel(std::vector<Row> rows) : rows_(std::move(rows)) {
  if (rows_.empty()) throw std::invalid_argument("latency model needs at least one row");
  std::sort(rows_.begin(), rows_.end(), [](const Row& a, const Row& b) { return a.batch < b.batch; });
  if (rows_.front().batch == 0) throw std::invalid_argument("batch size 0 in latency model");
}

double LatencyModel::interpolate(std::size_t batch, double Row::*column) const {
  if (batch == 0) throw std::invalid_argument("batch size must be positive");
  if (batch <= rows_.front().batch) return rows_.front().*column;
  if (batch >= rows_.back().batch) return rows_.back().*column;
  for (std::size_t i = 1; i < rows_.size(); ++i) {
    const Row& hi = rows_[i];
    if (batch > hi.batch) continue;
    const Row& lo = rows_[i - 1];
    double t = static_cast<double>(batch - lo.batch) / static_cast<double>(hi.batch - lo.batch);
    return lo.*column + t * (hi.*column - lo.*column);
  }
  return rows_.back().*column;
}

double LatencyModel::insert_us(std::size_t batch) const { return interpolate(batch, &Row::insert_us); }

double LatencyModel::delete_us(std::size_t batch) const { return interpolate(batch, &Row::delete_us); }

}  // namespace splicelb
