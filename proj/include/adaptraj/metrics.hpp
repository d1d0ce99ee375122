// Displacement-error metrics over focal-agent predictions.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "adaptraj/types.hpp"

namespace adaptraj {

using Trajectory = std::vector<Location>;

namespace detail {

inline void check_aligned(std::span<const Trajectory> pred, std::span<const Trajectory> truth, const char* what) {
  if (pred.empty()) throw DataError(std::string(what) + ": empty input");
  if (pred.size() != truth.size()) throw DimensionError(std::string(what) + ": prediction/truth count mismatch");
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].empty() || pred[i].size() != truth[i].size()) {
      throw DimensionError(std::string(what) + ": trajectory length mismatch");
    }
  }
}

inline double dist(const Location& a, const Location& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace detail

/// Mean Euclidean distance over every agent and time step.
inline double ade(std::span<const Trajectory> pred, std::span<const Trajectory> truth) {
  detail::check_aligned(pred, truth, "ade");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t t = 0; t < pred[i].size(); ++t) total += detail::dist(pred[i][t], truth[i][t]);
    count += pred[i].size();
  }
  return total / static_cast<double>(count);
}

/// Mean Euclidean distance at the final time step.
inline double fde(std::span<const Trajectory> pred, std::span<const Trajectory> truth) {
  detail::check_aligned(pred, truth, "fde");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += detail::dist(pred[i].back(), truth[i].back());
  return total / static_cast<double>(pred.size());
}

inline double ade(const Trajectory& pred, const Trajectory& truth) {
  return ade(std::span<const Trajectory>(&pred, 1), std::span<const Trajectory>(&truth, 1));
}

inline double fde(const Trajectory& pred, const Trajectory& truth) {
  return fde(std::span<const Trajectory>(&pred, 1), std::span<const Trajectory>(&truth, 1));
}

}  // namespace adaptraj
