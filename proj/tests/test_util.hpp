// Shared fixtures for the unit and acceptance tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "adaptraj/autodiff.hpp"
#include "adaptraj/types.hpp"

namespace adaptraj::testutil {

/// A random but well-formed scene: a focal walker plus `n_neighbors`
/// neighbors, each missing a random subset of frames (never all).
inline TrajectoryScene random_scene(std::mt19937_64& rng, std::size_t n_neighbors, int domain = 0) {
  std::uniform_real_distribution<double> pos(-5.0, 5.0);
  std::uniform_real_distribution<double> vel(-0.6, 0.6);
  std::bernoulli_distribution drop(0.2);
  TrajectoryScene s;
  s.scene_id = "r" + std::to_string(rng() % 100000);
  s.domain_id = domain;
  double x = pos(rng), y = pos(rng);
  const double vx = vel(rng), vy = vel(rng);
  for (std::size_t t = 0; t < kSeqLen; ++t) {
    x += vx + 0.05 * vel(rng);
    y += vy + 0.05 * vel(rng);
    (t < kObsLen ? s.focal_observed : s.focal_future).push_back({x, y});
  }
  for (std::size_t n = 0; n < n_neighbors; ++n) {
    NeighborTrack nb;
    double nx = pos(rng), ny = pos(rng);
    const double nvx = vel(rng), nvy = vel(rng);
    for (std::size_t t = 0; t < kObsLen; ++t) {
      nx += nvx;
      ny += nvy;
      nb.pts.push_back({nx, ny});
      nb.valid.push_back(!drop(rng));
    }
    if (nb.valid_count() == 0) nb.valid.back() = true;
    s.neighbors.push_back(std::move(nb));
  }
  return s;
}

inline std::vector<TrajectoryScene> random_scenes(std::mt19937_64& rng, std::size_t n, int domain = 0) {
  std::vector<TrajectoryScene> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_scene(rng, i % 4, domain));
  return out;
}

inline std::vector<const TrajectoryScene*> pointers(const std::vector<TrajectoryScene>& scenes) {
  std::vector<const TrajectoryScene*> out;
  for (const auto& s : scenes) out.push_back(&s);
  return out;
}

/// Central-difference check of d(loss)/d(leaf) for every leaf entry.
/// `build` maps leaf Vars to a scalar Var on the given tape. Returns the
/// worst relative error max|a − n| / max(1, |a|, |n|) over entries.
inline double gradient_check(std::vector<Mat<double>> leaves,
                             const std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>& build,
                             double h = 1e-6) {
  std::vector<Parameter<double>> params(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    params[i].name = "leaf" + std::to_string(i);
    params[i].value = leaves[i];
    params[i].zero_grad();
  }
  auto evaluate = [&](bool with_grad) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (auto& p : params) vars.push_back(tape.parameter(p));
    const Var<double> out = build(tape, vars);
    if (with_grad) tape.backward(out);
    return out.value()(0, 0);
  };
  evaluate(true);
  double worst = 0.0;
  for (auto& p : params) {
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      const double orig = p.value(k);
      p.value(k) = orig + h;
      const double up = evaluate(false);
      p.value(k) = orig - h;
      const double down = evaluate(false);
      p.value(k) = orig;
      const double numeric = (up - down) / (2 * h);
      const double analytic = p.grad(k);
      const double scale = std::max({1.0, std::abs(numeric), std::abs(analytic)});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
  }
  return worst;
}

inline Mat<double> random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = n(rng);
  return m;
}

}  // namespace adaptraj::testutil
