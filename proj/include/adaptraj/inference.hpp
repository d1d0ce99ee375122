// Label-free inference and batched evaluation.
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "adaptraj/backbone.hpp"
#include "adaptraj/metrics.hpp"
#include "adaptraj/model.hpp"

namespace adaptraj {

struct PredictionSet {
  std::vector<Trajectory> samples;  // K trajectories of 12 steps
};

namespace detail {

template <typename S>
Mat<S> draw_noise(std::size_t rows, int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat<S> z(static_cast<Eigen::Index>(rows), dim);
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    for (Eigen::Index r = 0; r < z.rows(); ++r) z(r, c) = static_cast<S>(normal(rng));
  }
  return z;
}

}  // namespace detail

/// Predicts K futures for scenes of an unseen domain. The scene's domain_id
/// is never consulted: every specific feature comes from the aggregators.
/// K = 1 uses z = 0; larger K draws standard-normal noise from `seed`.
template <typename S>
std::vector<PredictionSet> run_inference(const AdapTrajModel<S>& model,
                                         const std::vector<const TrajectoryScene*>& scenes, int k_samples = 1,
                                         std::uint64_t seed = 0) {
  if (k_samples < 1) throw ConfigError("run_inference: need at least one sample");
  std::vector<PredictionSet> out(scenes.size());
  if (scenes.empty()) return out;
  const auto batch = make_batch<S>(scenes);
  std::mt19937_64 rng(seed);
  for (int k = 0; k < k_samples; ++k) {
    const Mat<S> noise = k_samples == 1 ? model.zero_noise(scenes.size())
                                        : detail::draw_noise<S>(scenes.size(), model.hyperparams().noise_dim, rng);
    auto preds = model.predict(batch, noise);
    for (std::size_t i = 0; i < scenes.size(); ++i) out[i].samples.push_back(std::move(preds[i]));
  }
  return out;
}

template <typename S>
PredictionSet run_inference(const AdapTrajModel<S>& model, const TrajectoryScene& scene, int k_samples = 1,
                            std::uint64_t seed = 0) {
  return run_inference(model, std::vector<const TrajectoryScene*>{&scene}, k_samples, seed).front();
}

struct EvalResult {
  double ade = 0.0;
  double fde = 0.0;
  std::size_t n_scenes = 0;
};

/// ADE/FDE over scenes with ground truth. For K > 1 each scene contributes
/// its minimum-error sample (per metric).
template <typename S>
EvalResult evaluate(const AdapTrajModel<S>& model, const std::vector<const TrajectoryScene*>& scenes,
                    int k_samples = 1, std::uint64_t seed = 0, std::size_t chunk = 256) {
  if (scenes.empty()) throw DataError("evaluate: no scenes");
  double ade_sum = 0.0;
  double fde_sum = 0.0;
  std::mt19937_64 rng(seed);
  for (std::size_t begin = 0; begin < scenes.size(); begin += chunk) {
    const std::size_t end = std::min(scenes.size(), begin + chunk);
    const std::vector<const TrajectoryScene*> part(scenes.begin() + static_cast<std::ptrdiff_t>(begin),
                                                   scenes.begin() + static_cast<std::ptrdiff_t>(end));
    const auto preds = run_inference(model, part, k_samples, rng());
    for (std::size_t i = 0; i < part.size(); ++i) {
      if (part[i]->focal_future.size() != kPredLen) throw DataError("evaluate: scene without ground truth");
      double best_ade = std::numeric_limits<double>::infinity();
      double best_fde = std::numeric_limits<double>::infinity();
      for (const auto& sample : preds[i].samples) {
        best_ade = std::min(best_ade, ade(sample, part[i]->focal_future));
        best_fde = std::min(best_fde, fde(sample, part[i]->focal_future));
      }
      ade_sum += best_ade;
      fde_sum += best_fde;
    }
  }
  const double n = static_cast<double>(scenes.size());
  return EvalResult{ade_sum / n, fde_sum / n, scenes.size()};
}

}  // namespace adaptraj
