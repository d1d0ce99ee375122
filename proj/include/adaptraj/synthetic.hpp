// Synthetic multi-domain pedestrian corpora from goal-directed point agents
// with exponential pairwise repulsion.
//
// Each domain shares the same physics but differs in preferred speed,
// observation anisotropy, repulsion gain and range, and the side agents
// prefer when passing each other.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "adaptraj/corpus.hpp"
#include "adaptraj/types.hpp"

namespace adaptraj {

struct DomainProfile {
  DomainId domain_id = 0;
  std::string name;
  double desired_speed_mean = 1.2;     // m/s
  double desired_speed_std = 0.2;      // m/s
  double axis_scale_y = 1.0;           // multiplies emitted y coordinates
  double interaction_strength = 2.0;   // repulsion gain, m/s^2
  double interaction_range = 0.5;      // repulsion decay length, m
  double passing_side_bias = 0.0;      // in [-1, 1]; rotates repulsion by bias * 15 deg
  double agents_per_scene_mean = 6.0;  // focal + neighbors
  int scene_count = 600;

  void validate() const {
    auto fail = [&](const std::string& m) { throw ConfigError("profile '" + name + "': " + m); };
    if (domain_id < 0) fail("domain_id must be >= 0");
    if (scene_count <= 0) fail("scene_count must be positive");
    if (!(desired_speed_mean > 0)) fail("desired_speed_mean must be positive");
    if (!(desired_speed_std >= 0)) fail("desired_speed_std must be >= 0");
    if (!(axis_scale_y > 0)) fail("axis_scale_y must be positive");
    if (!(interaction_strength >= 0)) fail("interaction_strength must be >= 0");
    if (!(interaction_range > 0)) fail("interaction_range must be positive");
    if (!(std::abs(passing_side_bias) <= 1.0)) fail("|passing_side_bias| must be <= 1");
    if (!(agents_per_scene_mean >= 1.0)) fail("agents_per_scene_mean must be >= 1");
  }
};

inline void to_json(json& j, const DomainProfile& p) {
  j = json{{"domain_id", p.domain_id},
           {"name", p.name},
           {"desired_speed_mean", p.desired_speed_mean},
           {"desired_speed_std", p.desired_speed_std},
           {"axis_scale_y", p.axis_scale_y},
           {"interaction_strength", p.interaction_strength},
           {"interaction_range", p.interaction_range},
           {"passing_side_bias", p.passing_side_bias},
           {"agents_per_scene_mean", p.agents_per_scene_mean},
           {"scene_count", p.scene_count}};
}

inline void from_json(const json& j, DomainProfile& p) {
  static const std::vector<std::string> known = {
      "domain_id", "name", "desired_speed_mean", "desired_speed_std", "axis_scale_y",
      "interaction_strength", "interaction_range", "passing_side_bias",
      "agents_per_scene_mean", "scene_count"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("profile: unknown key '" + key + "'");
    }
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("domain_id", p.domain_id);
  get("name", p.name);
  get("desired_speed_mean", p.desired_speed_mean);
  get("desired_speed_std", p.desired_speed_std);
  get("axis_scale_y", p.axis_scale_y);
  get("interaction_strength", p.interaction_strength);
  get("interaction_range", p.interaction_range);
  get("passing_side_bias", p.passing_side_bias);
  get("agents_per_scene_mean", p.agents_per_scene_mean);
  get("scene_count", p.scene_count);
  if (p.name.empty()) p.name = "domain" + std::to_string(p.domain_id);
}

/// Reads either a single profile object, an array of profiles, or an object
/// with a "domains" array.
inline std::vector<DomainProfile> read_profiles(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read profile file " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("profile file: " + std::string(e.what()));
  }
  std::vector<DomainProfile> out;
  const json& arr = j.is_object() && j.contains("domains") ? j.at("domains") : j;
  if (arr.is_array()) {
    for (const auto& p : arr) out.push_back(p.get<DomainProfile>());
  } else {
    out.push_back(arr.get<DomainProfile>());
  }
  for (const auto& p : out) p.validate();
  return out;
}

namespace synth {

inline constexpr double kSubstepDt = 0.1;  // integration step, s
inline constexpr int kSubsteps = 4;        // per emitted 0.4 s frame
inline constexpr int kWarmupFrames = 3;
inline constexpr double kRelaxTime = 0.5;  // s, goal-velocity relaxation
inline constexpr double kBodyDiameter = 0.6;
inline constexpr double kMaxSideAngle = 15.0 * std::numbers::pi / 180.0;
inline constexpr std::size_t kNeighborCap = 16;

struct Agent {
  double px, py, vx, vy;
  double gx, gy;  // desired velocity
};

}  // namespace synth

/// Keeps the `cap` neighbors with smallest mean distance to the focal agent
/// over their valid observed frames, preserving their original order.
inline void cap_neighbors(TrajectoryScene& scene, std::size_t cap) {
  if (scene.neighbors.size() <= cap) return;
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t n = 0; n < scene.neighbors.size(); ++n) {
    const auto& nb = scene.neighbors[n];
    double total = 0;
    std::size_t cnt = 0;
    for (std::size_t t = 0; t < kObsLen; ++t) {
      if (!nb.valid[t]) continue;
      total += std::hypot(nb.pts[t].x - scene.focal_observed[t].x, nb.pts[t].y - scene.focal_observed[t].y);
      ++cnt;
    }
    dist.emplace_back(total / static_cast<double>(cnt), n);
  }
  std::stable_sort(dist.begin(), dist.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < cap; ++i) keep.push_back(dist[i].second);
  std::sort(keep.begin(), keep.end());
  std::vector<NeighborTrack> kept;
  for (auto idx : keep) kept.push_back(std::move(scene.neighbors[idx]));
  scene.neighbors = std::move(kept);
}

/// Simulates `profile.scene_count` scenes. Agent 0 of each scene is the focal
/// agent; all others are neighbors present on every observed frame. Output is
/// a deterministic function of (profile, seed), already split 6:2:2 with
/// statistics filled in.
inline DomainCorpus generate_synthetic_domain(const DomainProfile& profile, std::uint64_t seed) {
  profile.validate();
  using namespace synth;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::poisson_distribution<int> extra_agents(std::max(1e-9, profile.agents_per_scene_mean - 1.0));

  const double side_angle = profile.passing_side_bias * kMaxSideAngle;
  const double cos_a = std::cos(side_angle);
  const double sin_a = std::sin(side_angle);
  const int total_frames = kWarmupFrames + static_cast<int>(kSeqLen);

  DomainCorpus corpus;
  corpus.domain_id = profile.domain_id;
  corpus.scenes.reserve(static_cast<std::size_t>(profile.scene_count));

  for (int s = 0; s < profile.scene_count; ++s) {
    const int n_agents = 1 + std::min(extra_agents(rng), static_cast<int>(kNeighborCap) + 4);
    std::vector<Agent> agents(static_cast<std::size_t>(n_agents));
    for (auto& a : agents) {
      const bool eastbound = unit(rng) < 0.5;
      const double heading = (eastbound ? 0.0 : std::numbers::pi) + 0.25 * normal(rng);
      double speed = profile.desired_speed_mean + profile.desired_speed_std * normal(rng);
      speed = std::max(speed, 0.1 * profile.desired_speed_mean);
      a.gx = speed * std::cos(heading);
      a.gy = speed * std::sin(heading);
      a.vx = a.gx;
      a.vy = a.gy;
      a.px = (eastbound ? -1.0 : 1.0) * 6.0 * unit(rng);
      a.py = -3.0 + 6.0 * unit(rng);
    }

    std::vector<std::vector<Location>> frames(agents.size());
    for (int f = 0; f < total_frames; ++f) {
      if (f >= kWarmupFrames) {
        for (std::size_t i = 0; i < agents.size(); ++i) {
          frames[i].push_back({agents[i].px, profile.axis_scale_y * agents[i].py});
        }
      }
      if (f + 1 == total_frames) break;
      for (int sub = 0; sub < kSubsteps; ++sub) {
        std::vector<std::pair<double, double>> acc(agents.size());
        for (std::size_t i = 0; i < agents.size(); ++i) {
          double ax = (agents[i].gx - agents[i].vx) / kRelaxTime;
          double ay = (agents[i].gy - agents[i].vy) / kRelaxTime;
          if (profile.interaction_strength > 0) {
            for (std::size_t j = 0; j < agents.size(); ++j) {
              if (j == i) continue;
              const double dx = agents[i].px - agents[j].px;
              const double dy = agents[i].py - agents[j].py;
              const double d = std::max(std::hypot(dx, dy), 1e-6);
              const double mag = profile.interaction_strength *
                                 std::exp((kBodyDiameter - d) / profile.interaction_range);
              const double nx = dx / d;
              const double ny = dy / d;
              ax += mag * (cos_a * nx - sin_a * ny);
              ay += mag * (sin_a * nx + cos_a * ny);
            }
          }
          acc[i] = {ax, ay};
        }
        for (std::size_t i = 0; i < agents.size(); ++i) {
          agents[i].vx += acc[i].first * kSubstepDt;
          agents[i].vy += acc[i].second * kSubstepDt;
          agents[i].px += agents[i].vx * kSubstepDt;
          agents[i].py += agents[i].vy * kSubstepDt;
        }
      }
    }

    TrajectoryScene scene;
    scene.scene_id = "d" + std::to_string(profile.domain_id) + "-s" + std::to_string(s);
    scene.domain_id = profile.domain_id;
    scene.timestamp_origin = static_cast<double>(s) * static_cast<double>(kSeqLen) * kFrameDt;
    scene.focal_observed.assign(frames[0].begin(), frames[0].begin() + kObsLen);
    scene.focal_future.assign(frames[0].begin() + kObsLen, frames[0].end());
    for (std::size_t i = 1; i < agents.size(); ++i) {
      NeighborTrack nb;
      nb.pts.assign(frames[i].begin(), frames[i].begin() + kObsLen);
      nb.valid.assign(kObsLen, true);
      scene.neighbors.push_back(std::move(nb));
    }
    cap_neighbors(scene, kNeighborCap);
    corpus.scenes.push_back(std::move(scene));
  }
  if (corpus.scenes.size() >= 5) chronological_split(corpus);
  corpus.stats = compute_domain_statistics(corpus);
  return corpus;
}

}  // namespace adaptraj
