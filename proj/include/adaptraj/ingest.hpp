// Conversion of externally exported tracks into canonical scenes: unit
// conversion, linear resampling onto the 0.4 s grid, and sliding 20-frame
// windows.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "adaptraj/synthetic.hpp"
#include "adaptraj/types.hpp"

namespace adaptraj {

struct UnitSpec {
  enum class Kind { kMeters, kPixels };
  Kind kind = Kind::kMeters;
  double meters_per_pixel = 1.0;

  double to_meters(double v) const { return kind == Kind::kMeters ? v : v * meters_per_pixel; }
};

/// Parses "m" or "px:<meters-per-pixel>".
inline UnitSpec parse_units(const std::string& text) {
  if (text == "m") return UnitSpec{};
  if (text.rfind("px:", 0) == 0) {
    UnitSpec u;
    u.kind = UnitSpec::Kind::kPixels;
    try {
      std::size_t used = 0;
      u.meters_per_pixel = std::stod(text.substr(3), &used);
      if (used != text.size() - 3) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("bad pixel scale in unit spec '" + text + "'");
    }
    if (!(u.meters_per_pixel > 0)) throw ConfigError("pixel scale must be positive");
    return u;
  }
  throw ConfigError("unknown unit '" + text + "' (expected m or px:<scale>)");
}

struct RawSample {
  double t = 0.0;
  Location p;
};

/// Agent id → samples in file order.
using RawTracks = std::map<std::string, std::vector<RawSample>>;

/// Reads whitespace- or comma-separated "time agent x y" lines; blank lines
/// and lines starting with '#' are ignored.
inline RawTracks read_raw_tracks(std::istream& is) {
  RawTracks tracks;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first) || first[0] == '#') continue;
    RawSample s;
    std::string agent;
    try {
      s.t = std::stod(first);
    } catch (const std::exception&) {
      throw DataError("raw tracks line " + std::to_string(lineno) + ": bad time");
    }
    if (!(ls >> agent >> s.p.x >> s.p.y)) {
      throw DataError("raw tracks line " + std::to_string(lineno) + ": expected time agent x y");
    }
    tracks[agent].push_back(s);
  }
  return tracks;
}

struct IngestResult {
  std::vector<TrajectoryScene> scenes;
  std::size_t skipped_tracks = 0;  // tracks with fewer than two samples
};

namespace detail {

/// Grid-indexed resampled positions of one agent.
using GridTrack = std::map<long, Location>;

inline GridTrack resample_track(const std::vector<RawSample>& samples, double grid_origin,
                                const UnitSpec& units) {
  constexpr double kSnap = 1e-9;
  GridTrack out;
  const double first = (samples.front().t - grid_origin) / kFrameDt;
  const double last = (samples.back().t - grid_origin) / kFrameDt;
  const long k_begin = static_cast<long>(std::ceil(first - kSnap));
  const long k_end = static_cast<long>(std::floor(last + kSnap));
  std::size_t seg = 0;
  for (long k = k_begin; k <= k_end; ++k) {
    const double t = grid_origin + static_cast<double>(k) * kFrameDt;
    while (seg + 1 < samples.size() && samples[seg + 1].t < t - kSnap) ++seg;
    Location p;
    if (std::abs(samples[seg].t - t) <= kSnap || seg + 1 == samples.size()) {
      p = samples[seg].p;
    } else if (std::abs(samples[seg + 1].t - t) <= kSnap) {
      p = samples[seg + 1].p;
    } else {
      const auto& a = samples[seg];
      const auto& b = samples[seg + 1];
      const double w = (t - a.t) / (b.t - a.t);
      p = {a.p.x + w * (b.p.x - a.p.x), a.p.y + w * (b.p.y - a.p.y)};
    }
    out[k] = {units.to_meters(p.x), units.to_meters(p.y)};
  }
  return out;
}

}  // namespace detail

/// Resamples every track onto a shared 0.4 s grid anchored at the earliest
/// timestamp, then emits one scene per agent per 20-frame window in which the
/// agent is present on every frame. Neighbors are the other agents present
/// on at least one frame of the observed part of the window.
inline IngestResult resample_and_normalize(const RawTracks& tracks, const UnitSpec& units,
                                           DomainId domain_id = 0) {
  IngestResult result;
  double origin = 0.0;
  bool have_origin = false;
  for (const auto& [agent, samples] : tracks) {
    for (std::size_t i = 1; i < samples.size(); ++i) {
      if (!(samples[i].t > samples[i - 1].t)) {
        throw DataError("track '" + agent + "': timestamps not strictly increasing");
      }
    }
    if (samples.empty()) continue;
    if (!have_origin || samples.front().t < origin) origin = samples.front().t;
    have_origin = true;
  }

  std::vector<std::pair<std::string, detail::GridTrack>> grid;
  for (const auto& [agent, samples] : tracks) {
    if (samples.size() < 2) {
      ++result.skipped_tracks;
      continue;
    }
    grid.emplace_back(agent, detail::resample_track(samples, origin, units));
  }

  for (std::size_t fi = 0; fi < grid.size(); ++fi) {
    const auto& [agent, focal] = grid[fi];
    if (focal.empty()) continue;
    const long k_first = focal.begin()->first;
    const long k_last = focal.rbegin()->first;
    for (long k0 = k_first; k0 + static_cast<long>(kSeqLen) - 1 <= k_last; ++k0) {
      TrajectoryScene scene;
      scene.scene_id = agent + "@" + std::to_string(k0);
      scene.domain_id = domain_id;
      scene.timestamp_origin = origin + static_cast<double>(k0) * kFrameDt;
      for (std::size_t t = 0; t < kSeqLen; ++t) {
        const Location& p = focal.at(k0 + static_cast<long>(t));
        (t < kObsLen ? scene.focal_observed : scene.focal_future).push_back(p);
      }
      for (std::size_t ni = 0; ni < grid.size(); ++ni) {
        if (ni == fi) continue;
        NeighborTrack nb;
        nb.pts.assign(kObsLen, Location{});
        nb.valid.assign(kObsLen, false);
        for (std::size_t t = 0; t < kObsLen; ++t) {
          auto it = grid[ni].second.find(k0 + static_cast<long>(t));
          if (it == grid[ni].second.end()) continue;
          nb.pts[t] = it->second;
          nb.valid[t] = true;
        }
        if (nb.valid_count() > 0) scene.neighbors.push_back(std::move(nb));
      }
      cap_neighbors(scene, synth::kNeighborCap);
      result.scenes.push_back(std::move(scene));
    }
  }
  std::stable_sort(result.scenes.begin(), result.scenes.end(),
                   [](const TrajectoryScene& a, const TrajectoryScene& b) {
                     return a.timestamp_origin < b.timestamp_origin;
                   });
  return result;
}

}  // namespace adaptraj
