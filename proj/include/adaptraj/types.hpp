// Core value types shared by every adaptraj module: scenes, feature bundles,
// hyperparameters, and the canonical newline-delimited scene encoding.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace adaptraj {

using json = nlohmann::json;

inline constexpr std::size_t kObsLen = 8;
inline constexpr std::size_t kPredLen = 12;
inline constexpr std::size_t kSeqLen = kObsLen + kPredLen;
inline constexpr double kFrameDt = 0.4;  // seconds between emitted frames

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Domain identifier. Real domains are non-negative; kMaskedDomain marks a
/// scene whose domain label is hidden from the model.
using DomainId = std::int32_t;
inline constexpr DomainId kMaskedDomain = -1;

inline bool is_masked(DomainId id) { return id == kMaskedDomain; }

struct Location {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

/// Observed-window track of one neighbor. `valid[t]` is false where the
/// neighbor was not seen; the matching point is then meaningless.
struct NeighborTrack {
  std::vector<Location> pts;
  std::vector<bool> valid;

  friend bool operator==(const NeighborTrack&, const NeighborTrack&) = default;

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (bool v : valid) n += v ? 1 : 0;
    return n;
  }
};

struct TrajectoryScene {
  std::string scene_id;
  DomainId domain_id = kMaskedDomain;
  double timestamp_origin = 0.0;
  std::vector<Location> focal_observed;
  std::vector<Location> focal_future;  // empty at pure inference
  std::vector<NeighborTrack> neighbors;

  friend bool operator==(const TrajectoryScene&, const TrajectoryScene&) = default;

  bool has_future() const { return !focal_future.empty(); }
  const Location& last_observed() const { return focal_observed.back(); }
};

/// Returns one message per broken invariant; empty means the scene is valid.
inline std::vector<std::string> validate_scene(const TrajectoryScene& scene) {
  std::vector<std::string> out;
  if (scene.domain_id < 0 && !is_masked(scene.domain_id)) {
    out.push_back("domain_id " + std::to_string(scene.domain_id) + " is neither MASKED nor >= 0");
  }
  if (!std::isfinite(scene.timestamp_origin)) out.push_back("timestamp_origin not finite");
  if (scene.focal_observed.size() != kObsLen) {
    out.push_back("focal_observed length " + std::to_string(scene.focal_observed.size()) +
                  " ≠ " + std::to_string(kObsLen));
  }
  if (!scene.focal_future.empty() && scene.focal_future.size() != kPredLen) {
    out.push_back("focal_future length " + std::to_string(scene.focal_future.size()) + " ≠ " +
                  std::to_string(kPredLen));
  }
  for (std::size_t t = 0; t < scene.focal_observed.size(); ++t) {
    if (!scene.focal_observed[t].finite()) {
      out.push_back("focal_observed[" + std::to_string(t) + "] not finite");
    }
  }
  for (std::size_t t = 0; t < scene.focal_future.size(); ++t) {
    if (!scene.focal_future[t].finite()) {
      out.push_back("focal_future[" + std::to_string(t) + "] not finite");
    }
  }
  for (std::size_t n = 0; n < scene.neighbors.size(); ++n) {
    const auto& nb = scene.neighbors[n];
    const std::string tag = "neighbor " + std::to_string(n);
    if (nb.pts.size() != kObsLen || nb.valid.size() != kObsLen) {
      out.push_back(tag + " length " + std::to_string(nb.pts.size()) + "/" +
                    std::to_string(nb.valid.size()) + " ≠ " + std::to_string(kObsLen));
      continue;
    }
    // The focal agent is present on every observed frame, so co-occurrence
    // reduces to the neighbor having at least one valid frame.
    std::size_t shared = 0;
    for (std::size_t t = 0; t < kObsLen; ++t) {
      if (!nb.valid[t]) continue;
      ++shared;
      if (!nb.pts[t].finite()) out.push_back(tag + " pts[" + std::to_string(t) + "] not finite");
    }
    if (shared == 0) out.push_back(tag + " never co-occurs");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature bundle

/// The disentangled representations computed for one scene.
struct FeatureBundle {
  std::vector<double> indiv_hidden;
  std::vector<double> interaction;
  std::vector<double> indiv_invariant;
  std::vector<double> neigh_invariant;
  std::vector<double> indiv_specific;
  std::vector<double> neigh_specific;
  std::vector<double> fused_invariant;
  std::vector<double> fused_specific;

  /// Throws DimensionError unless every vector has length `feature_dim` and
  /// finite entries.
  void check(std::size_t feature_dim) const {
    const std::array<const std::vector<double>*, 8> all = {
        &indiv_hidden,    &interaction,    &indiv_invariant, &neigh_invariant,
        &indiv_specific,  &neigh_specific, &fused_invariant, &fused_specific};
    for (const auto* v : all) {
      if (v->size() != feature_dim) {
        throw DimensionError("feature vector has dimension " + std::to_string(v->size()) +
                             ", expected " + std::to_string(feature_dim));
      }
      for (double e : *v) {
        if (!std::isfinite(e)) throw DimensionError("feature vector has non-finite entry");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Hyperparameters

enum class SimseVariant { kScaleInvariant, kLiteral };

struct HyperParams {
  // L_ours weights.
  double alpha = 0.01;
  double beta = 0.075;
  double gamma = 0.25;
  // Domain weights for stage 1 and stages 2-3.
  double delta = 0.5;
  double delta_prime = 0.05;
  double sigma = 0.5;  // aggregator (masking) ratio
  int e_start = 10;
  int e_end = 20;
  int e_total = 30;
  double f_low = 0.1;
  double f_high = 1.0;
  double lr = 1e-3;
  double grad_clip = 10.0;
  int batch_size = 32;
  int d_f = 32;
  int embed_dim = 16;
  int n_domains = 3;
  int noise_dim = 4;
  std::uint64_t seed = 0;
  SimseVariant simse_variant = SimseVariant::kScaleInvariant;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("hyperparams: " + m); };
    if (!(alpha >= 0 && beta >= 0 && gamma >= 0)) fail("alpha, beta, gamma must be >= 0");
    if (!(delta >= 0 && delta_prime >= 0)) fail("delta, delta_prime must be >= 0");
    if (!(sigma >= 0 && sigma <= 1)) fail("sigma must lie in [0, 1]");
    if (!(e_start > 0 && e_start <= e_end && e_end <= e_total)) {
      fail("epochs must satisfy 0 < e_start <= e_end <= e_total");
    }
    if (!(f_low > 0 && f_low <= f_high)) fail("learning-rate fractions must satisfy 0 < f_low <= f_high");
    if (!(lr > 0)) fail("lr must be > 0");
    if (!(grad_clip > 0)) fail("grad_clip must be > 0");
    if (batch_size <= 0) fail("batch_size must be > 0");
    if (d_f <= 0 || embed_dim <= 0) fail("feature dimensions must be > 0");
    if (n_domains <= 0) fail("n_domains must be > 0");
    if (noise_dim < 0) fail("noise_dim must be >= 0");
  }
};

inline void to_json(json& j, const HyperParams& hp) {
  j = json{{"alpha", hp.alpha},       {"beta", hp.beta},
           {"gamma", hp.gamma},       {"delta", hp.delta},
           {"delta_prime", hp.delta_prime}, {"sigma", hp.sigma},
           {"e_start", hp.e_start},   {"e_end", hp.e_end},
           {"e_total", hp.e_total},   {"f_low", hp.f_low},
           {"f_high", hp.f_high},     {"lr", hp.lr},
           {"grad_clip", hp.grad_clip}, {"batch_size", hp.batch_size},
           {"d_f", hp.d_f},           {"embed_dim", hp.embed_dim},
           {"n_domains", hp.n_domains}, {"noise_dim", hp.noise_dim},
           {"seed", hp.seed},
           {"simse_variant", hp.simse_variant == SimseVariant::kLiteral ? "literal" : "scale_invariant"}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const json& j, HyperParams& hp) {
  static const std::vector<std::string> known = {
      "alpha", "beta", "gamma", "delta", "delta_prime", "sigma", "e_start", "e_end",
      "e_total", "f_low", "f_high", "lr", "grad_clip", "batch_size", "d_f", "embed_dim",
      "n_domains", "noise_dim", "seed", "simse_variant"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("hyperparams: unknown key '" + key + "'");
    }
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("alpha", hp.alpha);
  get("beta", hp.beta);
  get("gamma", hp.gamma);
  get("delta", hp.delta);
  get("delta_prime", hp.delta_prime);
  get("sigma", hp.sigma);
  get("e_start", hp.e_start);
  get("e_end", hp.e_end);
  get("e_total", hp.e_total);
  get("f_low", hp.f_low);
  get("f_high", hp.f_high);
  get("lr", hp.lr);
  get("grad_clip", hp.grad_clip);
  get("batch_size", hp.batch_size);
  get("d_f", hp.d_f);
  get("embed_dim", hp.embed_dim);
  get("n_domains", hp.n_domains);
  get("noise_dim", hp.noise_dim);
  get("seed", hp.seed);
  if (j.contains("simse_variant")) {
    const auto v = j.at("simse_variant").get<std::string>();
    if (v == "literal") {
      hp.simse_variant = SimseVariant::kLiteral;
    } else if (v == "scale_invariant") {
      hp.simse_variant = SimseVariant::kScaleInvariant;
    } else {
      throw ConfigError("hyperparams: unknown simse_variant '" + v + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// Canonical scene records: one JSON object per line.

namespace detail {

inline json points_to_json(const std::vector<Location>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back(json::array({p.x, p.y}));
  return arr;
}

inline std::vector<Location> points_from_json(const json& arr) {
  std::vector<Location> out;
  out.reserve(arr.size());
  for (const auto& p : arr) {
    if (!p.is_array() || p.size() != 2) throw DataError("scene record: point must be [x, y]");
    out.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return out;
}

}  // namespace detail

inline json scene_to_json(const TrajectoryScene& s) {
  json nbs = json::array();
  for (const auto& nb : s.neighbors) {
    json mask = json::array();
    for (bool v : nb.valid) mask.push_back(v);
    nbs.push_back(json{{"mask", mask}, {"pts", detail::points_to_json(nb.pts)}});
  }
  json j;
  j["scene_id"] = s.scene_id;
  j["domain_id"] = is_masked(s.domain_id) ? json("MASKED") : json(s.domain_id);
  j["t0"] = s.timestamp_origin;
  j["focal"] = detail::points_to_json(s.focal_observed);
  j["future"] = detail::points_to_json(s.focal_future);
  j["neighbors"] = std::move(nbs);
  return j;
}

inline TrajectoryScene scene_from_json(const json& j) {
  static const std::vector<std::string> fields = {"scene_id", "domain_id", "t0",
                                                  "focal",    "future",    "neighbors"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(fields.begin(), fields.end(), key) == fields.end()) {
      throw DataError("scene record: unknown field '" + key + "'");
    }
  }
  TrajectoryScene s;
  try {
    s.scene_id = j.at("scene_id").get<std::string>();
    const auto& d = j.at("domain_id");
    if (d.is_string()) {
      if (d.get<std::string>() != "MASKED") throw DataError("scene record: bad domain_id");
      s.domain_id = kMaskedDomain;
    } else {
      s.domain_id = d.get<DomainId>();
      if (s.domain_id < 0) throw DataError("scene record: negative domain_id");
    }
    s.timestamp_origin = j.at("t0").get<double>();
    s.focal_observed = detail::points_from_json(j.at("focal"));
    if (j.contains("future") && !j.at("future").is_null()) {
      s.focal_future = detail::points_from_json(j.at("future"));
    }
    for (const auto& nb : j.at("neighbors")) {
      NeighborTrack track;
      track.pts = detail::points_from_json(nb.at("pts"));
      for (const auto& v : nb.at("mask")) track.valid.push_back(v.get<bool>());
      s.neighbors.push_back(std::move(track));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("scene record: ") + e.what());
  }
  return s;
}

inline std::string encode_scene(const TrajectoryScene& s) { return scene_to_json(s).dump(); }

inline TrajectoryScene decode_scene(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("scene record: ") + e.what());
  }
  return scene_from_json(j);
}

inline void write_scenes(std::ostream& os, const std::vector<TrajectoryScene>& scenes) {
  for (const auto& s : scenes) os << encode_scene(s) << '\n';
}

inline std::vector<TrajectoryScene> read_scenes(std::istream& is) {
  std::vector<TrajectoryScene> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(decode_scene(line));
  }
  return out;
}

}  // namespace adaptraj
