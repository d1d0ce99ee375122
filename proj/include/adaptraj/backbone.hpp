// Reference sequence-to-sequence trajectory predictor: location embedding,
// recurrent individual encoder, max-pooled neighbor interaction, and a
// noise-conditioned recurrent generator.
//
// The model never sees absolute coordinates. Agents enter as per-step
// displacements, neighbors additionally through their last valid position
// relative to the focal agent, and predictions are displacements accumulated
// from the focal agent's last observed location.
#pragma once

#include <array>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adaptraj/autodiff.hpp"
#include "adaptraj/layers.hpp"
#include "adaptraj/types.hpp"

namespace adaptraj {

/// Model-ready tensors for a set of scenes. Rows of the per-step matrices
/// are agents: each scene contributes its focal agent followed by its
/// neighbors. Domain labels are deliberately not part of a batch.
template <typename S>
struct SceneBatch {
  std::size_t n_scenes = 0;
  std::size_t n_agents = 0;
  std::array<Mat<S>, kObsLen> disp;   // n_agents x 2
  std::array<ColVec<S>, kObsLen> mask;  // 1 where the agent is observed
  std::vector<int> focal_rows;
  std::vector<int> neighbor_rows;
  std::vector<int> neighbor_offsets;  // n_scenes + 1 offsets into neighbor_rows
  Mat<S> neighbor_rel;                // one row per neighbor_rows entry
  std::vector<Location> origin;       // focal last observed location
  Mat<S> observed_disp;               // n_scenes x 16: [dx_0..dx_7, dy_0..dy_7]
  Mat<S> future_rel;                  // n_scenes x 24: [x_1, y_1, ..., x_12, y_12] - origin

  bool has_future() const { return future_rel.size() > 0; }
};

template <typename S>
SceneBatch<S> make_batch(std::span<const TrajectoryScene* const> scenes) {
  SceneBatch<S> b;
  b.n_scenes = scenes.size();
  bool all_future = !scenes.empty();
  for (const auto* s : scenes) {
    if (s->focal_observed.size() != kObsLen) throw DimensionError("make_batch: observed window must have 8 frames");
    b.n_agents += 1 + s->neighbors.size();
    all_future = all_future && s->focal_future.size() == kPredLen;
  }
  const auto n_agents = static_cast<Eigen::Index>(b.n_agents);
  for (std::size_t t = 0; t < kObsLen; ++t) {
    b.disp[t] = Mat<S>::Zero(n_agents, 2);
    b.mask[t] = ColVec<S>::Zero(n_agents);
  }
  std::vector<std::array<double, 2>> rel;
  b.observed_disp = Mat<S>::Zero(static_cast<Eigen::Index>(b.n_scenes), 2 * kObsLen);
  if (all_future) b.future_rel = Mat<S>(static_cast<Eigen::Index>(b.n_scenes), 2 * kPredLen);
  b.neighbor_offsets.push_back(0);

  int row = 0;
  for (std::size_t si = 0; si < scenes.size(); ++si) {
    const auto& s = *scenes[si];
    const Location origin = s.last_observed();
    b.origin.push_back(origin);
    b.focal_rows.push_back(row);
    for (std::size_t t = 0; t < kObsLen; ++t) {
      b.mask[t](row) = S(1);
      if (t == 0) continue;
      const double dx = s.focal_observed[t].x - s.focal_observed[t - 1].x;
      const double dy = s.focal_observed[t].y - s.focal_observed[t - 1].y;
      b.disp[t](row, 0) = static_cast<S>(dx);
      b.disp[t](row, 1) = static_cast<S>(dy);
      b.observed_disp(static_cast<Eigen::Index>(si), static_cast<Eigen::Index>(t)) = static_cast<S>(dx);
      b.observed_disp(static_cast<Eigen::Index>(si), static_cast<Eigen::Index>(kObsLen + t)) = static_cast<S>(dy);
    }
    if (all_future) {
      for (std::size_t t = 0; t < kPredLen; ++t) {
        b.future_rel(static_cast<Eigen::Index>(si), static_cast<Eigen::Index>(2 * t)) =
            static_cast<S>(s.focal_future[t].x - origin.x);
        b.future_rel(static_cast<Eigen::Index>(si), static_cast<Eigen::Index>(2 * t + 1)) =
            static_cast<S>(s.focal_future[t].y - origin.y);
      }
    }
    ++row;
    for (const auto& nb : s.neighbors) {
      if (nb.pts.size() != kObsLen || nb.valid.size() != kObsLen) {
        throw DimensionError("make_batch: neighbor track must have 8 frames");
      }
      int last_valid = -1;
      for (std::size_t t = 0; t < kObsLen; ++t) {
        if (!nb.valid[t]) continue;
        last_valid = static_cast<int>(t);
        b.mask[t](row) = S(1);
        if (t > 0 && nb.valid[t - 1]) {
          b.disp[t](row, 0) = static_cast<S>(nb.pts[t].x - nb.pts[t - 1].x);
          b.disp[t](row, 1) = static_cast<S>(nb.pts[t].y - nb.pts[t - 1].y);
        }
      }
      if (last_valid < 0) throw DataError("make_batch: neighbor never co-occurs in " + s.scene_id);
      rel.push_back({nb.pts[static_cast<std::size_t>(last_valid)].x - origin.x,
                     nb.pts[static_cast<std::size_t>(last_valid)].y - origin.y});
      b.neighbor_rows.push_back(row);
      ++row;
    }
    b.neighbor_offsets.push_back(static_cast<int>(b.neighbor_rows.size()));
  }
  b.neighbor_rel = Mat<S>(static_cast<Eigen::Index>(rel.size()), 2);
  for (std::size_t i = 0; i < rel.size(); ++i) {
    b.neighbor_rel(static_cast<Eigen::Index>(i), 0) = static_cast<S>(rel[i][0]);
    b.neighbor_rel(static_cast<Eigen::Index>(i), 1) = static_cast<S>(rel[i][1]);
  }
  return b;
}

template <typename S>
SceneBatch<S> make_batch(const std::vector<const TrajectoryScene*>& scenes) {
  return make_batch<S>(std::span<const TrajectoryScene* const>(scenes.data(), scenes.size()));
}

struct BackboneConfig {
  int d_f = 32;
  int embed_dim = 16;
  int noise_dim = 4;
  // When true the decoder initialization also consumes the fused invariant
  // and specific features.
  bool domain_features = true;
};

template <typename S>
struct BackboneEncoding {
  Var<S> agent_hidden;  // n_agents x d_f
  Var<S> indiv;         // focal final encoder state, n_scenes x d_f
  Var<S> interaction;   // P, n_scenes x d_f
};

template <typename S>
class Backbone {
 public:
  static Backbone make(ParameterStore<S>& store, const BackboneConfig& cfg, std::mt19937_64& rng) {
    Backbone b;
    b.cfg_ = cfg;
    const int d = cfg.d_f;
    b.embed_ = Linear<S>::make(store, "backbone/embed", 2, cfg.embed_dim, rng);
    b.encoder_ = GruCell<S>::make(store, "backbone/encoder", cfg.embed_dim, d, rng);
    b.interact_ = Linear<S>::make(store, "backbone/interaction", d + 2, d, rng);
    b.pool_default_ = &store.add("backbone/interaction/default", Mat<S>::Zero(1, d));
    b.init_ = Linear<S>::make(store, "backbone/decoder_init", cfg.domain_features ? 4 * d : 2 * d, d, rng);
    b.decoder_ = GruCell<S>::make(store, "backbone/decoder", 2 * d, d + cfg.noise_dim, rng);
    b.head_ = Linear<S>::make(store, "backbone/head", d + cfg.noise_dim, 2, rng);
    return b;
  }

  const BackboneConfig& config() const { return cfg_; }

  /// One embedding per observed step, each n_agents x embed_dim; rows of
  /// unobserved frames are zero.
  std::vector<Var<S>> embed_locations(Tape<S>& tape, const SceneBatch<S>& batch) const {
    std::vector<Var<S>> out;
    out.reserve(kObsLen);
    for (std::size_t t = 0; t < kObsLen; ++t) {
      const Var<S> e = ad::relu(embed_(tape, tape.constant(batch.disp[t])));
      out.push_back(ad::scale_rows(e, batch.mask[t]));
    }
    return out;
  }

  /// Runs the encoder over all steps; unobserved steps keep the previous state.
  Var<S> encode_individual(Tape<S>& tape, const SceneBatch<S>& batch,
                           const std::vector<Var<S>>& embeddings) const {
    Var<S> h = tape.zeros(static_cast<Eigen::Index>(batch.n_agents), cfg_.d_f);
    for (std::size_t t = 0; t < embeddings.size(); ++t) {
      const Var<S> cand = encoder_(tape, embeddings[t], h);
      h = ad::add(h, ad::scale_rows(ad::sub(cand, h), batch.mask[t]));
    }
    return h;
  }

  Var<S> encode_interactions(Tape<S>& tape, const SceneBatch<S>& batch, Var<S> agent_hidden) const {
    const Var<S> nb_hidden = ad::gather_rows(agent_hidden, batch.neighbor_rows);
    const Var<S> nb_in = ad::hcat<S>({nb_hidden, tape.constant(batch.neighbor_rel)});
    const Var<S> nb_code = ad::relu(interact_(tape, nb_in));
    return ad::segment_max(nb_code, batch.neighbor_offsets, tape.parameter(*pool_default_));
  }

  BackboneEncoding<S> encode(Tape<S>& tape, const SceneBatch<S>& batch) const {
    BackboneEncoding<S> enc;
    enc.agent_hidden = encode_individual(tape, batch, embed_locations(tape, batch));
    enc.indiv = ad::gather_rows(enc.agent_hidden, batch.focal_rows);
    enc.interaction = encode_interactions(tape, batch, enc.agent_hidden);
    return enc;
  }

  /// Decodes 12 future positions relative to the last observed location,
  /// laid out [x_1, y_1, ..., x_12, y_12]. `noise` is n_scenes x noise_dim.
  /// With domain features enabled, absent `fused_invariant` /
  /// `fused_specific` are zero-filled.
  Var<S> generate(Tape<S>& tape, Var<S> indiv, Var<S> interaction, std::optional<Var<S>> fused_invariant,
                  std::optional<Var<S>> fused_specific, const Mat<S>& noise) const {
    const Eigen::Index n = indiv.rows();
    auto check = [&](Var<S> v, const char* what) {
      if (v.rows() != n || v.cols() != cfg_.d_f) {
        throw DimensionError(std::string("generate: ") + what + " must be n x d_f");
      }
    };
    check(indiv, "individual state");
    check(interaction, "interaction");
    if (noise.rows() != n || noise.cols() != cfg_.noise_dim) throw DimensionError("generate: noise must be n x noise_dim");

    std::vector<Var<S>> init_in = {interaction, indiv};
    if (cfg_.domain_features) {
      const Var<S> hi = fused_invariant ? *fused_invariant : tape.zeros(n, cfg_.d_f);
      const Var<S> hs = fused_specific ? *fused_specific : tape.zeros(n, cfg_.d_f);
      check(hi, "invariant feature");
      check(hs, "specific feature");
      init_in.push_back(hi);
      init_in.push_back(hs);
    } else if (fused_invariant || fused_specific) {
      throw DimensionError("generate: backbone built without domain-feature inputs");
    }
    const Var<S> context = ad::tanh(init_(tape, ad::hcat(init_in)));
    Var<S> state = cfg_.noise_dim > 0 ? ad::hcat<S>({context, tape.constant(noise)}) : context;
    const Var<S> step_in = ad::hcat<S>({interaction, indiv});

    std::vector<Var<S>> positions;
    positions.reserve(kPredLen);
    Var<S> pos = tape.zeros(n, 2);
    for (std::size_t l = 0; l < kPredLen; ++l) {
      state = decoder_(tape, step_in, state);
      pos = ad::add(pos, head_(tape, state));
      positions.push_back(pos);
    }
    return ad::hcat(positions);
  }

 private:
  BackboneConfig cfg_;
  Linear<S> embed_;
  GruCell<S> encoder_;
  Linear<S> interact_;
  Parameter<S>* pool_default_ = nullptr;
  Linear<S> init_;
  GruCell<S> decoder_;
  Linear<S> head_;
};

/// Σ_scenes Σ_steps ‖Y − Ŷ‖², on relative positions.
template <typename S>
Var<S> base_loss(Var<S> predicted, const Mat<S>& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != truth.cols()) {
    throw DimensionError("base_loss: prediction and ground truth shapes differ");
  }
  return ad::sum_squares(ad::add_const(predicted, Mat<S>(-truth)));
}

/// Converts generator output rows back to absolute locations.
template <typename S>
std::vector<std::vector<Location>> to_absolute(const Mat<S>& relative, const std::vector<Location>& origin) {
  std::vector<std::vector<Location>> out(static_cast<std::size_t>(relative.rows()));
  for (Eigen::Index r = 0; r < relative.rows(); ++r) {
    const auto& o = origin[static_cast<std::size_t>(r)];
    auto& traj = out[static_cast<std::size_t>(r)];
    traj.reserve(kPredLen);
    for (std::size_t t = 0; t < kPredLen; ++t) {
      traj.push_back({o.x + static_cast<double>(relative(r, static_cast<Eigen::Index>(2 * t))),
                      o.y + static_cast<double>(relative(r, static_cast<Eigen::Index>(2 * t + 1)))});
    }
  }
  return out;
}

}  // namespace adaptraj
