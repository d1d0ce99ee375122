// The full predictor: backbone plus disentangled feature extractors, with
// labeled (expert) and masked (aggregator) routing, the combined training
// objective, and checkpoint I/O.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "adaptraj/autodiff.hpp"
#include "adaptraj/backbone.hpp"
#include "adaptraj/disentangle.hpp"
#include "adaptraj/layers.hpp"
#include "adaptraj/losses.hpp"
#include "adaptraj/types.hpp"

namespace adaptraj {

enum class Method { kVanilla, kAdapTraj, kWithoutSpecific, kWithoutInvariant };

inline std::string method_label(Method m) {
  switch (m) {
    case Method::kVanilla: return "vanilla";
    case Method::kAdapTraj: return "adaptraj";
    case Method::kWithoutSpecific: return "w/o-specific";
    case Method::kWithoutInvariant: return "w/o-invariant";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::kVanilla, Method::kAdapTraj, Method::kWithoutSpecific, Method::kWithoutInvariant}) {
    if (method_label(m) == s) return m;
  }
  throw ConfigError("unknown method '" + s + "'");
}

inline bool uses_invariant(Method m) { return m == Method::kAdapTraj || m == Method::kWithoutSpecific; }
inline bool uses_specific(Method m) { return m == Method::kAdapTraj || m == Method::kWithoutInvariant; }
inline bool uses_domain_losses(Method m) { return m != Method::kVanilla; }

/// Everything one forward pass produces. Absent feature paths (ablations,
/// vanilla) are std::nullopt.
template <typename S>
struct ForwardPass {
  BackboneEncoding<S> encoding;
  std::optional<FeatureTriple<S>> invariant;
  std::optional<FeatureTriple<S>> specific;
  Var<S> prediction;  // n_scenes x 24, relative to the last observed location
  bool masked = false;
};

template <typename S>
struct LossTerms {
  Var<S> base;
  Var<S> recon;
  Var<S> diff;
  Var<S> similar;
  Var<S> ours;
  Var<S> total;

  static double scalar(Var<S> v) { return v.valid() ? static_cast<double>(v.value()(0, 0)) : 0.0; }
};

inline constexpr int kCheckpointVersion = 1;

template <typename S>
class AdapTrajModel {
 public:
  AdapTrajModel(const HyperParams& hp, Method method) : hp_(hp), method_(method) {
    hp_.validate();
    std::mt19937_64 rng(hp_.seed);
    BackboneConfig bc{hp_.d_f, hp_.embed_dim, hp_.noise_dim, method != Method::kVanilla};
    backbone_ = Backbone<S>::make(store_, bc, rng);
    if (uses_invariant(method)) invariant_ = InvariantExtractor<S>::make(store_, hp_.d_f, rng);
    if (uses_specific(method)) specific_ = SpecificExtractor<S>::make(store_, hp_.d_f, hp_.n_domains, rng);
    if (uses_domain_losses(method)) {
      recon_ = ReconstructionDecoder<S>::make(store_, hp_.d_f, rng);
      classifier_ = DomainClassifier<S>::make(store_, hp_.d_f, hp_.n_domains, rng);
    }
  }

  AdapTrajModel(const AdapTrajModel&) = delete;
  AdapTrajModel& operator=(const AdapTrajModel&) = delete;

  const HyperParams& hyperparams() const { return hp_; }
  Method method() const { return method_; }
  ParameterStore<S>& params() { return store_; }
  const ParameterStore<S>& params() const { return store_; }
  const Backbone<S>& backbone() const { return backbone_; }
  const std::optional<InvariantExtractor<S>>& invariant_extractor() const { return invariant_; }
  const std::optional<SpecificExtractor<S>>& specific_extractor() const { return specific_; }

  /// Label-indexed expert selections performed so far (0 for label-free use).
  std::size_t labeled_routes() const { return specific_ ? specific_->labeled_routes() : 0; }

  Mat<S> zero_noise(std::size_t n) const { return Mat<S>::Zero(static_cast<Eigen::Index>(n), hp_.noise_dim); }

  /// `labels` selects experts per scene; nullptr means the labels are masked
  /// and the aggregator route is taken.
  ForwardPass<S> forward(Tape<S>& tape, const SceneBatch<S>& batch, const std::vector<int>* labels,
                         const Mat<S>& noise) const {
    ForwardPass<S> out;
    out.masked = labels == nullptr;
    out.encoding = backbone_.encode(tape, batch);
    const Var<S> h = out.encoding.indiv;
    const Var<S> p = out.encoding.interaction;
    if (invariant_) out.invariant = (*invariant_)(tape, h, p);
    if (specific_) {
      out.specific = labels ? specific_->extract(tape, h, p, *labels) : specific_->aggregate(tape, h, p);
    }
    std::optional<Var<S>> hi, hs;
    if (out.invariant) hi = out.invariant->fused;
    if (out.specific) hs = out.specific->fused;
    out.prediction = backbone_.generate(tape, h, p, hi, hs, noise);
    return out;
  }

  /// Base loss plus, for the domain-aware methods, the weighted auxiliary
  /// objective. The adversarial term is skipped for masked batches. With
  /// `reverse_invariant_grad` the classifier gradient reaches the invariant
  /// path negated.
  LossTerms<S> losses(Tape<S>& tape, const ForwardPass<S>& fwd, const SceneBatch<S>& batch,
                      const std::vector<int>* labels, double domain_weight,
                      bool reverse_invariant_grad = true) const {
    if (!batch.has_future()) throw DataError("losses: batch has no ground-truth futures");
    LossTerms<S> t;
    t.base = base_loss(fwd.prediction, batch.future_rel);
    if (!uses_domain_losses(method_)) {
      t.total = t.base;
      return t;
    }
    const Eigen::Index n = static_cast<Eigen::Index>(batch.n_scenes);
    auto zeros = [&] { return tape.zeros(n, hp_.d_f); };
    const Var<S> inv_i = fwd.invariant ? fwd.invariant->indiv : zeros();
    const Var<S> inv_n = fwd.invariant ? fwd.invariant->neigh : zeros();
    const Var<S> spec_i = fwd.specific ? fwd.specific->indiv : zeros();
    const Var<S> spec_n = fwd.specific ? fwd.specific->neigh : zeros();

    t.recon = reconstruction_loss((*recon_)(tape, inv_i, spec_i), batch.observed_disp, hp_.simse_variant);
    t.diff = (fwd.invariant && fwd.specific) ? difference_loss(inv_i, spec_i, inv_n, spec_n) : tape.zeros(1, 1);
    if (labels != nullptr && !fwd.masked) {
      const Var<S> ci = reverse_invariant_grad ? ad::grad_reverse(inv_i) : inv_i;
      const Var<S> cn = reverse_invariant_grad ? ad::grad_reverse(inv_n) : inv_n;
      t.similar = domain_adversarial_loss((*classifier_)(tape, ci, cn, spec_i, spec_n), *labels);
    } else {
      t.similar = tape.zeros(1, 1);
    }
    t.ours = ad::add(ad::add(ad::scale(t.recon, static_cast<S>(hp_.alpha)), ad::scale(t.diff, static_cast<S>(hp_.beta))),
                     ad::scale(t.similar, static_cast<S>(hp_.gamma)));
    t.total = ad::add(t.base, ad::scale(t.ours, static_cast<S>(domain_weight)));
    return t;
  }

  /// Classifier logits on the four features of a forward pass, without any
  /// gradient reversal.
  Var<S> classify(Tape<S>& tape, const ForwardPass<S>& fwd) const {
    if (!classifier_) throw std::logic_error("classify: method has no domain classifier");
    const Eigen::Index n = fwd.prediction.rows();
    auto pick = [&](const std::optional<FeatureTriple<S>>& f, bool indiv) {
      return f ? (indiv ? f->indiv : f->neigh) : tape.zeros(n, hp_.d_f);
    };
    return (*classifier_)(tape, pick(fwd.invariant, true), pick(fwd.invariant, false), pick(fwd.specific, true),
                          pick(fwd.specific, false));
  }

  /// Label-free prediction in absolute coordinates.
  std::vector<std::vector<Location>> predict(const SceneBatch<S>& batch, const Mat<S>& noise) const {
    Tape<S> tape;
    const auto fwd = forward(tape, batch, nullptr, noise);
    return to_absolute(fwd.prediction.value(), batch.origin);
  }

  /// Per-scene feature vectors on the label-free route.
  std::vector<FeatureBundle> features(const SceneBatch<S>& batch) const {
    Tape<S> tape;
    const auto fwd = forward(tape, batch, nullptr, zero_noise(batch.n_scenes));
    const auto n = static_cast<Eigen::Index>(batch.n_scenes);
    auto row = [&](std::optional<Var<S>> v, Eigen::Index r) {
      std::vector<double> out(static_cast<std::size_t>(hp_.d_f), 0.0);
      if (v) {
        for (Eigen::Index c = 0; c < hp_.d_f; ++c) out[static_cast<std::size_t>(c)] = static_cast<double>(v->value()(r, c));
      }
      return out;
    };
    auto opt = [](const std::optional<FeatureTriple<S>>& f, int which) -> std::optional<Var<S>> {
      if (!f) return std::nullopt;
      return which == 0 ? f->indiv : which == 1 ? f->neigh : f->fused;
    };
    std::vector<FeatureBundle> out;
    for (Eigen::Index r = 0; r < n; ++r) {
      FeatureBundle fb;
      fb.indiv_hidden = row(fwd.encoding.indiv, r);
      fb.interaction = row(fwd.encoding.interaction, r);
      fb.indiv_invariant = row(opt(fwd.invariant, 0), r);
      fb.neigh_invariant = row(opt(fwd.invariant, 1), r);
      fb.fused_invariant = row(opt(fwd.invariant, 2), r);
      fb.indiv_specific = row(opt(fwd.specific, 0), r);
      fb.neigh_specific = row(opt(fwd.specific, 1), r);
      fb.fused_specific = row(opt(fwd.specific, 2), r);
      fb.check(static_cast<std::size_t>(hp_.d_f));
      out.push_back(std::move(fb));
    }
    return out;
  }

  // -------------------------------------------------------------------------
  // Checkpoints

  json to_checkpoint() const {
    json params = json::object();
    store_.for_each([&](const Parameter<S>& p) {
      std::vector<double> data;
      data.reserve(static_cast<std::size_t>(p.value.size()));
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
        for (Eigen::Index r = 0; r < p.value.rows(); ++r) data.push_back(static_cast<double>(p.value(r, c)));
      }
      params[p.name] = json{{"rows", p.value.rows()}, {"cols", p.value.cols()}, {"data", std::move(data)}};
    });
    return json{{"format", "adaptraj-checkpoint"},
                {"version", kCheckpointVersion},
                {"method", method_label(method_)},
                {"hyperparams", hp_},
                {"params", std::move(params)}};
  }

  /// Rebuilds a model from a checkpoint; every parameter must be present with
  /// matching dimensions and no extra parameters are accepted.
  static std::unique_ptr<AdapTrajModel> from_checkpoint(const json& j) {
    try {
      if (j.at("format").get<std::string>() != "adaptraj-checkpoint") throw DataError("checkpoint: wrong format tag");
      if (j.at("version").get<int>() != kCheckpointVersion) throw DataError("checkpoint: unsupported version");
      const auto hp = j.at("hyperparams").get<HyperParams>();
      auto model = std::make_unique<AdapTrajModel>(hp, parse_method(j.at("method").get<std::string>()));
      model->load_params(j.at("params"));
      return model;
    } catch (const json::exception& e) {
      throw DataError(std::string("checkpoint: ") + e.what());
    }
  }

  void load_params(const json& params) {
    if (params.size() != store_.size()) {
      throw DimensionError("checkpoint: parameter count " + std::to_string(params.size()) + " ≠ " +
                           std::to_string(store_.size()));
    }
    store_.for_each([&](Parameter<S>& p) {
      if (!params.contains(p.name)) throw DimensionError("checkpoint: missing parameter " + p.name);
      const auto& e = params.at(p.name);
      const auto rows = e.at("rows").template get<Eigen::Index>();
      const auto cols = e.at("cols").template get<Eigen::Index>();
      const auto& data = e.at("data");
      if (rows != p.value.rows() || cols != p.value.cols() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw DimensionError("checkpoint: dimension mismatch for " + p.name);
      }
      std::size_t i = 0;
      for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) p.value(r, c) = static_cast<S>(data[i++].template get<double>());
      }
    });
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write checkpoint " + path.string());
    os << to_checkpoint().dump() << '\n';
  }

  static std::unique_ptr<AdapTrajModel> load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot read checkpoint " + path.string());
    json j;
    try {
      j = json::parse(is);
    } catch (const json::parse_error& e) {
      throw DataError(std::string("checkpoint: ") + e.what());
    }
    return from_checkpoint(j);
  }

 private:
  HyperParams hp_;
  Method method_;
  ParameterStore<S> store_;
  Backbone<S> backbone_;
  std::optional<InvariantExtractor<S>> invariant_;
  std::optional<SpecificExtractor<S>> specific_;
  std::optional<ReconstructionDecoder<S>> recon_;
  std::optional<DomainClassifier<S>> classifier_;
};

/// Copies every backbone parameter of `from` into `to`. When only one side
/// consumes domain features, the shared leading rows of the decoder
/// initialization weight are copied.
template <typename S>
void copy_backbone_weights(const AdapTrajModel<S>& from, AdapTrajModel<S>& to) {
  from.params().for_each([&](const Parameter<S>& src) {
    if (src.name.rfind("backbone/", 0) != 0) return;
    Parameter<S>& dst = to.params().at(src.name);
    if (dst.value.cols() != src.value.cols()) throw DimensionError("copy_backbone_weights: " + src.name);
    const Eigen::Index rows = std::min(src.value.rows(), dst.value.rows());
    if (dst.value.rows() != src.value.rows() && src.name != "backbone/decoder_init/w") {
      throw DimensionError("copy_backbone_weights: " + src.name);
    }
    dst.value.setZero();
    dst.value.topRows(rows) = src.value.topRows(rows);
  });
}

}  // namespace adaptraj
