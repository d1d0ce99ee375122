// Three-stage training: joint pretraining, aggregator training with frozen
// experts and split learning rates, then low-rate end-to-end fine-tuning.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaptraj/corpus.hpp"
#include "adaptraj/inference.hpp"
#include "adaptraj/model.hpp"

namespace adaptraj {

enum class ParamGroup { kBackbone, kInvariant, kExperts, kSpecificFuse, kAggregators, kRecon, kClassifier };

inline constexpr ParamGroup kAllGroups[] = {ParamGroup::kBackbone,     ParamGroup::kInvariant,
                                            ParamGroup::kExperts,      ParamGroup::kSpecificFuse,
                                            ParamGroup::kAggregators,  ParamGroup::kRecon,
                                            ParamGroup::kClassifier};

inline std::string group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kBackbone: return "backbone";
    case ParamGroup::kInvariant: return "invariant";
    case ParamGroup::kExperts: return "experts";
    case ParamGroup::kSpecificFuse: return "specific_fuse";
    case ParamGroup::kAggregators: return "aggregators";
    case ParamGroup::kRecon: return "recon";
    case ParamGroup::kClassifier: return "classifier";
  }
  return "unknown";
}

/// Maps a namespaced parameter key to its optimizer group.
inline ParamGroup group_of(const std::string& param_name) {
  const auto slash = param_name.find('/');
  const std::string ns = param_name.substr(0, slash);
  if (ns == "backbone") return ParamGroup::kBackbone;
  if (ns == "invariant") return ParamGroup::kInvariant;
  if (ns.rfind("expert_", 0) == 0 && ns.size() > 7 &&
      std::all_of(ns.begin() + 7, ns.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return ParamGroup::kExperts;
  }
  if (ns == "specific_fuse") return ParamGroup::kSpecificFuse;
  if (ns == "aggregator") return ParamGroup::kAggregators;
  if (ns == "recon") return ParamGroup::kRecon;
  if (ns == "classifier") return ParamGroup::kClassifier;
  throw ConfigError("unknown parameter namespace in '" + param_name + "'");
}

struct GroupSetting {
  double lr_multiplier = 1.0;
  bool frozen = false;
};

struct StageSchedule {
  int stage = 1;
  int epoch = 0;
  std::map<ParamGroup, GroupSetting> groups;
  double domain_weight = 0.0;
  bool masking = false;

  const GroupSetting& setting(ParamGroup g) const { return groups.at(g); }
};

/// Stage 1 for epoch < e_start, stage 2 for e_start <= epoch < e_end,
/// stage 3 afterwards. The vanilla backbone trains in a single stage with
/// the base loss only.
inline StageSchedule stage_schedule(const HyperParams& hp, Method method, int epoch) {
  if (epoch < 0 || epoch >= hp.e_total) {
    throw ConfigError("stage_schedule: epoch " + std::to_string(epoch) + " outside [0, e_total)");
  }
  StageSchedule s;
  s.epoch = epoch;
  for (ParamGroup g : kAllGroups) s.groups[g] = GroupSetting{};
  if (method == Method::kVanilla) return s;

  if (epoch < hp.e_start) {
    s.stage = 1;
    s.domain_weight = hp.delta;
  } else if (epoch < hp.e_end) {
    s.stage = 2;
    s.domain_weight = hp.delta_prime;
    s.masking = true;
    for (auto& [g, setting] : s.groups) {
      setting.lr_multiplier = g == ParamGroup::kAggregators ? hp.f_high : hp.f_low;
    }
    s.groups[ParamGroup::kExperts].frozen = true;
  } else {
    s.stage = 3;
    s.domain_weight = hp.delta_prime;
    s.masking = true;
    for (auto& [g, setting] : s.groups) setting.lr_multiplier = hp.f_low;
  }
  return s;
}

template <typename S>
struct OptimizerGroup {
  ParamGroup group = ParamGroup::kBackbone;
  double lr_multiplier = 1.0;
  bool frozen = false;
  std::vector<Parameter<S>*> params;
};

/// Partitions the model's parameters by namespace and tags each group with
/// the schedule's multiplier and frozen flag. Only non-empty groups are
/// returned.
template <typename S>
std::vector<OptimizerGroup<S>> make_optimizer_groups(AdapTrajModel<S>& model, const StageSchedule& schedule) {
  std::map<ParamGroup, OptimizerGroup<S>> by_group;
  model.params().for_each([&](Parameter<S>& p) {
    const ParamGroup g = group_of(p.name);
    auto& og = by_group[g];
    og.group = g;
    og.lr_multiplier = schedule.setting(g).lr_multiplier;
    og.frozen = schedule.setting(g).frozen;
    og.params.push_back(&p);
  });
  std::vector<OptimizerGroup<S>> out;
  for (auto& [g, og] : by_group) out.push_back(std::move(og));
  return out;
}

/// Adam with global gradient-norm clipping. Parameters that received no
/// gradient since the last zero_grad() are left untouched, moments included.
template <typename S>
class Adam {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  /// Returns the pre-clipping gradient norm over trainable parameters.
  double step(std::vector<OptimizerGroup<S>>& groups, double base_lr, double clip) {
    double sq = 0.0;
    for (const auto& g : groups) {
      if (g.frozen) continue;
      for (const auto* p : g.params) {
        if (p->touched) sq += static_cast<double>(p->grad.squaredNorm());
      }
    }
    const double norm = std::sqrt(sq);
    const double factor = (clip > 0 && norm > clip) ? clip / norm : 1.0;
    for (auto& g : groups) {
      if (g.frozen) continue;
      const double lr = base_lr * g.lr_multiplier;
      for (auto* p : g.params) {
        if (!p->touched) continue;
        if (p->adam_m.size() == 0) {
          p->adam_m = Mat<S>::Zero(p->value.rows(), p->value.cols());
          p->adam_v = Mat<S>::Zero(p->value.rows(), p->value.cols());
        }
        ++p->adam_step;
        const Mat<S> grad = p->grad * static_cast<S>(factor);
        p->adam_m = static_cast<S>(beta1) * p->adam_m + static_cast<S>(1 - beta1) * grad;
        p->adam_v = static_cast<S>(beta2) * p->adam_v + static_cast<S>(1 - beta2) * grad.cwiseProduct(grad);
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p->adam_step));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p->adam_step));
        const S step_size = static_cast<S>(lr / bc1);
        const S denom_scale = static_cast<S>(1.0 / std::sqrt(bc2));
        p->value.array() -= step_size * p->adam_m.array() /
                            (p->adam_v.array().sqrt() * denom_scale + static_cast<S>(eps));
      }
    }
    return norm;
  }
};

struct EpochMetrics {
  int epoch = 0;
  int stage = 1;
  std::size_t batches = 0;
  std::size_t masked_batches = 0;
  // Per-scene averages over the epoch's training batches.
  double base = 0, recon = 0, diff = 0, similar = 0, ours = 0, total = 0;
  double val_base = 0;
  double val_ade = 0;
  double val_fde = 0;
  // Σ over batches of the squared gradient norm reaching each group.
  std::map<std::string, double> grad_sq;
};

inline json to_json_record(const EpochMetrics& m) {
  json grads = json::object();
  for (const auto& [g, v] : m.grad_sq) grads[g] = v;
  return json{{"epoch", m.epoch},       {"stage", m.stage},     {"batches", m.batches},
              {"masked_batches", m.masked_batches},
              {"loss_base", m.base},    {"loss_recon", m.recon}, {"loss_diff", m.diff},
              {"loss_similar", m.similar}, {"loss_ours", m.ours}, {"loss_total", m.total},
              {"val_base", m.val_base}, {"val_ade", m.val_ade}, {"val_fde", m.val_fde},
              {"grad_sq", grads}};
}

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename S>
struct TrainResult {
  std::unique_ptr<AdapTrajModel<S>> model;
  std::vector<EpochMetrics> log;
  int best_epoch = -1;
  double best_val_ade = std::numeric_limits<double>::infinity();
  HyperParams hyperparams;
};

struct TrainOptions {
  std::ostream* log = nullptr;  // newline-delimited epoch records
  bool retain_best = true;      // restore the epoch with the lowest mean val ADE
};

namespace detail {

struct BatchPlan {
  int domain = 0;
  std::vector<const TrajectoryScene*> scenes;
};

/// Shuffles each domain's training scenes and interleaves fixed-size batches
/// round-robin across domains.
inline std::vector<BatchPlan> plan_epoch(const std::vector<std::vector<const TrajectoryScene*>>& train, int batch_size,
                                         std::mt19937_64& rng) {
  std::vector<std::vector<BatchPlan>> per_domain(train.size());
  for (std::size_t k = 0; k < train.size(); ++k) {
    auto scenes = train[k];
    std::shuffle(scenes.begin(), scenes.end(), rng);
    for (std::size_t i = 0; i < scenes.size(); i += static_cast<std::size_t>(batch_size)) {
      BatchPlan b;
      b.domain = static_cast<int>(k);
      const auto end = std::min(scenes.size(), i + static_cast<std::size_t>(batch_size));
      b.scenes.assign(scenes.begin() + static_cast<std::ptrdiff_t>(i), scenes.begin() + static_cast<std::ptrdiff_t>(end));
      per_domain[k].push_back(std::move(b));
    }
  }
  std::vector<BatchPlan> out;
  for (std::size_t round = 0;; ++round) {
    bool any = false;
    for (auto& d : per_domain) {
      if (round < d.size()) {
        out.push_back(std::move(d[round]));
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

template <typename S>
double group_grad_sq(const OptimizerGroup<S>& g) {
  double sq = 0.0;
  for (const auto* p : g.params) {
    if (p->touched) sq += static_cast<double>(p->grad.squaredNorm());
  }
  return sq;
}

}  // namespace detail

/// Trains a model on K source corpora (K = sources.size(), overriding
/// hp.n_domains). Source k's scenes carry expert label k. Deterministic for a
/// given hp.seed.
template <typename S>
TrainResult<S> run_training(const std::vector<const DomainCorpus*>& sources, HyperParams hp, Method method,
                            const TrainOptions& options = {}) {
  if (sources.empty()) throw ConfigError("run_training: no source domains");
  hp.n_domains = static_cast<int>(sources.size());
  hp.validate();
  std::vector<std::vector<const TrajectoryScene*>> train(sources.size());
  std::vector<std::vector<const TrajectoryScene*>> val(sources.size());
  for (std::size_t k = 0; k < sources.size(); ++k) {
    if (!sources[k]->is_split()) throw DataError("run_training: source corpus is empty or unsplit");
    train[k] = sources[k]->train();
    val[k] = sources[k]->val();
    if (train[k].empty() || val[k].empty()) throw DataError("run_training: empty train or val split");
  }

  TrainResult<S> result;
  result.hyperparams = hp;
  result.model = std::make_unique<AdapTrajModel<S>>(hp, method);
  auto& model = *result.model;
  Adam<S> adam;
  std::mt19937_64 rng(hp.seed ^ 0x9e3779b97f4a7c15ULL);
  std::bernoulli_distribution mask_draw(hp.sigma);
  typename ParameterStore<S>::Snapshot best;

  for (int epoch = 0; epoch < hp.e_total; ++epoch) {
    const StageSchedule schedule = stage_schedule(hp, method, epoch);
    auto groups = make_optimizer_groups(model, schedule);
    EpochMetrics m;
    m.epoch = epoch;
    m.stage = schedule.stage;
    for (const auto& g : groups) m.grad_sq[group_name(g.group)] = 0.0;
    std::size_t n_scenes = 0;

    for (auto& plan : detail::plan_epoch(train, hp.batch_size, rng)) {
      const bool masked = schedule.masking && mask_draw(rng);
      const auto batch = make_batch<S>(plan.scenes);
      const std::vector<int> labels(plan.scenes.size(), plan.domain);
      const Mat<S> noise = detail::draw_noise<S>(plan.scenes.size(), hp.noise_dim, rng);

      model.params().zero_grad();
      Tape<S> tape;
      const auto fwd = model.forward(tape, batch, masked ? nullptr : &labels, noise);
      const auto terms = model.losses(tape, fwd, batch, masked ? nullptr : &labels, schedule.domain_weight);
      const double total = LossTerms<S>::scalar(terms.total);
      if (!std::isfinite(total)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << " (stage " << schedule.stage << ", domain " << plan.domain
           << ", masked " << masked << "): base=" << LossTerms<S>::scalar(terms.base)
           << " recon=" << LossTerms<S>::scalar(terms.recon) << " diff=" << LossTerms<S>::scalar(terms.diff)
           << " similar=" << LossTerms<S>::scalar(terms.similar);
        throw TrainingDiverged(os.str());
      }
      tape.backward(terms.total);
      for (const auto& g : groups) m.grad_sq[group_name(g.group)] += detail::group_grad_sq(g);
      adam.step(groups, hp.lr, hp.grad_clip);

      ++m.batches;
      m.masked_batches += masked ? 1 : 0;
      n_scenes += plan.scenes.size();
      m.base += LossTerms<S>::scalar(terms.base);
      m.recon += LossTerms<S>::scalar(terms.recon);
      m.diff += LossTerms<S>::scalar(terms.diff);
      m.similar += LossTerms<S>::scalar(terms.similar);
      m.ours += LossTerms<S>::scalar(terms.ours);
      m.total += total;
    }
    const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(1, n_scenes));
    m.base *= inv;
    m.recon *= inv;
    m.diff *= inv;
    m.similar *= inv;
    m.ours *= inv;
    m.total *= inv;

    // Validation uses the label-free route, as at inference.
    double ade_sum = 0, fde_sum = 0, base_sum = 0;
    std::size_t val_scenes = 0;
    for (const auto& scenes : val) {
      const auto r = evaluate(model, scenes);
      ade_sum += r.ade;
      fde_sum += r.fde;
      const auto vb = make_batch<S>(scenes);
      Tape<S> tape;
      const auto fwd = model.forward(tape, vb, nullptr, model.zero_noise(scenes.size()));
      base_sum += static_cast<double>(base_loss(fwd.prediction, vb.future_rel).value()(0, 0));
      val_scenes += scenes.size();
    }
    m.val_ade = ade_sum / static_cast<double>(val.size());
    m.val_fde = fde_sum / static_cast<double>(val.size());
    m.val_base = base_sum / static_cast<double>(val_scenes);
    for (double v : {m.val_ade, m.val_fde, m.val_base}) {
      if (!std::isfinite(v)) throw TrainingDiverged("non-finite validation metric at epoch " + std::to_string(epoch));
    }
    if (m.val_ade < result.best_val_ade) {
      result.best_val_ade = m.val_ade;
      result.best_epoch = epoch;
      if (options.retain_best) best = model.params().snapshot();
    }
    if (options.log != nullptr) *options.log << to_json_record(m).dump() << '\n';
    result.log.push_back(std::move(m));
  }
  if (options.retain_best && !best.empty()) model.params().restore(best);
  return result;
}

}  // namespace adaptraj
