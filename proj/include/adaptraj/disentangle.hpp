// Domain-invariant extractor, per-domain specific experts, the
// teacher-student aggregators, and the reconstruction and domain-classifier
// heads that supervise them.
#pragma once

#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaptraj/autodiff.hpp"
#include "adaptraj/layers.hpp"
#include "adaptraj/types.hpp"

namespace adaptraj {

template <typename S>
struct FeatureTriple {
  Var<S> indiv;
  Var<S> neigh;
  Var<S> fused;
};

/// Shared-weight invariant extractor: one parameter set for all domains.
template <typename S>
class InvariantExtractor {
 public:
  static InvariantExtractor make(ParameterStore<S>& store, int d_f, std::mt19937_64& rng) {
    InvariantExtractor e;
    e.ind_ = Mlp2<S>::make(store, "invariant/ind", d_f, d_f, d_f, rng);
    e.nei_ = Mlp2<S>::make(store, "invariant/nei", d_f, d_f, d_f, rng);
    e.fuse_ = Mlp2<S>::make(store, "invariant/fuse", 2 * d_f, d_f, d_f, rng);
    return e;
  }

  FeatureTriple<S> operator()(Tape<S>& tape, Var<S> indiv_hidden, Var<S> interaction) const {
    FeatureTriple<S> f;
    f.indiv = ind_(tape, indiv_hidden);
    f.neigh = nei_(tape, interaction);
    f.fused = fuse_(tape, ad::hcat<S>({f.indiv, f.neigh}));
    return f;
  }

 private:
  Mlp2<S> ind_, nei_, fuse_;
};

/// K expert pairs (individual, neighbor), the shared specific fusion, and the
/// two aggregators used when the domain label is hidden.
template <typename S>
class SpecificExtractor {
 public:
  static SpecificExtractor make(ParameterStore<S>& store, int d_f, int n_domains, std::mt19937_64& rng) {
    if (n_domains <= 0) throw ConfigError("specific extractor needs at least one domain");
    SpecificExtractor e;
    for (int k = 0; k < n_domains; ++k) {
      const std::string p = "expert_" + std::to_string(k);
      e.ind_.push_back(Mlp2<S>::make(store, p + "/ind", d_f, d_f, d_f, rng));
      e.nei_.push_back(Mlp2<S>::make(store, p + "/nei", d_f, d_f, d_f, rng));
    }
    e.fuse_ = Mlp2<S>::make(store, "specific_fuse", 2 * d_f, d_f, d_f, rng);
    e.agg_ind_ = Mlp2<S>::make(store, "aggregator/ind", d_f, d_f, d_f, rng);
    e.agg_nei_ = Mlp2<S>::make(store, "aggregator/nei", d_f, d_f, d_f, rng);
    return e;
  }

  int n_domains() const { return static_cast<int>(ind_.size()); }

  /// Routes each row through the expert pair named by its label.
  FeatureTriple<S> extract(Tape<S>& tape, Var<S> indiv_hidden, Var<S> interaction,
                           const std::vector<int>& labels) const {
    if (static_cast<Eigen::Index>(labels.size()) != indiv_hidden.rows()) {
      throw std::invalid_argument("extract_specific: one label per scene required");
    }
    for (int k : labels) {
      if (k < 0 || k >= n_domains()) {
        throw std::out_of_range("extract_specific: domain label " + std::to_string(k) + " out of range");
      }
    }
    ++labeled_routes_;
    FeatureTriple<S> f;
    const bool uniform = std::all_of(labels.begin(), labels.end(), [&](int k) { return k == labels.front(); });
    if (uniform && !labels.empty()) {
      const auto k = static_cast<std::size_t>(labels.front());
      f.indiv = ind_[k](tape, indiv_hidden);
      f.neigh = nei_[k](tape, interaction);
    } else {
      const Eigen::Index n = indiv_hidden.rows();
      bool first = true;
      for (int k = 0; k < n_domains(); ++k) {
        std::vector<int> rows;
        for (std::size_t i = 0; i < labels.size(); ++i) {
          if (labels[i] == k) rows.push_back(static_cast<int>(i));
        }
        if (rows.empty()) continue;
        const auto ku = static_cast<std::size_t>(k);
        const Var<S> pi = ad::scatter_rows(ind_[ku](tape, ad::gather_rows(indiv_hidden, rows)), rows, n);
        const Var<S> pn = ad::scatter_rows(nei_[ku](tape, ad::gather_rows(interaction, rows)), rows, n);
        f.indiv = first ? pi : ad::add(f.indiv, pi);
        f.neigh = first ? pn : ad::add(f.neigh, pn);
        first = false;
      }
      if (first) {
        f.indiv = tape.zeros(n, indiv_hidden.cols());
        f.neigh = tape.zeros(n, indiv_hidden.cols());
      }
    }
    f.fused = fuse_(tape, ad::hcat<S>({f.indiv, f.neigh}));
    return f;
  }

  /// Element-wise sums of all K expert outputs: the aggregator inputs.
  std::pair<Var<S>, Var<S>> expert_sums(Tape<S>& tape, Var<S> indiv_hidden, Var<S> interaction) const {
    Var<S> si = ind_[0](tape, indiv_hidden);
    Var<S> sn = nei_[0](tape, interaction);
    for (std::size_t k = 1; k < ind_.size(); ++k) {
      si = ad::add(si, ind_[k](tape, indiv_hidden));
      sn = ad::add(sn, nei_[k](tape, interaction));
    }
    return {si, sn};
  }

  /// Label-free route: query every expert, sum, aggregate, fuse.
  FeatureTriple<S> aggregate(Tape<S>& tape, Var<S> indiv_hidden, Var<S> interaction) const {
    const auto [si, sn] = expert_sums(tape, indiv_hidden, interaction);
    FeatureTriple<S> f;
    f.indiv = agg_ind_(tape, si);
    f.neigh = agg_nei_(tape, sn);
    f.fused = fuse_(tape, ad::hcat<S>({f.indiv, f.neigh}));
    return f;
  }

  /// Number of label-indexed expert selections performed so far.
  std::size_t labeled_routes() const { return labeled_routes_; }

 private:
  std::vector<Mlp2<S>> ind_, nei_;
  Mlp2<S> fuse_, agg_ind_, agg_nei_;
  mutable std::size_t labeled_routes_ = 0;
};

/// Reconstructs the focal observed displacement sequence from the focal
/// invariant and specific features.
template <typename S>
class ReconstructionDecoder {
 public:
  static ReconstructionDecoder make(ParameterStore<S>& store, int d_f, std::mt19937_64& rng) {
    ReconstructionDecoder r;
    r.net_ = Mlp2<S>::make(store, "recon", 2 * d_f, d_f, 2 * static_cast<int>(kObsLen), rng);
    return r;
  }

  Var<S> operator()(Tape<S>& tape, Var<S> indiv_invariant, Var<S> indiv_specific) const {
    return net_(tape, ad::hcat<S>({indiv_invariant, indiv_specific}));
  }

 private:
  Mlp2<S> net_;
};

/// K-way domain classifier over the four disentangled features. Returns
/// logits.
template <typename S>
class DomainClassifier {
 public:
  static DomainClassifier make(ParameterStore<S>& store, int d_f, int n_domains, std::mt19937_64& rng) {
    DomainClassifier c;
    c.net_ = Mlp2<S>::make(store, "classifier", 4 * d_f, d_f, n_domains, rng);
    return c;
  }

  Var<S> operator()(Tape<S>& tape, Var<S> indiv_invariant, Var<S> neigh_invariant, Var<S> indiv_specific,
                    Var<S> neigh_specific) const {
    return net_(tape, ad::hcat<S>({indiv_invariant, neigh_invariant, indiv_specific, neigh_specific}));
  }

 private:
  Mlp2<S> net_;
};

}  // namespace adaptraj
