// Auxiliary objectives for invariant/specific disentanglement.
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "adaptraj/autodiff.hpp"
#include "adaptraj/types.hpp"

namespace adaptraj {

/// Scale-invariant MSE of one residual stream d = target − reconstruction:
///   (1/m)·Σd² − (1/m²)·(Σd)²            (kScaleInvariant)
///   (1/m − 1/m²)·Σd²                    (kLiteral)
/// The scale-invariant form is zero for any uniform residual and equals
/// mean(d²) when the residuals sum to zero.
inline double simse(std::span<const double> target, std::span<const double> reconstruction,
                    SimseVariant variant = SimseVariant::kScaleInvariant) {
  if (target.size() != reconstruction.size()) throw DimensionError("simse: length mismatch");
  if (target.empty()) throw DimensionError("simse: empty sequence");
  const double m = static_cast<double>(target.size());
  double sq = 0.0;
  double s = 0.0;
  for (std::size_t j = 0; j < target.size(); ++j) {
    const double d = target[j] - reconstruction[j];
    sq += d * d;
    s += d;
  }
  if (variant == SimseVariant::kLiteral) return (1.0 / m - 1.0 / (m * m)) * sq;
  return sq / m - (s * s) / (m * m);
}

/// Σ_rows of the SIMSE averaged over the x and y streams. Rows hold a
/// flattened sequence [x_0..x_{m-1}, y_0..y_{m-1}].
template <typename S>
Var<S> reconstruction_loss(Var<S> reconstruction, const Mat<S>& target,
                           SimseVariant variant = SimseVariant::kScaleInvariant) {
  if (reconstruction.rows() != target.rows() || reconstruction.cols() != target.cols()) {
    throw DimensionError("reconstruction_loss: shape mismatch");
  }
  if (target.cols() == 0 || target.cols() % 2 != 0) throw DimensionError("reconstruction_loss: need two equal streams");
  const Eigen::Index m = target.cols() / 2;
  const S inv_m = S(1) / static_cast<S>(m);
  // d = target − reconstruction
  const Var<S> d = ad::add_const(ad::scale(reconstruction, S(-1)), target);
  Var<S> total;
  for (Eigen::Index stream = 0; stream < 2; ++stream) {
    const Var<S> ds = ad::slice_cols(d, stream * m, m);
    const Var<S> sq = ad::sum_squares(ds);
    Var<S> term;
    if (variant == SimseVariant::kLiteral) {
      term = ad::scale(sq, inv_m - inv_m * inv_m);
    } else {
      const Var<S> row_sums = ad::row_sum(ds);
      term = ad::sub(ad::scale(sq, inv_m), ad::scale(ad::sum_squares(row_sums), inv_m * inv_m));
    }
    total = stream == 0 ? term : ad::add(total, term);
  }
  return ad::scale(total, S(0.5));
}

/// Soft orthogonality between batch-stacked, batch-centered invariant and
/// specific features: ‖Ĥ_iᵀ Ĥ_sᵀ‖²_F summed over the individual and neighbor
/// streams.
template <typename S>
Var<S> difference_loss(Var<S> indiv_invariant, Var<S> indiv_specific, Var<S> neigh_invariant,
                       Var<S> neigh_specific) {
  if (indiv_invariant.rows() == 0) throw DimensionError("difference_loss: empty batch");
  auto term = [](Var<S> inv, Var<S> spec) {
    if (inv.rows() != spec.rows()) throw DimensionError("difference_loss: batch sizes differ");
    return ad::sum_squares(ad::matmul_tn(ad::center_rows(inv), ad::center_rows(spec)));
  };
  return ad::add(term(indiv_invariant, indiv_specific), term(neigh_invariant, neigh_specific));
}

/// Negative log-likelihood of the true domain under softmax(logits), summed
/// over rows.
template <typename S>
Var<S> domain_adversarial_loss(Var<S> logits, const std::vector<int>& labels) {
  for (int l : labels) {
    if (l < 0) throw std::invalid_argument("domain_adversarial_loss: masked label");
  }
  return ad::softmax_nll(logits, labels);
}

struct LossWeights {
  double alpha = 0.01;
  double beta = 0.075;
  double gamma = 0.25;
};

inline double adaptraj_loss(const LossWeights& w, double recon, double diff, double similar) {
  return w.alpha * recon + w.beta * diff + w.gamma * similar;
}

inline double total_loss(double base, double ours, double domain_weight) { return base + domain_weight * ours; }

}  // namespace adaptraj
