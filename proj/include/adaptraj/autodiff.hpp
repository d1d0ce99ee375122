// Reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Tape records every operation of one forward pass. Values are computed
// eagerly; Tape::backward() then walks the record in reverse and accumulates
// gradients into the leaves, including trainable Parameters. Tapes are
// single-use and single-threaded.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace adaptraj {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
using ColVec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// A trainable array plus its gradient accumulator and Adam moments.
template <typename S>
struct Parameter {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  Mat<S> adam_m;
  Mat<S> adam_v;
  long adam_step = 0;
  // Set when any backward pass deposits gradient; the optimizer skips
  // parameters that were not part of the graph.
  bool touched = false;

  void zero_grad() {
    grad.setZero(value.rows(), value.cols());
    touched = false;
  }
};

template <typename S>
class Tape;

/// Handle to a node on a Tape.
template <typename S>
struct Var {
  Tape<S>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Mat<S>& value() const { return tape->value(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

template <typename S>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Mat<S>&)>;

  Tape() { nodes_.reserve(512); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<S> constant(Mat<S> value) { return push(std::move(value), false, {}); }

  Var<S> zeros(Eigen::Index rows, Eigen::Index cols) {
    return constant(Mat<S>::Zero(rows, cols));
  }

  Var<S> parameter(Parameter<S>& p) {
    Parameter<S>* ptr = &p;
    return push(p.value, true, [ptr](Tape&, const Mat<S>& g) {
      if (ptr->grad.size() == 0) ptr->grad.setZero(ptr->value.rows(), ptr->value.cols());
      ptr->grad += g;
      ptr->touched = true;
    });
  }

  /// Records an op result. `back` receives the node's upstream gradient.
  Var<S> record(Mat<S> value, std::initializer_list<Var<S>> parents, Backward back) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id].requires_grad;
    return push(std::move(value), needs, needs ? std::move(back) : Backward{});
  }

  Var<S> record(Mat<S> value, const std::vector<Var<S>>& parents, Backward back) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id].requires_grad;
    return push(std::move(value), needs, needs ? std::move(back) : Backward{});
  }

  const Mat<S>& value(Var<S> v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var<S> v) const { return nodes_.at(v.id).requires_grad; }

  /// Gradient of the last backward() root with respect to `v`; zeros if no
  /// gradient reached it.
  Mat<S> grad(Var<S> v) const {
    const auto& n = nodes_.at(v.id);
    if (n.grad.size() == 0) return Mat<S>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Adds `g` into the gradient of `v` (no-op for constants).
  template <typename Derived>
  void accumulate(Var<S> v, const Eigen::MatrixBase<Derived>& g) {
    auto& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Back-propagates from a 1x1 root.
  void backward(Var<S> root) {
    if (root.tape != this) throw std::logic_error("backward: root belongs to another tape");
    auto& r = nodes_.at(root.id);
    if (r.value.rows() != 1 || r.value.cols() != 1) {
      throw std::logic_error("backward: root must be a scalar");
    }
    r.grad = Mat<S>::Ones(1, 1);
    for (int i = root.id; i >= 0; --i) {
      auto& n = nodes_[i];
      if (!n.requires_grad || !n.back || n.grad.size() == 0) continue;
      n.back(*this, n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    bool requires_grad = false;
    Backward back;
  };

  Var<S> push(Mat<S> value, bool requires_grad, Backward back) {
    nodes_.push_back(Node{std::move(value), Mat<S>{}, requires_grad, std::move(back)});
    return Var<S>{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

namespace ad {

namespace detail {

template <typename S>
void check_same_shape(Var<S> a, Var<S> b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

}  // namespace detail

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Mat<S> out = a.value() * b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<S>& t, const Mat<S>& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

/// aᵀ·b
template <typename S>
Var<S> matmul_tn(Var<S> a, Var<S> b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("matmul_tn: row counts differ");
  Mat<S> out = a.value().transpose() * b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<S>& t, const Mat<S>& g) {
    if (t.requires_grad(a)) t.accumulate(a, t.value(b) * g.transpose());
    if (t.requires_grad(b)) t.accumulate(b, t.value(a) * g);
  });
}

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  detail::check_same_shape(a, b, "add");
  Mat<S> out = a.value() + b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  detail::check_same_shape(a, b, "sub");
  Mat<S> out = a.value() - b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

/// Adds a 1xN row to every row of `a`.
template <typename S>
Var<S> add_row(Var<S> a, Var<S> row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: bad row shape");
  Mat<S> out = a.value().rowwise() + row.value().row(0);
  return a.tape->record(std::move(out), {a, row}, [a, row](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, g);
    if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

template <typename S>
Var<S> cmul(Var<S> a, Var<S> b) {
  detail::check_same_shape(a, b, "cmul");
  Mat<S> out = a.value().cwiseProduct(b.value());
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape<S>& t, const Mat<S>& g) {
    if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

/// Multiplies row i of `a` by weights(i).
template <typename S>
Var<S> scale_rows(Var<S> a, const ColVec<S>& weights) {
  if (weights.size() != a.rows()) throw std::invalid_argument("scale_rows: weight count");
  Mat<S> out = weights.asDiagonal() * a.value();
  return a.tape->record(std::move(out), {a}, [a, weights](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, weights.asDiagonal() * g);
  });
}

template <typename S>
Var<S> scale(Var<S> a, S factor) {
  Mat<S> out = a.value() * factor;
  return a.tape->record(std::move(out), {a}, [a, factor](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, g * factor);
  });
}

template <typename S>
Var<S> add_const(Var<S> a, const Mat<S>& c) {
  if (c.rows() != a.rows() || c.cols() != a.cols()) throw std::invalid_argument("add_const: shape");
  Mat<S> out = a.value() + c;
  return a.tape->record(std::move(out), {a}, [a](Tape<S>& t, const Mat<S>& g) { t.accumulate(a, g); });
}

template <typename S>
Var<S> relu(Var<S> a) {
  Mat<S> out = a.value().cwiseMax(S(0));
  return a.tape->record(std::move(out), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, (t.value(a).array() > S(0)).select(g, S(0)));
  });
}

template <typename S>
Var<S> tanh(Var<S> a) {
  Mat<S> out = a.value().array().tanh().matrix();
  Mat<S> y = out;
  return a.tape->record(std::move(out), {a}, [a, y = std::move(y)](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, (g.array() * (S(1) - y.array().square())).matrix());
  });
}

template <typename S>
Var<S> sigmoid(Var<S> a) {
  Mat<S> out = (S(1) / (S(1) + (-a.value().array()).exp())).matrix();
  Mat<S> y = out;
  return a.tape->record(std::move(out), {a}, [a, y = std::move(y)](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, (g.array() * y.array() * (S(1) - y.array())).matrix());
  });
}

/// Column-wise concatenation.
template <typename S>
Var<S> hcat(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("hcat: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("hcat: row counts differ");
    cols += p.cols();
  }
  Mat<S> out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return parts.front().tape->record(std::move(out), parts, [parts](Tape<S>& t, const Mat<S>& g) {
    Eigen::Index c0 = 0;
    for (const auto& p : parts) {
      const Eigen::Index w = t.value(p).cols();
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(c0, w));
      c0 += w;
    }
  });
}

template <typename S>
Var<S> slice_cols(Var<S> a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::invalid_argument("slice_cols: range");
  Mat<S> out = a.value().middleCols(start, count);
  return a.tape->record(std::move(out), {a}, [a, start, count](Tape<S>& t, const Mat<S>& g) {
    Mat<S> full = Mat<S>::Zero(t.value(a).rows(), t.value(a).cols());
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

/// Selects rows by index (repeats allowed).
template <typename S>
Var<S> gather_rows(Var<S> a, std::vector<int> index) {
  Mat<S> out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) throw std::out_of_range("gather_rows: index");
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  return a.tape->record(std::move(out), {a}, [a, index = std::move(index)](Tape<S>& t, const Mat<S>& g) {
    Mat<S> full = Mat<S>::Zero(t.value(a).rows(), t.value(a).cols());
    for (std::size_t i = 0; i < index.size(); ++i) full.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
    t.accumulate(a, full);
  });
}

/// Places row i of `a` at row index[i] of a zero matrix with `total_rows` rows.
template <typename S>
Var<S> scatter_rows(Var<S> a, std::vector<int> index, Eigen::Index total_rows) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows()) throw std::invalid_argument("scatter_rows: index count");
  Mat<S> out = Mat<S>::Zero(total_rows, a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= total_rows) throw std::out_of_range("scatter_rows: index");
    out.row(index[i]) += a.value().row(static_cast<Eigen::Index>(i));
  }
  return a.tape->record(std::move(out), {a}, [a, index = std::move(index)](Tape<S>& t, const Mat<S>& g) {
    Mat<S> part(static_cast<Eigen::Index>(index.size()), g.cols());
    for (std::size_t i = 0; i < index.size(); ++i) part.row(static_cast<Eigen::Index>(i)) = g.row(index[i]);
    t.accumulate(a, part);
  });
}

/// Max-pools contiguous row segments of `a`: segment s covers rows
/// [offsets[s], offsets[s+1]). Empty segments take `fallback` (a 1xN row).
template <typename S>
Var<S> segment_max(Var<S> a, std::vector<int> offsets, Var<S> fallback) {
  if (offsets.size() < 1) throw std::invalid_argument("segment_max: offsets");
  if (fallback.rows() != 1 || fallback.cols() != a.cols()) throw std::invalid_argument("segment_max: fallback shape");
  const Eigen::Index n_seg = static_cast<Eigen::Index>(offsets.size()) - 1;
  const Eigen::Index d = a.cols();
  Mat<S> out(n_seg, d);
  // argmax[s * d + c] = source row, or -1 for the fallback.
  std::vector<int> argmax(static_cast<std::size_t>(n_seg * d), -1);
  const auto& av = a.value();
  for (Eigen::Index s = 0; s < n_seg; ++s) {
    const int lo = offsets[s];
    const int hi = offsets[s + 1];
    if (lo < 0 || hi < lo || hi > av.rows()) throw std::out_of_range("segment_max: offsets");
    for (Eigen::Index c = 0; c < d; ++c) {
      if (lo == hi) {
        out(s, c) = fallback.value()(0, c);
        continue;
      }
      int best = lo;
      for (int r = lo + 1; r < hi; ++r) {
        if (av(r, c) > av(best, c)) best = r;
      }
      out(s, c) = av(best, c);
      argmax[static_cast<std::size_t>(s * d + c)] = best;
    }
  }
  return a.tape->record(std::move(out), {a, fallback},
                        [a, fallback, argmax = std::move(argmax), n_seg, d](Tape<S>& t, const Mat<S>& g) {
    Mat<S> ga = Mat<S>::Zero(t.value(a).rows(), d);
    Mat<S> gf = Mat<S>::Zero(1, d);
    for (Eigen::Index s = 0; s < n_seg; ++s) {
      for (Eigen::Index c = 0; c < d; ++c) {
        const int src = argmax[static_cast<std::size_t>(s * d + c)];
        if (src < 0) {
          gf(0, c) += g(s, c);
        } else {
          ga(src, c) += g(s, c);
        }
      }
    }
    if (t.requires_grad(a)) t.accumulate(a, ga);
    if (t.requires_grad(fallback)) t.accumulate(fallback, gf);
  });
}

/// Per-row sum, Nx1.
template <typename S>
Var<S> row_sum(Var<S> a) {
  Mat<S> out = a.value().rowwise().sum();
  return a.tape->record(std::move(out), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, g.col(0).replicate(1, t.value(a).cols()));
  });
}

template <typename S>
Var<S> sum(Var<S> a) {
  Mat<S> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->record(std::move(out), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, Mat<S>::Constant(t.value(a).rows(), t.value(a).cols(), g(0, 0)));
  });
}

template <typename S>
Var<S> sum_squares(Var<S> a) {
  Mat<S> out(1, 1);
  out(0, 0) = a.value().squaredNorm();
  return a.tape->record(std::move(out), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, t.value(a) * (S(2) * g(0, 0)));
  });
}

/// Subtracts each column's mean from that column.
template <typename S>
Var<S> center_rows(Var<S> a) {
  if (a.rows() == 0) throw std::invalid_argument("center_rows: empty");
  Mat<S> out = a.value().rowwise() - a.value().colwise().mean();
  return a.tape->record(std::move(out), {a}, [a](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, g.rowwise() - g.colwise().mean());
  });
}

/// Σ_rows −log softmax(logits_row)[label_row].
template <typename S>
Var<S> softmax_nll(Var<S> logits, std::vector<int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    throw std::invalid_argument("softmax_nll: label count");
  }
  const auto& z = logits.value();
  Mat<S> prob(z.rows(), z.cols());
  S total = 0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    if (y < 0 || y >= z.cols()) throw std::out_of_range("softmax_nll: label");
    const S mx = z.row(r).maxCoeff();
    const auto shifted = (z.row(r).array() - mx).eval();
    const S lse = std::log(shifted.exp().sum());
    prob.row(r) = (shifted - lse).exp().matrix();
    total += lse - shifted(y);
  }
  Mat<S> out(1, 1);
  out(0, 0) = total;
  return logits.tape->record(std::move(out), {logits},
                             [logits, labels = std::move(labels), prob = std::move(prob)](Tape<S>& t, const Mat<S>& g) {
    Mat<S> d = prob;
    for (std::size_t r = 0; r < labels.size(); ++r) d(static_cast<Eigen::Index>(r), labels[r]) -= S(1);
    t.accumulate(logits, d * g(0, 0));
  });
}

/// Identity forward; multiplies the incoming gradient by −factor.
template <typename S>
Var<S> grad_reverse(Var<S> a, S factor = S(1)) {
  return a.tape->record(Mat<S>(a.value()), {a}, [a, factor](Tape<S>& t, const Mat<S>& g) {
    t.accumulate(a, g * (-factor));
  });
}

}  // namespace ad

}  // namespace adaptraj
