// Named parameter storage and the small set of layers the models are built
// from.
#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaptraj/autodiff.hpp"

namespace adaptraj {

/// Owns every Parameter of a model under a namespaced key such as
/// "backbone/encoder/wx". Registration order is preserved so iteration is
/// deterministic. Parameter addresses are stable for the store's lifetime.
template <typename S>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter<S>& add(const std::string& name, Mat<S> init) {
    if (index_.count(name) != 0) throw std::logic_error("duplicate parameter " + name);
    auto p = std::make_unique<Parameter<S>>();
    p->name = name;
    p->value = std::move(init);
    p->zero_grad();
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return *params_.back();
  }

  Parameter<S>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  const Parameter<S>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  Parameter<S>& at(const std::string& name) {
    auto* p = find(name);
    if (p == nullptr) throw std::out_of_range("no parameter " + name);
    return *p;
  }

  std::size_t size() const { return params_.size(); }

  template <typename F>
  void for_each(F&& f) {
    for (auto& p : params_) f(*p);
  }

  template <typename F>
  void for_each(F&& f) const {
    for (const auto& p : params_) f(static_cast<const Parameter<S>&>(*p));
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  std::size_t count_scalars() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

  using Snapshot = std::map<std::string, Mat<S>>;

  Snapshot snapshot() const {
    Snapshot out;
    for (const auto& p : params_) out.emplace(p->name, p->value);
    return out;
  }

  void restore(const Snapshot& snap) {
    for (auto& p : params_) {
      auto it = snap.find(p->name);
      if (it == snap.end()) throw std::out_of_range("snapshot lacks " + p->name);
      p->value = it->second;
    }
  }

 private:
  std::vector<std::unique_ptr<Parameter<S>>> params_;
  std::map<std::string, std::size_t> index_;
};

namespace detail {

template <typename S>
Mat<S> xavier(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Mat<S> m(in, out);
  for (Eigen::Index c = 0; c < out; ++c) {
    for (Eigen::Index r = 0; r < in; ++r) m(r, c) = static_cast<S>(dist(rng));
  }
  return m;
}

}  // namespace detail

/// y = x·W + b, with W stored in×out.
template <typename S>
struct Linear {
  Parameter<S>* weight = nullptr;
  Parameter<S>* bias = nullptr;

  static Linear make(ParameterStore<S>& store, const std::string& prefix, int in, int out,
                     std::mt19937_64& rng) {
    Linear l;
    l.weight = &store.add(prefix + "/w", detail::xavier<S>(in, out, rng));
    l.bias = &store.add(prefix + "/b", Mat<S>::Zero(1, out));
    return l;
  }

  int in_dim() const { return static_cast<int>(weight->value.rows()); }
  int out_dim() const { return static_cast<int>(weight->value.cols()); }

  Var<S> operator()(Tape<S>& tape, Var<S> x) const {
    return ad::add_row(ad::matmul(x, tape.parameter(*weight)), tape.parameter(*bias));
  }
};

/// Two-layer map: Linear → ReLU → Linear.
template <typename S>
struct Mlp2 {
  Linear<S> first;
  Linear<S> second;

  static Mlp2 make(ParameterStore<S>& store, const std::string& prefix, int in, int hidden,
                   int out, std::mt19937_64& rng) {
    return Mlp2{Linear<S>::make(store, prefix + "/l1", in, hidden, rng),
                Linear<S>::make(store, prefix + "/l2", hidden, out, rng)};
  }

  int in_dim() const { return first.in_dim(); }
  int out_dim() const { return second.out_dim(); }

  Var<S> operator()(Tape<S>& tape, Var<S> x) const {
    return second(tape, ad::relu(first(tape, x)));
  }
};

/// Gated recurrent unit:
///   r = σ(x·Wr + h·Ur + b_r), u = σ(x·Wu + h·Uu + b_u)
///   n = tanh(x·Wn + b_n + r ⊙ (h·Un + c_n))
///   h' = (1 − u) ⊙ n + u ⊙ h
/// The three gates are packed column-wise as [r | u | n].
template <typename S>
struct GruCell {
  Parameter<S>* wx = nullptr;
  Parameter<S>* wh = nullptr;
  Parameter<S>* bx = nullptr;
  Parameter<S>* bh = nullptr;
  int hidden = 0;

  static GruCell make(ParameterStore<S>& store, const std::string& prefix, int in, int hidden,
                      std::mt19937_64& rng) {
    GruCell g;
    g.hidden = hidden;
    g.wx = &store.add(prefix + "/wx", detail::xavier<S>(in, 3 * hidden, rng));
    g.wh = &store.add(prefix + "/wh", detail::xavier<S>(hidden, 3 * hidden, rng));
    g.bx = &store.add(prefix + "/bx", Mat<S>::Zero(1, 3 * hidden));
    g.bh = &store.add(prefix + "/bh", Mat<S>::Zero(1, 3 * hidden));
    return g;
  }

  Var<S> operator()(Tape<S>& tape, Var<S> x, Var<S> h) const {
    const Var<S> gx = ad::add_row(ad::matmul(x, tape.parameter(*wx)), tape.parameter(*bx));
    const Var<S> gh = ad::add_row(ad::matmul(h, tape.parameter(*wh)), tape.parameter(*bh));
    const Var<S> r = ad::sigmoid(ad::add(ad::slice_cols(gx, 0, hidden), ad::slice_cols(gh, 0, hidden)));
    const Var<S> u = ad::sigmoid(ad::add(ad::slice_cols(gx, hidden, hidden), ad::slice_cols(gh, hidden, hidden)));
    const Var<S> n = ad::tanh(ad::add(ad::slice_cols(gx, 2 * hidden, hidden),
                                      ad::cmul(r, ad::slice_cols(gh, 2 * hidden, hidden))));
    // h' = n + u ⊙ (h − n)
    return ad::add(n, ad::cmul(u, ad::sub(h, n)));
  }
};

}  // namespace adaptraj
