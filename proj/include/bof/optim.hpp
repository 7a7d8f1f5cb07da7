#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bof/tape.hpp"
#include "bof/tensor.hpp"

namespace bof {

// AdamW with decoupled weight decay. Moment tensors are kept in the same
// order as the parameter list supplied at construction.
template <class S>
struct OptimizerState {
  double lr = 1e-4;
  double beta1 = 0.9;  // "default betas"
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::int64_t t = 0;
  std::vector<Tensor<S>> m, v;

  OptimizerState() = default;
  explicit OptimizerState(const std::vector<Param<S>*>& params, double lr_ = 1e-4,
                          double weight_decay_ = 0.0)
      : lr(lr_), weight_decay(weight_decay_) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (const Param<S>* p : params) {
      m.push_back(Tensor<S>::zeros(p->value.shape));
      v.push_back(Tensor<S>::zeros(p->value.shape));
    }
  }
};

// One decoupled-weight-decay Adam step. Gradients are left untouched; the
// caller zeroes them between steps.
template <class S>
void adamw_step(const std::vector<Param<S>*>& params, OptimizerState<S>& st) {
  if (st.m.size() != params.size() || st.v.size() != params.size())
    throw std::invalid_argument("adamw_step: state not initialized for this parameter list");
  st.t += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, double(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, double(st.t));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param<S>& p = *params[pi];
    if (st.m[pi].shape != p.value.shape)
      throw std::invalid_argument("adamw_step: state shape mismatch for " + p.name);
    S* w = p.value.ptr();
    const S* g = p.grad.ptr();
    S* m = st.m[pi].ptr();
    S* v = st.v[pi].ptr();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gi = double(g[i]);
      const double mi = st.beta1 * double(m[i]) + (1.0 - st.beta1) * gi;
      const double vi = st.beta2 * double(v[i]) + (1.0 - st.beta2) * gi * gi;
      m[i] = S(mi);
      v[i] = S(vi);
      const double mhat = mi / bc1, vhat = vi / bc2;
      w[i] = S(double(w[i]) - st.lr * (mhat / (std::sqrt(vhat) + st.eps) +
                                       st.weight_decay * double(w[i])));
    }
  }
}

// Cosine annealing from lr_max at step 0 to lr_min at step == total.
inline double cosine_lr(std::int64_t step, std::int64_t total, double lr_max, double lr_min) {
  if (total < 1) throw std::out_of_range("cosine_lr: total must be >= 1");
  if (step < 0 || step > total)
    throw std::out_of_range("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(total) + "]");
  return lr_min + 0.5 * (lr_max - lr_min) *
                      (1.0 + std::cos(3.14159265358979323846 * double(step) / double(total)));
}

template <class S>
void zero_grads(const std::vector<Param<S>*>& params) {
  for (Param<S>* p : params) p->zero_grad();
}

}  // namespace bof
