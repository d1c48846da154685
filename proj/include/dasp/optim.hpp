// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dasp/tensor.hpp"

namespace dasp {

/// Smoothed-moment optimizer state. The update is the uncorrected form
/// theta <- theta - alpha * eps / sqrt(rho + eps0): the bias correction of
/// the cited original is deliberately absent here (see README).
struct AdamState {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps0 = 1e-8;
  std::int64_t step_count = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  void validate() const {
    if (!(beta1 > 0.0 && beta1 <= 1.0) || !(beta2 > 0.0 && beta2 <= 1.0))
      throw std::invalid_argument("AdamState: beta1, beta2 must be in (0,1]");
    if (!(alpha > 0.0)) throw std::invalid_argument("AdamState: alpha <= 0");
    if (!(eps0 > 0.0)) throw std::invalid_argument("AdamState: eps0 <= 0");
  }

  void ensure_initialized(const std::vector<Tensor*>& params) {
    if (!first_moment.empty()) return;
    validate();
    for (const Tensor* p : params) {
      first_moment.emplace_back(p->shape());
      second_moment.emplace_back(p->shape());
    }
  }
};

/// One Adam step over a flat list of parameters. Rejects nonfinite input or
/// any nonfinite resulting update, leaving parameters and moments unchanged.
inline void adam_step(AdamState& state, const std::vector<Tensor*>& params,
                      const std::vector<Tensor>& grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: params/grads count mismatch");
  state.ensure_initialized(params);

  std::vector<Tensor> new_m, new_v, new_p;
  new_m.reserve(params.size());
  new_v.reserve(params.size());
  new_p.reserve(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor& g = grads[k];
    params[k]->require_same_shape(g, "adam_step");
    g.require_finite("adam_step gradient");
    Tensor m = state.first_moment[k];
    Tensor v = state.second_moment[k];
    Tensor p = *params[k];
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      p[i] -= state.alpha * m[i] / std::sqrt(v[i] + state.eps0);
    }
    if (!p.all_finite())
      throw std::runtime_error("adam_step: nonfinite update rejected");
    new_m.push_back(std::move(m));
    new_v.push_back(std::move(v));
    new_p.push_back(std::move(p));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.first_moment[k] = std::move(new_m[k]);
    state.second_moment[k] = std::move(new_v[k]);
    *params[k] = std::move(new_p[k]);
  }
  ++state.step_count;
}

/// Plain mini-batch gradient descent: theta <- theta - alpha * grad.
inline void sgd_step(const std::vector<Tensor*>& params,
                     const std::vector<Tensor>& grads, double alpha) {
  if (params.size() != grads.size())
    throw std::invalid_argument("sgd_step: params/grads count mismatch");
  if (!(alpha >= 0.0)) throw std::invalid_argument("sgd_step: alpha < 0");
  std::vector<Tensor> new_p;
  new_p.reserve(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    params[k]->require_same_shape(grads[k], "sgd_step");
    grads[k].require_finite("sgd_step gradient");
    Tensor p = *params[k];
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= alpha * grads[k][i];
    if (!p.all_finite())
      throw std::runtime_error("sgd_step: nonfinite update rejected");
    new_p.push_back(std::move(p));
  }
  for (std::size_t k = 0; k < params.size(); ++k)
    *params[k] = std::move(new_p[k]);
}

}  // namespace dasp
