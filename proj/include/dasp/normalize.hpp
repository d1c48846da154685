// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <vector>

#include "dasp/autodiff.hpp"
#include "dasp/rng.hpp"
#include "dasp/tensor.hpp"

namespace dasp {

enum class NormKind { batch, layer };
enum class Mode { train, infer };

/// Learned scale/shift plus (for the batch kind) running statistics that
/// freeze the normalizer at inference. Frozen statistics are exponential
/// moving averages with decay 0.9.
///
/// Conventions: batch kind normalizes an N x D batch per column (feature
/// position shared across the batch); layer kind normalizes a Q x T sample
/// per row (statistics shared along time, one gamma/beta per feature row).
struct NormState {
  NormKind kind = NormKind::batch;
  Tensor gamma;  // per normalized position
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double eps = 1e-5;
  double decay = 0.9;
  bool has_running = false;

  static NormState batch_norm(std::size_t dim, double eps = 1e-5) {
    NormState s;
    s.kind = NormKind::batch;
    s.gamma = Tensor({dim}, 1.0);
    s.beta = Tensor({dim}, 0.0);
    s.running_mean = Tensor({dim}, 0.0);
    s.running_var = Tensor({dim}, 0.0);
    s.eps = eps;
    return s;
  }

  static NormState layer_norm(std::size_t rows, double eps = 1e-5) {
    NormState s;
    s.kind = NormKind::layer;
    s.gamma = Tensor({rows}, 1.0);
    s.beta = Tensor({rows}, 0.0);
    s.eps = eps;
    return s;
  }
};

/// (x - mu) / sqrt(phi + eps) * gamma + beta, with mu/phi per the kind's
/// sharing rule. gamma/beta enter the tape as leaves owned by the caller
/// (pass the vars); train-mode batch kind updates running statistics.
inline ad::Var normalize(ad::Tape& t, ad::Var x, NormState& state,
                         Mode mode, ad::Var gamma, ad::Var beta) {
  const Tensor& vx = t.val(x);
  if (vx.ndim() != 2)
    throw std::invalid_argument("normalize: input must be 2-D, got " +
                                vx.shape_str());
  if (state.kind == NormKind::batch) {
    const std::size_t n = vx.rows(), d = vx.cols();
    if (t.val(gamma).size() != d)
      throw std::invalid_argument("normalize: gamma size mismatch");
    ad::Var mu, var;
    if (mode == Mode::train) {
      if (n < 2)
        throw std::invalid_argument(
            "normalize: batch kind in train mode needs batch extent >= 2");
      mu = t.mean_axis(x, 0);
      ad::Var centered0 = t.add_rowvec(x, t.neg(mu));
      var = t.mean_axis(t.square(centered0), 0);
      // Update frozen statistics from forward values.
      const Tensor& mu_v = t.val(mu);
      const Tensor& var_v = t.val(var);
      if (!state.has_running) {
        state.running_mean = mu_v;
        state.running_var = var_v;
        state.has_running = true;
      } else {
        for (std::size_t j = 0; j < d; ++j) {
          state.running_mean[j] =
              state.decay * state.running_mean[j] + (1 - state.decay) * mu_v[j];
          state.running_var[j] =
              state.decay * state.running_var[j] + (1 - state.decay) * var_v[j];
        }
      }
    } else {
      if (!state.has_running)
        throw std::logic_error("normalize: inference before any train step");
      mu = t.constant(state.running_mean);
      var = t.constant(state.running_var);
    }
    ad::Var centered = t.add_rowvec(x, t.neg(mu));
    ad::Var inv = t.reciprocal(t.sqrt(t.add_scalar(var, state.eps)));
    ad::Var scaled = t.mul_rowvec(t.mul_rowvec(centered, inv), gamma);
    return t.add_rowvec(scaled, beta);
  }
  // Layer kind: per-row statistics over the time axis; valid in both modes.
  ad::Var mu = t.mean_axis(x, 1);
  ad::Var centered = t.add_colvec(x, t.neg(mu));
  ad::Var var = t.mean_axis(t.square(centered), 1);
  ad::Var inv = t.reciprocal(t.sqrt(t.add_scalar(var, state.eps)));
  ad::Var scaled = t.mul_colvec(t.mul_colvec(centered, inv), gamma);
  return t.add_colvec(scaled, beta);
}

/// Convenience overload that introduces gamma/beta as leaves.
inline ad::Var normalize(ad::Tape& t, ad::Var x, NormState& state,
                         Mode mode) {
  ad::Var g = t.leaf(state.gamma);
  ad::Var b = t.leaf(state.beta);
  return normalize(t, x, state, mode, g, b);
}

/// Value-path normalization (no tape), for inference.
inline Tensor normalize(const Tensor& x, NormState& state, Mode mode) {
  ad::Tape t;
  ad::Var out = normalize(t, t.constant(x), state, mode);
  return t.val(out);
}

/// Train mode zeroes each element with probability p and scales survivors by
/// 1/(1-p); inference is the identity.
inline ad::Var dropout(ad::Tape& t, ad::Var x, double p, Rng& rng,
                       Mode mode) {
  if (!(p >= 0.0 && p < 1.0))
    throw std::invalid_argument("dropout: p must be in [0,1)");
  if (mode == Mode::infer || p == 0.0) return x;
  Tensor mask(t.val(x).shape());
  const double keep = 1.0 - p;
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = (rng.uniform() < p) ? 0.0 : 1.0 / keep;
  return t.mul(x, t.constant(mask));
}

}  // namespace dasp
