// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "dasp/autodiff.hpp"
#include "dasp/losses.hpp"
#include "dasp/rng.hpp"
#include "dasp/tensor.hpp"

namespace dasp::gen {

using ad::Tape;
using ad::Var;

// ---------------------------------------------------------------------------
// Adversarial objectives
// ---------------------------------------------------------------------------

/// The three generator objectives: maximize E d(g(z)), maximize
/// E ln d(g(z)), or minimize E ln(1 - d(g(z))).
enum class GeneratorObjective { mean_d, log_d, log_one_minus_d };

struct GanValues {
  Var discriminator_objective;  // E ln d(x) + E ln(1 - d(g(z))), to maximize
  Var generator_objective;      // per the selected variant
};

/// Objective values from discriminator probabilities on a real and a fake
/// batch (1-D vars of equal meaning, not necessarily equal length).
/// Expectations are batch means; probabilities are clamped before logs.
inline GanValues gan_values(Tape& t, Var d_real, Var d_fake,
                            GeneratorObjective variant) {
  Var real_p = loss::clamp01(t, d_real);
  Var fake_p = loss::clamp01(t, d_fake);
  Var one_minus_fake = t.add_scalar(t.neg(fake_p), 1.0);
  GanValues out;
  out.discriminator_objective =
      t.add(t.mean(t.log(real_p)), t.mean(t.log(one_minus_fake)));
  switch (variant) {
    case GeneratorObjective::mean_d:
      out.generator_objective = t.mean(fake_p);
      break;
    case GeneratorObjective::log_d:
      out.generator_objective = t.mean(t.log(fake_p));
      break;
    case GeneratorObjective::log_one_minus_d:
      out.generator_objective = t.mean(t.log(one_minus_fake));
      break;
  }
  return out;
}

/// Scalar critic evaluated on a leaf input inside a fresh tape; used to take
/// input gradients for the penalty.
using Critic = std::function<Var(Tape&, Var)>;

struct WganGpResult {
  double value = 0.0;        // E d(real) - E d(fake) + lambda * penalty
  double critic_gap = 0.0;   // E d(real) - E d(fake)
  double penalty = 0.0;      // E (||grad d(z)|| - 1)^2 over the mixtures
  std::vector<Tensor> mixed_inputs;
  std::vector<Tensor> mixed_gradients;  // input gradients at the mixtures
};

/// Wasserstein critic objective with gradient penalty. The mixing weights
/// eps are sampled uniformly per pair; the input gradient at each mixture
/// comes from a reverse pass with the mixture as a leaf.
inline WganGpResult wgan_gp_value(const Critic& critic,
                                  const std::vector<Tensor>& real_batch,
                                  const std::vector<Tensor>& fake_batch,
                                  double lambda, Rng& rng) {
  if (real_batch.empty() || fake_batch.size() != real_batch.size())
    throw std::invalid_argument("wgan_gp_value: need matched batches");
  if (lambda < 0.0) throw std::invalid_argument("wgan_gp_value: lambda < 0");
  WganGpResult out;
  double mean_real = 0.0, mean_fake = 0.0;
  for (std::size_t i = 0; i < real_batch.size(); ++i) {
    {
      Tape t;
      mean_real += t.val(critic(t, t.constant(real_batch[i]))).item();
      Tape t2;
      mean_fake += t2.val(critic(t2, t2.constant(fake_batch[i]))).item();
    }
    const double eps = rng.uniform();
    Tensor mixed = real_batch[i] * eps + fake_batch[i] * (1.0 - eps);
    Tape t;
    Var z = t.leaf(mixed);
    Var d = critic(t, z);
    if (t.val(d).size() != 1)
      throw std::invalid_argument("wgan_gp_value: critic must be scalar");
    t.backward(d);
    Tensor g = t.grad(z);
    const double n = g.norm2();
    out.penalty += (n - 1.0) * (n - 1.0);
    out.mixed_inputs.push_back(std::move(mixed));
    out.mixed_gradients.push_back(std::move(g));
  }
  const double count = double(real_batch.size());
  mean_real /= count;
  mean_fake /= count;
  out.penalty /= count;
  out.critic_gap = mean_real - mean_fake;
  out.value = out.critic_gap + lambda * out.penalty;
  return out;
}

// ---------------------------------------------------------------------------
// Variational diffusion
// ---------------------------------------------------------------------------

enum class AlphaCurve { linear, constant };

/// Per-step noising coefficients alpha_t and the derived quantities. Index
/// convention: vectors are 0-based with entry t-1 holding step t; the
/// cumulative product treats alpha_bar_0 = 1.
struct DiffusionSchedule {
  std::vector<double> alpha;          // alpha_t, t = 1..T
  std::vector<double> alpha_bar;      // prod_{i<=t} alpha_i
  std::vector<double> posterior_var;  // sigma_t^2
  std::vector<double> rho;            // loss weights, defined for t >= 2

  std::size_t steps() const { return alpha.size(); }

  double alpha_bar_prev(std::size_t t) const {
    return t >= 2 ? alpha_bar[t - 2] : 1.0;
  }

  void validate_step(std::size_t t) const {
    if (t < 1 || t > steps())
      throw std::invalid_argument("diffusion: step index out of range");
  }
};

/// The linear curve runs alpha from 0.9999 down to 0.98 by default, which
/// drives alpha_bar below 1e-4 at T = 1000.
inline DiffusionSchedule diffusion_schedule(std::size_t steps,
                                            AlphaCurve curve,
                                            double alpha_start = 0.9999,
                                            double alpha_end = 0.98) {
  if (steps < 2) throw std::invalid_argument("diffusion_schedule: T < 2");
  for (double a : {alpha_start, alpha_end})
    if (!(a > 0.0 && a <= 1.0))
      throw std::invalid_argument("diffusion_schedule: alpha outside (0,1]");
  DiffusionSchedule s;
  s.alpha.resize(steps);
  for (std::size_t t = 1; t <= steps; ++t) {
    if (curve == AlphaCurve::constant)
      s.alpha[t - 1] = alpha_start;
    else
      s.alpha[t - 1] = alpha_start + (alpha_end - alpha_start) *
                                         double(t - 1) / double(steps - 1);
  }
  s.alpha_bar.resize(steps);
  double prod = 1.0;
  for (std::size_t t = 1; t <= steps; ++t) {
    prod *= s.alpha[t - 1];
    s.alpha_bar[t - 1] = prod;
  }
  s.posterior_var.resize(steps);
  s.rho.resize(steps, 0.0);
  for (std::size_t t = 1; t <= steps; ++t) {
    const double a = s.alpha[t - 1];
    const double ab = s.alpha_bar[t - 1];
    const double ab_prev = s.alpha_bar_prev(t);
    const double denom = 1.0 - ab;
    s.posterior_var[t - 1] =
        denom > 0.0 ? (1.0 - a) * (1.0 - ab_prev) / denom : 0.0;
    if (t >= 2 && s.posterior_var[t - 1] > 0.0 && denom > 0.0)
      s.rho[t - 1] = 0.5 / s.posterior_var[t - 1] * ab_prev * (1.0 - a) *
                     (1.0 - a) / (denom * denom);
  }
  return s;
}

/// One-step corruption x_t = sqrt(alpha_t) x_{t-1} + sqrt(1-alpha_t) eps.
inline Tensor q_step(const Tensor& x_prev, std::size_t t,
                     const DiffusionSchedule& s, Rng& rng) {
  s.validate_step(t);
  const double a = s.alpha[t - 1];
  Tensor out(x_prev.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::sqrt(a) * x_prev[i] +
             std::sqrt(1.0 - a) * rng.gaussian();
  return out;
}

/// Closed-form jump x_t = sqrt(ab_t) x_0 + sqrt(1-ab_t) eps with the given
/// noise draw (deterministic form).
inline Tensor q_sample(const Tensor& x0, std::size_t t,
                       const DiffusionSchedule& s, const Tensor& eps) {
  s.validate_step(t);
  x0.require_same_shape(eps, "q_sample");
  const double ab = s.alpha_bar[t - 1];
  Tensor out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::sqrt(ab) * x0[i] + std::sqrt(1.0 - ab) * eps[i];
  return out;
}

inline Tensor q_sample(const Tensor& x0, std::size_t t,
                       const DiffusionSchedule& s, Rng& rng) {
  Tensor eps(x0.shape());
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = rng.gaussian();
  return q_sample(x0, t, s, eps);
}

/// Gaussian posterior mean of x_{t-1} given (x_t, x0):
/// [sqrt(a_t)(1-ab_{t-1}) x_t + sqrt(ab_{t-1})(1-a_t) x0] / (1-ab_t).
inline Tensor posterior_mean(const Tensor& x_t, const Tensor& x0_hat,
                             std::size_t t, const DiffusionSchedule& s) {
  s.validate_step(t);
  x_t.require_same_shape(x0_hat, "posterior_mean");
  const double a = s.alpha[t - 1];
  const double ab = s.alpha_bar[t - 1];
  const double ab_prev = s.alpha_bar_prev(t);
  const double denom = 1.0 - ab;
  Tensor out(x_t.shape());
  if (denom <= 0.0) return x_t;  // no noise was ever added
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (std::sqrt(a) * (1.0 - ab_prev) * x_t[i] +
              std::sqrt(ab_prev) * (1.0 - a) * x0_hat[i]) /
             denom;
  return out;
}

/// Reverse sampling step: the posterior mean plus sigma_t noise for t >= 2;
/// t = 1 emits the mean with no noise.
inline Tensor posterior_step(const Tensor& x_t, const Tensor& x0_hat,
                             std::size_t t, const DiffusionSchedule& s,
                             Rng& rng) {
  Tensor out = posterior_mean(x_t, x0_hat, t, s);
  if (t >= 2) {
    const double sigma = std::sqrt(s.posterior_var[t - 1]);
    if (sigma > 0.0)
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += sigma * rng.gaussian();
  }
  return out;
}

/// Denoising predictor: maps (x_t, t/T) to an estimate of x0 on the tape.
using DiffusionPredictor =
    std::function<Var(Tape&, Var x_t, double t_normalized)>;

/// Monte Carlo estimate of sum_t rho_t E || f(x_t, t) - x0 ||^2 with t
/// uniform on {2..T}, one (t, eps) draw per batch element. Batch reduction
/// is SUM.
inline Var diffusion_train_loss(Tape& t, const DiffusionPredictor& predictor,
                                const std::vector<Tensor>& x0_batch,
                                const DiffusionSchedule& s, Rng& rng) {
  if (x0_batch.empty())
    throw std::invalid_argument("diffusion_train_loss: empty batch");
  Var total = t.constant_scalar(0.0);
  const std::size_t T = s.steps();
  for (const Tensor& x0 : x0_batch) {
    const std::size_t step = 2 + rng.uniform_int(T - 1);  // uniform {2..T}
    Tensor x_t = q_sample(x0, step, s, rng);
    Var pred = predictor(t, t.constant(x_t), double(step) / double(T));
    Var err = t.sum(t.square(t.sub(pred, t.constant(x0))));
    total = t.add(total, t.mul_scalar(err, s.rho[step - 1]));
  }
  return total;
}

}  // namespace dasp::gen
