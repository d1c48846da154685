// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dasp/autodiff.hpp"
#include "dasp/tensor.hpp"

namespace dasp::loss {

using ad::Tape;
using ad::Var;

/// Probability clamp applied before every log. Batch reduction throughout
/// this module is SUM over the batch.
inline constexpr double kEpsNum = 1e-12;

inline Var clamp01(Tape& t, Var p) {
  return t.clamp(p, kEpsNum, 1.0 - kEpsNum);
}

// ---------------------------------------------------------------------------
// Regression losses
// ---------------------------------------------------------------------------

enum class Regression { mse, l1, huber };

inline Var regression_loss(Tape& t, Regression kind, Var prediction,
                           const Tensor& target, double delta = 1.0) {
  Var err = t.sub(prediction, t.constant(target));
  switch (kind) {
    case Regression::mse:
      return t.sum(t.square(err));
    case Regression::l1:
      return t.sum(t.abs(err));
    case Regression::huber: {
      if (!(delta > 0.0))
        throw std::invalid_argument("regression_loss: huber delta <= 0");
      // 0.5 e^2 inside |e| <= delta, delta |e| - 0.5 delta^2 outside; C1 at
      // the switch.
      const Tensor& ev = t.val(err);
      Tensor quadratic_mask(ev.shape());
      for (std::size_t i = 0; i < ev.size(); ++i)
        quadratic_mask[i] = std::abs(ev[i]) <= delta ? 1.0 : 0.0;
      Var qmask = t.constant(quadratic_mask);
      Var lmask = t.constant(quadratic_mask.map([](double m) { return 1.0 - m; }));
      Var quad = t.mul_scalar(t.square(err), 0.5);
      Var lin = t.add_scalar(t.mul_scalar(t.abs(err), delta),
                             -0.5 * delta * delta);
      return t.sum(t.add(t.mul(qmask, quad), t.mul(lmask, lin)));
    }
  }
  throw std::logic_error("unreachable regression kind");
}

// ---------------------------------------------------------------------------
// Classification / detection losses
// ---------------------------------------------------------------------------

/// -sum y . ln(yhat) elementwise (labels one-hot or soft).
inline Var cross_entropy(Tape& t, Var yhat, const Tensor& labels) {
  t.val(yhat).require_same_shape(labels, "cross_entropy");
  return t.neg(t.sum(t.mul(t.constant(labels), t.log(clamp01(t, yhat)))));
}

/// Negative log-likelihood over class indices; probabilities are (L x N).
inline Var nll(Tape& t, Var probs, const std::vector<std::size_t>& classes) {
  const Tensor& p = t.val(probs);
  if (p.ndim() != 2 || classes.size() != p.cols())
    throw std::invalid_argument("nll: need (L x N) probs and N class ids");
  if (classes.empty()) throw std::invalid_argument("nll: empty batch");
  Tensor picks(p.shape(), 0.0);
  for (std::size_t n = 0; n < classes.size(); ++n) {
    if (classes[n] >= p.rows())
      throw std::invalid_argument("nll: class index out of range");
    picks.at(classes[n], n) = 1.0;
  }
  return t.neg(t.sum(t.mul(t.constant(picks), t.log(clamp01(t, probs)))));
}

inline Var bce(Tape& t, Var yhat, const Tensor& labels) {
  t.val(yhat).require_same_shape(labels, "bce");
  Var p = clamp01(t, yhat);
  Var y = t.constant(labels);
  Var one_minus_y = t.constant(labels.map([](double v) { return 1.0 - v; }));
  Var pos = t.mul(y, t.log(p));
  Var neg = t.mul(one_minus_y, t.log(t.add_scalar(t.neg(p), 1.0)));
  return t.neg(t.add(t.sum(pos), t.sum(neg)));
}

/// beta >= 1 boosts the positive-label term of the binary cross-entropy.
inline Var weighted_bce(Tape& t, Var yhat, const Tensor& labels,
                        double beta) {
  t.val(yhat).require_same_shape(labels, "weighted_bce");
  Var p = clamp01(t, yhat);
  Var y = t.constant(labels);
  Var one_minus_y = t.constant(labels.map([](double v) { return 1.0 - v; }));
  Var pos = t.mul_scalar(t.sum(t.mul(y, t.log(p))), beta);
  Var neg = t.sum(t.mul(one_minus_y, t.log(t.add_scalar(t.neg(p), 1.0))));
  return t.neg(t.add(pos, neg));
}

/// Inverse-frequency weights (c0 / (K_l + c0))^eta on the positive term;
/// per-class counts K_l come from the batch itself. yhat/labels are (L x N).
inline Var inverse_frequency_loss(Tape& t, Var yhat, const Tensor& labels,
                                  double c0, double eta) {
  const Tensor& p = t.val(yhat);
  if (p.ndim() != 2)
    throw std::invalid_argument("inverse_frequency_loss: need (L x N)");
  p.require_same_shape(labels, "inverse_frequency_loss");
  if (c0 < 0.0 || eta < 0.0)
    throw std::invalid_argument("inverse_frequency_loss: c0, eta >= 0");
  Tensor pos_weight(labels.shape());
  for (std::size_t l = 0; l < labels.rows(); ++l) {
    double count = 0.0;
    for (std::size_t n = 0; n < labels.cols(); ++n) count += labels.at(l, n);
    const double w = std::pow(c0 / (count + c0), eta);
    for (std::size_t n = 0; n < labels.cols(); ++n)
      pos_weight.at(l, n) = w * labels.at(l, n);
  }
  Var pc = clamp01(t, yhat);
  Var pos = t.sum(t.mul(t.constant(pos_weight), t.log(pc)));
  Var one_minus_y = t.constant(labels.map([](double v) { return 1.0 - v; }));
  Var neg = t.sum(t.mul(one_minus_y, t.log(t.add_scalar(t.neg(pc), 1.0))));
  return t.neg(t.add(pos, neg));
}

/// Focal weights computed from the current predictions; detached from the
/// gradient like the batch statistics they stand in for.
inline void focal_weights(const Tensor& predictions, const Tensor& labels,
                          double eta, Tensor* wpos, Tensor* wneg) {
  *wpos = Tensor(predictions.shape());
  *wneg = Tensor(predictions.shape());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    (*wpos)[i] =
        std::pow(std::max(0.0, 1.0 - predictions[i]), eta) * labels[i];
    (*wneg)[i] =
        std::pow(std::max(0.0, predictions[i]), eta) * (1.0 - labels[i]);
  }
}

/// Core with the weights supplied (and thus frozen).
inline Var asymmetric_focal_loss_weighted(Tape& t, Var yhat,
                                          const Tensor& wpos,
                                          const Tensor& wneg) {
  Var pc = clamp01(t, yhat);
  Var pos = t.sum(t.mul(t.constant(wpos), t.log(pc)));
  Var neg = t.sum(
      t.mul(t.constant(wneg), t.log(t.add_scalar(t.neg(pc), 1.0))));
  return t.neg(t.add(pos, neg));
}

/// (1-yhat)^eta on the positive term and yhat^eta on the negative term;
/// the weights are treated as batch constants for the gradient.
inline Var asymmetric_focal_loss(Tape& t, Var yhat, const Tensor& labels,
                                 double eta) {
  t.val(yhat).require_same_shape(labels, "asymmetric_focal_loss");
  if (eta < 0.0) throw std::invalid_argument("asymmetric_focal_loss: eta < 0");
  Tensor wpos, wneg;
  focal_weights(t.val(yhat), labels, eta, &wpos, &wneg);
  return asymmetric_focal_loss_weighted(t, yhat, wpos, wneg);
}

/// Generalized Dice with focal weighting w_n = (1-yhat)^eta:
/// 1 - (k0 + sum w y yhat) / (k0 + sum (1-a) y^2 + sum a w yhat^2).
/// eta = 0, a = 0.5, k0 = 0 recovers the plain form
/// 1 - 2 sum(y yhat) / (sum y^2 + sum yhat^2).
inline Var dice_loss_weighted(Tape& t, Var yhat, const Tensor& labels,
                              const Tensor& w, double kappa0, double alpha);

inline Var dice_loss(Tape& t, Var yhat, const Tensor& labels,
                     double kappa0 = 0.0, double alpha = 0.5,
                     double eta = 0.0) {
  t.val(yhat).require_same_shape(labels, "dice_loss");
  if (kappa0 < 0.0 || eta < 0.0 || !(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("dice_loss: bad hyperparameters");
  const Tensor& p = t.val(yhat);
  Tensor w(p.shape());
  for (std::size_t i = 0; i < p.size(); ++i)
    w[i] = std::pow(std::max(0.0, 1.0 - p[i]), eta);
  return dice_loss_weighted(t, yhat, labels, w, kappa0, alpha);
}

/// Generalized Dice with the focal weights supplied (and thus frozen).
inline Var dice_loss_weighted(Tape& t, Var yhat, const Tensor& labels,
                              const Tensor& w, double kappa0, double alpha) {
  Var wv = t.constant(w);
  Var y = t.constant(labels);
  Var num = t.add_scalar(t.sum(t.mul(wv, t.mul(y, yhat))), kappa0);
  double y_sq = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    y_sq += labels[i] * labels[i];
  Var den = t.add_scalar(t.mul_scalar(t.sum(t.mul(wv, t.square(yhat))), alpha),
                         kappa0 + (1.0 - alpha) * y_sq);
  // 1 - 2*... only in the plain form; the generalized display has no 2: the
  // alpha = 0.5 split halves numerator and denominator together.
  Var ratio = t.div(t.mul_scalar(num, 2.0 * alpha), den);
  return t.add_scalar(t.neg(ratio), 1.0);
}

/// Hinge objective sum max(0, 1 - y (w^T z + b)) + lambda ||w||^2 over
/// scores already formed as w^T z + b; labels are in {-1, +1}.
inline Var hinge_svm(Tape& t, Var scores, const Tensor& labels, double lambda,
                     Var w) {
  t.val(scores).require_same_shape(labels, "hinge_svm");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != 1.0 && labels[i] != -1.0)
      throw std::invalid_argument("hinge_svm: labels must be +1/-1");
  if (lambda < 0.0) throw std::invalid_argument("hinge_svm: lambda < 0");
  Var margin = t.add_scalar(t.neg(t.mul(t.constant(labels), scores)), 1.0);
  Var hinge = t.sum(t.relu(margin));
  return t.add(hinge, t.mul_scalar(t.sum(t.square(w)), lambda));
}

// ---------------------------------------------------------------------------
// Detection-probability super-resolution
// ---------------------------------------------------------------------------

/// Clip score per class from frame probabilities (L x T):
/// h_l = sum_t p_t^2 / sum_t p_t, defined as 0 when the denominator is 0.
inline Var linear_softmax_clip_scores(Tape& t, Var frame_probs) {
  const Tensor& p = t.val(frame_probs);
  if (p.ndim() != 2)
    throw std::invalid_argument("clip scores: frame probs must be (L x T)");
  const std::size_t L = p.rows(), T = p.cols();
  Tensor value({L});
  for (std::size_t l = 0; l < L; ++l) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < T; ++k) {
      const double v = p.at(l, k);
      num += v * v;
      den += v;
    }
    value[l] = den > 0.0 ? num / den : 0.0;
  }
  Var fp = frame_probs;
  return t.custom(std::move(value), {fp}, [fp, L, T](Tape& tt, std::size_t id) {
    const Tensor& g = tt.grad_of(id);
    const Tensor& p = tt.val(fp);
    Tensor& gp = tt.grad_ref(fp);
    for (std::size_t l = 0; l < L; ++l) {
      double num = 0.0, den = 0.0;
      for (std::size_t k = 0; k < T; ++k) {
        num += p.at(l, k) * p.at(l, k);
        den += p.at(l, k);
      }
      if (den <= 0.0) continue;
      for (std::size_t k = 0; k < T; ++k)
        gp.at(l, k) +=
            g[l] * (2.0 * p.at(l, k) * den - num) / (den * den);
    }
  });
}

/// Aggregates frame probabilities into clip scores with the linear-softmax
/// rule, then binary cross-entropy against the clip labels (length L).
inline Var super_resolution_loss(Tape& t, Var frame_probs,
                                 const Tensor& clip_labels) {
  Var scores = linear_softmax_clip_scores(t, frame_probs);
  if (t.val(scores).size() != clip_labels.size())
    throw std::invalid_argument("super_resolution_loss: label count");
  return bce(t, scores, clip_labels);
}

// ---------------------------------------------------------------------------
// Embedding losses
// ---------------------------------------------------------------------------

inline Var squared_distance(Tape& t, Var a, Var b) {
  return t.sum(t.square(t.sub(a, b)));
}

/// Contrastive pair loss: same class pulls together, different classes are
/// pushed until the squared distance passes the margin.
inline Var contrastive_loss(Tape& t, Var z_a, Var z_b, bool same_class,
                            double margin) {
  if (margin < 0.0) throw std::invalid_argument("contrastive: margin < 0");
  Var d2 = squared_distance(t, z_a, z_b);
  if (same_class) return d2;
  return t.relu(t.add_scalar(t.neg(d2), margin));
}

/// max(0, margin + D+ - D-) with plain Euclidean distances.
inline Var triplet_loss(Tape& t, Var anchor, Var positive, Var negative,
                        double margin) {
  if (margin < 0.0) throw std::invalid_argument("triplet: margin < 0");
  Var dp = t.sqrt(squared_distance(t, anchor, positive));
  Var dn = t.sqrt(squared_distance(t, anchor, negative));
  return t.relu(t.add_scalar(t.sub(dp, dn), margin));
}

/// Cosine similarity of two embeddings after unit normalization.
inline Var cosine_similarity(Tape& t, Var a, Var b) {
  const Tensor& va = t.val(a);
  const Tensor& vb = t.val(b);
  if (va.norm2_sq() < 1e-24 || vb.norm2_sq() < 1e-24)
    throw std::invalid_argument("cosine loss: zero-norm embedding");
  Var num = t.dot(a, b);
  Var den = t.sqrt(t.mul(t.sum(t.square(a)), t.sum(t.square(b))));
  return t.div(num, den);
}

/// Normalized-temperature cross-entropy over a batch of anchor/augmented
/// pairs (columns of Z and Z_tilde). Per sample:
/// -ln exp(s(S+ - margin)) / (exp(s(S+ - margin)) + sum_{i!=n} exp(s S_i))
/// with s = alpha / tau and cosine similarities S.
inline Var ntxent_loss(Tape& t, const std::vector<Var>& anchors,
                       const std::vector<Var>& augmented, double tau,
                       double alpha = 1.0, double margin = 0.0) {
  if (!(tau > 0.0)) throw std::invalid_argument("ntxent: tau <= 0");
  if (anchors.size() != augmented.size() || anchors.size() < 2)
    throw std::invalid_argument("ntxent: need matched batches of >= 2");
  const double scale = alpha / tau;
  const std::size_t n = anchors.size();
  std::vector<Var> losses;
  for (std::size_t i = 0; i < n; ++i) {
    Var pos = t.exp(t.mul_scalar(
        t.add_scalar(cosine_similarity(t, anchors[i], augmented[i]), -margin),
        scale));
    std::vector<Var> negs;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      negs.push_back(t.exp(t.mul_scalar(
          cosine_similarity(t, anchors[i], augmented[j]), scale)));
    }
    Var den = pos;
    for (Var v : negs) den = t.add(den, v);
    losses.push_back(t.neg(t.log(t.div(pos, den))));
  }
  Var total = losses[0];
  for (std::size_t i = 1; i < losses.size(); ++i)
    total = t.add(total, losses[i]);
  return total;
}

/// Ring buffer of unit-normalized negative keys plus the momentum
/// coefficient for the key-encoder parameter average.
struct MocoDictionary {
  std::size_t capacity = 256;
  double momentum = 0.999;
  std::deque<Tensor> keys;

  void push(Tensor key) {
    const double n = key.norm2();
    if (n < 1e-12)
      throw std::invalid_argument("MocoDictionary: zero-norm key");
    for (std::size_t i = 0; i < key.size(); ++i) key[i] /= n;
    keys.push_back(std::move(key));
    while (keys.size() > capacity) keys.pop_front();
  }
};

/// Momentum update of the key encoder: theta' <- a theta' + (1-a) theta.
inline void moco_update(std::vector<Tensor*> key_params,
                        const std::vector<Tensor*>& query_params,
                        double momentum = 0.999) {
  if (!(momentum > 0.0 && momentum < 1.0))
    throw std::invalid_argument("moco_update: momentum must be in (0,1)");
  if (key_params.size() != query_params.size())
    throw std::invalid_argument("moco_update: parameter count mismatch");
  for (std::size_t k = 0; k < key_params.size(); ++k) {
    Tensor& kp = *key_params[k];
    const Tensor& qp = *query_params[k];
    kp.require_same_shape(qp, "moco_update");
    for (std::size_t i = 0; i < kp.size(); ++i)
      kp[i] = momentum * kp[i] + (1.0 - momentum) * qp[i];
  }
}

/// Contrast against a positive key plus the dictionary of negatives:
/// -ln exp(S+/tau) / (exp(S+/tau) + sum_D exp(S_i/tau)).
inline Var moco_loss(Tape& t, Var query, Var positive_key,
                     const MocoDictionary& dict, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("moco: tau <= 0");
  Var pos = t.exp(t.mul_scalar(cosine_similarity(t, query, positive_key),
                               1.0 / tau));
  Var den = pos;
  for (const Tensor& key : dict.keys) {
    Var k = t.constant(key);
    den = t.add(den, t.exp(t.mul_scalar(cosine_similarity(t, query, k),
                                        1.0 / tau)));
  }
  return t.neg(t.log(t.div(pos, den)));
}

// ---------------------------------------------------------------------------
// Waveform / spectral distances
// ---------------------------------------------------------------------------

/// Scale-invariant signal-to-distortion ratio in dB with the optimal target
/// scaling alpha = est^T s / ||s||^2; both ratio terms carry the eps guard.
inline double si_sdr(const std::vector<double>& target,
                     const std::vector<double>& estimate,
                     double eps = kEpsNum) {
  if (target.size() != estimate.size())
    throw std::invalid_argument("si_sdr: length mismatch");
  double ss = 0.0, se = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    ss += target[i] * target[i];
    se += target[i] * estimate[i];
  }
  if (ss <= 0.0) throw std::invalid_argument("si_sdr: zero target");
  const double alpha = se / ss;
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double a = alpha * target[i];
    sig += a * a;
    const double e = a - estimate[i];
    err += e * e;
  }
  return 10.0 * std::log10((sig + eps) / (err + eps));
}

/// Tape version against a fixed target; returns SI-SDR in dB.
inline Var si_sdr(Tape& t, Var estimate, const Tensor& target,
                  double eps = kEpsNum) {
  if (target.norm2_sq() <= 0.0)
    throw std::invalid_argument("si_sdr: zero target");
  Var s = t.constant(target);
  Var alpha = t.mul_scalar(t.dot(estimate, s), 1.0 / target.norm2_sq());
  Var scaled = t.scale_by(s, alpha);
  Var err = t.sub(scaled, estimate);
  Var num = t.add_scalar(t.sum(t.square(scaled)), eps);
  Var den = t.add_scalar(t.sum(t.square(err)), eps);
  const double ln10 = std::log(10.0);
  return t.mul_scalar(t.sub(t.log(num), t.log(den)), 10.0 / ln10);
}

/// Negative sum of per-slice SI-SDR values (training objective form).
inline Var si_sdr_loss(Tape& t, const std::vector<Var>& estimates,
                       const std::vector<Tensor>& targets,
                       double eps = kEpsNum) {
  if (estimates.empty() || estimates.size() != targets.size())
    throw std::invalid_argument("si_sdr_loss: batch mismatch");
  Var total = si_sdr(t, estimates[0], targets[0], eps);
  for (std::size_t i = 1; i < estimates.size(); ++i)
    total = t.add(total, si_sdr(t, estimates[i], targets[i], eps));
  return t.neg(total);
}

/// sum_t || mask(t) . |X(t)| - |S(t)| ||^2 over equal-shape magnitude
/// frames.
inline Var spectral_distance(Tape& t, Var mask, const Tensor& mix_magnitude,
                             const Tensor& target_magnitude) {
  t.val(mask).require_same_shape(mix_magnitude, "spectral_distance");
  mix_magnitude.require_same_shape(target_magnitude, "spectral_distance");
  for (std::size_t i = 0; i < mix_magnitude.size(); ++i)
    if (mix_magnitude[i] < 0.0 || target_magnitude[i] < 0.0)
      throw std::invalid_argument("spectral_distance: negative magnitude");
  Var est = t.mul(mask, t.constant(mix_magnitude));
  return t.sum(t.square(t.sub(est, t.constant(target_magnitude))));
}

// ---------------------------------------------------------------------------
// Permutation-invariant training
// ---------------------------------------------------------------------------

struct PitResult {
  double cost = 0.0;
  std::vector<std::size_t> permutation;  // output j matched to source perm[j]
};

/// Exhaustive minimum over assignments of outputs to sources for J <= 4.
/// pairwise(j, i) is the cost of matching output j to source i. Ties return
/// the lexicographically first permutation.
inline PitResult pit_assign(const Tensor& pairwise) {
  if (pairwise.ndim() != 2 || pairwise.rows() != pairwise.cols())
    throw std::invalid_argument("pit: pairwise cost must be square");
  const std::size_t J = pairwise.rows();
  if (J > 4)
    throw std::invalid_argument(
        "pit: J > 4 not supported (exhaustive enumeration)");
  pairwise.require_finite("pit pairwise costs");
  std::vector<std::size_t> perm(J);
  std::iota(perm.begin(), perm.end(), 0);
  PitResult best;
  best.cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t j = 0; j < J; ++j) cost += pairwise.at(j, perm[j]);
    if (cost < best.cost) {
      best.cost = cost;
      best.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Tape form: the pairwise costs are scalar vars d[j][i]; the returned loss
/// is the sum along the optimal assignment (gradients flow only through the
/// chosen permutation).
inline std::pair<Var, std::vector<std::size_t>> pit_loss(
    Tape& t, const std::vector<std::vector<Var>>& pairwise) {
  const std::size_t J = pairwise.size();
  Tensor costs({J == 0 ? 1 : J, J == 0 ? 1 : J}, 0.0);
  if (J == 0) throw std::invalid_argument("pit: empty cost matrix");
  for (std::size_t j = 0; j < J; ++j) {
    if (pairwise[j].size() != J)
      throw std::invalid_argument("pit: ragged cost matrix");
    for (std::size_t i = 0; i < J; ++i)
      costs.at(j, i) = t.val(pairwise[j][i]).item();
  }
  PitResult best = pit_assign(costs);
  Var total = pairwise[0][best.permutation[0]];
  for (std::size_t j = 1; j < J; ++j)
    total = t.add(total, pairwise[j][best.permutation[j]]);
  return {total, best.permutation};
}

// ---------------------------------------------------------------------------
// Deep clustering
// ---------------------------------------------------------------------------

enum class DeepClustering { frobenius, trace };

/// frobenius: ||V^T V - U^T U||_F^2 computed through the L x L Gram trick;
/// trace: L - tr[(V V^T)^-1 V U^T (U U^T)^-1 U V^T] with a 1e-8 ridge.
inline Var deep_clustering_loss(Tape& t, Var V, const Tensor& U,
                                DeepClustering variant,
                                double ridge = 1e-8) {
  const Tensor& v = t.val(V);
  if (v.ndim() != 2 || U.ndim() != 2 || v.cols() != U.cols())
    throw std::invalid_argument("deep_clustering: V and U need equal column "
                                "counts (time-frequency points)");
  Var Ut = t.constant(U);
  if (variant == DeepClustering::frobenius) {
    // ||V^T V||^2 - 2 ||V U^T||^2 + ||U^T U||^2
    Var vvt = t.matmul(V, t.transpose(V));
    Var vut = t.matmul(V, t.transpose(Ut));
    const double uu = matmul(U, U.transpose()).norm2_sq();
    Var term = t.sub(t.sum(t.square(vvt)),
                     t.mul_scalar(t.sum(t.square(vut)), 2.0));
    return t.add_scalar(term, uu);
  }
  // Trace variant. Inverses appear as custom nodes with the standard
  // d(A^-1) pullback; (U U^T)^-1 U is a constant.
  const std::size_t L = v.rows();
  Var vvt = t.matmul(V, t.transpose(V));
  Tensor vvt_ridge = t.val(vvt);
  for (std::size_t i = 0; i < L; ++i) vvt_ridge.at(i, i) += ridge;
  Tensor inv_value = matrix_inverse(vvt_ridge);
  Var vvt_inv = t.custom(
      inv_value, {vvt}, [vvt](Tape& tt, std::size_t id) {
        const Tensor& g = tt.grad_of(id);
        const Tensor& inv = tt.value_of(id);
        // dA = -A^-T G A^-T; the ridge shift has unit Jacobian.
        Tensor ginv = matmul(matmul(inv.transpose(), g), inv.transpose());
        Tensor& ga = tt.grad_ref(vvt);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] -= ginv[i];
      });
  Tensor uut = matmul(U, U.transpose());
  for (std::size_t i = 0; i < uut.rows(); ++i) uut.at(i, i) += ridge;
  Tensor uut_inv_u = matmul(matrix_inverse(uut), U);
  Var vut = t.matmul(V, t.transpose(Ut));  // L x L'
  Var middle = t.matmul(vut, t.matmul(t.constant(uut_inv_u), t.transpose(V)));
  // tr[(VV^T)^-1 * middle] = sum((VV^T)^-T . middle) elementwise
  Var prod = t.mul(t.transpose(vvt_inv), middle);
  return t.add_scalar(t.neg(t.sum(prod)), double(L));
}

// ---------------------------------------------------------------------------
// Feature constraint loss
// ---------------------------------------------------------------------------

/// sum_k w_k ||z^(k) - z_hat^(k)||^2 over the extractor's per-layer outputs
/// for the label y and the prediction yhat.
inline Var feature_constraint_loss(
    Tape& t, const std::function<std::vector<Var>(Tape&, Var)>& extractor,
    const Tensor& y, Var yhat, const std::vector<double>& layer_weights = {}) {
  std::vector<Var> z_ref = extractor(t, t.constant(y));
  std::vector<Var> z_est = extractor(t, yhat);
  if (z_ref.size() != z_est.size() || z_ref.empty())
    throw std::invalid_argument("feature_constraint_loss: extractor layer "
                                "outputs mismatch");
  if (!layer_weights.empty() && layer_weights.size() != z_ref.size())
    throw std::invalid_argument("feature_constraint_loss: weight count");
  Var total = t.constant_scalar(0.0);
  for (std::size_t k = 0; k < z_ref.size(); ++k) {
    Var d = t.sum(t.square(t.sub(z_est[k], z_ref[k])));
    if (!layer_weights.empty()) d = t.mul_scalar(d, layer_weights[k]);
    total = t.add(total, d);
  }
  return total;
}

// ---------------------------------------------------------------------------
// AUC surrogate
// ---------------------------------------------------------------------------

/// False-positive rate at threshold s_n over the negative scores (strict
/// comparison, as in the surrogate's derivation).
inline Tensor auc_pos_weights(const Tensor& pos, const Tensor& neg) {
  Tensor w({pos.size()});
  for (std::size_t n = 0; n < pos.size(); ++n) {
    double count = 0.0;
    for (std::size_t m = 0; m < neg.size(); ++m)
      if (neg[m] > pos[n]) count += 1.0;
    w[n] = count / double(neg.size());
  }
  return w;
}

/// Miss rate 1 - t(s_m) at threshold s_m over the positive scores.
inline Tensor auc_neg_weights(const Tensor& pos, const Tensor& neg) {
  Tensor w({neg.size()});
  for (std::size_t m = 0; m < neg.size(); ++m) {
    double count = 0.0;
    for (std::size_t n = 0; n < pos.size(); ++n)
      if (pos[n] >= neg[m]) count += 1.0;
    w[m] = 1.0 - count / double(pos.size());
  }
  return w;
}

/// Core of the surrogate with the weights supplied (and thus frozen):
/// -1/N+ sum w_n ln sigmoid(s_n - 1) - 1/N- sum w_m ln(1 - sigmoid(s_m)).
inline Var auc_surrogate_weighted(Tape& t, Var pos_scores, Var neg_scores,
                                  const Tensor& wpos, const Tensor& wneg) {
  const double np = double(t.val(pos_scores).size());
  const double nn = double(t.val(neg_scores).size());
  Var p1 = clamp01(t, t.sigmoid(t.add_scalar(pos_scores, -1.0)));
  Var term_pos = t.mul_scalar(t.sum(t.mul(t.constant(wpos), t.log(p1))),
                              -1.0 / np);
  Var p2 = clamp01(t, t.sigmoid(neg_scores));
  Var one_minus = t.add_scalar(t.neg(p2), 1.0);
  Var term_neg = t.mul_scalar(
      t.sum(t.mul(t.constant(wneg), t.log(one_minus))), -1.0 / nn);
  return t.add(term_pos, term_neg);
}

/// Differentiable relaxation of 1 - AUC. The per-score weights f(s_n)
/// (false-positive rate at s_n) and 1 - t(s_m) (miss rate at s_m) are
/// computed from the batch and detached from the gradient.
inline Var auc_surrogate(Tape& t, Var pos_scores, Var neg_scores) {
  const Tensor& pos = t.val(pos_scores);
  const Tensor& neg = t.val(neg_scores);
  if (pos.size() == 0 || neg.size() == 0)
    throw std::invalid_argument("auc_surrogate: an empty side");
  return auc_surrogate_weighted(t, pos_scores, neg_scores,
                                auc_pos_weights(pos, neg),
                                auc_neg_weights(pos, neg));
}

}  // namespace dasp::loss
