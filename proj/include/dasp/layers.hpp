// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dasp/autodiff.hpp"
#include "dasp/rng.hpp"
#include "dasp/tensor.hpp"

namespace dasp::nn {

using ad::Tape;
using ad::Var;

enum class Activation { identity, sigmoid, relu, leaky_relu, swish, tanh };

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity" || s == "linear") return Activation::identity;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "relu") return Activation::relu;
  if (s == "leaky_relu") return Activation::leaky_relu;
  if (s == "swish") return Activation::swish;
  if (s == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation: " + s);
}

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::swish: return "swish";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

inline Var apply_activation(Tape& t, Var x, Activation a,
                            double leaky_slope = 0.01) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::sigmoid: return t.sigmoid(x);
    case Activation::relu: return t.relu(x);
    case Activation::leaky_relu: return t.leaky_relu(x, leaky_slope);
    case Activation::swish: return t.swish(x);
    case Activation::tanh: return t.tanh(x);
  }
  throw std::logic_error("unreachable activation");
}

/// Ties the leaf Var of each trainable tensor to its storage so a training
/// loop can read gradients back after Tape::backward. Binding the same
/// storage again returns the existing leaf, so repeated forwards of one
/// layer accumulate onto a single gradient. One BoundParams serves exactly
/// one tape.
struct BoundParams {
  std::vector<Var> vars;
  std::vector<Tensor*> tensors;

  Var bind(Tape& t, Tensor& storage) {
    for (std::size_t i = 0; i < tensors.size(); ++i)
      if (tensors[i] == &storage) return vars[i];
    Var v = t.leaf(storage);
    vars.push_back(v);
    tensors.push_back(&storage);
    return v;
  }

  /// Gradients in storage order after Tape::backward.
  std::vector<Tensor> gradients(const Tape& t) const {
    std::vector<Tensor> out;
    out.reserve(vars.size());
    for (Var v : vars) out.push_back(t.grad(v));
    return out;
  }
};

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

/// One slice-wise fully connected layer: y = act(W x + b). Accepts a single
/// column (in) or a batch of columns (in x B).
struct DenseLayer {
  Tensor W;  // out x in
  Tensor b;  // out
  Activation activation = Activation::identity;
  double leaky_slope = 0.01;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act, Rng& rng)
      : W(Tensor::randn({out, in}, rng, 1.0 / std::sqrt(double(in)))),
        b(Tensor({out}, 0.0)),
        activation(act) {}
  DenseLayer(Tensor W_, Tensor b_, Activation act)
      : W(std::move(W_)), b(std::move(b_)), activation(act) {
    if (W.ndim() != 2 || b.size() != W.rows())
      throw std::invalid_argument("DenseLayer: W " + W.shape_str() +
                                  " and b " + b.shape_str() +
                                  " are inconsistent");
  }

  std::size_t in_dim() const { return W.cols(); }
  std::size_t out_dim() const { return W.rows(); }

  Var forward(Tape& t, Var x, BoundParams* bound = nullptr) const {
    BoundParams local;
    BoundParams& bp = bound ? *bound : local;
    Var Wv = bp.bind(t, const_cast<Tensor&>(W));
    Var bv = bp.bind(t, const_cast<Tensor&>(b));
    const Tensor& xv = t.val(x);
    bool was_vector = (xv.ndim() == 1);
    Var xin = was_vector ? t.reshape(x, {xv.size(), 1}) : x;
    if (t.val(xin).rows() != in_dim())
      throw std::invalid_argument("DenseLayer: input rows " +
                                  t.val(xin).shape_str() + " != in dim " +
                                  std::to_string(in_dim()));
    Var y = apply_activation(t, t.add_colvec(t.matmul(Wv, xin), bv),
                             activation, leaky_slope);
    return was_vector ? t.reshape(y, {out_dim()}) : y;
  }
};

// ---------------------------------------------------------------------------
// Conv1d
// ---------------------------------------------------------------------------

enum class Pooling { none, decimate, average, max };

/// Valid-mode dilated 1-D convolution over (C_in x T), K filters of width L.
/// Taps look backward in time: out(t) = sum_i w(i) . x(t - i*dilation), so
/// kernel index 0 multiplies the newest sample of the window. Pooling by N
/// keeps complete groups only; decimation takes element 0 of each group.
struct Conv1dLayer {
  Tensor kernels;  // C_out x (C_in * L), kernel index i at column c*L + i
  Tensor bias;     // C_out
  std::size_t in_channels = 0;
  std::size_t width = 1;
  std::size_t stride = 1;
  std::size_t dilation = 1;
  Pooling pooling = Pooling::none;
  std::size_t pool_stride = 1;
  Activation activation = Activation::identity;
  double leaky_slope = 0.01;

  Conv1dLayer() = default;
  Conv1dLayer(std::size_t c_in, std::size_t c_out, std::size_t L,
              Activation act, Rng& rng, std::size_t stride_ = 1,
              std::size_t dilation_ = 1, Pooling pool = Pooling::none,
              std::size_t pool_n = 1)
      : kernels(Tensor::randn({c_out, c_in * L}, rng,
                              1.0 / std::sqrt(double(c_in * L)))),
        bias(Tensor({c_out}, 0.0)),
        in_channels(c_in),
        width(L),
        stride(stride_),
        dilation(dilation_),
        pooling(pool),
        pool_stride(pool_n),
        activation(act) {
    validate();
  }

  void validate() const {
    if (width < 1 || dilation < 1 || stride < 1 || pool_stride < 1)
      throw std::invalid_argument("Conv1dLayer: width/stride/dilation/pool "
                                  "must be >= 1");
  }

  std::size_t out_channels() const { return kernels.rows(); }
  std::size_t span() const { return (width - 1) * dilation + 1; }

  std::size_t conv_length(std::size_t T) const {
    if (T < span())
      throw std::invalid_argument(
          "Conv1dLayer: input length " + std::to_string(T) +
          " shorter than kernel span " + std::to_string(span()));
    return (T - span()) / stride + 1;
  }

  std::size_t output_length(std::size_t T) const {
    std::size_t t1 = conv_length(T);
    if (pooling == Pooling::none) return t1;
    std::size_t groups = t1 / pool_stride;
    if (groups == 0)
      throw std::invalid_argument("Conv1dLayer: pooling leaves no output");
    return groups;
  }

  Var forward(Tape& t, Var x, BoundParams* bound = nullptr) const {
    BoundParams local;
    BoundParams& bp = bound ? *bound : local;
    Var kv = bp.bind(t, const_cast<Tensor&>(kernels));
    Var bv = bp.bind(t, const_cast<Tensor&>(bias));
    const Tensor& xv = t.val(x);
    if (xv.ndim() != 2 || xv.rows() != in_channels)
      throw std::invalid_argument("Conv1dLayer: input " + xv.shape_str() +
                                  " does not have " +
                                  std::to_string(in_channels) + " channels");
    const std::size_t T = xv.cols();
    const std::size_t T1 = conv_length(T);
    const std::size_t C_out = out_channels(), C_in = in_channels, L = width;
    const std::size_t d = dilation, s = stride, sp = span();

    Tensor y({C_out, T1});
    {
      const Tensor& K = t.val(kv);
      for (std::size_t o = 0; o < C_out; ++o)
        for (std::size_t tt = 0; tt < T1; ++tt) {
          double acc = 0.0;
          const std::size_t last = tt * s + sp - 1;
          for (std::size_t c = 0; c < C_in; ++c)
            for (std::size_t i = 0; i < L; ++i)
              acc += K.at(o, c * L + i) * xv.at(c, last - i * d);
          y.at(o, tt) = acc;
        }
    }
    Var conv = t.custom(
        std::move(y), {x, kv},
        [x, kv, C_out, C_in, L, T1, d, s, sp](Tape& tt, std::size_t id) {
          const Tensor& g = tt.grad_of(id);
          const Tensor& xin = tt.val(x);
          const Tensor& K = tt.val(kv);
          Tensor& gx = tt.grad_ref(x);
          Tensor& gk = tt.grad_ref(kv);
          for (std::size_t o = 0; o < C_out; ++o)
            for (std::size_t t2 = 0; t2 < T1; ++t2) {
              const double gv = g.at(o, t2);
              if (gv == 0.0) continue;
              const std::size_t last = t2 * s + sp - 1;
              for (std::size_t c = 0; c < C_in; ++c)
                for (std::size_t i = 0; i < L; ++i) {
                  gk.at(o, c * L + i) += gv * xin.at(c, last - i * d);
                  gx.at(c, last - i * d) += gv * K.at(o, c * L + i);
                }
            }
        });
    Var act = apply_activation(t, t.add_colvec(conv, bv), activation,
                               leaky_slope);
    return pool(t, act);
  }

  Var pool(Tape& t, Var x) const {
    if (pooling == Pooling::none) return x;
    const Tensor& xv = t.val(x);
    const std::size_t C = xv.rows(), T1 = xv.cols();
    const std::size_t N = pool_stride;
    const std::size_t G = T1 / N;
    if (G == 0)
      throw std::invalid_argument("Conv1dLayer: pooling leaves no output");
    Tensor y({C, G});
    std::vector<std::size_t> argmax(pooling == Pooling::max ? C * G : 0);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t g = 0; g < G; ++g) {
        switch (pooling) {
          case Pooling::decimate:
            y.at(c, g) = xv.at(c, g * N);
            break;
          case Pooling::average: {
            double acc = 0.0;
            for (std::size_t l = 0; l < N; ++l) acc += xv.at(c, g * N + l);
            y.at(c, g) = acc / double(N);
            break;
          }
          case Pooling::max: {
            std::size_t arg = g * N;
            for (std::size_t l = 1; l < N; ++l)
              if (xv.at(c, g * N + l) > xv.at(c, arg)) arg = g * N + l;
            y.at(c, g) = xv.at(c, arg);
            argmax[c * G + g] = arg;
            break;
          }
          case Pooling::none: break;
        }
      }
    Pooling mode = pooling;
    return t.custom(std::move(y), {x},
                    [x, C, G, N, mode, argmax](Tape& tt, std::size_t id) {
                      const Tensor& g = tt.grad_of(id);
                      Tensor& gx = tt.grad_ref(x);
                      for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t k = 0; k < G; ++k) {
                          const double gv = g.at(c, k);
                          switch (mode) {
                            case Pooling::decimate:
                              gx.at(c, k * N) += gv;
                              break;
                            case Pooling::average:
                              for (std::size_t l = 0; l < N; ++l)
                                gx.at(c, k * N + l) += gv / double(N);
                              break;
                            case Pooling::max:
                              gx.at(c, argmax[c * G + k]) += gv;
                              break;
                            case Pooling::none: break;
                          }
                        }
                    });
  }
};

/// Equivalent impulse-response length of a cascade of FIR stages.
inline std::size_t receptive_field(const std::vector<std::size_t>& lengths) {
  if (lengths.empty()) throw std::invalid_argument("receptive_field: empty");
  std::size_t sum = 0;
  for (std::size_t l : lengths) {
    if (l < 1) throw std::invalid_argument("receptive_field: length < 1");
    sum += l;
  }
  return sum - lengths.size() + 1;
}

// ---------------------------------------------------------------------------
// Recurrent cells
// ---------------------------------------------------------------------------

enum class RecurrentKind { lstm, gru };

struct RecurrentState {
  Var y;  // previous output
  Var c;  // previous cell (lstm only)
};

/// Gated recurrent cell over slices. izes: x(t) has length M (input), the
/// state y(t) has length K. LSTM output is tanh(o . c); GRU output is
/// z . y(t-1) + (1-z) . c.
struct RecurrentCell {
  RecurrentKind kind = RecurrentKind::gru;
  std::size_t input_size = 0;
  std::size_t state_size = 0;
  // LSTM: {f, i, o, c}; GRU: {z, r, c}. Each gate has W (K x M), U (K x K),
  // b (K).
  std::vector<Tensor> W, U, b;

  RecurrentCell() = default;
  RecurrentCell(RecurrentKind k, std::size_t in, std::size_t state, Rng& rng)
      : kind(k), input_size(in), state_size(state) {
    const std::size_t gates = (k == RecurrentKind::lstm) ? 4 : 3;
    const double sw = 1.0 / std::sqrt(double(in));
    const double su = 1.0 / std::sqrt(double(state));
    for (std::size_t g = 0; g < gates; ++g) {
      W.push_back(Tensor::randn({state, in}, rng, sw));
      U.push_back(Tensor::randn({state, state}, rng, su));
      b.push_back(Tensor({state}, 0.0));
    }
  }

  RecurrentState initial_state(Tape& t) const {
    RecurrentState s;
    s.y = t.constant(Tensor({state_size, 1}, 0.0));
    if (kind == RecurrentKind::lstm)
      s.c = t.constant(Tensor({state_size, 1}, 0.0));
    return s;
  }

  struct GateVars {
    std::vector<Var> W, U, b;
  };

  GateVars bind(Tape& t, BoundParams* bound) const {
    BoundParams local;
    BoundParams& bp = bound ? *bound : local;
    GateVars gv;
    for (std::size_t g = 0; g < W.size(); ++g) {
      gv.W.push_back(bp.bind(t, const_cast<Tensor&>(W[g])));
      gv.U.push_back(bp.bind(t, const_cast<Tensor&>(U[g])));
      gv.b.push_back(bp.bind(t, const_cast<Tensor&>(b[g])));
    }
    return gv;
  }

  /// One step; x_t is a column (M x 1).
  std::pair<Var, RecurrentState> step(Tape& t, const GateVars& gv, Var x_t,
                                      const RecurrentState& state) const {
    if (!t.val(state.y).all_finite())
      throw std::invalid_argument("recurrent step: nonfinite state");
    auto affine = [&](std::size_t g, Var x, Var y_prev) {
      return t.add_colvec(
          t.add(t.matmul(gv.W[g], x), t.matmul(gv.U[g], y_prev)), gv.b[g]);
    };
    if (kind == RecurrentKind::lstm) {
      Var f = t.sigmoid(affine(0, x_t, state.y));
      Var i = t.sigmoid(affine(1, x_t, state.y));
      Var o = t.sigmoid(affine(2, x_t, state.y));
      Var c_tilde = t.tanh(affine(3, x_t, state.y));
      Var c = t.add(t.mul(f, state.c), t.mul(i, c_tilde));
      Var y = t.tanh(t.mul(o, c));
      return {y, RecurrentState{y, c}};
    }
    Var z = t.sigmoid(affine(0, x_t, state.y));
    Var r = t.sigmoid(affine(1, x_t, state.y));
    Var c = t.tanh(t.add_colvec(
        t.add(t.matmul(gv.W[2], x_t), t.matmul(gv.U[2], t.mul(r, state.y))),
        gv.b[2]));
    Var one_minus_z = t.add_scalar(t.neg(z), 1.0);
    Var y = t.add(t.mul(z, state.y), t.mul(one_minus_z, c));
    return {y, RecurrentState{y, y}};
  }

  /// Applies step left-to-right over a (M x T) sequence; returns (K x T).
  Var unroll(Tape& t, Var sequence, BoundParams* bound = nullptr) const {
    // Copy extents: val() references move when the tape grows.
    if (t.val(sequence).ndim() != 2 || t.val(sequence).rows() != input_size)
      throw std::invalid_argument(
          "recurrent unroll: input " + t.val(sequence).shape_str() +
          " vs input size " + std::to_string(input_size));
    const std::size_t T = t.val(sequence).cols();
    GateVars gv = bind(t, bound);
    RecurrentState state = initial_state(t);
    std::vector<Var> outputs;
    outputs.reserve(T);
    for (std::size_t i = 0; i < T; ++i) {
      Var x_t = t.slice_cols(sequence, i, i + 1);
      auto [y, next] = step(t, gv, x_t, state);
      outputs.push_back(y);
      state = next;
    }
    return t.concat(outputs, 1);
  }
};

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

/// Multi-head self-attention over (D x T); per-head weights are
/// softmax over input slices of k(i)^T q(t), unscaled. Heads concatenate
/// along depth: output ((M * d_v) x T).
struct AttentionBlock {
  struct Head {
    Tensor Tq, Tk, Tv;  // (d_k x D), (d_k x D), (d_v x D)
  };
  std::vector<Head> heads;

  AttentionBlock() = default;
  AttentionBlock(std::size_t num_heads, std::size_t D, std::size_t d_k,
                 std::size_t d_v, Rng& rng) {
    const double s = 1.0 / std::sqrt(double(D));
    for (std::size_t m = 0; m < num_heads; ++m)
      heads.push_back(Head{Tensor::randn({d_k, D}, rng, s),
                           Tensor::randn({d_k, D}, rng, s),
                           Tensor::randn({d_v, D}, rng, s)});
  }

  Var forward(Tape& t, Var x, BoundParams* bound = nullptr) const {
    if (heads.empty()) throw std::invalid_argument("attention: no heads");
    std::vector<Var> outs;
    for (const Head& h : heads) {
      BoundParams local;
      BoundParams& bp = bound ? *bound : local;
      Var q = t.matmul(bp.bind(t, const_cast<Tensor&>(h.Tq)), x);
      Var k = t.matmul(bp.bind(t, const_cast<Tensor&>(h.Tk)), x);
      Var v = t.matmul(bp.bind(t, const_cast<Tensor&>(h.Tv)), x);
      Var scores = t.matmul(t.transpose(k), q);  // (T x T): row i, col t
      Var weights = t.softmax_cols(scores);      // sum over i for each t
      outs.push_back(t.matmul(v, weights));
    }
    return outs.size() == 1 ? outs[0] : t.concat(outs, 0);
  }

  /// Attention weight matrix of head m for inspection (columns sum to 1).
  Tensor weights(const Tensor& x, std::size_t m = 0) const {
    Tape t;
    const Head& h = heads.at(m);
    Var xv = t.constant(x);
    Var q = t.matmul(t.constant(h.Tq), xv);
    Var k = t.matmul(t.constant(h.Tk), xv);
    return t.val(t.softmax_cols(t.matmul(t.transpose(k), q)));
  }
};

// ---------------------------------------------------------------------------
// Pooling heads
// ---------------------------------------------------------------------------

enum class PoolKind { mean, attentive, stats };

/// Converts variable-length (D x T) into a fixed-length vector.
/// mean: (1/T) sum x(i); attentive: sum alpha_i V x(i) with alpha from a
/// scoring net; stats: concat(mean, population std) as in x-vector pooling.
struct PoolingHead {
  PoolKind kind = PoolKind::mean;
  // Attentive kind: score vector s (D) gives h(x(i)) = s^T x(i); optional
  // projection V (P x D).
  Tensor score_w;
  Tensor projection;
  bool has_projection = false;
  double stats_var_floor = 0.0;

  static PoolingHead mean_pool() { return PoolingHead{}; }
  static PoolingHead stats_pool(double var_floor = 0.0) {
    PoolingHead p;
    p.kind = PoolKind::stats;
    p.stats_var_floor = var_floor;
    return p;
  }
  static PoolingHead attentive(Tensor score, Tensor V = Tensor()) {
    PoolingHead p;
    p.kind = PoolKind::attentive;
    p.score_w = std::move(score);
    if (V.size() > 0) {
      p.projection = std::move(V);
      p.has_projection = true;
    }
    return p;
  }

  Var forward(Tape& t, Var x, BoundParams* bound = nullptr) const {
    const Tensor& xv = t.val(x);
    if (xv.ndim() != 2) throw std::invalid_argument("pooling: input not 2-D");
    const std::size_t T = xv.cols();
    if (T < 1) throw std::invalid_argument("pooling: empty sequence");
    switch (kind) {
      case PoolKind::mean:
        return t.mean_axis(x, 1);
      case PoolKind::stats: {
        Var mu = t.mean_axis(x, 1);
        Var centered = t.add_colvec(x, t.neg(mu));
        Var var = t.mean_axis(t.square(centered), 1);
        Var sigma = t.sqrt(t.add_scalar(var, stats_var_floor));
        return t.concat({mu, sigma}, 0);
      }
      case PoolKind::attentive: {
        BoundParams local;
        BoundParams& bp = bound ? *bound : local;
        Var sw = bp.bind(t, const_cast<Tensor&>(score_w));
        // scores over slices: s^T x -> (1 x T) -> softmax over T
        Var scores = t.reshape(
            t.matmul(t.reshape(sw, {1, t.val(sw).size()}), x), {T});
        Var alpha = t.softmax(scores);
        Var projected = x;
        if (has_projection)
          projected = t.matmul(bp.bind(t, const_cast<Tensor&>(projection)), x);
        // sum_i alpha_i * col_i = projected * alpha
        return t.reshape(
            t.matmul(projected, t.reshape(alpha, {T, 1})),
            {t.val(projected).rows()});
      }
    }
    throw std::logic_error("unreachable pool kind");
  }

  Tensor attention_weights(const Tensor& x) const {
    Tape t;
    Var xv = t.constant(x);
    Var scores = t.reshape(
        t.matmul(t.constant(score_w.reshape({1, score_w.size()})), xv),
        {x.cols()});
    return t.val(t.softmax(scores));
  }
};

// ---------------------------------------------------------------------------
// Residual wrapper and output heads
// ---------------------------------------------------------------------------

/// y = x + inner(x); inner must preserve shape.
inline Var residual_wrap(Tape& t, Var x,
                         const std::function<Var(Tape&, Var)>& inner) {
  Var c = inner(t, x);
  t.val(x).require_same_shape(t.val(c), "residual_wrap");
  return t.add(x, c);
}

enum class OutputHeadKind { sigmoid, multi_sigmoid, softmax, sign };

/// Network output layer over an embedding z: probability, simplex, or sign
/// contracts per kind. The sign kind is inference-only (not differentiable).
struct OutputHead {
  OutputHeadKind kind = OutputHeadKind::sigmoid;
  Tensor W;  // L x D (single row for sigmoid/sign)
  Tensor b;  // L

  OutputHead() = default;
  OutputHead(OutputHeadKind k, std::size_t dim, std::size_t classes, Rng& rng)
      : kind(k),
        W(Tensor::randn({classes, dim}, rng, 1.0 / std::sqrt(double(dim)))),
        b(Tensor({classes}, 0.0)) {
    if ((k == OutputHeadKind::sigmoid || k == OutputHeadKind::sign) &&
        classes != 1)
      throw std::invalid_argument("OutputHead: scalar kinds need 1 class");
  }

  Var forward(Tape& t, Var z, BoundParams* bound = nullptr) const {
    BoundParams local;
    BoundParams& bp = bound ? *bound : local;
    Var Wv = bp.bind(t, const_cast<Tensor&>(W));
    Var bv = bp.bind(t, const_cast<Tensor&>(b));
    const Tensor& zv = t.val(z);
    bool was_vector = (zv.ndim() == 1);
    Var zin = was_vector ? t.reshape(z, {zv.size(), 1}) : z;
    Var pre = t.add_colvec(t.matmul(Wv, zin), bv);
    Var out;
    switch (kind) {
      case OutputHeadKind::sigmoid:
      case OutputHeadKind::multi_sigmoid:
        out = t.sigmoid(pre);
        break;
      case OutputHeadKind::softmax:
        out = t.softmax_cols(pre);
        break;
      case OutputHeadKind::sign:
        throw std::invalid_argument(
            "OutputHead: sign kind has no tape forward; use decide()");
    }
    return was_vector ? t.reshape(out, {W.rows()}) : out;
  }

  /// Hard decision of the sign kind: sign(w^T z + b) in {-1, +1}.
  double decide(const Tensor& z) const {
    if (kind != OutputHeadKind::sign)
      throw std::invalid_argument("OutputHead::decide needs sign kind");
    double acc = b[0];
    for (std::size_t i = 0; i < z.size(); ++i) acc += W.at(0, i) * z[i];
    return acc >= 0.0 ? 1.0 : -1.0;
  }
};

}  // namespace dasp::nn
