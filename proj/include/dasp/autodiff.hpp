// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <deque>
#include <vector>

#include "dasp/tensor.hpp"

namespace dasp::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid for the tape that
/// created it.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode gradient tape over 1-D/2-D tensors. Nodes are recorded in
/// construction order, so every node's inputs precede it and the backward
/// pass visits nodes exactly once in reverse. A Tape is confined to one
/// thread during construction and backward.
class Tape {
 public:
  Var leaf(Tensor v) {
    v.require_finite("leaf");
    return push(std::move(v), {}, nullptr);
  }

  /// Non-trainable input. Identical mechanics to leaf; the name documents
  /// intent at call sites.
  Var constant(Tensor v) {
    v.require_finite("constant");
    return push(std::move(v), {}, nullptr);
  }

  Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

  const Tensor& val(Var x) const { return values_.at(x.id); }

  const Tensor& grad(Var x) const {
    if (grads_.empty())
      throw std::logic_error("Tape::grad before backward()");
    return grads_.at(x.id);
  }

  std::size_t size() const { return values_.size(); }

  // ----- elementwise unary ---------------------------------------------

  Var sigmoid(Var x) {
    Tensor y = val(x).map([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    return unary(x, std::move(y), [](double /*xi*/, double yi) {
      return yi * (1.0 - yi);
    });
  }

  Var relu(Var x) {
    Tensor y = val(x).map([](double v) { return v > 0.0 ? v : 0.0; });
    return unary(x, std::move(y),
                 [](double xi, double) { return xi > 0.0 ? 1.0 : 0.0; });
  }

  Var leaky_relu(Var x, double slope) {
    if (!(slope > 0.0 && slope < 1.0))
      throw std::invalid_argument("leaky_relu: slope must be in (0,1)");
    Tensor y = val(x).map(
        [slope](double v) { return v > 0.0 ? v : slope * v; });
    return unary(x, std::move(y), [slope](double xi, double) {
      return xi > 0.0 ? 1.0 : slope;
    });
  }

  Var swish(Var x) {
    Tensor y = val(x).map(
        [](double v) { return v / (1.0 + std::exp(-v)); });
    return unary(x, std::move(y), [](double xi, double) {
      double s = 1.0 / (1.0 + std::exp(-xi));
      return s + xi * s * (1.0 - s);
    });
  }

  Var tanh(Var x) {
    Tensor y = val(x).map([](double v) { return std::tanh(v); });
    return unary(x, std::move(y),
                 [](double, double yi) { return 1.0 - yi * yi; });
  }

  Var log(Var x) {
    Tensor y = val(x).map([](double v) { return std::log(v); });
    return unary(x, std::move(y), [](double xi, double) { return 1.0 / xi; });
  }

  Var exp(Var x) {
    Tensor y = val(x).map([](double v) { return std::exp(v); });
    return unary(x, std::move(y), [](double, double yi) { return yi; });
  }

  Var sqrt(Var x) {
    Tensor y = val(x).map([](double v) { return std::sqrt(v); });
    return unary(x, std::move(y),
                 [](double, double yi) { return 0.5 / yi; });
  }

  Var square(Var x) {
    Tensor y = val(x).map([](double v) { return v * v; });
    return unary(x, std::move(y), [](double xi, double) { return 2.0 * xi; });
  }

  Var abs(Var x) {
    Tensor y = val(x).map([](double v) { return std::abs(v); });
    return unary(x, std::move(y), [](double xi, double) {
      return xi > 0.0 ? 1.0 : (xi < 0.0 ? -1.0 : 0.0);
    });
  }

  Var reciprocal(Var x) {
    Tensor y = val(x).map([](double v) { return 1.0 / v; });
    return unary(x, std::move(y),
                 [](double, double yi) { return -yi * yi; });
  }

  Var neg(Var x) { return mul_scalar(x, -1.0); }

  Var add_scalar(Var x, double s) {
    Tensor y = val(x).map([s](double v) { return v + s; });
    return unary(x, std::move(y), [](double, double) { return 1.0; });
  }

  Var mul_scalar(Var x, double s) {
    Tensor y = val(x).map([s](double v) { return v * s; });
    return unary(x, std::move(y), [s](double, double) { return s; });
  }

  /// Clamp to [lo, hi] with straight-through gradient inside the interval
  /// and zero outside (used for the probability guard before logs).
  Var clamp(Var x, double lo, double hi) {
    Tensor y = val(x).map(
        [lo, hi](double v) { return std::min(hi, std::max(lo, v)); });
    return unary(x, std::move(y), [lo, hi](double xi, double) {
      return (xi >= lo && xi <= hi) ? 1.0 : 0.0;
    });
  }

  // ----- elementwise binary --------------------------------------------

  Var add(Var a, Var b) {
    val(a).require_same_shape(val(b), "add");
    Tensor y = val(a) + val(b);
    return push(std::move(y), {a, b}, [a, b](Tape& t, std::size_t id) {
      t.accumulate(a, t.grads_[id]);
      t.accumulate(b, t.grads_[id]);
    });
  }

  Var sub(Var a, Var b) {
    val(a).require_same_shape(val(b), "sub");
    Tensor y = val(a) - val(b);
    return push(std::move(y), {a, b}, [a, b](Tape& t, std::size_t id) {
      t.accumulate(a, t.grads_[id]);
      const Tensor& g = t.grads_[id];
      Tensor& gb = t.grads_[b.id];
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    });
  }

  Var mul(Var a, Var b) {
    val(a).require_same_shape(val(b), "mul");
    Tensor y = hadamard(val(a), val(b));
    return push(std::move(y), {a, b}, [a, b](Tape& t, std::size_t id) {
      const Tensor& g = t.grads_[id];
      const Tensor& va = t.values_[a.id];
      const Tensor& vb = t.values_[b.id];
      Tensor& ga = t.grads_[a.id];
      Tensor& gb = t.grads_[b.id];
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * vb[i];
        gb[i] += g[i] * va[i];
      }
    });
  }

  Var div(Var a, Var b) {
    val(a).require_same_shape(val(b), "div");
    Tensor y(val(a).shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = val(a)[i] / val(b)[i];
    return push(std::move(y), {a, b}, [a, b](Tape& t, std::size_t id) {
      const Tensor& g = t.grads_[id];
      const Tensor& va = t.values_[a.id];
      const Tensor& vb = t.values_[b.id];
      Tensor& ga = t.grads_[a.id];
      Tensor& gb = t.grads_[b.id];
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] / vb[i];
        gb[i] -= g[i] * va[i] / (vb[i] * vb[i]);
      }
    });
  }

  /// x scaled elementwise by a scalar var s (any x shape).
  Var scale_by(Var x, Var s) {
    if (val(s).size() != 1)
      throw std::invalid_argument("scale_by: scale is not scalar");
    const double sv = val(s)[0];
    Tensor y = val(x).map([sv](double v) { return v * sv; });
    return push(std::move(y), {x, s}, [x, s](Tape& t, std::size_t id) {
      const Tensor& g = t.grads_[id];
      const Tensor& vx = t.values_[x.id];
      const double sv = t.values_[s.id][0];
      Tensor& gx = t.grads_[x.id];
      double gs = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        gx[i] += g[i] * sv;
        gs += g[i] * vx[i];
      }
      t.grads_[s.id][0] += gs;
    });
  }

  // ----- broadcast helpers (matrix op vector) ---------------------------

  /// m (r x c) + v (r), v added to every column.
  Var add_colvec(Var m, Var v) { return colvec_op(m, v, /*mul=*/false); }
  /// m (r x c) + v (c), v added to every row.
  Var add_rowvec(Var m, Var v) { return rowvec_op(m, v, /*mul=*/false); }
  /// m (r x c) * v (r), row i scaled by v[i].
  Var mul_colvec(Var m, Var v) { return colvec_op(m, v, /*mul=*/true); }
  /// m (r x c) * v (c), column j scaled by v[j].
  Var mul_rowvec(Var m, Var v) { return rowvec_op(m, v, /*mul=*/true); }

  // ----- linear algebra --------------------------------------------------

  Var matmul(Var a, Var b) {
    Tensor y = dasp::matmul(val(a), val(b));
    return push(std::move(y), {a, b}, [a, b](Tape& t, std::size_t id) {
      const Tensor& g = t.grads_[id];
      // dA = G B^T, dB = A^T G
      t.accumulate(a, dasp::matmul(g, t.values_[b.id].transpose()));
      t.accumulate(b, dasp::matmul(t.values_[a.id].transpose(), g));
    });
  }

  Var transpose(Var x) {
    Tensor y = val(x).transpose();
    return push(std::move(y), {x}, [x](Tape& t, std::size_t id) {
      t.accumulate(x, t.grads_[id].transpose());
    });
  }

  Var reshape(Var x, std::vector<std::size_t> shape) {
    Tensor y = val(x).reshape(shape);
    std::vector<std::size_t> old_shape = val(x).shape();
    return push(std::move(y), {x}, [x, old_shape](Tape& t, std::size_t id) {
      t.accumulate(x, t.grads_[id].reshape(old_shape));
    });
  }

  Var dot(Var a, Var b) {
    val(a).require_same_shape(val(b), "dot");
    Tensor y = Tensor::scalar(dasp::dot(val(a), val(b)));
    return push(std::move(y), {a, b}, [a, b](Tape& t, std::size_t id) {
      const double g = t.grads_[id][0];
      const Tensor& va = t.values_[a.id];
      const Tensor& vb = t.values_[b.id];
      Tensor& ga = t.grads_[a.id];
      Tensor& gb = t.grads_[b.id];
      for (std::size_t i = 0; i < va.size(); ++i) {
        ga[i] += g * vb[i];
        gb[i] += g * va[i];
      }
    });
  }

  // ----- concat / slice --------------------------------------------------

  /// Concatenate along axis (0=rows, 1=cols). 1-D vars concatenate along
  /// their only axis when axis==0.
  Var concat(const std::vector<Var>& xs, std::size_t axis) {
    if (xs.empty()) throw std::invalid_argument("concat: empty input list");
    if (val(xs[0]).ndim() == 1) {
      if (axis != 0) throw std::invalid_argument("concat: 1-D needs axis 0");
      std::size_t total = 0;
      for (Var x : xs) total += val(x).size();
      Tensor y({total});
      std::size_t off = 0;
      for (Var x : xs) {
        const Tensor& v = val(x);
        std::copy(v.data().begin(), v.data().end(), y.data().begin() + off);
        off += v.size();
      }
      std::vector<Var> parents = xs;
      return push(std::move(y), parents,
                  [parents](Tape& t, std::size_t id) {
                    const Tensor& g = t.grads_[id];
                    std::size_t off = 0;
                    for (Var x : parents) {
                      Tensor& gx = t.grads_[x.id];
                      for (std::size_t i = 0; i < gx.size(); ++i)
                        gx[i] += g[off + i];
                      off += gx.size();
                    }
                  });
    }
    // 2-D case.
    const std::size_t r0 = val(xs[0]).rows(), c0 = val(xs[0]).cols();
    std::size_t total = 0;
    for (Var x : xs) {
      const Tensor& v = val(x);
      if (v.ndim() != 2)
        throw std::invalid_argument("concat: mixed ranks");
      if (axis == 0 && v.cols() != c0)
        throw std::invalid_argument("concat axis 0: column mismatch " +
                                    v.shape_str());
      if (axis == 1 && v.rows() != r0)
        throw std::invalid_argument("concat axis 1: row mismatch " +
                                    v.shape_str());
      total += (axis == 0) ? v.rows() : v.cols();
    }
    Tensor y(axis == 0 ? std::vector<std::size_t>{total, c0}
                       : std::vector<std::size_t>{r0, total});
    std::size_t off = 0;
    for (Var x : xs) {
      const Tensor& v = val(x);
      if (axis == 0) {
        std::copy(v.data().begin(), v.data().end(),
                  y.data().begin() + off * c0);
        off += v.rows();
      } else {
        for (std::size_t i = 0; i < r0; ++i)
          for (std::size_t j = 0; j < v.cols(); ++j)
            y.at(i, off + j) = v.at(i, j);
        off += v.cols();
      }
    }
    std::vector<Var> parents = xs;
    return push(std::move(y), parents,
                [parents, axis](Tape& t, std::size_t id) {
                  const Tensor& g = t.grads_[id];
                  std::size_t off = 0;
                  for (Var x : parents) {
                    Tensor& gx = t.grads_[x.id];
                    if (axis == 0) {
                      const std::size_t n = gx.size();
                      for (std::size_t i = 0; i < n; ++i)
                        gx[i] += g[off * g.cols() + i];
                      off += gx.rows();
                    } else {
                      for (std::size_t i = 0; i < gx.rows(); ++i)
                        for (std::size_t j = 0; j < gx.cols(); ++j)
                          gx.at(i, j) += g.at(i, off + j);
                      off += gx.cols();
                    }
                  }
                });
  }

  Var slice_rows(Var x, std::size_t begin, std::size_t end) {
    const Tensor& v = val(x);
    if (v.ndim() == 1) {
      if (end > v.size() || begin >= end)
        throw std::invalid_argument("slice_rows: bad range");
      Tensor y({end - begin});
      std::copy(v.data().begin() + begin, v.data().begin() + end,
                y.data().begin());
      return push(std::move(y), {x}, [x, begin](Tape& t, std::size_t id) {
        const Tensor& g = t.grads_[id];
        Tensor& gx = t.grads_[x.id];
        for (std::size_t i = 0; i < g.size(); ++i) gx[begin + i] += g[i];
      });
    }
    if (end > v.rows() || begin >= end)
      throw std::invalid_argument("slice_rows: bad range");
    const std::size_t c = v.cols();
    Tensor y({end - begin, c});
    std::copy(v.data().begin() + begin * c, v.data().begin() + end * c,
              y.data().begin());
    return push(std::move(y), {x}, [x, begin, c](Tape& t, std::size_t id) {
      const Tensor& g = t.grads_[id];
      Tensor& gx = t.grads_[x.id];
      for (std::size_t i = 0; i < g.size(); ++i) gx[begin * c + i] += g[i];
    });
  }

  Var slice_cols(Var x, std::size_t begin, std::size_t end) {
    const Tensor& v = val(x);
    if (v.ndim() != 2 || end > v.cols() || begin >= end)
      throw std::invalid_argument("slice_cols: bad range on " + v.shape_str());
    Tensor y({v.rows(), end - begin});
    for (std::size_t i = 0; i < v.rows(); ++i)
      for (std::size_t j = begin; j < end; ++j)
        y.at(i, j - begin) = v.at(i, j);
    return push(std::move(y), {x}, [x, begin](Tape& t, std::size_t id) {
      const Tensor& g = t.grads_[id];
      Tensor& gx = t.grads_[x.id];
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j)
          gx.at(i, begin + j) += g.at(i, j);
    });
  }

  // ----- reductions ------------------------------------------------------

  Var sum(Var x) {
    Tensor y = Tensor::scalar(val(x).sum());
    return push(std::move(y), {x}, [x](Tape& t, std::size_t id) {
      const double g = t.grads_[id][0];
      Tensor& gx = t.grads_[x.id];
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }

  Var mean(Var x) {
    const double n = static_cast<double>(val(x).size());
    Tensor y = Tensor::scalar(val(x).sum() / n);
    return push(std::move(y), {x}, [x, n](Tape& t, std::size_t id) {
      const double g = t.grads_[id][0] / n;
      Tensor& gx = t.grads_[x.id];
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
    });
  }

  /// Global max; gradient routes to the first maximal element on ties.
  Var max(Var x) {
    const Tensor& v = val(x);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] > v[arg]) arg = i;
    Tensor y = Tensor::scalar(v[arg]);
    return push(std::move(y), {x}, [x, arg](Tape& t, std::size_t id) {
      t.grads_[x.id][arg] += t.grads_[id][0];
    });
  }

  /// Sum a 2-D var along an axis; axis 0 sums rows away (result length cols).
  Var sum_axis(Var x, std::size_t axis) {
    const Tensor& v = val(x);
    if (v.ndim() != 2) throw std::invalid_argument("sum_axis needs 2-D");
    const std::size_t r = v.rows(), c = v.cols();
    Tensor y({axis == 0 ? c : r});
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) y[axis == 0 ? j : i] += v.at(i, j);
    return push(std::move(y), {x}, [x, axis, r, c](Tape& t, std::size_t id) {
      const Tensor& g = t.grads_[id];
      Tensor& gx = t.grads_[x.id];
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          gx.at(i, j) += g[axis == 0 ? j : i];
    });
  }

  Var mean_axis(Var x, std::size_t axis) {
    const std::size_t n =
        (axis == 0) ? val(x).rows() : val(x).cols();
    return mul_scalar(sum_axis(x, axis), 1.0 / static_cast<double>(n));
  }

  // ----- softmax ---------------------------------------------------------

  /// Softmax over all elements of a 1-D var.
  Var softmax(Var x) {
    const Tensor& v = val(x);
    Tensor y(v.shape());
    double m = v.max_value();
    double z = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) z += std::exp(v[i] - m);
    for (std::size_t i = 0; i < v.size(); ++i)
      y[i] = std::exp(v[i] - m) / z;
    return push(std::move(y), {x}, [x](Tape& t, std::size_t id) {
      const Tensor& g = t.grads_[id];
      const Tensor& y = t.values_[id];
      Tensor& gx = t.grads_[x.id];
      double gy = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) gy += g[i] * y[i];
      for (std::size_t i = 0; i < g.size(); ++i)
        gx[i] += y[i] * (g[i] - gy);
    });
  }

  /// Column-wise softmax of a 2-D var (each column sums to 1).
  Var softmax_cols(Var x) {
    const Tensor& v = val(x);
    if (v.ndim() != 2) throw std::invalid_argument("softmax_cols needs 2-D");
    const std::size_t r = v.rows(), c = v.cols();
    Tensor y(v.shape());
    for (std::size_t j = 0; j < c; ++j) {
      double m = v.at(0, j);
      for (std::size_t i = 1; i < r; ++i) m = std::max(m, v.at(i, j));
      double z = 0.0;
      for (std::size_t i = 0; i < r; ++i) z += std::exp(v.at(i, j) - m);
      for (std::size_t i = 0; i < r; ++i)
        y.at(i, j) = std::exp(v.at(i, j) - m) / z;
    }
    return push(std::move(y), {x}, [x, r, c](Tape& t, std::size_t id) {
      const Tensor& g = t.grads_[id];
      const Tensor& y = t.values_[id];
      Tensor& gx = t.grads_[x.id];
      for (std::size_t j = 0; j < c; ++j) {
        double gy = 0.0;
        for (std::size_t i = 0; i < r; ++i) gy += g.at(i, j) * y.at(i, j);
        for (std::size_t i = 0; i < r; ++i)
          gx.at(i, j) += y.at(i, j) * (g.at(i, j) - gy);
      }
    });
  }

  // ----- custom nodes ----------------------------------------------------

  /// Escape hatch for composite primitives (convolution, pooling) that carry
  /// a hand-written backward. The closure receives the tape and node id and
  /// must accumulate into the parents' grads.
  Var custom(Tensor value, std::vector<Var> parents,
             std::function<void(Tape&, std::size_t)> backward) {
    return push(std::move(value), std::move(parents), std::move(backward));
  }

  Tensor& grad_ref(Var x) { return grads_.at(x.id); }
  const Tensor& value_of(std::size_t id) const { return values_.at(id); }
  const Tensor& grad_of(std::size_t id) const { return grads_.at(id); }

  // ----- backward --------------------------------------------------------

  /// Accumulates d(loss)/d(node) for every node. loss must be scalar.
  void backward(Var loss) {
    if (val(loss).size() != 1)
      throw std::invalid_argument("backward: loss is not scalar, shape " +
                                  val(loss).shape_str());
    if (!std::isfinite(val(loss)[0]))
      throw std::invalid_argument("backward: nonfinite loss");
    grads_.clear();
    grads_.reserve(values_.size());
    for (const Tensor& v : values_) grads_.emplace_back(v.shape());
    grads_[loss.id][0] = 1.0;
    for (std::size_t i = values_.size(); i-- > 0;) {
      if (backwards_[i]) backwards_[i](*this, i);
    }
  }

 private:
  friend struct VarOps;

  Var push(Tensor value, std::vector<Var> parents,
           std::function<void(Tape&, std::size_t)> backward) {
    const std::size_t id = values_.size();
    for (Var p : parents)
      if (p.id >= id)
        throw std::logic_error(
            "tape cycle: node input does not precede it (construction bug)");
    values_.push_back(std::move(value));
    backwards_.push_back(std::move(backward));
    return Var{id};
  }

  void accumulate(Var x, const Tensor& g) {
    Tensor& gx = grads_[x.id];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  }

  /// Unary elementwise helper: dy/dx evaluated from (x_i, y_i).
  template <class F>
  Var unary(Var x, Tensor y, F dydx) {
    return push(std::move(y), {x}, [x, dydx](Tape& t, std::size_t id) {
      const Tensor& g = t.grads_[id];
      const Tensor& vx = t.values_[x.id];
      const Tensor& vy = t.values_[id];
      Tensor& gx = t.grads_[x.id];
      for (std::size_t i = 0; i < g.size(); ++i)
        gx[i] += g[i] * dydx(vx[i], vy[i]);
    });
  }

  Var colvec_op(Var m, Var v, bool mul) {
    const Tensor& vm = val(m);
    const Tensor& vv = val(v);
    if (vm.ndim() != 2 || vv.ndim() != 1 || vv.size() != vm.rows())
      throw std::invalid_argument("colvec op: shapes " + vm.shape_str() +
                                  " vs " + vv.shape_str());
    const std::size_t r = vm.rows(), c = vm.cols();
    Tensor y(vm.shape());
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        y.at(i, j) = mul ? vm.at(i, j) * vv[i] : vm.at(i, j) + vv[i];
    return push(std::move(y), {m, v},
                [m, v, mul, r, c](Tape& t, std::size_t id) {
                  const Tensor& g = t.grads_[id];
                  const Tensor& vm = t.values_[m.id];
                  const Tensor& vv = t.values_[v.id];
                  Tensor& gm = t.grads_[m.id];
                  Tensor& gv = t.grads_[v.id];
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) {
                      gm.at(i, j) += mul ? g.at(i, j) * vv[i] : g.at(i, j);
                      gv[i] += mul ? g.at(i, j) * vm.at(i, j) : g.at(i, j);
                    }
                });
  }

  Var rowvec_op(Var m, Var v, bool mul) {
    const Tensor& vm = val(m);
    const Tensor& vv = val(v);
    if (vm.ndim() != 2 || vv.ndim() != 1 || vv.size() != vm.cols())
      throw std::invalid_argument("rowvec op: shapes " + vm.shape_str() +
                                  " vs " + vv.shape_str());
    const std::size_t r = vm.rows(), c = vm.cols();
    Tensor y(vm.shape());
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        y.at(i, j) = mul ? vm.at(i, j) * vv[j] : vm.at(i, j) + vv[j];
    return push(std::move(y), {m, v},
                [m, v, mul, r, c](Tape& t, std::size_t id) {
                  const Tensor& g = t.grads_[id];
                  const Tensor& vm = t.values_[m.id];
                  const Tensor& vv = t.values_[v.id];
                  Tensor& gm = t.grads_[m.id];
                  Tensor& gv = t.grads_[v.id];
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) {
                      gm.at(i, j) += mul ? g.at(i, j) * vv[j] : g.at(i, j);
                      gv[j] += mul ? g.at(i, j) * vm.at(i, j) : g.at(i, j);
                    }
                });
  }

  std::deque<Tensor> values_;  // deque: val() references stay valid as the tape grows
  std::vector<std::function<void(Tape&, std::size_t)>> backwards_;
  std::vector<Tensor> grads_;
};

// ----- finite-difference gradient checking --------------------------------

struct GradCheckReport {
  double max_err = 0.0;  // max over elements of |ad - fd| / max(1, |fd|)
  bool pass(double tol = 1e-5) const { return max_err < tol; }
};

/// Central finite differences against the tape gradient. `build` must
/// construct a scalar loss from the given leaves on the supplied tape.
inline GradCheckReport check_gradients(
    const std::vector<Tensor>& leaves,
    const std::function<Var(Tape&, const std::vector<Var>&)>& build,
    double h = 1e-6) {
  // Reverse-mode gradients.
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(leaves.size());
  for (const Tensor& l : leaves) vars.push_back(tape.leaf(l));
  Var loss = build(tape, vars);
  tape.backward(loss);

  GradCheckReport report;
  auto eval = [&](const std::vector<Tensor>& ls) {
    Tape t;
    std::vector<Var> vs;
    vs.reserve(ls.size());
    for (const Tensor& l : ls) vs.push_back(t.leaf(l));
    return t.val(build(t, vs))[0];
  };
  std::vector<Tensor> work = leaves;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const Tensor& g_ad = tape.grad(vars[k]);
    for (std::size_t i = 0; i < work[k].size(); ++i) {
      const double orig = work[k][i];
      work[k][i] = orig + h;
      const double fp = eval(work);
      work[k][i] = orig - h;
      const double fm = eval(work);
      work[k][i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double err =
          std::abs(g_ad[i] - fd) / std::max(1.0, std::abs(fd));
      report.max_err = std::max(report.max_err, err);
    }
  }
  return report;
}

/// Variant for parameters that live inside layer/model structs: perturbs the
/// given storages in place and compares central differences of eval()
/// against the supplied reverse-mode gradients (same order as storages).
inline GradCheckReport check_gradients_inplace(
    const std::vector<Tensor*>& storages,
    const std::function<double()>& eval, const std::vector<Tensor>& ad_grads,
    double h = 1e-6) {
  if (storages.size() != ad_grads.size())
    throw std::invalid_argument("check_gradients_inplace: size mismatch");
  GradCheckReport report;
  for (std::size_t k = 0; k < storages.size(); ++k) {
    Tensor& s = *storages[k];
    s.require_same_shape(ad_grads[k], "check_gradients_inplace");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double orig = s[i];
      s[i] = orig + h;
      const double fp = eval();
      s[i] = orig - h;
      const double fm = eval();
      s[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double err =
          std::abs(ad_grads[k][i] - fd) / std::max(1.0, std::abs(fd));
      report.max_err = std::max(report.max_err, err);
    }
  }
  return report;
}

}  // namespace dasp::ad
