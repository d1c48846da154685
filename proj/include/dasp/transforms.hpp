// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dasp/rng.hpp"
#include "dasp/tensor.hpp"

namespace dasp::xform {

namespace detail {

inline Eigen::MatrixXd to_eigen(const Tensor& t) {
  if (t.ndim() != 2) throw std::invalid_argument("to_eigen: need 2-D tensor");
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m(i, j) = t.at(i, j);
  return m;
}

inline Tensor from_eigen(const Eigen::MatrixXd& m) {
  Tensor t({std::size_t(m.rows()), std::size_t(m.cols())});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.at(i, j) = m(i, j);
  return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear discriminant analysis
// ---------------------------------------------------------------------------

struct LdaModel {
  Tensor transform;            // M x D, rows ordered by descending eigenvalue
  std::vector<Tensor> means;   // per-class means
  Tensor scatter_within;       // Phi_w
  Tensor scatter_between;      // Phi_b
  std::vector<double> eigenvalues;
  bool degenerate = false;     // all eigenvalues ~ 0 (identical class means)
};

/// Fits the transform whose rows are the top-M eigenvectors of
/// Phi_w^{-1} Phi_b. Phi_w gets `ridge` added to its diagonal; with
/// ridge == 0 a singular Phi_w is rejected.
inline LdaModel lda_fit(const std::vector<Tensor>& samples,
                        const std::vector<std::size_t>& labels,
                        std::size_t out_dims, double ridge = 1e-8) {
  if (samples.size() != labels.size() || samples.empty())
    throw std::invalid_argument("lda_fit: samples/labels mismatch");
  const std::size_t dim = samples[0].size();
  const std::size_t classes =
      1 + *std::max_element(labels.begin(), labels.end());
  if (classes < 2) throw std::invalid_argument("lda_fit: need >= 2 classes");
  if (out_dims == 0 || out_dims > dim)
    throw std::invalid_argument("lda_fit: bad output dimension");

  std::vector<std::vector<std::size_t>> index(classes);
  for (std::size_t n = 0; n < samples.size(); ++n) {
    if (samples[n].size() != dim)
      throw std::invalid_argument("lda_fit: inconsistent sample dims");
    index[labels[n]].push_back(n);
  }
  LdaModel model;
  for (std::size_t k = 0; k < classes; ++k) {
    if (index[k].size() < 2)
      throw std::invalid_argument("lda_fit: class " + std::to_string(k) +
                                  " has fewer than 2 samples");
    Tensor mu({dim}, 0.0);
    for (std::size_t n : index[k]) mu += samples[n];
    mu *= 1.0 / double(index[k].size());
    model.means.push_back(mu);
  }

  Eigen::MatrixXd phi_w = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t k = 0; k < classes; ++k) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t n : index[k]) {
      Eigen::VectorXd d(dim);
      for (std::size_t i = 0; i < dim; ++i)
        d(i) = samples[n][i] - model.means[k][i];
      acc += d * d.transpose();
    }
    phi_w += acc / double(index[k].size());
  }
  Eigen::MatrixXd phi_b = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t k = 0; k < classes; ++k)
    for (std::size_t l = 0; l < classes; ++l) {
      Eigen::VectorXd d(dim);
      for (std::size_t i = 0; i < dim; ++i)
        d(i) = model.means[k][i] - model.means[l][i];
      phi_b += d * d.transpose();
    }

  Eigen::MatrixXd phi_w_reg =
      phi_w + ridge * Eigen::MatrixXd::Identity(dim, dim);
  if (ridge == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(phi_w_reg);
    if (!lu.isInvertible())
      throw std::runtime_error("lda_fit: singular within-class scatter "
                               "(pass a ridge)");
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(phi_b,
                                                               phi_w_reg);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("lda_fit: eigensolver failed");
  // Ascending order from Eigen; take the top out_dims in descending order.
  model.transform = Tensor({out_dims, dim});
  for (std::size_t m = 0; m < out_dims; ++m) {
    const Eigen::Index col = Eigen::Index(dim - 1 - m);
    model.eigenvalues.push_back(es.eigenvalues()(col));
    for (std::size_t i = 0; i < dim; ++i)
      model.transform.at(m, i) = es.eigenvectors()(Eigen::Index(i), col);
  }
  model.scatter_within = detail::from_eigen(phi_w);
  model.scatter_between = detail::from_eigen(phi_b);
  model.degenerate = es.eigenvalues()(Eigen::Index(dim - 1)) < 1e-10;
  return model;
}

inline Tensor lda_apply(const LdaModel& model, const Tensor& x) {
  Tensor out = matmul(model.transform, x.reshape({x.size(), 1}));
  return out.reshape({model.transform.rows()});
}

/// Generalized Rayleigh ratio tr(A Phi_b A^T) / tr(A Phi_w A^T).
inline double lda_objective(const LdaModel& model, const Tensor& A) {
  Tensor bt = matmul(matmul(A, model.scatter_between), A.transpose());
  Tensor wt = matmul(matmul(A, model.scatter_within), A.transpose());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < A.rows(); ++i) {
    num += bt.at(i, i);
    den += wt.at(i, i);
  }
  return num / den;
}

// ---------------------------------------------------------------------------
// Discrete optimal transport (exact, transportation simplex)
// ---------------------------------------------------------------------------

struct TransportPlan {
  Tensor plan;  // K x N, nonnegative, marginals p and q
  Tensor p;
  Tensor q;
  Tensor cost;  // the cost matrix used
  double total_cost = 0.0;
};

namespace detail {

struct BasisCell {
  std::size_t row, col;
  double value;
};

}  // namespace detail

/// Exact LP optimum of min tr(H^T C) s.t. H 1 = p, H^T 1 = q, H >= 0 via the
/// transportation simplex (northwest-corner start, spanning-tree duals).
/// Problem sizes are capped at 64 x 64.
inline TransportPlan ot_solve(const Tensor& C, const Tensor& p,
                              const Tensor& q) {
  if (C.ndim() != 2) throw std::invalid_argument("ot_solve: C must be 2-D");
  const std::size_t K = C.rows(), N = C.cols();
  if (K > 64 || N > 64)
    throw std::invalid_argument("ot_solve: sizes capped at 64x64");
  if (p.size() != K || q.size() != N)
    throw std::invalid_argument("ot_solve: marginal sizes do not match C");
  C.require_finite("ot_solve cost");
  double sp = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    if (p[k] < 0.0) throw std::invalid_argument("ot_solve: negative mass");
    sp += p[k];
  }
  for (std::size_t n = 0; n < N; ++n) {
    if (q[n] < 0.0) throw std::invalid_argument("ot_solve: negative mass");
    sq += q[n];
  }
  if (std::abs(sp - 1.0) > 1e-12 || std::abs(sq - 1.0) > 1e-12)
    throw std::invalid_argument("ot_solve: marginals must each sum to 1");
  if (std::abs(sp - sq) > 1e-12)
    throw std::invalid_argument("ot_solve: marginal sums differ");

  // Northwest-corner initial basic feasible solution. Exactly K + N - 1
  // basic cells, including zero cells on simultaneous exhaustion.
  std::vector<detail::BasisCell> basis;
  {
    std::vector<double> ps(p.data()), qs(q.data());
    std::size_t i = 0, j = 0;
    while (true) {
      const double move = std::min(ps[i], qs[j]);
      basis.push_back({i, j, move});
      ps[i] -= move;
      qs[j] -= move;
      if (i == K - 1 && j == N - 1) break;
      if (ps[i] <= qs[j] && i < K - 1)
        ++i;
      else if (j < N - 1)
        ++j;
      else
        ++i;
    }
  }
  if (basis.size() != K + N - 1)
    throw std::logic_error("ot_solve: northwest corner basis size bug");

  auto in_basis = [&](std::size_t r, std::size_t c) {
    for (std::size_t b = 0; b < basis.size(); ++b)
      if (basis[b].row == r && basis[b].col == c) return long(b);
    return -1L;
  };

  double cost_scale = 1.0;
  for (std::size_t i = 0; i < C.size(); ++i)
    cost_scale = std::max(cost_scale, std::abs(C[i]));
  const double tol = 1e-12 * cost_scale;
  const std::size_t max_iters = 50 * (K + N) * (K + N) + 1000;

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    // Duals over the basis spanning tree: u_0 = 0, u_r + v_c = C(r,c).
    std::vector<double> u(K, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> v(N, std::numeric_limits<double>::quiet_NaN());
    u[0] = 0.0;
    bool progress = true;
    while (progress) {
      progress = false;
      for (const auto& cell : basis) {
        const bool have_u = !std::isnan(u[cell.row]);
        const bool have_v = !std::isnan(v[cell.col]);
        if (have_u && !have_v) {
          v[cell.col] = C.at(cell.row, cell.col) - u[cell.row];
          progress = true;
        } else if (!have_u && have_v) {
          u[cell.row] = C.at(cell.row, cell.col) - v[cell.col];
          progress = true;
        }
      }
    }
    for (double val : u)
      if (std::isnan(val))
        throw std::logic_error("ot_solve: disconnected basis tree");
    for (double val : v)
      if (std::isnan(val))
        throw std::logic_error("ot_solve: disconnected basis tree");

    // Most negative reduced cost among nonbasic cells.
    double best = -tol;
    long er = -1, ec = -1;
    for (std::size_t r = 0; r < K; ++r)
      for (std::size_t c = 0; c < N; ++c) {
        if (in_basis(r, c) >= 0) continue;
        const double red = C.at(r, c) - u[r] - v[c];
        if (red < best) {
          best = red;
          er = long(r);
          ec = long(c);
        }
      }
    if (er < 0) break;  // optimal

    // Unique cycle created by the entering cell: find the alternating path
    // from the entering column back to the entering row over basis cells.
    // DFS over the bipartite tree.
    struct Step {
      long basis_index;
      bool row_to_col;  // step consumed moving from a row node to a col node
    };
    std::vector<long> parent_edge(K + N, -1);
    std::vector<int> visited(K + N, 0);
    // Nodes: rows 0..K-1, cols K..K+N-1. Start at entering row, search for
    // entering col using basis edges.
    std::vector<std::size_t> stack{std::size_t(er)};
    visited[std::size_t(er)] = 1;
    while (!stack.empty()) {
      std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t b = 0; b < basis.size(); ++b) {
        std::size_t from, to;
        if (node < K && basis[b].row == node)
          from = node, to = K + basis[b].col;
        else if (node >= K && basis[b].col == node - K)
          from = node, to = basis[b].row;
        else
          continue;
        if (visited[to]) continue;
        visited[to] = 1;
        parent_edge[to] = long(b);
        stack.push_back(to);
      }
    }
    const std::size_t target = K + std::size_t(ec);
    if (!visited[target])
      throw std::logic_error("ot_solve: entering cell closes no cycle");
    // Walk back from the entering column to the entering row collecting the
    // alternating cycle; the entering cell takes +theta, then signs swap.
    std::vector<long> path_cells;
    std::size_t node = target;
    while (node != std::size_t(er)) {
      const long b = parent_edge[node];
      path_cells.push_back(b);
      node = (node >= K) ? basis[std::size_t(b)].row
                         : K + basis[std::size_t(b)].col;
    }
    // Cycle: entering (+), then path cells alternate starting with (-).
    double theta = std::numeric_limits<double>::infinity();
    long leaving = -1;
    for (std::size_t s = 0; s < path_cells.size(); ++s) {
      if (s % 2 == 0) {  // minus position
        const double val = basis[std::size_t(path_cells[s])].value;
        if (val < theta - 1e-18 ||
            (std::abs(val - theta) <= 1e-18 && leaving < 0)) {
          theta = val;
          leaving = path_cells[s];
        }
      }
    }
    if (leaving < 0) throw std::logic_error("ot_solve: no leaving variable");
    for (std::size_t s = 0; s < path_cells.size(); ++s) {
      auto& cell = basis[std::size_t(path_cells[s])];
      cell.value += (s % 2 == 0) ? -theta : theta;
    }
    auto& leave_cell = basis[std::size_t(leaving)];
    leave_cell.row = std::size_t(er);
    leave_cell.col = std::size_t(ec);
    leave_cell.value = theta;
    if (iter + 1 == max_iters)
      throw std::runtime_error("ot_solve: iteration cap hit (cycling?)");
  }

  TransportPlan result;
  result.plan = Tensor({K, N}, 0.0);
  for (const auto& cell : basis)
    result.plan.at(cell.row, cell.col) = std::max(0.0, cell.value);
  result.p = p;
  result.q = q;
  result.cost = C;
  double total = 0.0;
  for (std::size_t r = 0; r < K; ++r)
    for (std::size_t c = 0; c < N; ++c)
      total += result.plan.at(r, c) * C.at(r, c);
  result.total_cost = total;

  // Feasibility invariants must hold on every solve.
  for (std::size_t r = 0; r < K; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < N; ++c) s += result.plan.at(r, c);
    if (std::abs(s - p[r]) > 1e-9)
      throw std::runtime_error("ot_solve: row marginal residual " +
                               std::to_string(std::abs(s - p[r])));
  }
  for (std::size_t c = 0; c < N; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < K; ++r) s += result.plan.at(r, c);
    if (std::abs(s - q[c]) > 1e-9)
      throw std::runtime_error("ot_solve: column marginal residual " +
                               std::to_string(std::abs(s - q[c])));
  }
  return result;
}

/// Squared-Euclidean cost matrix between two point sets (columns of X, Xb).
inline Tensor squared_cost_matrix(const std::vector<Tensor>& xs,
                                  const std::vector<Tensor>& targets) {
  Tensor C({xs.size(), targets.size()});
  for (std::size_t k = 0; k < xs.size(); ++k)
    for (std::size_t n = 0; n < targets.size(); ++n)
      C.at(k, n) = (xs[k] - targets[n]).norm2_sq();
  return C;
}

struct OtGradient {
  std::vector<Tensor> gradients;    // e_k per sample
  std::vector<Tensor> barycenters;  // sum_n alpha_{k,n} target_n
  Tensor alpha;                     // K x N rows on the simplex
};

/// Per-sample gradient of tr(H_o^T C) with the plan frozen, squared
/// Euclidean cost: e_k = 2 p_k (x_k - sum_n alpha_{k,n} target_n) with
/// alpha_{k,n} = H_o[k,n] / p_k.
inline OtGradient ot_gradient_targets(const TransportPlan& plan,
                                      const std::vector<Tensor>& xs,
                                      const std::vector<Tensor>& targets) {
  const std::size_t K = plan.plan.rows(), N = plan.plan.cols();
  if (xs.size() != K || targets.size() != N)
    throw std::invalid_argument("ot_gradient_targets: sizes do not match");
  OtGradient out;
  out.alpha = Tensor({K, N});
  for (std::size_t k = 0; k < K; ++k) {
    if (plan.p[k] <= 0.0)
      throw std::invalid_argument("ot_gradient_targets: p(x_k) must be > 0");
    Tensor bary(xs[k].shape(), 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      const double a = plan.plan.at(k, n) / plan.p[k];
      out.alpha.at(k, n) = a;
      bary += targets[n] * a;
    }
    Tensor e = (xs[k] - bary) * (2.0 * plan.p[k]);
    out.barycenters.push_back(std::move(bary));
    out.gradients.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings: MDS, LLE, t-SNE
// ---------------------------------------------------------------------------

struct EmbeddingResult {
  Tensor coordinates;  // L x N
  std::vector<double> objective_history;
  std::vector<double> eigenvalues;
  std::string method;
  bool truncated = false;  // requested dims exceeded usable spectrum
};

/// Classical scaling: double-center the squared distances with
/// G = -1/2 Q D Q, eigendecompose, keep the top-L nonnegative directions
/// (negative eigenvalues truncate to zero rows and set the flag).
inline EmbeddingResult mds_embed(const Tensor& squared_distances,
                                 std::size_t dims) {
  const Tensor& D = squared_distances;
  if (D.ndim() != 2 || D.rows() != D.cols())
    throw std::invalid_argument("mds_embed: D must be square");
  const std::size_t N = D.rows();
  for (std::size_t i = 0; i < N; ++i) {
    if (D.at(i, i) != 0.0)
      throw std::invalid_argument("mds_embed: nonzero diagonal");
    for (std::size_t j = 0; j < N; ++j)
      if (std::abs(D.at(i, j) - D.at(j, i)) > 1e-12)
        throw std::invalid_argument("mds_embed: D not symmetric");
  }
  if (dims >= N) throw std::invalid_argument("mds_embed: dims must be < N");

  Eigen::MatrixXd d = detail::to_eigen(D);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(N, N) -
                      Eigen::MatrixXd::Constant(N, N, 1.0 / double(N));
  Eigen::MatrixXd G = -0.5 * Q * d * Q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  EmbeddingResult out;
  out.method = "mds";
  out.coordinates = Tensor({dims, N}, 0.0);
  for (std::size_t l = 0; l < dims; ++l) {
    const Eigen::Index col = Eigen::Index(N - 1 - l);
    const double lambda = es.eigenvalues()(col);
    out.eigenvalues.push_back(lambda);
    if (lambda <= 0.0) {
      out.truncated = true;  // padded with a zero row
      continue;
    }
    const double scale = std::sqrt(lambda);
    for (std::size_t n = 0; n < N; ++n)
      out.coordinates.at(l, n) = scale * es.eigenvectors()(Eigen::Index(n), col);
  }
  return out;
}

enum class LleWeights { ridge, constrained };

/// Locally linear embedding over columns of X (M x N). K neighbors per
/// point; weights either the ridge least squares
/// h = (Xn^T Xn + eps I)^-1 Xn^T x or the sum-to-one constrained
/// h = Phi^-1 1 / (1^T Phi^-1 1). The embedding rows are the eigenvectors
/// of (I - H)(I - H)^T with smallest eigenvalues, skipping the constant
/// vector for the constrained variant.
inline EmbeddingResult lle_embed(const Tensor& X, std::size_t neighbors,
                                 double eps, std::size_t dims,
                                 LleWeights variant = LleWeights::constrained) {
  if (X.ndim() != 2) throw std::invalid_argument("lle_embed: X must be 2-D");
  const std::size_t M = X.rows(), N = X.cols();
  if (neighbors < 1 || neighbors >= N)
    throw std::invalid_argument("lle_embed: need 1 <= K < N");
  if (eps < 0.0) throw std::invalid_argument("lle_embed: eps < 0");
  if (dims >= N) throw std::invalid_argument("lle_embed: dims must be < N");

  Eigen::MatrixXd pts = detail::to_eigen(X);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
  for (std::size_t n = 0; n < N; ++n) {
    // K nearest neighbors by Euclidean distance, excluding the point.
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t j = 0; j < N; ++j) {
      if (j == n) continue;
      dist.push_back({(pts.col(j) - pts.col(n)).squaredNorm(), j});
    }
    std::sort(dist.begin(), dist.end());
    Eigen::MatrixXd Xn(M, neighbors);
    std::vector<std::size_t> idx(neighbors);
    for (std::size_t k = 0; k < neighbors; ++k) {
      idx[k] = dist[k].second;
      Xn.col(k) = pts.col(idx[k]);
    }
    Eigen::VectorXd h(neighbors);
    if (variant == LleWeights::ridge) {
      Eigen::MatrixXd gram =
          Xn.transpose() * Xn +
          eps * Eigen::MatrixXd::Identity(neighbors, neighbors);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
      if (!lu.isInvertible())
        throw std::runtime_error(
            "lle_embed: rank-deficient neighbor matrix (pass a ridge)");
      h = lu.solve(Xn.transpose() * pts.col(n));
    } else {
      Eigen::MatrixXd centered = Xn;
      for (std::size_t k = 0; k < neighbors; ++k)
        centered.col(k) = pts.col(n) - Xn.col(k);
      Eigen::MatrixXd phi =
          centered.transpose() * centered +
          eps * Eigen::MatrixXd::Identity(neighbors, neighbors);
      Eigen::FullPivLU<Eigen::MatrixXd> lu(phi);
      if (!lu.isInvertible())
        throw std::runtime_error(
            "lle_embed: rank-deficient neighbor matrix (pass a ridge)");
      Eigen::VectorXd ones = Eigen::VectorXd::Ones(neighbors);
      Eigen::VectorXd raw = lu.solve(ones);
      h = raw / ones.dot(raw);
    }
    for (std::size_t k = 0; k < neighbors; ++k) H(Eigen::Index(idx[k]), n) = h(k);
  }

  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(N, N);
  Eigen::MatrixXd Mmat = (I - H) * (I - H).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Mmat);
  EmbeddingResult out;
  out.method = "lle";
  out.coordinates = Tensor({dims, N});
  const std::size_t skip = (variant == LleWeights::constrained) ? 1 : 0;
  for (std::size_t l = 0; l < dims; ++l) {
    const Eigen::Index col = Eigen::Index(l + skip);
    out.eigenvalues.push_back(es.eigenvalues()(col));
    for (std::size_t n = 0; n < N; ++n)
      out.coordinates.at(l, n) = es.eigenvectors()(Eigen::Index(n), col);
  }
  return out;
}

/// Reconstruction weights of one sample for inspection/tests.
inline Tensor lle_weights(const Tensor& X, std::size_t sample,
                          std::size_t neighbors, double eps,
                          LleWeights variant,
                          std::vector<std::size_t>* neighbor_idx = nullptr) {
  const std::size_t N = X.cols(), M = X.rows();
  Eigen::MatrixXd pts = detail::to_eigen(X);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t j = 0; j < N; ++j) {
    if (j == sample) continue;
    dist.push_back({(pts.col(j) - pts.col(sample)).squaredNorm(), j});
  }
  std::sort(dist.begin(), dist.end());
  Eigen::MatrixXd Xn(M, neighbors);
  if (neighbor_idx) neighbor_idx->clear();
  for (std::size_t k = 0; k < neighbors; ++k) {
    Xn.col(k) = pts.col(dist[k].second);
    if (neighbor_idx) neighbor_idx->push_back(dist[k].second);
  }
  Eigen::VectorXd h;
  if (variant == LleWeights::ridge) {
    Eigen::MatrixXd gram = Xn.transpose() * Xn +
                           eps * Eigen::MatrixXd::Identity(neighbors, neighbors);
    h = gram.ldlt().solve(Xn.transpose() * pts.col(sample));
  } else {
    Eigen::MatrixXd centered(M, neighbors);
    for (std::size_t k = 0; k < neighbors; ++k)
      centered.col(k) = pts.col(sample) - Xn.col(k);
    Eigen::MatrixXd phi = centered.transpose() * centered +
                          eps * Eigen::MatrixXd::Identity(neighbors, neighbors);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(neighbors);
    Eigen::VectorXd raw = phi.ldlt().solve(ones);
    h = raw / ones.dot(raw);
  }
  Tensor out({neighbors});
  for (std::size_t k = 0; k < neighbors; ++k) out[k] = h(k);
  return out;
}

// ---------------------------------------------------------------------------
// t-SNE
// ---------------------------------------------------------------------------

struct TsneOptions {
  std::size_t dims = 2;
  double zeta = 1.0;  // Cauchy low-dimensional kernel
  std::size_t iterations = 500;
  double step = 10.0;       // alpha
  double momentum = 0.5;    // beta
  bool fixed_sigma = false;  // fixed-sigma fidelity mode
  double sigma = 1.0;        // used when fixed_sigma
  double perplexity = 10.0;  // per-point sigma search target otherwise
  /// Working mode normalizes the low-dimensional conditionals, which gives
  /// the standard attract/repel gradient. The raw-density fidelity mode
  /// keeps the as-displayed kernel without normalization; its objective has
  /// no repulsive term, so embeddings contract toward a point and the mode
  /// is only useful for gradient-identity checks.
  bool normalized_q = true;
};

/// Gaussian input conditionals p_{k|n} (column n sums to 1 over k != n).
inline Tensor tsne_conditionals(const Tensor& squared_distances,
                                const std::vector<double>& sigma) {
  const std::size_t N = squared_distances.rows();
  Tensor P({N, N}, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    double z = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      if (k == n) continue;
      const double e = std::exp(-squared_distances.at(k, n) /
                                (2.0 * sigma[n] * sigma[n]));
      P.at(k, n) = e;
      z += e;
    }
    if (z <= 0.0)
      throw std::runtime_error("tsne: degenerate conditional at point " +
                               std::to_string(n));
    for (std::size_t k = 0; k < N; ++k) P.at(k, n) /= z;
  }
  return P;
}

/// Unnormalized t kernel density used for q_{k|n}.
inline double tsne_q_density(double squared_dist, double zeta) {
  const double c = std::tgamma((zeta + 1.0) / 2.0) /
                   (std::sqrt(3.14159265358979323846 * zeta) *
                    std::tgamma(zeta / 2.0));
  return c * std::pow(1.0 + squared_dist / zeta, -(zeta + 1.0) / 2.0);
}

/// Low-dimensional conditionals with the t kernel, column n normalized over
/// k != n (the working mode; the raw-density mode skips the normalization).
inline Tensor tsne_low_conditionals(const Tensor& Y, double zeta) {
  const std::size_t N = Y.cols();
  Tensor Q({N, N}, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    double z = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      if (k == n) continue;
      double d2 = 0.0;
      for (std::size_t l = 0; l < Y.rows(); ++l) {
        const double d = Y.at(l, k) - Y.at(l, n);
        d2 += d * d;
      }
      const double g = std::pow(1.0 + d2 / zeta, -(zeta + 1.0) / 2.0);
      Q.at(k, n) = g;
      z += g;
    }
    for (std::size_t k = 0; k < N; ++k) Q.at(k, n) /= z;
  }
  return Q;
}

/// Objective sum_n sum_{k != n} p_{k|n} (ln p_{k|n} - ln q_{k|n}).
/// normalized_q selects the conditionals above; otherwise q is the raw t
/// density (the as-displayed form, whose optimum collapses all points).
inline double tsne_objective(const Tensor& P, const Tensor& Y, double zeta,
                             bool normalized_q = false) {
  const std::size_t N = P.rows();
  Tensor Q;
  if (normalized_q) Q = tsne_low_conditionals(Y, zeta);
  double obj = 0.0;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < N; ++k) {
      if (k == n || P.at(k, n) <= 0.0) continue;
      double lnq;
      if (normalized_q) {
        lnq = std::log(Q.at(k, n));
      } else {
        double d2 = 0.0;
        for (std::size_t l = 0; l < Y.rows(); ++l) {
          const double d = Y.at(l, k) - Y.at(l, n);
          d2 += d * d;
        }
        lnq = std::log(tsne_q_density(d2, zeta));
      }
      obj += P.at(k, n) * (std::log(P.at(k, n)) - lnq);
    }
  return obj;
}

/// Gradient of the objective at point m:
/// 4/(zeta (zeta+1)) sum_n (p_{m|n} + p_{n|m}) (1 + t^2/zeta)^-1 (y_m - y_n).
inline Tensor tsne_gradient(const Tensor& P, const Tensor& Y, double zeta,
                            std::size_t m) {
  const std::size_t N = P.rows(), L = Y.rows();
  Tensor g({L}, 0.0);
  const double c = 4.0 / (zeta * (zeta + 1.0));
  for (std::size_t n = 0; n < N; ++n) {
    if (n == m) continue;
    double d2 = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      const double d = Y.at(l, m) - Y.at(l, n);
      d2 += d * d;
    }
    const double w = (P.at(m, n) + P.at(n, m)) / (1.0 + d2 / zeta);
    for (std::size_t l = 0; l < L; ++l)
      g[l] += c * w * (Y.at(l, m) - Y.at(l, n));
  }
  return g;
}

/// Full gradient (L x N) of the normalized-conditional objective:
/// (zeta+1)/zeta sum_n (p_{m|n}+p_{n|m}-q_{m|n}-q_{n|m})
///               (1 + t^2/zeta)^-1 (y_m - y_n).
/// The q terms are the repulsion the raw-density form lacks.
inline Tensor tsne_gradient_normalized(const Tensor& P, const Tensor& Y,
                                       double zeta) {
  const std::size_t N = P.rows(), L = Y.rows();
  Tensor Q = tsne_low_conditionals(Y, zeta);
  Tensor G({L, N}, 0.0);
  const double c = (zeta + 1.0) / zeta;
  for (std::size_t m = 0; m < N; ++m)
    for (std::size_t n = 0; n < N; ++n) {
      if (n == m) continue;
      double d2 = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        const double d = Y.at(l, m) - Y.at(l, n);
        d2 += d * d;
      }
      const double w = c *
                       (P.at(m, n) + P.at(n, m) - Q.at(m, n) - Q.at(n, m)) /
                       (1.0 + d2 / zeta);
      for (std::size_t l = 0; l < L; ++l)
        G.at(l, m) += w * (Y.at(l, m) - Y.at(l, n));
    }
  return G;
}

inline Tensor pairwise_squared_distances(const Tensor& X) {
  const std::size_t N = X.cols();
  Tensor D({N, N}, 0.0);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j) {
      double d2 = 0.0;
      for (std::size_t l = 0; l < X.rows(); ++l) {
        const double d = X.at(l, i) - X.at(l, j);
        d2 += d * d;
      }
      D.at(i, j) = D.at(j, i) = d2;
    }
  return D;
}

/// Per-point sigma by bisection on the conditional perplexity 2^H.
inline std::vector<double> tsne_sigma_search(const Tensor& D2,
                                             double perplexity) {
  const std::size_t N = D2.rows();
  std::vector<double> sigma(N, 1.0);
  for (std::size_t n = 0; n < N; ++n) {
    double lo = 1e-9, hi = 1e9;
    for (int it = 0; it < 64; ++it) {
      const double s = std::sqrt(lo * hi);
      double z = 0.0, h = 0.0;
      for (std::size_t k = 0; k < N; ++k) {
        if (k == n) continue;
        z += std::exp(-D2.at(k, n) / (2.0 * s * s));
      }
      if (z <= 0.0) {
        lo = s;
        continue;
      }
      for (std::size_t k = 0; k < N; ++k) {
        if (k == n) continue;
        const double p = std::exp(-D2.at(k, n) / (2.0 * s * s)) / z;
        if (p > 0.0) h -= p * std::log2(p);
      }
      if (std::pow(2.0, h) > perplexity)
        hi = s;
      else
        lo = s;
    }
    sigma[n] = std::sqrt(lo * hi);
  }
  return sigma;
}

/// Momentum gradient descent on the KL objective with the t kernel.
/// Input: data columns (is_distance = false) or a squared-distance matrix.
inline EmbeddingResult tsne_embed(const Tensor& input, bool is_distance,
                                  const TsneOptions& opt, Rng& rng) {
  if (!(opt.zeta > 0.0)) throw std::invalid_argument("tsne: zeta <= 0");
  Tensor D2 = is_distance ? input : pairwise_squared_distances(input);
  const std::size_t N = D2.rows();
  std::vector<double> sigma =
      opt.fixed_sigma ? std::vector<double>(N, opt.sigma)
                      : tsne_sigma_search(D2, opt.perplexity);
  for (double s : sigma)
    if (!(s > 0.0)) throw std::invalid_argument("tsne: sigma <= 0");
  Tensor P = tsne_conditionals(D2, sigma);

  EmbeddingResult out;
  out.method = "tsne";
  Tensor Y = Tensor::randn({opt.dims, N}, rng, 1e-2);
  Tensor Y_prev = Y;
  for (std::size_t it = 0; it < opt.iterations; ++it) {
    Tensor Y_next = Y;
    if (opt.normalized_q) {
      Tensor G = tsne_gradient_normalized(P, Y, opt.zeta);
      for (std::size_t m = 0; m < N; ++m)
        for (std::size_t l = 0; l < opt.dims; ++l)
          Y_next.at(l, m) = Y.at(l, m) - opt.step * G.at(l, m) +
                            opt.momentum * (Y.at(l, m) - Y_prev.at(l, m));
    } else {
      for (std::size_t m = 0; m < N; ++m) {
        Tensor g = tsne_gradient(P, Y, opt.zeta, m);
        for (std::size_t l = 0; l < opt.dims; ++l)
          Y_next.at(l, m) = Y.at(l, m) - opt.step * g[l] +
                            opt.momentum * (Y.at(l, m) - Y_prev.at(l, m));
      }
    }
    Y_prev = Y;
    Y = Y_next;
    const double obj = tsne_objective(P, Y, opt.zeta, opt.normalized_q);
    if (!std::isfinite(obj))
      throw std::runtime_error("tsne: nonfinite objective at iteration " +
                               std::to_string(it));
    out.objective_history.push_back(obj);
  }
  out.coordinates = Y;
  return out;
}

}  // namespace dasp::xform
