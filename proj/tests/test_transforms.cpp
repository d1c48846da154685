// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <numeric>

#include "catch_amalgamated.hpp"
#include "dasp/transforms.hpp"

using namespace dasp;
using namespace dasp::xform;
using Catch::Approx;

namespace {

// Independent exact-LP oracle: enumerate all K+N-1 cell subsets, solve the
// marginal equations directly, keep feasible vertices, return the minimum
// cost. Written against the flow equations, not the simplex internals.
double vertex_enumeration_cost(const Tensor& C, const Tensor& p,
                               const Tensor& q, Tensor* best_plan = nullptr) {
  const std::size_t K = C.rows(), N = C.cols();
  const std::size_t cells = K * N, basis_size = K + N - 1;
  std::vector<std::size_t> pick(basis_size);
  std::iota(pick.begin(), pick.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  auto advance = [&]() {
    // next combination of indices in [0, cells)
    long i = long(basis_size) - 1;
    while (i >= 0 && pick[i] == cells - basis_size + std::size_t(i)) --i;
    if (i < 0) return false;
    ++pick[i];
    for (std::size_t j = std::size_t(i) + 1; j < basis_size; ++j)
      pick[j] = pick[j - 1] + 1;
    return true;
  };
  do {
    // Equations: K row sums + first N-1 column sums.
    Tensor A({basis_size, basis_size}, 0.0);
    Tensor rhs({basis_size}, 0.0);
    for (std::size_t r = 0; r < K; ++r) rhs[r] = p[r];
    for (std::size_t c = 0; c + 1 < N; ++c) rhs[K + c] = q[c];
    for (std::size_t s = 0; s < basis_size; ++s) {
      const std::size_t r = pick[s] / N, c = pick[s] % N;
      A.at(r, s) = 1.0;
      if (c + 1 < N) A.at(K + c, s) = 1.0;
    }
    Tensor inv;
    try {
      inv = matrix_inverse(A);
    } catch (const std::exception&) {
      continue;  // not a spanning tree
    }
    std::vector<double> values(basis_size, 0.0);
    bool feasible = true;
    for (std::size_t s = 0; s < basis_size; ++s) {
      double v = 0.0;
      for (std::size_t e = 0; e < basis_size; ++e) v += inv.at(s, e) * rhs[e];
      values[s] = v;
      if (v < -1e-9) feasible = false;
    }
    if (!feasible) continue;
    double cost = 0.0;
    for (std::size_t s = 0; s < basis_size; ++s)
      cost += std::max(0.0, values[s]) * C.at(pick[s] / N, pick[s] % N);
    if (cost < best) {
      best = cost;
      if (best_plan) {
        *best_plan = Tensor({K, N}, 0.0);
        for (std::size_t s = 0; s < basis_size; ++s)
          best_plan->at(pick[s] / N, pick[s] % N) = std::max(0.0, values[s]);
      }
    }
  } while (advance());
  return best;
}

}  // namespace

TEST_CASE("lda separates gaussian classes along the closed-form direction",
          "[transforms]") {
  Rng rng = Rng::stream(1, "lda");
  std::vector<Tensor> samples;
  std::vector<std::size_t> labels;
  const std::size_t dim = 4;
  for (int k = 0; k < 2; ++k)
    for (int n = 0; n < 500; ++n) {
      Tensor x = Tensor::randn({dim}, rng);
      x[0] += (k == 0) ? 1.0 : -1.0;
      samples.push_back(x);
      labels.push_back(std::size_t(k));
    }
  LdaModel model = lda_fit(samples, labels, 1);
  CHECK_FALSE(model.degenerate);

  // Oracle: w ~ Phi_w^{-1} (mu_1 - mu_2).
  Tensor diff = model.means[0] - model.means[1];
  Tensor w = matmul(matrix_inverse(model.scatter_within),
                    diff.reshape({dim, 1}))
                 .reshape({dim});
  double cosine = 0.0;
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    cosine += model.transform.at(0, i) * w[i];
    na += model.transform.at(0, i) * model.transform.at(0, i);
    nb += w[i] * w[i];
  }
  cosine = std::abs(cosine) / std::sqrt(na * nb);
  CHECK(cosine >= 0.999);
}

TEST_CASE("lda flags identical class means as degenerate", "[transforms]") {
  Rng rng = Rng::stream(2, "lda-degenerate");
  std::vector<Tensor> samples;
  std::vector<std::size_t> labels;
  for (int k = 0; k < 2; ++k)
    for (int n = 0; n < 40; ++n) {
      samples.push_back(Tensor::randn({3}, rng));
      labels.push_back(std::size_t(k));
    }
  // Force equal means exactly by mirroring the two classes.
  for (int n = 0; n < 40; ++n) samples[40 + n] = samples[n];
  LdaModel model = lda_fit(samples, labels, 1);
  CHECK(model.degenerate);
}

TEST_CASE("whitened within-class data aligns lda with the between axes",
          "[transforms]") {
  // Classes with identity covariance: Phi_w ~ c I, so the generalized
  // problem reduces to the eigenvectors of Phi_b.
  Rng rng = Rng::stream(3, "lda-whitened");
  std::vector<Tensor> samples;
  std::vector<std::size_t> labels;
  std::vector<Tensor> mus{Tensor::vector({2.0, 0.0, 0.0}),
                          Tensor::vector({-2.0, 0.3, 0.0}),
                          Tensor::vector({0.0, -1.8, 0.0})};
  for (std::size_t k = 0; k < 3; ++k)
    for (int n = 0; n < 800; ++n) {
      Tensor x = Tensor::randn({3}, rng);
      samples.push_back(x + mus[k]);
      labels.push_back(k);
    }
  LdaModel model = lda_fit(samples, labels, 2);
  Eigen::MatrixXd phi_b(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      phi_b(i, j) = model.scatter_between.at(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(phi_b);
  // Top between-class axis vs first LDA row.
  Eigen::VectorXd top = es.eigenvectors().col(2);
  double cosine = 0.0, nb = 0.0;
  for (int i = 0; i < 3; ++i) {
    cosine += top(i) * model.transform.at(0, i);
    nb += model.transform.at(0, i) * model.transform.at(0, i);
  }
  CHECK(std::abs(cosine) / std::sqrt(nb) > 0.99);
}

TEST_CASE("lda objective beats random projections", "[transforms]") {
  Rng rng = Rng::stream(4, "lda-objective");
  std::vector<Tensor> samples;
  std::vector<std::size_t> labels;
  for (std::size_t k = 0; k < 2; ++k)
    for (int n = 0; n < 200; ++n) {
      Tensor x = Tensor::randn({4}, rng);
      x[1] += k == 0 ? 0.8 : -0.8;
      x[3] += k == 0 ? -0.4 : 0.4;
      samples.push_back(x);
      labels.push_back(k);
    }
  LdaModel model = lda_fit(samples, labels, 1);
  const double fitted = lda_objective(model, model.transform);
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor A = Tensor::randn({1, 4}, rng);
    CHECK(lda_objective(model, A) <= fitted + 1e-9);
  }
}

TEST_CASE("ot closed-form cases", "[transforms]") {
  // p = q with zero-diagonal cost: stay put.
  Tensor p = Tensor::vector({0.2, 0.5, 0.3});
  Tensor C({3, 3}, 1.0);
  for (int i = 0; i < 3; ++i) C.at(i, i) = 0.0;
  TransportPlan plan = ot_solve(C, p, p);
  CHECK(plan.total_cost == Approx(0.0).margin(1e-15));
  for (int i = 0; i < 3; ++i) CHECK(plan.plan.at(i, i) == Approx(p[i]));

  // K = 1: the row is forced to q.
  Tensor q = Tensor::vector({0.1, 0.6, 0.3});
  TransportPlan forced =
      ot_solve(Tensor({1, 3}, {5.0, 1.0, 2.0}), Tensor({1}, 1.0), q);
  for (int n = 0; n < 3; ++n) CHECK(forced.plan.at(0, n) == Approx(q[n]));

  // The worked 2x2 example.
  TransportPlan swap = ot_solve(Tensor::matrix(2, 2, {0.0, 1.0, 1.0, 0.0}),
                                Tensor::vector({0.7, 0.3}),
                                Tensor::vector({0.3, 0.7}));
  CHECK(swap.total_cost == Approx(0.4).margin(1e-15));

  CHECK_THROWS(ot_solve(C, Tensor::vector({0.5, 0.5, 0.5}), p));
}

TEST_CASE("ot matches vertex enumeration on random small instances",
          "[transforms]") {
  Rng rng = Rng::stream(5, "ot-vertex");
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t K = 2 + rng.uniform_int(2);  // 2..3
    const std::size_t N = 2 + rng.uniform_int(2);
    Tensor C = Tensor::rand_uniform({K, N}, rng, 0.0, 5.0);
    Tensor p({K}), q({N});
    double sp = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < K; ++k) sp += (p[k] = rng.uniform(0.05, 1.0));
    for (std::size_t n = 0; n < N; ++n) sq += (q[n] = rng.uniform(0.05, 1.0));
    for (std::size_t k = 0; k < K; ++k) p[k] /= sp;
    for (std::size_t n = 0; n < N; ++n) q[n] /= sq;
    TransportPlan plan = ot_solve(C, p, q);
    const double oracle = vertex_enumeration_cost(C, p, q);
    CHECK(plan.total_cost == Approx(oracle).margin(1e-10));
  }
}

TEST_CASE("ot all 2x2 tenth-grid instances equal brute force",
          "[transforms]") {
  // Machine-precision equality: the two sides evaluate the same vertex
  // through different subtraction chains, and 0.1-grid values are not
  // binary-representable (0.7 - 0.3 != 0.4 in binary64), so the comparison
  // allows 4 ulp.
  Rng rng = Rng::stream(6, "ot-grid");
  for (int p1 = 1; p1 <= 9; ++p1)
    for (int q1 = 1; q1 <= 9; ++q1) {
      Tensor p = Tensor::vector({p1 / 10.0, 1.0 - p1 / 10.0});
      Tensor q = Tensor::vector({q1 / 10.0, 1.0 - q1 / 10.0});
      Tensor C = Tensor::rand_uniform({2, 2}, rng, 0.0, 3.0);
      TransportPlan plan = ot_solve(C, p, q);
      const double oracle = vertex_enumeration_cost(C, p, q);
      const double ulps =
          4.0 * std::numeric_limits<double>::epsilon() *
          std::max(1.0, std::abs(oracle));
      CHECK(std::abs(plan.total_cost - oracle) <= ulps);
    }
}

TEST_CASE("1-d equal-weight transport is the sorted assignment",
          "[transforms]") {
  Rng rng = Rng::stream(7, "ot-sorted");
  const std::size_t n = 6;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < n; ++i) {
    xs.push_back(rng.uniform(-3.0, 3.0));
    ys.push_back(rng.uniform(-3.0, 3.0));
  }
  Tensor C({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      C.at(i, j) = (xs[i] - ys[j]) * (xs[i] - ys[j]);
  Tensor marg({n}, 1.0 / double(n));
  TransportPlan plan = ot_solve(C, marg, marg);
  // Sorted matching oracle.
  std::vector<std::size_t> xi(n), yi(n);
  std::iota(xi.begin(), xi.end(), 0);
  std::iota(yi.begin(), yi.end(), 0);
  std::sort(xi.begin(), xi.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  std::sort(yi.begin(), yi.end(), [&](auto a, auto b) { return ys[a] < ys[b]; });
  for (std::size_t r = 0; r < n; ++r)
    CHECK(plan.plan.at(xi[r], yi[r]) == Approx(1.0 / double(n)).margin(1e-12));
}

TEST_CASE("ot cost is invariant under joint row permutation", "[transforms]") {
  Rng rng = Rng::stream(8, "ot-perm");
  Tensor C = Tensor::rand_uniform({3, 4}, rng, 0.0, 2.0);
  Tensor p = Tensor::vector({0.2, 0.3, 0.5});
  Tensor q = Tensor::vector({0.25, 0.25, 0.25, 0.25});
  const double base = ot_solve(C, p, q).total_cost;
  // Rotate rows of C and p together.
  Tensor C2({3, 4}), p2({3});
  for (std::size_t r = 0; r < 3; ++r) {
    p2[r] = p[(r + 1) % 3];
    for (std::size_t c = 0; c < 4; ++c) C2.at(r, c) = C.at((r + 1) % 3, c);
  }
  CHECK(ot_solve(C2, p2, q).total_cost == Approx(base).margin(1e-12));
}

TEST_CASE("ot gradient targets", "[transforms]") {
  Rng rng = Rng::stream(9, "ot-grad");
  const std::size_t K = 3, N = 3;
  std::vector<Tensor> xs, targets;
  for (std::size_t i = 0; i < K; ++i) xs.push_back(Tensor::randn({2}, rng));
  for (std::size_t i = 0; i < N; ++i)
    targets.push_back(Tensor::randn({2}, rng));
  Tensor C = squared_cost_matrix(xs, targets);
  Tensor marg({K}, 1.0 / double(K));
  TransportPlan plan = ot_solve(C, marg, marg);
  OtGradient grad = ot_gradient_targets(plan, xs, targets);

  // Alpha rows on the simplex.
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      CHECK(grad.alpha.at(k, n) >= -1e-12);
      s += grad.alpha.at(k, n);
    }
    CHECK(s == Approx(1.0).margin(1e-9));
  }

  // A sample at its barycentric target has zero gradient.
  std::vector<Tensor> xs2 = xs;
  xs2[0] = grad.barycenters[0];
  TransportPlan frozen = plan;  // plan kept fixed
  OtGradient grad2 = ot_gradient_targets(frozen, xs2, targets);
  CHECK(grad2.gradients[0].norm2() == Approx(0.0).margin(1e-12));

  // Identity plan matches targets directly.
  TransportPlan ident;
  ident.plan = Tensor({K, N}, 0.0);
  for (std::size_t k = 0; k < K; ++k) ident.plan.at(k, k) = 1.0 / double(K);
  ident.p = marg;
  ident.q = marg;
  OtGradient grad3 = ot_gradient_targets(ident, xs, targets);
  for (std::size_t k = 0; k < K; ++k)
    CHECK((grad3.barycenters[k] - targets[k]).norm2() ==
          Approx(0.0).margin(1e-12));

  // Finite differences of tr(H^T C) with the plan frozen.
  const double h = 1e-6;
  for (std::size_t d = 0; d < 2; ++d) {
    auto cost_at = [&](double delta) {
      std::vector<Tensor> moved = xs;
      moved[0][d] += delta;
      Tensor Cm = squared_cost_matrix(moved, targets);
      double acc = 0.0;
      for (std::size_t r = 0; r < K; ++r)
        for (std::size_t c = 0; c < N; ++c)
          acc += plan.plan.at(r, c) * Cm.at(r, c);
      return acc;
    };
    const double fd = (cost_at(h) - cost_at(-h)) / (2.0 * h);
    CHECK(grad.gradients[0][d] == Approx(fd).margin(1e-6));
  }
}

TEST_CASE("mds recovers collinear points and planar distances",
          "[transforms]") {
  // Three collinear points with gaps 1 and 1.
  Tensor D({3, 3}, 0.0);
  D.at(0, 1) = D.at(1, 0) = 1.0;
  D.at(1, 2) = D.at(2, 1) = 1.0;
  D.at(0, 2) = D.at(2, 0) = 4.0;  // squared distance of the end pair
  EmbeddingResult r = mds_embed(D, 1);
  auto dist = [&](std::size_t a, std::size_t b) {
    double acc = 0.0;
    for (std::size_t l = 0; l < r.coordinates.rows(); ++l) {
      const double d = r.coordinates.at(l, a) - r.coordinates.at(l, b);
      acc += d * d;
    }
    return std::sqrt(acc);
  };
  CHECK(dist(0, 1) == Approx(1.0).margin(1e-8));
  CHECK(dist(1, 2) == Approx(1.0).margin(1e-8));
  CHECK(dist(0, 2) == Approx(2.0).margin(1e-8));

  // All-zero distances embed to the origin.
  EmbeddingResult zero = mds_embed(Tensor({4, 4}, 0.0), 2);
  for (std::size_t i = 0; i < zero.coordinates.size(); ++i)
    CHECK(zero.coordinates[i] == 0.0);
  CHECK(zero.truncated);
}

TEST_CASE("mds round-trips distances of intrinsically 2-d data",
          "[transforms]") {
  Rng rng = Rng::stream(10, "mds");
  const std::size_t N = 12;
  Tensor pts({2, N});
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = rng.uniform(-2.0, 2.0);
  Tensor D({N, N}, 0.0);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      double d2 = 0.0;
      for (int l = 0; l < 2; ++l) {
        const double d = pts.at(l, i) - pts.at(l, j);
        d2 += d * d;
      }
      D.at(i, j) = d2;
    }
  EmbeddingResult r = mds_embed(D, 2);
  CHECK_FALSE(r.truncated);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      double d2 = 0.0;
      for (int l = 0; l < 2; ++l) {
        const double d = r.coordinates.at(l, i) - r.coordinates.at(l, j);
        d2 += d * d;
      }
      CHECK(std::sqrt(d2) == Approx(std::sqrt(D.at(i, j))).margin(1e-8));
    }
}

TEST_CASE("lle constrained weights sum to one", "[transforms]") {
  Rng rng = Rng::stream(11, "lle-weights");
  Tensor X = Tensor::randn({4, 20}, rng);
  for (std::size_t n = 0; n < 20; ++n) {
    Tensor h = lle_weights(X, n, 5, 1e-6, LleWeights::constrained);
    double s = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) s += h[k];
    CHECK(s == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("lle reconstructs points on a plane exactly", "[transforms]") {
  Rng rng = Rng::stream(12, "lle-plane");
  // Points on a 2-D plane through the origin inside 5-D: two generic
  // neighbors span the plane, so the unconstrained weights with zero ridge
  // reconstruct each point exactly.
  Tensor u = Tensor::randn({5}, rng), v = Tensor::randn({5}, rng);
  const std::size_t N = 15;
  Tensor X({5, N});
  for (std::size_t n = 0; n < N; ++n) {
    const double s = rng.uniform(-1.0, 1.0), t = rng.uniform(-1.0, 1.0);
    for (std::size_t l = 0; l < 5; ++l) X.at(l, n) = s * u[l] + t * v[l];
  }
  for (std::size_t n = 0; n < N; ++n) {
    std::vector<std::size_t> idx;
    Tensor h = lle_weights(X, n, 2, 0.0, LleWeights::ridge, &idx);
    Tensor rec({5}, 0.0);
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t l = 0; l < 5; ++l) rec[l] += h[k] * X.at(l, idx[k]);
    Tensor x({5});
    for (std::size_t l = 0; l < 5; ++l) x[l] = X.at(l, n);
    CHECK((x - rec).norm2() < 1e-10);
  }
}

TEST_CASE("lle embedding minimizes the quadratic objective", "[transforms]") {
  Rng rng = Rng::stream(13, "lle-optimal");
  Tensor X = Tensor::randn({3, 14}, rng);
  const std::size_t L = 2, N = 14;
  EmbeddingResult r = lle_embed(X, 4, 1e-6, L);
  // Rebuild H exactly as the embedding does and compare objectives.
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
  for (std::size_t n = 0; n < N; ++n) {
    std::vector<std::size_t> idx;
    Tensor h = lle_weights(X, n, 4, 1e-6, LleWeights::constrained, &idx);
    for (std::size_t k = 0; k < 4; ++k) H(Eigen::Index(idx[k]), n) = h[k];
  }
  Eigen::MatrixXd Mmat =
      (Eigen::MatrixXd::Identity(N, N) - H) *
      (Eigen::MatrixXd::Identity(N, N) - H).transpose();
  auto objective = [&](const Tensor& Y) {
    Eigen::MatrixXd y(L, N);
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t n = 0; n < N; ++n) y(l, n) = Y.at(l, n);
    return (y * Mmat * y.transpose()).trace();
  };
  const double fitted = objective(r.coordinates);
  for (int trial = 0; trial < 100; ++trial) {
    // Random orthonormal rows.
    Tensor Y = Tensor::randn({L, N}, rng);
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t prev = 0; prev < l; ++prev) {
        double proj = 0.0;
        for (std::size_t n = 0; n < N; ++n)
          proj += Y.at(l, n) * Y.at(prev, n);
        for (std::size_t n = 0; n < N; ++n)
          Y.at(l, n) -= proj * Y.at(prev, n);
      }
      double norm = 0.0;
      for (std::size_t n = 0; n < N; ++n) norm += Y.at(l, n) * Y.at(l, n);
      norm = std::sqrt(norm);
      for (std::size_t n = 0; n < N; ++n) Y.at(l, n) /= norm;
    }
    CHECK(fitted <= objective(Y) + 1e-9);
  }
}

namespace {

// Second, independent coding of the t-SNE gradient formula.
Tensor tsne_gradient_recoded(const Tensor& P, const Tensor& Y, double zeta,
                             std::size_t m) {
  const std::size_t N = P.rows(), L = Y.rows();
  Tensor g({L}, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    if (n == m) continue;
    double t2 = 0.0;
    for (std::size_t l = 0; l < L; ++l)
      t2 += (Y.at(l, m) - Y.at(l, n)) * (Y.at(l, m) - Y.at(l, n));
    const double kernel = 1.0 / (1.0 + t2 / zeta);
    const double coeff =
        4.0 / (zeta * (zeta + 1.0)) * (P.at(m, n) + P.at(n, m)) * kernel;
    for (std::size_t l = 0; l < L; ++l)
      g[l] += coeff * (Y.at(l, m) - Y.at(l, n));
  }
  return g;
}

}  // namespace

TEST_CASE("tsne default is the cauchy kernel", "[transforms]") {
  TsneOptions opt;
  CHECK(opt.zeta == 1.0);
}

TEST_CASE("tsne gradient: formula identity and finite differences",
          "[transforms]") {
  Rng rng = Rng::stream(14, "tsne-grad");
  const std::size_t N = 6;
  Tensor X = Tensor::randn({3, N}, rng);
  Tensor D2 = pairwise_squared_distances(X);
  std::vector<double> sigma(N, 1.0);
  Tensor P = tsne_conditionals(D2, sigma);
  Tensor Y = Tensor::randn({2, N}, rng);
  const double zeta = 1.0;

  // Two independent codings agree to 1e-12.
  for (std::size_t m = 0; m < N; ++m) {
    Tensor a = tsne_gradient(P, Y, zeta, m);
    Tensor b = tsne_gradient_recoded(P, Y, zeta, m);
    for (std::size_t l = 0; l < 2; ++l)
      CHECK(a[l] == Approx(b[l]).margin(1e-12));
  }

  // Central differences of the objective (frozen P), rel err < 1e-4, for
  // both the raw-density form and the normalized working form.
  const double h = 1e-6;
  Tensor Gn = tsne_gradient_normalized(P, Y, zeta);
  for (std::size_t m = 0; m < N; ++m) {
    Tensor g = tsne_gradient(P, Y, zeta, m);
    for (std::size_t l = 0; l < 2; ++l) {
      Tensor Yp = Y, Ym = Y;
      Yp.at(l, m) += h;
      Ym.at(l, m) -= h;
      const double fd =
          (tsne_objective(P, Yp, zeta) - tsne_objective(P, Ym, zeta)) /
          (2.0 * h);
      CHECK(std::abs(g[l] - fd) / std::max(1e-4, std::abs(fd)) < 1e-4);
      const double fdn = (tsne_objective(P, Yp, zeta, true) -
                          tsne_objective(P, Ym, zeta, true)) /
                         (2.0 * h);
      CHECK(std::abs(Gn.at(l, m) - fdn) / std::max(1e-4, std::abs(fdn)) <
            1e-4);
    }
  }
}

TEST_CASE("tsne separates three clusters", "[transforms]") {
  Rng rng = Rng::stream(17, "tsne-clusters");
  const std::size_t per = 12, N = 3 * per;
  Tensor X({2, N});
  const double cx[3] = {0.0, 6.0, 3.0}, cy[3] = {0.0, 0.0, 5.0};
  for (std::size_t n = 0; n < N; ++n) {
    const std::size_t c = n / per;
    X.at(0, n) = cx[c] + 0.3 * rng.gaussian();
    X.at(1, n) = cy[c] + 0.3 * rng.gaussian();
  }
  TsneOptions opt;
  opt.iterations = 400;
  opt.step = 5.0;
  opt.perplexity = 8.0;
  Rng init = Rng::stream(17, "tsne-clusters-init");
  EmbeddingResult r = tsne_embed(X, false, opt, init);
  // Mean silhouette over the embedding must clear 0.5.
  auto dist = [&](std::size_t a, std::size_t b) {
    double acc = 0.0;
    for (std::size_t l = 0; l < 2; ++l)
      acc += std::pow(r.coordinates.at(l, a) - r.coordinates.at(l, b), 2);
    return std::sqrt(acc);
  };
  double sil = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const std::size_t own = i / per;
    double a = 0.0;
    for (std::size_t j = own * per; j < (own + 1) * per; ++j)
      if (j != i) a += dist(i, j);
    a /= double(per - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 3; ++k) {
      if (k == own) continue;
      double acc = 0.0;
      for (std::size_t j = k * per; j < (k + 1) * per; ++j) acc += dist(i, j);
      b = std::min(b, acc / double(per));
    }
    sil += (b - a) / std::max(a, b);
  }
  CHECK(sil / double(N) > 0.5);
}

TEST_CASE("tsne collapses duplicated points and descends", "[transforms]") {
  Rng rng = Rng::stream(15, "tsne-run");
  const std::size_t N = 8;
  Tensor X({2, N});
  for (std::size_t n = 0; n < N; ++n) {
    X.at(0, n) = (n < N / 2) ? 2.0 : -2.0;
    X.at(1, n) = (n < N / 2) ? 1.0 : -1.0;
  }
  // Points 0 and 1 identical.
  X.at(0, 1) = X.at(0, 0);
  X.at(1, 1) = X.at(1, 0);
  X.at(0, 0) += 0.0;
  TsneOptions opt;
  opt.iterations = 300;
  opt.step = 0.5;
  opt.momentum = 0.5;
  opt.fixed_sigma = true;
  opt.sigma = 1.0;
  Rng init = Rng::stream(15, "tsne-init");
  EmbeddingResult r = tsne_embed(X, false, opt, init);
  CHECK(r.objective_history.back() < r.objective_history.front());
  double d01 = 0.0, d07 = 0.0;
  for (int l = 0; l < 2; ++l) {
    d01 += std::pow(r.coordinates.at(l, 0) - r.coordinates.at(l, 1), 2);
    d07 += std::pow(r.coordinates.at(l, 0) - r.coordinates.at(l, 7), 2);
  }
  CHECK(std::sqrt(d01) < 0.1 * std::sqrt(d07));
}

TEST_CASE("tsne sigma search hits the requested perplexity", "[transforms]") {
  Rng rng = Rng::stream(16, "tsne-sigma");
  Tensor X = Tensor::randn({3, 20}, rng);
  Tensor D2 = pairwise_squared_distances(X);
  auto sigma = tsne_sigma_search(D2, 5.0);
  Tensor P = tsne_conditionals(D2, sigma);
  for (std::size_t n = 0; n < 20; ++n) {
    double h = 0.0;
    for (std::size_t k = 0; k < 20; ++k) {
      if (k == n || P.at(k, n) <= 0.0) continue;
      h -= P.at(k, n) * std::log2(P.at(k, n));
    }
    CHECK(std::pow(2.0, h) == Approx(5.0).margin(0.05));
  }
}
