// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dasp/autodiff.hpp"
#include "dasp/generative.hpp"
#include "dasp/layers.hpp"
#include "dasp/losses.hpp"
#include "dasp/normalize.hpp"
#include "dasp/rng.hpp"

namespace dasp::gradcheck {

struct CheckResult {
  std::string name;
  double max_err = 0.0;
  bool pass(double tol = 1e-5) const { return max_err < tol; }
};

/// Central finite-difference verification of every differentiable primitive,
/// composite layer, and loss in the library at one seed. Batch-statistic
/// weights that the implementations detach (focal, generalized Dice, the
/// AUC surrogate) are checked through their frozen-weight forms, which is
/// the gradient the code actually takes.
inline std::vector<CheckResult> run_suite(std::uint64_t seed, double h = 1e-6) {
  using ad::Tape;
  using ad::Var;
  std::vector<CheckResult> results;
  Rng rng = Rng::stream(seed, "gradcheck");

  auto check = [&](const std::string& name, std::vector<Tensor> leaves,
                   std::function<Var(Tape&, const std::vector<Var>&)> build) {
    auto report = ad::check_gradients(leaves, build, h);
    results.push_back({name, report.max_err});
  };
  // Random values bounded away from the kinks of relu/abs/huber.
  auto away_from_zero = [&](std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
      double v = rng.uniform(0.2, 1.5);
      t[i] = rng.uniform() < 0.5 ? v : -v;
    }
    return t;
  };
  auto positive = [&](std::vector<std::size_t> shape, double lo = 0.2,
                      double hi = 2.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
  };

  // ----- elementwise primitives -----
  check("sigmoid", {Tensor::randn({7}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.square(t.sigmoid(v[0])));
        });
  check("relu", {away_from_zero({7})},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.square(t.relu(v[0])));
        });
  check("leaky_relu", {away_from_zero({7})},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.square(t.leaky_relu(v[0], 0.1)));
        });
  check("swish", {Tensor::randn({7}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.square(t.swish(v[0])));
        });
  check("tanh", {Tensor::randn({7}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.square(t.tanh(v[0])));
        });
  check("log", {positive({7})}, [](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.square(t.log(v[0])));
  });
  check("exp", {Tensor::randn({7}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.square(t.exp(v[0])));
        });
  check("sqrt", {positive({7})}, [](Tape& t, const std::vector<Var>& v) {
    return t.sum(t.square(t.sqrt(v[0])));
  });
  check("square", {Tensor::randn({7}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.exp(t.mul_scalar(t.square(v[0]), 0.1)));
        });
  check("abs", {away_from_zero({7})},
        [](Tape& t, const std::vector<Var>& v) { return t.sum(t.abs(v[0])); });
  check("reciprocal", {positive({7})},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.reciprocal(v[0]));
        });
  check("clamp_interior", {positive({7}, 0.2, 0.8)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.square(t.clamp(v[0], 0.0, 1.0)));
        });
  check("add_mul_scalar", {Tensor::randn({7}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.square(t.add_scalar(t.mul_scalar(v[0], 1.7), -0.3)));
        });

  // ----- binary / broadcast -----
  check("add_sub_mul_div",
        {Tensor::randn({6}, rng), positive({6}, 0.5, 2.0)},
        [](Tape& t, const std::vector<Var>& v) {
          Var s = t.add(v[0], v[1]);
          Var d = t.sub(v[0], v[1]);
          Var m = t.mul(v[0], v[1]);
          Var q = t.div(v[0], v[1]);
          return t.add(t.sum(t.square(s)),
                       t.add(t.sum(t.square(d)),
                             t.add(t.sum(t.square(m)), t.sum(t.square(q)))));
        });
  check("colvec_rowvec_ops",
        {Tensor::randn({3, 4}, rng), Tensor::randn({3}, rng),
         Tensor::randn({4}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          Var a = t.add_colvec(v[0], v[1]);
          Var b = t.mul_rowvec(a, v[2]);
          Var c = t.mul_colvec(b, v[1]);
          Var d = t.add_rowvec(c, v[2]);
          return t.sum(t.square(d));
        });
  check("scale_by",
        {Tensor::randn({5}, rng), Tensor::randn({1}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.square(t.scale_by(v[0], v[1])));
        });

  // ----- linear algebra / structure -----
  check("matmul_transpose",
        {Tensor::randn({3, 4}, rng), Tensor::randn({4, 2}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          Var y = t.matmul(v[0], v[1]);
          return t.sum(t.square(t.matmul(t.transpose(y), y)));
        });
  check("reshape_dot",
        {Tensor::randn({6}, rng), Tensor::randn({6}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          Var a = t.reshape(v[0], {2, 3});
          Var b = t.reshape(v[1], {2, 3});
          return t.square(t.dot(a, b));
        });
  check("concat_slice",
        {Tensor::randn({2, 3}, rng), Tensor::randn({2, 2}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          Var c = t.concat({v[0], v[1]}, 1);
          Var left = t.slice_cols(c, 0, 2);
          Var rows = t.slice_rows(c, 0, 1);
          return t.add(t.sum(t.square(left)), t.sum(t.square(rows)));
        });

  // ----- reductions / softmax -----
  check("reductions", {Tensor::randn({3, 4}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          Var s = t.sum(v[0]);
          Var m = t.mean(v[0]);
          Var mx = t.max(v[0]);
          Var sa = t.sum(t.square(t.sum_axis(v[0], 0)));
          Var ma = t.sum(t.square(t.mean_axis(v[0], 1)));
          return t.add(t.square(s),
                       t.add(t.square(m), t.add(t.square(mx), t.add(sa, ma))));
        });
  check("softmax", {Tensor::randn({6}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.square(t.softmax(v[0])));
        });
  check("softmax_cols", {Tensor::randn({4, 3}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return t.sum(t.square(t.softmax_cols(v[0])));
        });

  // ----- composite layers (parameters as leaves) -----
  auto check_inplace = [&](const std::string& name,
                           std::vector<Tensor*> storages,
                           const std::function<double()>& eval,
                           const std::vector<Tensor>& grads) {
    auto report = ad::check_gradients_inplace(storages, eval, grads, h);
    results.push_back({name, report.max_err});
  };

  for (nn::Activation act :
       {nn::Activation::identity, nn::Activation::sigmoid,
        nn::Activation::relu, nn::Activation::leaky_relu,
        nn::Activation::swish, nn::Activation::tanh}) {
    nn::DenseLayer layer(3, 4, act, rng);
    Tensor x = away_from_zero({3});
    Tape t;
    nn::BoundParams bp;
    Var out = layer.forward(t, t.constant(x), &bp);
    t.backward(t.sum(t.square(out)));
    check_inplace("dense_" + nn::to_string(act), bp.tensors,
                  [&] {
                    Tape t2;
                    return t2.val(t2.sum(
                        t2.square(layer.forward(t2, t2.constant(x)))))[0];
                  },
                  bp.gradients(t));
  }

  for (nn::Pooling pool : {nn::Pooling::none, nn::Pooling::decimate,
                           nn::Pooling::average, nn::Pooling::max}) {
    nn::Conv1dLayer conv(2, 3, 3, nn::Activation::tanh, rng, 1, 2, pool, 2);
    Tensor x = Tensor::randn({2, 12}, rng);
    Tape t;
    nn::BoundParams bp;
    Var out = conv.forward(t, t.constant(x), &bp);
    t.backward(t.sum(t.square(out)));
    const char* names[] = {"none", "decimate", "average", "max"};
    check_inplace(std::string("conv1d_pool_") + names[int(pool)], bp.tensors,
                  [&] {
                    Tape t2;
                    return t2.val(t2.sum(
                        t2.square(conv.forward(t2, t2.constant(x)))))[0];
                  },
                  bp.gradients(t));
  }

  for (nn::RecurrentKind kind :
       {nn::RecurrentKind::lstm, nn::RecurrentKind::gru}) {
    nn::RecurrentCell cell(kind, 3, 2, rng);
    Tensor x = Tensor::randn({3, 4}, rng);
    Tape t;
    nn::BoundParams bp;
    Var out = cell.unroll(t, t.constant(x), &bp);
    t.backward(t.sum(t.square(out)));
    check_inplace(kind == nn::RecurrentKind::lstm ? "lstm_unroll"
                                                  : "gru_unroll",
                  bp.tensors,
                  [&] {
                    Tape t2;
                    return t2.val(t2.sum(
                        t2.square(cell.unroll(t2, t2.constant(x)))))[0];
                  },
                  bp.gradients(t));
  }

  {
    nn::AttentionBlock att(2, 3, 2, 2, rng);
    Tensor x = Tensor::randn({3, 5}, rng);
    Tape t;
    nn::BoundParams bp;
    Var out = att.forward(t, t.constant(x), &bp);
    t.backward(t.sum(t.square(out)));
    check_inplace("attention", bp.tensors,
                  [&] {
                    Tape t2;
                    return t2.val(t2.sum(
                        t2.square(att.forward(t2, t2.constant(x)))))[0];
                  },
                  bp.gradients(t));
  }

  {
    nn::PoolingHead pool = nn::PoolingHead::attentive(
        Tensor::randn({3}, rng), Tensor::randn({2, 3}, rng));
    Tensor x = Tensor::randn({3, 5}, rng);
    Tape t;
    nn::BoundParams bp;
    Var out = pool.forward(t, t.constant(x), &bp);
    t.backward(t.sum(t.square(out)));
    check_inplace("attentive_pooling", bp.tensors,
                  [&] {
                    Tape t2;
                    return t2.val(t2.sum(
                        t2.square(pool.forward(t2, t2.constant(x)))))[0];
                  },
                  bp.gradients(t));
  }
  check("mean_stats_pooling", {Tensor::randn({3, 5}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          nn::PoolingHead mean = nn::PoolingHead::mean_pool();
          nn::PoolingHead stats = nn::PoolingHead::stats_pool();
          return t.add(t.sum(t.square(mean.forward(t, v[0]))),
                       t.sum(t.square(stats.forward(t, v[0]))));
        });

  {
    nn::DenseLayer inner(3, 3, nn::Activation::tanh, rng);
    Tensor x = Tensor::randn({3}, rng);
    Tape t;
    nn::BoundParams bp;
    Var out = nn::residual_wrap(t, t.constant(x), [&](Tape& tt, Var v) {
      return inner.forward(tt, v, &bp);
    });
    t.backward(t.sum(t.square(out)));
    check_inplace("residual_dense", bp.tensors,
                  [&] {
                    Tape t2;
                    Var o = nn::residual_wrap(
                        t2, t2.constant(x),
                        [&](Tape& tt, Var v) { return inner.forward(tt, v); });
                    return t2.val(t2.sum(t2.square(o)))[0];
                  },
                  bp.gradients(t));
  }

  for (nn::OutputHeadKind kind :
       {nn::OutputHeadKind::sigmoid, nn::OutputHeadKind::multi_sigmoid,
        nn::OutputHeadKind::softmax}) {
    const std::size_t classes =
        kind == nn::OutputHeadKind::sigmoid ? 1 : 3;
    nn::OutputHead head(kind, 4, classes, rng);
    Tensor z = Tensor::randn({4}, rng);
    Tape t;
    nn::BoundParams bp;
    Var out = head.forward(t, t.constant(z), &bp);
    t.backward(t.sum(t.square(out)));
    const char* names[] = {"sigmoid", "multi_sigmoid", "softmax", "sign"};
    check_inplace(std::string("output_head_") + names[int(kind)], bp.tensors,
                  [&] {
                    Tape t2;
                    return t2.val(t2.sum(
                        t2.square(head.forward(t2, t2.constant(z)))))[0];
                  },
                  bp.gradients(t));
  }

  // ----- normalization and dropout -----
  check("batch_norm_train", {Tensor::randn({6, 3}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          NormState bn = NormState::batch_norm(3);
          return t.sum(t.square(normalize(t, v[0], bn, Mode::train)));
        });
  check("layer_norm", {Tensor::randn({3, 6}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          NormState ln = NormState::layer_norm(3);
          return t.sum(t.square(normalize(t, v[0], ln, Mode::train)));
        });
  {
    const std::uint64_t mask_seed = rng.next_u64();
    check("dropout_train", {Tensor::randn({8}, rng)},
          [mask_seed](Tape& t, const std::vector<Var>& v) {
            Rng mask_rng(mask_seed);  // same mask on every evaluation
            return t.sum(t.square(dropout(t, v[0], 0.4, mask_rng,
                                          Mode::train)));
          });
  }

  // ----- losses -----
  check("mse", {Tensor::randn({5}, rng)},
        [&](Tape& t, const std::vector<Var>& v) {
          return loss::regression_loss(t, loss::Regression::mse, v[0],
                                       Tensor({5}, 0.1));
        });
  check("l1", {away_from_zero({5})},
        [&](Tape& t, const std::vector<Var>& v) {
          return loss::regression_loss(t, loss::Regression::l1, v[0],
                                       Tensor({5}, 0.0));
        });
  check("huber", {away_from_zero({5})},
        [&](Tape& t, const std::vector<Var>& v) {
          return loss::regression_loss(t, loss::Regression::huber, v[0],
                                       Tensor({5}, 0.0), 0.7);
        });
  {
    Tensor labels({6});
    for (std::size_t i = 0; i < 6; ++i) labels[i] = i % 2 ? 1.0 : 0.0;
    check("bce", {positive({6}, 0.1, 0.9)},
          [labels](Tape& t, const std::vector<Var>& v) {
            return loss::bce(t, v[0], labels);
          });
    check("weighted_bce", {positive({6}, 0.1, 0.9)},
          [labels](Tape& t, const std::vector<Var>& v) {
            return loss::weighted_bce(t, v[0], labels, 3.0);
          });
    check("dice", {positive({6}, 0.1, 0.9)},
          [labels](Tape& t, const std::vector<Var>& v) {
            return loss::dice_loss(t, v[0], labels);
          });
    Tensor p0 = positive({6}, 0.1, 0.9);
    Tensor wpos, wneg;
    loss::focal_weights(p0, labels, 2.0, &wpos, &wneg);
    check("focal_frozen_weights", {p0},
          [wpos, wneg](Tape& t, const std::vector<Var>& v) {
            return loss::asymmetric_focal_loss_weighted(t, v[0], wpos, wneg);
          });
    Tensor w_dice(p0.shape());
    for (std::size_t i = 0; i < p0.size(); ++i)
      w_dice[i] = std::pow(1.0 - p0[i], 2.0);
    check("dice_focal_frozen_weights", {p0},
          [labels, w_dice](Tape& t, const std::vector<Var>& v) {
            return loss::dice_loss_weighted(t, v[0], labels, w_dice, 0.1,
                                            0.3);
          });
  }
  {
    Tensor labels2d({2, 4});
    for (std::size_t i = 0; i < 8; ++i) labels2d[i] = (i * 3) % 2 ? 1.0 : 0.0;
    labels2d.at(0, 0) = 1.0;
    check("cross_entropy", {positive({2, 4}, 0.1, 0.9)},
          [labels2d](Tape& t, const std::vector<Var>& v) {
            return loss::cross_entropy(t, v[0], labels2d);
          });
    check("nll", {positive({2, 4}, 0.1, 0.9)},
          [](Tape& t, const std::vector<Var>& v) {
            return loss::nll(t, v[0], {0, 1, 0, 1});
          });
    check("inverse_frequency", {positive({2, 4}, 0.1, 0.9)},
          [labels2d](Tape& t, const std::vector<Var>& v) {
            return loss::inverse_frequency_loss(t, v[0], labels2d, 1.0, 1.0);
          });
  }
  {
    Tensor labels_pm({5});
    for (std::size_t i = 0; i < 5; ++i) labels_pm[i] = i % 2 ? 1.0 : -1.0;
    check("hinge_svm",
          {Tensor::randn({5}, rng), Tensor::randn({3}, rng)},
          [labels_pm](Tape& t, const std::vector<Var>& v) {
            return loss::hinge_svm(t, v[0], labels_pm, 0.5, v[1]);
          });
  }
  check("super_resolution", {positive({2, 5}, 0.1, 0.9)},
        [](Tape& t, const std::vector<Var>& v) {
          return loss::super_resolution_loss(t, v[0],
                                             Tensor::vector({1.0, 0.0}));
        });
  check("contrastive_active",
        {Tensor::randn({3}, rng), Tensor::randn({3}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          Var same = loss::contrastive_loss(t, v[0], v[1], true, 1.0);
          Var diff = loss::contrastive_loss(t, v[0], v[1], false, 100.0);
          return t.add(same, diff);
        });
  check("triplet_active",
        {Tensor::randn({3}, rng), Tensor::randn({3}, rng),
         Tensor::randn({3}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return loss::triplet_loss(t, v[0], v[1], v[2], 100.0);
        });
  check("ntxent",
        {Tensor::randn({3}, rng), Tensor::randn({3}, rng),
         Tensor::randn({3}, rng), Tensor::randn({3}, rng)},
        [](Tape& t, const std::vector<Var>& v) {
          return loss::ntxent_loss(t, {v[0], v[1]}, {v[2], v[3]}, 0.5, 1.0,
                                   0.1);
        });
  {
    loss::MocoDictionary dict;
    Rng drng = Rng::stream(seed, "gradcheck-moco");
    for (int i = 0; i < 4; ++i) dict.push(Tensor::randn({3}, drng));
    check("moco",
          {Tensor::randn({3}, rng), Tensor::randn({3}, rng)},
          [dict](Tape& t, const std::vector<Var>& v) {
            return loss::moco_loss(t, v[0], v[1], dict, 0.3);
          });
  }
  {
    Tensor target = Tensor::randn({16}, rng);
    check("si_sdr", {Tensor::randn({16}, rng)},
          [target](Tape& t, const std::vector<Var>& v) {
            return t.neg(loss::si_sdr(t, v[0], target));
          });
  }
  {
    Tensor mix = positive({3, 4}, 0.1, 2.0);
    Tensor stem = positive({3, 4}, 0.1, 2.0);
    check("spectral_distance", {positive({3, 4}, 0.1, 0.9)},
          [mix, stem](Tape& t, const std::vector<Var>& v) {
            return loss::spectral_distance(t, v[0], mix, stem);
          });
    Tensor stem2 = positive({3, 4}, 0.1, 2.0);
    check("pit_two_masks",
          {positive({3, 4}, 0.1, 0.9), positive({3, 4}, 0.1, 0.9)},
          [mix, stem, stem2](Tape& t, const std::vector<Var>& v) {
            std::vector<std::vector<Var>> d(2, std::vector<Var>(2));
            d[0][0] = loss::spectral_distance(t, v[0], mix, stem);
            d[0][1] = loss::spectral_distance(t, v[0], mix, stem2);
            d[1][0] = loss::spectral_distance(t, v[1], mix, stem);
            d[1][1] = loss::spectral_distance(t, v[1], mix, stem2);
            return loss::pit_loss(t, d).first;
          });
  }
  {
    Tensor U({2, 6}, 0.0);
    for (std::size_t i = 0; i < 6; ++i) U.at(i % 2, i) = 1.0;
    check("deep_clustering_frobenius", {Tensor::randn({3, 6}, rng)},
          [U](Tape& t, const std::vector<Var>& v) {
            return loss::deep_clustering_loss(t, v[0], U,
                                              loss::DeepClustering::frobenius);
          });
    check("deep_clustering_trace", {Tensor::randn({3, 6}, rng)},
          [U](Tape& t, const std::vector<Var>& v) {
            return loss::deep_clustering_loss(t, v[0], U,
                                              loss::DeepClustering::trace);
          });
  }
  {
    nn::DenseLayer l1(3, 4, nn::Activation::tanh, rng);
    nn::DenseLayer l2(4, 2, nn::Activation::tanh, rng);
    Tensor y = Tensor::randn({3}, rng);
    check("feature_constraint", {Tensor::randn({3}, rng)},
          [&l1, &l2, y](Tape& t, const std::vector<Var>& v) {
            auto extractor = [&](Tape& tt, Var in) {
              std::vector<Var> outs;
              Var h = l1.forward(tt, in);
              outs.push_back(h);
              outs.push_back(l2.forward(tt, h));
              return outs;
            };
            return loss::feature_constraint_loss(t, extractor, y, v[0]);
          });
  }
  {
    Tensor pos = Tensor::randn({4}, rng);
    Tensor neg = Tensor::randn({5}, rng);
    Tensor wpos = loss::auc_pos_weights(pos, neg);
    Tensor wneg = loss::auc_neg_weights(pos, neg);
    check("auc_surrogate_frozen_weights", {pos, neg},
          [wpos, wneg](Tape& t, const std::vector<Var>& v) {
            return loss::auc_surrogate_weighted(t, v[0], v[1], wpos, wneg);
          });
  }

  // ----- generative tape paths -----
  check("gan_objectives", {positive({4}, 0.1, 0.9), positive({4}, 0.1, 0.9)},
        [](Tape& t, const std::vector<Var>& v) {
          gen::GanValues g =
              gen::gan_values(t, v[0], v[1], gen::GeneratorObjective::log_d);
          return t.add(g.discriminator_objective,
                       t.square(g.generator_objective));
        });
  {
    nn::DenseLayer c1(3, 5, nn::Activation::tanh, rng);
    nn::DenseLayer c2(5, 1, nn::Activation::identity, rng);
    check("wgan_critic_input_gradient", {Tensor::randn({3}, rng)},
          [&c1, &c2](Tape& t, const std::vector<Var>& v) {
            return t.reshape(c2.forward(t, c1.forward(t, v[0])), {1});
          });
  }

  return results;
}

/// Worst case over the named results.
inline double worst_error(const std::vector<CheckResult>& results) {
  double worst = 0.0;
  for (const auto& r : results) worst = std::max(worst, r.max_err);
  return worst;
}

}  // namespace dasp::gradcheck
