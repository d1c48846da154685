// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace dasp::sed {

// ---------------------------------------------------------------------------
// Clip-level aggregation of per-frame detection probabilities
// ---------------------------------------------------------------------------

enum class Aggregation {
  max,
  mean,
  top_n,
  exp_sorted,
  softmax_weighted,
  linear_softmax
};

inline Aggregation aggregation_from_string(const std::string& s) {
  if (s == "max") return Aggregation::max;
  if (s == "mean") return Aggregation::mean;
  if (s == "top_n") return Aggregation::top_n;
  if (s == "exp_sorted") return Aggregation::exp_sorted;
  if (s == "softmax" || s == "softmax_weighted")
    return Aggregation::softmax_weighted;
  if (s == "linear_softmax") return Aggregation::linear_softmax;
  throw std::invalid_argument("unknown aggregation: " + s);
}

struct AggregationParams {
  std::size_t top_n = 1;       // top_n kind
  double lambda = 0.5;         // exp_sorted kind, in (0,1)
  double tau = 1.0;            // softmax_weighted kind, >= 0
};

/// Aggregates a clip's frame probabilities into one clip probability.
/// linear_softmax returns 0 on an all-zero input.
inline double aggregate(const std::vector<double>& probs, Aggregation method,
                        const AggregationParams& params = {}) {
  const std::size_t T = probs.size();
  if (T == 0) throw std::invalid_argument("aggregate: empty input");
  for (double p : probs)
    if (p < 0.0 || p > 1.0)
      throw std::invalid_argument("aggregate: probability outside [0,1]");
  switch (method) {
    case Aggregation::max:
      return *std::max_element(probs.begin(), probs.end());
    case Aggregation::mean:
      return std::accumulate(probs.begin(), probs.end(), 0.0) / double(T);
    case Aggregation::top_n: {
      const std::size_t n = params.top_n;
      if (n < 1 || n > T)
        throw std::invalid_argument("aggregate: top_n out of range");
      // Ties keep earlier frames.
      std::vector<std::size_t> idx(T);
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a,
                                                   std::size_t b) {
        return probs[a] > probs[b];
      });
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += probs[idx[i]];
      return acc / double(n);
    }
    case Aggregation::exp_sorted: {
      const double lambda = params.lambda;
      if (!(lambda > 0.0 && lambda < 1.0))
        throw std::invalid_argument("aggregate: lambda must be in (0,1)");
      std::vector<double> sorted = probs;
      std::sort(sorted.begin(), sorted.end(), std::greater<double>());
      const double norm =
          (1.0 - lambda) / (1.0 - std::pow(lambda, double(T)));
      double acc = 0.0, w = norm;
      for (std::size_t k = 0; k < T; ++k) {
        acc += w * sorted[k];
        w *= lambda;
      }
      return acc;
    }
    case Aggregation::softmax_weighted: {
      const double tau = params.tau;
      if (tau < 0.0) throw std::invalid_argument("aggregate: tau < 0");
      double m = *std::max_element(probs.begin(), probs.end());
      double z = 0.0, acc = 0.0;
      for (double p : probs) z += std::exp(tau * (p - m));
      for (double p : probs) acc += std::exp(tau * (p - m)) / z * p;
      return acc;
    }
    case Aggregation::linear_softmax: {
      double num = 0.0, den = 0.0;
      for (double p : probs) {
        num += p * p;
        den += p;
      }
      return den > 0.0 ? num / den : 0.0;
    }
  }
  throw std::logic_error("unreachable aggregation");
}

// ---------------------------------------------------------------------------
// Triple-threshold decision
// ---------------------------------------------------------------------------

/// Defaults follow the worked setting eps_g = 0.5, eps_low = 0.2,
/// eps_high = 0.75.
struct DecisionThresholds {
  double eps_g = 0.5;
  double eps_low = 0.2;
  double eps_high = 0.75;
  std::size_t min_duration = 5;  // frames

  void validate() const {
    if (!(eps_low <= eps_high))
      throw std::invalid_argument("DecisionThresholds: eps_low > eps_high");
    for (double v : {eps_g, eps_low, eps_high})
      if (v < 0.0 || v > 1.0)
        throw std::invalid_argument("DecisionThresholds: outside [0,1]");
  }
};

/// Binary per-frame decisions p_t = (p_t^c + p_t^l) * p_t^g:
///  - p_t^g gates on the aggregated clip score (>= eps_g);
///  - p_t^l fires on frames >= eps_high;
///  - p_t^c fires on maximal runs of frames >= eps_low lasting at least
///    min_duration frames. Frames above eps_high inside a run count as run
///    members (they fire through p_t^l regardless), and runs touching the
///    sequence boundary count with their plain frame count.
inline std::vector<int> decide(const std::vector<double>& frame_probs,
                               const DecisionThresholds& thresholds,
                               double clip_score) {
  thresholds.validate();
  const std::size_t T = frame_probs.size();
  std::vector<int> out(T, 0);
  if (clip_score < thresholds.eps_g) return out;
  for (std::size_t t = 0; t < T; ++t)
    if (frame_probs[t] >= thresholds.eps_high) out[t] = 1;
  std::size_t run_start = 0;
  bool in_run = false;
  auto close_run = [&](std::size_t end) {  // [run_start, end)
    if (end - run_start >= thresholds.min_duration)
      for (std::size_t t = run_start; t < end; ++t) out[t] = 1;
  };
  for (std::size_t t = 0; t < T; ++t) {
    const bool candidate = frame_probs[t] >= thresholds.eps_low;
    if (candidate && !in_run) {
      in_run = true;
      run_start = t;
    } else if (!candidate && in_run) {
      in_run = false;
      close_run(t);
    }
  }
  if (in_run) close_run(T);
  return out;
}

// ---------------------------------------------------------------------------
// Scores, rates, F1
// ---------------------------------------------------------------------------

struct ScoredSet {
  std::vector<double> positives;
  std::vector<double> negatives;

  void validate() const {
    if (positives.empty() || negatives.empty())
      throw std::invalid_argument("ScoredSet: both sides must be nonempty");
  }
};

struct Rates {
  std::size_t pp = 0, pn = 0, np = 0, nn = 0;
  double recall = 0.0;     // t(eps)
  double fpr = 0.0;        // f(eps)
  double precision = 0.0;  // reported as 1 with zero_recall when PP+NP == 0
  bool zero_predicted_positives = false;
};

inline Rates rates(const ScoredSet& scores, double threshold) {
  scores.validate();
  Rates r;
  for (double s : scores.positives) (s >= threshold ? r.pp : r.pn)++;
  for (double s : scores.negatives) (s >= threshold ? r.np : r.nn)++;
  r.recall = double(r.pp) / double(scores.positives.size());
  r.fpr = double(r.np) / double(scores.negatives.size());
  if (r.pp + r.np == 0) {
    r.precision = 1.0;
    r.zero_predicted_positives = true;
  } else {
    r.precision = double(r.pp) / double(r.pp + r.np);
  }
  return r;
}

/// F1 from recall/false-positive rate: 2 t / (t + alpha f + 1) with
/// alpha = N- / N+ (equals 2PR/(P+R)).
inline double f1(const ScoredSet& scores, double threshold) {
  Rates r = rates(scores, threshold);
  const double alpha =
      double(scores.negatives.size()) / double(scores.positives.size());
  return 2.0 * r.recall / (r.recall + alpha * r.fpr + 1.0);
}

// ---------------------------------------------------------------------------
// ROC and exact AUC
// ---------------------------------------------------------------------------

enum class TieConvention {
  half,  // ties s_n == s_m contribute 0.5 (matches the trapezoid)
  full   // kappa(s_n >= s_m): ties contribute 1
};

/// Pairwise statistic (1/N+N-) sum kappa(s_n >= s_m); ties weighted per the
/// convention (default 0.5, which the trapezoid construction reproduces
/// exactly).
inline double auc_exact(const ScoredSet& scores,
                        TieConvention ties = TieConvention::half) {
  scores.validate();
  double acc = 0.0;
  for (double p : scores.positives)
    for (double n : scores.negatives) {
      if (p > n)
        acc += 1.0;
      else if (p == n)
        acc += ties == TieConvention::half ? 0.5 : 1.0;
    }
  return acc / (double(scores.positives.size()) *
                double(scores.negatives.size()));
}

struct RocPoint {
  double fpr = 0.0;
  double recall = 0.0;
  double threshold = 0.0;
};

/// Vertices of the empirical ROC step curve, from (0,0) to (1,1), one point
/// per distinct score threshold (inclusive counting).
inline std::vector<RocPoint> roc_points(const ScoredSet& scores) {
  scores.validate();
  std::vector<double> all = scores.positives;
  all.insert(all.end(), scores.negatives.begin(), scores.negatives.end());
  std::sort(all.begin(), all.end(), std::greater<double>());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<RocPoint> pts;
  pts.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  for (double threshold : all) {
    Rates r = rates(scores, threshold);
    pts.push_back({r.fpr, r.recall, threshold});
  }
  return pts;
}

/// Trapezoid over the ROC vertices; equals auc_exact with half-tie
/// convention.
inline double auc_trapezoid(const ScoredSet& scores) {
  std::vector<RocPoint> pts = roc_points(scores);
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].fpr - pts[i - 1].fpr) *
            0.5 * (pts[i].recall + pts[i - 1].recall);
  return area;
}

}  // namespace dasp::sed
