// Copyright 2026 The Legimod Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LEGIMOD_SCORING_HPP_
#define LEGIMOD_SCORING_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "legimod/errors.hpp"
#include "legimod/geometry.hpp"
#include "legimod/ipf.hpp"

namespace legimod {

// Time weighting f(t) over 1-based state indices.
struct WeightProfile {
  enum class Kind { kExponential, kInverseTime };

  Kind kind = Kind::kExponential;
  double alpha = 0.05;

  static WeightProfile exponential(double alpha) {
    detail::require(alpha >= 0.0, "WeightProfile: alpha must be >= 0");
    return {Kind::kExponential, alpha};
  }
  static WeightProfile inverse_time() { return {Kind::kInverseTime, 0.0}; }

  double operator()(std::size_t t) const {
    const double tt = static_cast<double>(t);
    return kind == Kind::kExponential ? std::exp(-alpha * tt) : 1.0 / tt;
  }
};

inline constexpr double kDefaultAlpha = 0.05;

// sum_t f(t) * phi(x_t | g*), t = 1..T.
inline double weighted_potential_sum(const Trajectory& traj,
                                     const GoalScene& scene, double sigma,
                                     const WeightProfile& weight) {
  detail::require(traj.size() >= 1, "scoring: empty trajectory");
  double acc = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    acc += weight(i + 1) * potential(traj.states[i], scene, sigma);
  }
  return acc;
}

// Training label L_p = -sum_t exp(-alpha t) phi(x_t|g*). Larger is more
// legible. The normalizing integral of the time weight is left out; rank
// normalization makes it irrelevant.
inline double score_lp_train(const Trajectory& traj, const GoalScene& scene,
                             double sigma, double alpha = kDefaultAlpha) {
  return -weighted_potential_sum(traj, scene, sigma,
                                 WeightProfile::exponential(alpha));
}

// Evaluation score sum_t phi(x_t|g*) / t. Lower is more legible.
inline double score_lp_eval(const Trajectory& traj, const GoalScene& scene,
                            double sigma) {
  return weighted_potential_sum(traj, scene, sigma,
                                WeightProfile::inverse_time());
}

// L_d = sum_t |g- - x_t|^2 / t. Higher means clearer separation from the
// distractor.
inline double score_ld(const Trajectory& traj, const Point& distractor) {
  detail::require(traj.size() >= 1, "score_ld: empty trajectory");
  double acc = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    acc += (distractor - traj.states[i]).squaredNorm() /
           static_cast<double>(i + 1);
  }
  return acc;
}

// Time-weighted mean posterior of the intended goal over prefixes of the
// trajectory, sum_t P(g*|x_t) f(t) / sum_t f(t).
inline double formal_legibility(const Trajectory& traj, const GoalScene& scene,
                                double sigma, const WeightProfile& weight) {
  detail::require(traj.size() >= 1, "formal_legibility: empty trajectory");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double w = weight(i + 1);
    num += w * posterior(traj.states[i], scene, sigma);
    den += w;
  }
  return num / den;
}

struct LegibilityLabel {
  double raw = 0.0;         // L_p
  double normalized = 0.0;  // ell in [-1, 1]
  std::size_t rank = 0;     // 0 = lowest raw score
  std::size_t cohort_size = 0;
};

// Rank normalization within one cohort: ell = 2 rank / (N - 1) - 1, rank
// ascending by raw score with ties kept in input order. The minimum maps to
// -1 (most ambiguous) and the maximum to +1 (most legible).
inline std::vector<LegibilityLabel> rank_normalize(
    std::span<const double> raw_scores) {
  const std::size_t n = raw_scores.size();
  if (n < 2) {
    throw CohortTooSmallError("rank_normalize: cohort needs >= 2 scores");
  }
  for (double s : raw_scores) {
    detail::require(std::isfinite(s), "rank_normalize: non-finite score");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    return raw_scores[a] < raw_scores[b];
  });
  std::vector<LegibilityLabel> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    LegibilityLabel& label = labels[order[r]];
    label.raw = raw_scores[order[r]];
    label.rank = r;
    label.cohort_size = n;
    label.normalized =
        2.0 * static_cast<double>(r) / static_cast<double>(n - 1) - 1.0;
  }
  return labels;
}

// Where a score would fall in a ranked cohort, on the same [-1, 1] scale.
// Linear between neighbouring ranks, clamped at the ends.
inline double interpolate_label(std::span<const double> cohort_raw,
                                double raw) {
  std::vector<double> sorted(cohort_raw.begin(), cohort_raw.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  detail::require(n >= 2, "interpolate_label: cohort needs >= 2 scores");
  if (raw <= sorted.front()) return -1.0;
  if (raw >= sorted.back()) return 1.0;
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), raw);
  const std::size_t hi = static_cast<std::size_t>(it - sorted.begin());
  const std::size_t lo = hi - 1;
  const double span = sorted[hi] - sorted[lo];
  const double frac = span > 0.0 ? (raw - sorted[lo]) / span : 0.0;
  const double rank = static_cast<double>(lo) + frac;
  return 2.0 * rank / static_cast<double>(n - 1) - 1.0;
}

}  // namespace legimod

#endif  // LEGIMOD_SCORING_HPP_
