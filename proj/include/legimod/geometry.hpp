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

#ifndef LEGIMOD_GEOMETRY_HPP_
#define LEGIMOD_GEOMETRY_HPP_

#include <Eigen/Core>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "legimod/errors.hpp"

namespace legimod {

// Workspace point of dimension 2 or 3. Fixed max size keeps it off the heap.
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;

inline Point make_point(std::initializer_list<double> coords) {
  Point p(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (double c : coords) p[i++] = c;
  return p;
}

inline bool is_finite(const Point& p) { return p.allFinite(); }

// Axis-aligned box, min/max per axis.
struct Box {
  Point min;
  Point max;

  int dim() const { return static_cast<int>(min.size()); }

  bool contains(const Point& p, double tol = 0.0) const {
    if (p.size() != min.size()) return false;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p[i] < min[i] - tol || p[i] > max[i] + tol) return false;
    }
    return true;
  }

  Point clamp(const Point& p) const { return p.cwiseMax(min).cwiseMin(max); }

  Point extent() const { return max - min; }

  // Box grown by `fraction` of its extent on every side.
  Box inflated(double fraction) const {
    const Point pad = extent() * fraction;
    return Box{min - pad, max + pad};
  }

  static Box unit(int dim) {
    return Box{Point::Zero(dim), Point::Ones(dim)};
  }
};

struct BezierCurve {
  Point p0;  // start
  Point p1;  // first control point
  Point p2;  // second control point
  Point p3;  // goal

  int dim() const { return static_cast<int>(p0.size()); }
};

// Dense state(-action) sequence. `actions`, when present, has size() - 1
// entries: actions[i] takes states[i] to states[i + 1].
struct Trajectory {
  std::vector<Point> states;
  std::vector<Point> actions;
  double dt = 0.05;

  std::size_t size() const { return states.size(); }
  bool has_actions() const { return !actions.empty(); }
  int dim() const {
    return states.empty() ? 0 : static_cast<int>(states.front().size());
  }
};

// Subsampled k-waypoint plan.
struct Path {
  std::vector<Point> waypoints;

  std::size_t size() const { return waypoints.size(); }
  int dim() const {
    return waypoints.empty() ? 0 : static_cast<int>(waypoints.front().size());
  }
};

struct DeviationDescriptor {
  Point position;
  double magnitude = 0.0;
  std::size_t index = 0;  // state index the position was taken from
};

// Cubic Bernstein form.
inline Point evaluate_bezier(const BezierCurve& curve, double u) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw DomainError("evaluate_bezier: parameter outside [0,1]: " +
                      std::to_string(u));
  }
  const double v = 1.0 - u;
  return (v * v * v) * curve.p0 + (3.0 * v * v * u) * curve.p1 +
         (3.0 * v * u * u) * curve.p2 + (u * u * u) * curve.p3;
}

// Cumulative chord length over `samples` uniform parameter values.
inline std::vector<double> bezier_length_table(const BezierCurve& curve,
                                               std::size_t samples) {
  std::vector<double> cumulative(samples, 0.0);
  Point prev = curve.p0;
  for (std::size_t j = 1; j < samples; ++j) {
    const double u = static_cast<double>(j) / static_cast<double>(samples - 1);
    const Point cur = evaluate_bezier(curve, u);
    cumulative[j] = cumulative[j - 1] + (cur - prev).norm();
    prev = cur;
  }
  return cumulative;
}

// Polyline length with `subdivisions` uniform parameter steps.
inline double bezier_length(const BezierCurve& curve,
                            std::size_t subdivisions = 10000) {
  return bezier_length_table(curve, subdivisions + 1).back();
}

namespace detail {

// Parameter u at arc position s by linear inverse interpolation of the table.
inline double table_inverse(const std::vector<double>& cumulative, double s) {
  const std::size_t n = cumulative.size();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
  std::size_t j = it == cumulative.begin()
                      ? 0
                      : static_cast<std::size_t>(it - cumulative.begin()) - 1;
  j = std::min(j, n - 2);
  const double span = cumulative[j + 1] - cumulative[j];
  const double frac = span > 0.0 ? (s - cumulative[j]) / span : 0.0;
  return std::clamp(
      (static_cast<double>(j) + frac) / static_cast<double>(n - 1), 0.0, 1.0);
}

inline Point bezier_derivative(const BezierCurve& curve, double u) {
  const double v = 1.0 - u;
  return (3.0 * v * v) * (curve.p1 - curve.p0) +
         (6.0 * v * u) * (curve.p2 - curve.p1) +
         (3.0 * u * u) * (curve.p3 - curve.p2);
}

// Levenberg-Marquardt iterations on the equal-chord system |B(u_i) - B(u_{i-1})| = c,
// i = 1..n-1, with unknowns u_1..u_{n-2} and c. `u` holds all n parameters
// (u_0 = 0, u_{n-1} = 1) and is updated in place. Steps that break the
// parameter ordering or raise the residual norm are rejected.
inline void equal_chord_newton(const BezierCurve& curve, std::vector<double>& u,
                               int max_iterations) {
  const Eigen::Index m = static_cast<Eigen::Index>(u.size()) - 1;
  auto residual = [&](const std::vector<double>& params, double c) {
    Eigen::VectorXd f(m);
    for (Eigen::Index i = 1; i <= m; ++i) {
      f[i - 1] = (evaluate_bezier(curve, params[i]) -
                  evaluate_bezier(curve, params[i - 1]))
                     .norm() -
                 c;
    }
    return f;
  };
  double c = 0.0;
  for (Eigen::Index i = 1; i <= m; ++i) {
    c += (evaluate_bezier(curve, u[i]) - evaluate_bezier(curve, u[i - 1]))
             .norm();
  }
  c /= static_cast<double>(m);
  Eigen::VectorXd f = residual(u, c);
  double lambda = 1e-6;
  for (int it = 0; it < max_iterations && f.norm() > 1e-14 * c; ++it) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 1; i <= m; ++i) {
      const Point d = evaluate_bezier(curve, u[i]) -
                      evaluate_bezier(curve, u[i - 1]);
      const double len = d.norm();
      if (len <= 0.0) return;
      const Point dir = d / len;
      if (i < m) jac(i - 1, i - 1) = dir.dot(bezier_derivative(curve, u[i]));
      if (i > 1) {
        jac(i - 1, i - 2) = -dir.dot(bezier_derivative(curve, u[i - 1]));
      }
      jac(i - 1, m - 1) = -1.0;
    }
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    const Eigen::VectorXd gradient = jac.transpose() * f;
    bool accepted = false;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      Eigen::MatrixXd damped = normal;
      damped.diagonal().array() += lambda * (1.0 + normal.diagonal().array());
      const Eigen::VectorXd delta = damped.partialPivLu().solve(-gradient);
      if (!delta.allFinite()) break;
      std::vector<double> trial = u;
      bool ordered = true;
      for (Eigen::Index i = 1; i < m; ++i) {
        trial[i] = u[i] + delta[i - 1];
        if (!(trial[i] > trial[i - 1]) || trial[i] >= 1.0) ordered = false;
      }
      const double trial_c = c + delta[m - 1];
      if (ordered) {
        const Eigen::VectorXd trial_f = residual(trial, trial_c);
        if (trial_f.norm() < f.norm()) {
          u = std::move(trial);
          c = trial_c;
          f = trial_f;
          lambda = std::max(lambda * 0.1, 1e-12);
          accepted = true;
          continue;
        }
      }
      lambda *= 10.0;
    }
    if (!accepted) return;
  }
}

}  // namespace detail

// Arc-length resampling. Points are first placed at equal arc length via a
// 512-sample chord table with linear inverse interpolation, then shifted
// along the curve until consecutive chords agree (relative spread < 1e-6 or
// 50 sweeps, then Newton on the equal-chord system if still uneven).
// Endpoints are exact; actions are left empty.
inline Trajectory resample_arclength(const BezierCurve& curve,
                                     std::size_t n_points,
                                     std::size_t table_samples = 512,
                                     double dt = 0.05) {
  detail::require(n_points >= 2, "resample_arclength: n_points must be >= 2");
  detail::require(table_samples >= 2,
                  "resample_arclength: table needs >= 2 samples");
  const std::vector<double> cumulative =
      bezier_length_table(curve, table_samples);
  const double total = cumulative.back();
  if (!(total >= 1e-9)) {
    throw DegenerateGeometryError(
        "resample_arclength: curve arc length below 1e-9");
  }

  const std::size_t segments = n_points - 1;
  std::vector<double> arc(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    arc[i] = total * static_cast<double>(i) / static_cast<double>(segments);
  }

  std::vector<double> params(n_points);
  auto place = [&](Trajectory& out) {
    for (std::size_t i = 0; i < n_points; ++i) {
      params[i] = i == 0             ? 0.0
                  : i == segments    ? 1.0
                                     : detail::table_inverse(cumulative, arc[i]);
      out.states[i] = evaluate_bezier(curve, params[i]);
    }
    out.states.front() = curve.p0;
    out.states.back() = curve.p3;
  };

  Trajectory traj;
  traj.dt = dt;
  traj.states.resize(n_points);
  place(traj);

  std::vector<double> chord_cum(n_points, 0.0);
  auto chord_spread = [&](const Trajectory& t) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t i = 1; i < n_points; ++i) {
      const double len = (t.states[i] - t.states[i - 1]).norm();
      chord_cum[i] = chord_cum[i - 1] + len;
      lo = std::min(lo, len);
      hi = std::max(hi, len);
    }
    return hi > 0.0 ? (hi - lo) / hi : 0.0;
  };

  double spread = chord_spread(traj);
  for (int sweep = 0; sweep < 50 && n_points > 2 && spread > 1e-6; ++sweep) {
    const double step = chord_cum.back() / static_cast<double>(segments);
    for (std::size_t i = 1; i < segments; ++i) {
      arc[i] += step * static_cast<double>(i) - chord_cum[i];
      arc[i] = std::clamp(arc[i], arc[i - 1], total);
    }
    place(traj);
    spread = chord_spread(traj);
  }
  if (spread > 1e-6) {
    detail::equal_chord_newton(curve, params, 100);
    Trajectory refined = traj;
    for (std::size_t i = 1; i < segments; ++i) {
      refined.states[i] = evaluate_bezier(curve, params[i]);
    }
    if (chord_spread(refined) < spread) traj = std::move(refined);
  }
  return traj;
}

// Perpendicular distance from p to the infinite line through a and b.
inline double distance_to_line(const Point& p, const Point& a,
                               const Point& b) {
  const Point dir = b - a;
  const double len2 = dir.squaredNorm();
  const Point rel = p - a;
  const Point perp = rel - (rel.dot(dir) / len2) * dir;
  return perp.norm();
}

// Distance from p to the closed segment [a, b].
inline double distance_to_segment(const Point& p, const Point& a,
                                  const Point& b) {
  const Point dir = b - a;
  const double len2 = dir.squaredNorm();
  if (len2 <= 0.0) return (p - a).norm();
  const double s = std::clamp((p - a).dot(dir) / len2, 0.0, 1.0);
  return (p - (a + s * dir)).norm();
}

// State of maximum perpendicular deviation from the start->goal chord.
// Ties go to the earliest index.
inline DeviationDescriptor deviation_descriptor(const Trajectory& traj,
                                                const Point& start,
                                                const Point& goal) {
  detail::require(!traj.states.empty(),
                  "deviation_descriptor: empty trajectory");
  if ((goal - start).norm() <= 0.0) {
    throw DegenerateGeometryError(
        "deviation_descriptor: start and goal coincide");
  }
  DeviationDescriptor best;
  best.position = traj.states.front();
  best.magnitude = distance_to_line(traj.states.front(), start, goal);
  best.index = 0;
  for (std::size_t i = 1; i < traj.states.size(); ++i) {
    const double d = distance_to_line(traj.states[i], start, goal);
    if (d > best.magnitude) {
      best.magnitude = d;
      best.position = traj.states[i];
      best.index = i;
    }
  }
  return best;
}

// Indices picked by subsample_path: i*(T-1)/(k-1) rounded half up, so the
// first and last states are always included. k == 1 keeps the final state.
inline std::vector<std::size_t> subsample_indices(std::size_t length,
                                                  std::size_t k) {
  detail::require(k >= 1, "subsample_path: k must be positive");
  if (k > length) {
    throw InsufficientLengthError("subsample_path: k=" + std::to_string(k) +
                                  " exceeds trajectory length " +
                                  std::to_string(length));
  }
  std::vector<std::size_t> idx(k);
  if (k == 1) {
    idx[0] = length - 1;
    return idx;
  }
  const std::size_t span = length - 1;
  const std::size_t den = k - 1;
  for (std::size_t i = 0; i < k; ++i) {
    idx[i] = (2 * i * span + den) / (2 * den);
  }
  return idx;
}

inline Path subsample_path(const Trajectory& traj, std::size_t k) {
  Path path;
  for (std::size_t i : subsample_indices(traj.size(), k)) {
    path.waypoints.push_back(traj.states[i]);
  }
  return path;
}

inline double path_length(const std::vector<Point>& points) {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    total += (points[i] - points[i - 1]).norm();
  }
  return total;
}

// Straight-line trajectory of n states from a to b, equal spacing.
inline Trajectory straight_line(const Point& a, const Point& b, std::size_t n,
                                double dt = 0.05) {
  detail::require(n >= 2, "straight_line: n must be >= 2");
  Trajectory traj;
  traj.dt = dt;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(n - 1);
    traj.states.push_back(a + s * (b - a));
  }
  traj.states.back() = b;
  return traj;
}

}  // namespace legimod

#endif  // LEGIMOD_GEOMETRY_HPP_
