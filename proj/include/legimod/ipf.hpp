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

// Information potential field: Gaussian goal likelihoods, the posterior of
// the intended goal, and its negative log as a potential over the workspace.

#ifndef LEGIMOD_IPF_HPP_
#define LEGIMOD_IPF_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "legimod/errors.hpp"
#include "legimod/geometry.hpp"

namespace legimod {

// Start state, finite goal set and the designated intended goal.
struct GoalScene {
  Point start;
  std::vector<Point> goals;
  std::size_t intended = 0;
  Box bounds;

  int dim() const { return static_cast<int>(start.size()); }
  const Point& intended_goal() const { return goals.at(intended); }

  // The same scene with another goal marked as intended.
  GoalScene with_intended(std::size_t index) const {
    GoalScene copy = *this;
    copy.intended = index;
    copy.validate();
    return copy;
  }

  void validate() const {
    const int d = dim();
    detail::require(d == 2 || d == 3, "GoalScene: dimension must be 2 or 3");
    detail::require(goals.size() >= 2, "GoalScene: needs at least two goals");
    detail::require(intended < goals.size(),
                    "GoalScene: intended index out of range");
    detail::require(bounds.dim() == d && bounds.max.size() == d,
                    "GoalScene: bounds dimension mismatch");
    detail::require((bounds.max.array() > bounds.min.array()).all(),
                    "GoalScene: empty workspace bounds");
    detail::require(start.allFinite() && bounds.contains(start),
                    "GoalScene: start outside workspace bounds");
    for (std::size_t i = 0; i < goals.size(); ++i) {
      detail::require(goals[i].size() == d && goals[i].allFinite(),
                      "GoalScene: goal dimension mismatch");
      detail::require(bounds.contains(goals[i]),
                      "GoalScene: goal outside workspace bounds");
      for (std::size_t j = 0; j < i; ++j) {
        detail::require((goals[i] - goals[j]).norm() > 1e-6,
                        "GoalScene: goals must be pairwise distinct");
      }
    }
  }
};

// 0.2 x the distance between the two nearest goals.
inline double default_sigma(const GoalScene& scene) {
  double nearest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene.goals.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      nearest = std::min(nearest, (scene.goals[i] - scene.goals[j]).norm());
    }
  }
  return 0.2 * nearest;
}

inline void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw DomainError("sigma must be positive and finite");
  }
}

// Isotropic Gaussian density N(x; g, sigma^2 I).
inline double likelihood(const Point& x, const Point& g, double sigma) {
  check_sigma(sigma);
  detail::require(x.size() == g.size(), "likelihood: dimension mismatch");
  const double d = static_cast<double>(x.size());
  const double var = sigma * sigma;
  return std::pow(2.0 * std::numbers::pi * var, -0.5 * d) *
         std::exp(-0.5 * (x - g).squaredNorm() / var);
}

namespace detail {

// Log-likelihoods up to the shared normalizing constant, which cancels in
// the posterior.
inline std::vector<double> goal_log_weights(const Point& x,
                                            const GoalScene& scene,
                                            double sigma) {
  check_sigma(sigma);
  require(x.size() == scene.dim(), "ipf: point dimension mismatch");
  const double inv = 0.5 / (sigma * sigma);
  std::vector<double> w(scene.goals.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = -(x - scene.goals[i]).squaredNorm() * inv;
  }
  return w;
}

inline double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

}  // namespace detail

// P(g|x) for every goal in scene order.
inline std::vector<double> posteriors(const Point& x, const GoalScene& scene,
                                      double sigma) {
  std::vector<double> w = detail::goal_log_weights(x, scene, sigma);
  const double lse = detail::log_sum_exp(w);
  for (double& v : w) v = std::exp(v - lse);
  return w;
}

// P(g*|x), computed in the log domain so it stays finite far from all goals.
inline double posterior(const Point& x, const GoalScene& scene, double sigma) {
  const std::vector<double> w = detail::goal_log_weights(x, scene, sigma);
  return std::exp(w[scene.intended] - detail::log_sum_exp(w));
}

// phi(x|g*) = -log P(g*|x) >= 0.
inline double potential(const Point& x, const GoalScene& scene, double sigma) {
  const std::vector<double> w = detail::goal_log_weights(x, scene, sigma);
  return std::max(0.0, detail::log_sum_exp(w) - w[scene.intended]);
}

// Potential sampled at cell centers over the scene bounds.
//
// Values are stored with axis 0 fastest: index = (iz * ny + iy) * nx + ix,
// i.e. row-major rows along x, then plane-major along z for 3D grids.
struct IpfGrid {
  Box bounds;
  std::vector<std::size_t> resolution;  // cells per axis, axis 0 first
  std::vector<double> values;
  double sigma = 0.0;
  std::vector<Point> goals;
  std::size_t intended = 0;

  int dim() const { return static_cast<int>(resolution.size()); }

  std::size_t cell_count() const {
    std::size_t n = 1;
    for (std::size_t r : resolution) n *= r;
    return n;
  }

  Point cell_size() const {
    Point size = bounds.extent();
    for (int a = 0; a < dim(); ++a) {
      size[a] /= static_cast<double>(resolution[a]);
    }
    return size;
  }

  std::size_t flat_index(const std::vector<std::size_t>& cell) const {
    std::size_t idx = 0;
    for (int a = dim() - 1; a >= 0; --a) {
      idx = idx * resolution[a] + cell[a];
    }
    return idx;
  }

  std::vector<std::size_t> cell_of_index(std::size_t flat) const {
    std::vector<std::size_t> cell(resolution.size());
    for (std::size_t a = 0; a < resolution.size(); ++a) {
      cell[a] = flat % resolution[a];
      flat /= resolution[a];
    }
    return cell;
  }

  Point cell_center(const std::vector<std::size_t>& cell) const {
    const Point size = cell_size();
    Point p = bounds.min;
    for (int a = 0; a < dim(); ++a) {
      p[a] += (static_cast<double>(cell[a]) + 0.5) * size[a];
    }
    return p;
  }

  // Cell containing p (clamped to the grid).
  std::vector<std::size_t> cell_containing(const Point& p) const {
    const Point size = cell_size();
    std::vector<std::size_t> cell(resolution.size());
    for (int a = 0; a < dim(); ++a) {
      const double f = std::floor((p[a] - bounds.min[a]) / size[a]);
      cell[a] = static_cast<std::size_t>(std::clamp(
          f, 0.0, static_cast<double>(resolution[a] - 1)));
    }
    return cell;
  }

  double at(const std::vector<std::size_t>& cell) const {
    return values[flat_index(cell)];
  }

  // Multilinear interpolation between cell centers; clamped at the border.
  double interpolate(const Point& p) const {
    const Point size = cell_size();
    const int d = dim();
    std::vector<std::size_t> base(d);
    std::vector<double> frac(d);
    for (int a = 0; a < d; ++a) {
      const double max_coord = static_cast<double>(resolution[a] - 1);
      const double c = std::clamp((p[a] - bounds.min[a]) / size[a] - 0.5, 0.0,
                                  max_coord);
      const double f = std::min(std::floor(c), max_coord - 1.0);
      base[a] = static_cast<std::size_t>(f);
      frac[a] = c - f;
    }
    double acc = 0.0;
    std::vector<std::size_t> cell(d);
    for (unsigned corner = 0; corner < (1u << d); ++corner) {
      double w = 1.0;
      for (int a = 0; a < d; ++a) {
        const bool hi = (corner >> a) & 1u;
        cell[a] = base[a] + (hi ? 1 : 0);
        w *= hi ? frac[a] : 1.0 - frac[a];
      }
      acc += w * at(cell);
    }
    return acc;
  }

  double max_value() const {
    return values.empty() ? 0.0
                          : *std::max_element(values.begin(), values.end());
  }
};

inline IpfGrid rasterize(const GoalScene& scene,
                         const std::vector<std::size_t>& resolution,
                         double sigma) {
  check_sigma(sigma);
  scene.validate();
  if (resolution.size() != static_cast<std::size_t>(scene.dim())) {
    throw DomainError("rasterize: resolution must list one count per axis");
  }
  for (std::size_t r : resolution) {
    if (r < 2) throw DomainError("rasterize: every axis needs >= 2 cells");
  }
  IpfGrid grid;
  grid.bounds = scene.bounds;
  grid.resolution = resolution;
  grid.sigma = sigma;
  grid.goals = scene.goals;
  grid.intended = scene.intended;
  grid.values.resize(grid.cell_count());
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    grid.values[i] =
        potential(grid.cell_center(grid.cell_of_index(i)), scene, sigma);
  }
  return grid;
}

// 64x64 in 2D, 32x32x32 in 3D.
inline std::vector<std::size_t> default_grid_resolution(int dim) {
  return dim == 2 ? std::vector<std::size_t>{64, 64}
                  : std::vector<std::size_t>{32, 32, 32};
}

}  // namespace legimod

#endif  // LEGIMOD_IPF_HPP_
