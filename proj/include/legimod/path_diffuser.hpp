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

// Stage 1: generates k-waypoint paths conditioned on start, goal, pooled
// potential-field features and a commanded legibility level.

#ifndef LEGIMOD_PATH_DIFFUSER_HPP_
#define LEGIMOD_PATH_DIFFUSER_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "legimod/diffusion.hpp"
#include "legimod/env.hpp"
#include "legimod/errors.hpp"
#include "legimod/geometry.hpp"
#include "legimod/ipf.hpp"
#include "legimod/qd_dataset.hpp"

namespace legimod {

// 8x8 in 2D, 4x4x4 in 3D.
inline std::vector<std::size_t> default_pool(int dim) {
  return dim == 2 ? std::vector<std::size_t>{8, 8}
                  : std::vector<std::size_t>{4, 4, 4};
}

// Average-pools the potential grid to `pool` cells per axis and divides by
// the grid's maximum potential, giving values in [0, 1]. Output order
// follows the grid (axis 0 fastest). Pooled cell i on an axis with n grid
// cells and p pooled cells averages grid cells [i n / p, (i + 1) n / p).
inline VectorXd encode_ipf_features(const IpfGrid& grid,
                                    const std::vector<std::size_t>& pool) {
  if (grid.values.empty()) throw DomainError("encode_ipf_features: empty grid");
  if (pool.size() != grid.resolution.size()) {
    throw DomainError("encode_ipf_features: pool needs one count per axis");
  }
  for (std::size_t a = 0; a < pool.size(); ++a) {
    if (pool[a] < 1 || pool[a] > grid.resolution[a]) {
      throw DomainError(
          "encode_ipf_features: pooled resolution must coarsen the grid");
    }
  }
  std::size_t n_out = 1;
  for (std::size_t p : pool) n_out *= p;
  const double max_value = grid.max_value();
  const double scale = max_value > 0.0 ? 1.0 / max_value : 1.0;

  VectorXd out(static_cast<Eigen::Index>(n_out));
  const int d = grid.dim();
  std::vector<std::size_t> pooled(d);
  std::vector<std::size_t> cell(d);
  for (std::size_t o = 0; o < n_out; ++o) {
    std::size_t rem = o;
    std::vector<std::size_t> lo(d), hi(d);
    for (int a = 0; a < d; ++a) {
      pooled[a] = rem % pool[a];
      rem /= pool[a];
      lo[a] = pooled[a] * grid.resolution[a] / pool[a];
      hi[a] = (pooled[a] + 1) * grid.resolution[a] / pool[a];
    }
    double acc = 0.0;
    std::size_t count = 0;
    cell = lo;
    while (true) {
      acc += grid.at(cell);
      ++count;
      int a = 0;
      for (; a < d; ++a) {
        if (++cell[a] < hi[a]) break;
        cell[a] = lo[a];
      }
      if (a == d) break;
    }
    out[static_cast<Eigen::Index>(o)] =
        acc / static_cast<double>(count) * scale;
  }
  return out;
}

// Workspace coordinates mapped to [-1, 1] by the scene bounds.
inline VectorXd bounds_normalized(const Point& p, const Box& bounds) {
  VectorXd out(p.size());
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    out[a] = 2.0 * (p[a] - bounds.min[a]) / (bounds.max[a] - bounds.min[a]) -
             1.0;
  }
  return out;
}

struct PathDiffuserConfig {
  std::size_t k = kDefaultPathLength;
  std::vector<std::size_t> grid_resolution;  // empty: default_grid_resolution
  std::vector<std::size_t> pool;             // empty: default_pool
  int ell_repeat = 4;
  int hidden = 128;
  int blocks = 3;
  int time_embed = 16;
  int cond_width = 64;
  std::size_t diffusion_steps = 100;
  TrainConfig train;
  double clip = 1.0;
  double start_snap_radius = 0.1;
  double goal_miss_radius = 0.2;
};

struct PathDiffuser {
  DiffusionModel model;
  PathDiffuserConfig config;
  int dim = 2;
};

// [start (d) | goal (d) | ipf (pooled count) | ell (ell_repeat)]
inline ContextLayout stage1_layout(int dim, int features, int ell_repeat) {
  ContextLayout layout;
  layout.add("start", dim);
  layout.add("goal", dim);
  layout.add("ipf", features);
  layout.add("ell", ell_repeat);
  return layout;
}

inline std::vector<std::size_t> resolved_grid(const PathDiffuserConfig& c,
                                              int dim) {
  return c.grid_resolution.empty() ? default_grid_resolution(dim)
                                   : c.grid_resolution;
}

inline std::vector<std::size_t> resolved_pool(const PathDiffuserConfig& c,
                                              int dim) {
  return c.pool.empty() ? default_pool(dim) : c.pool;
}

// Pooled features of the scene's rasterized potential field.
inline VectorXd scene_features(const SceneConfig& cfg,
                               const PathDiffuserConfig& config) {
  const IpfGrid grid = rasterize(cfg.scene, resolved_grid(config, cfg.dim()),
                                 cfg.sigma);
  return encode_ipf_features(grid, resolved_pool(config, cfg.dim()));
}

// Context for one scene and commanded level; ell is clamped to [-1, 1].
inline VectorXd stage1_context(const SceneConfig& cfg,
                               const VectorXd& features, double ell,
                               int ell_repeat) {
  const int d = cfg.dim();
  const ContextLayout layout =
      stage1_layout(d, static_cast<int>(features.size()), ell_repeat);
  VectorXd c(layout.size());
  c.segment(layout.field("start").offset, d) =
      bounds_normalized(cfg.scene.start, cfg.scene.bounds);
  c.segment(layout.field("goal").offset, d) =
      bounds_normalized(cfg.scene.intended_goal(), cfg.scene.bounds);
  c.segment(layout.field("ipf").offset, features.size()) = features;
  c.segment(layout.field("ell").offset, ell_repeat)
      .setConstant(std::clamp(ell, -1.0, 1.0));
  return c;
}

inline VectorXd flatten(const std::vector<Point>& points) {
  if (points.empty()) return VectorXd();
  const Eigen::Index d = points.front().size();
  VectorXd v(d * static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    v.segment(static_cast<Eigen::Index>(i) * d, d) = points[i];
  }
  return v;
}

inline std::vector<Point> unflatten(const VectorXd& v, int dim) {
  std::vector<Point> points(static_cast<std::size_t>(v.size() / dim));
  for (std::size_t i = 0; i < points.size(); ++i) {
    points[i] = v.segment(static_cast<Eigen::Index>(i) * dim, dim);
  }
  return points;
}

// Trains the denoiser on flattened record paths (normalized per axis) with
// one context per record built from its scene and label.
inline PathDiffuser train_stage1(const Dataset& dataset,
                                 const PathDiffuserConfig& config) {
  detail::require(!dataset.records.empty(), "train_stage1: empty dataset");
  const int dim = dataset.scenes.at(dataset.records.front().scene_id).dim();
  std::map<std::size_t, VectorXd> features;
  for (std::size_t s = 0; s < dataset.scenes.size(); ++s) {
    detail::require(dataset.scenes[s].dim() == dim,
                    "train_stage1: records must share one dimension");
    features[s] = scene_features(dataset.scenes[s], config);
  }
  const int n_features = static_cast<int>(features.begin()->second.size());

  const Eigen::Index n = static_cast<Eigen::Index>(dataset.records.size());
  const Eigen::Index data_dim = static_cast<Eigen::Index>(config.k) * dim;
  const ContextLayout layout =
      stage1_layout(dim, n_features, config.ell_repeat);
  MatrixXd data(data_dim, n);
  MatrixXd context(layout.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const DatasetRecord& r = dataset.records[static_cast<std::size_t>(i)];
    detail::require(r.path.size() == config.k,
                    "train_stage1: record path length differs from k");
    data.col(i) = flatten(r.path.waypoints);
    context.col(i) =
        stage1_context(dataset.scenes[r.scene_id], features.at(r.scene_id),
                       r.label.normalized, config.ell_repeat);
  }

  PathDiffuser out;
  out.config = config;
  out.dim = dim;
  DiffusionModel& m = out.model;
  m.kind = "path-diffuser";
  m.layout = layout;
  m.schedule = NoiseSchedule::scaled_linear(config.diffusion_steps);
  m.norm = AxisNormalizer::fit(data, dim);
  m.seed = config.train.seed;
  m.train_steps = config.train.steps;
  DenoiserConfig arch{static_cast<int>(data_dim), layout.size(),
                      config.hidden,              config.blocks,
                      config.time_embed,          config.cond_width};
  m.net = DenoiserNet(arch, config.train.seed);
  const TrainResult result = train_denoiser(
      m.net, m.norm.normalize_columns(data), context, m.schedule, config.train);
  m.final_loss = result.final_loss;
  return out;
}

struct GeneratedPath {
  Path path;
  double ell = 0.0;
  bool start_snapped = false;
  bool start_flagged = false;  // first waypoint beyond the snap radius
  bool goal_miss = false;      // final waypoint beyond the miss radius
  double goal_distance = 0.0;
};

inline GeneratedPath generate_path(const PathDiffuser& diffuser,
                                   const SceneConfig& cfg, double ell,
                                   std::uint64_t seed) {
  if (!(ell >= -1.0 && ell <= 1.0)) {
    throw DomainError("generate_path: ell must lie in [-1, 1]");
  }
  if (cfg.dim() != diffuser.dim) {
    throw DomainError("generate_path: scene dimension differs from model");
  }
  const PathDiffuserConfig& c = diffuser.config;
  const VectorXd ctx =
      stage1_context(cfg, scene_features(cfg, c), ell, c.ell_repeat);
  detail::require(ctx.size() == diffuser.model.layout.size(),
                  "generate_path: context layout mismatch");
  const VectorXd raw = sample(diffuser.model.net, ctx, diffuser.model.schedule,
                              seed, SampleOptions{c.clip});
  GeneratedPath out;
  out.ell = ell;
  out.path.waypoints = unflatten(diffuser.model.norm.denormalize(raw), cfg.dim());
  Point& first = out.path.waypoints.front();
  if ((first - cfg.scene.start).norm() <= c.start_snap_radius) {
    first = cfg.scene.start;
    out.start_snapped = true;
  } else {
    out.start_flagged = true;
  }
  out.goal_distance =
      (out.path.waypoints.back() - cfg.scene.intended_goal()).norm();
  out.goal_miss = out.goal_distance > c.goal_miss_radius;
  return out;
}

}  // namespace legimod

#endif  // LEGIMOD_PATH_DIFFUSER_HPP_
