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

// Quality-diversity trajectory dataset. Cubic Bezier candidates are keyed
// by the position of their largest deviation from the start->goal chord into
// a uniform grid archive; each cell keeps the candidate with the highest
// training legibility score. Survivors are rank-labelled per target.

#ifndef LEGIMOD_QD_DATASET_HPP_
#define LEGIMOD_QD_DATASET_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "legimod/env.hpp"
#include "legimod/errors.hpp"
#include "legimod/geometry.hpp"
#include "legimod/ipf.hpp"
#include "legimod/scoring.hpp"

namespace legimod {

inline constexpr std::size_t kDefaultTrajectoryPoints = 100;
inline constexpr std::size_t kDefaultPathLength = 8;

// 10x10 in 2D, 6x6x6 in 3D.
inline std::vector<std::size_t> default_cell_grid(int dim) {
  return dim == 2 ? std::vector<std::size_t>{10, 10}
                  : std::vector<std::size_t>{6, 6, 6};
}

inline std::mt19937_64 seeded_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

// Cubic Bezier from scene.start to g* with both control points uniform in
// `control_bounds`.
inline BezierCurve sample_curve(const GoalScene& scene, std::uint64_t seed,
                                const Box& control_bounds) {
  detail::require(control_bounds.dim() == scene.dim(),
                  "sample_curve: control bounds dimension");
  std::mt19937_64 rng = seeded_engine(seed);
  auto draw = [&] {
    Point p(scene.dim());
    for (int a = 0; a < scene.dim(); ++a) {
      std::uniform_real_distribution<double> u(control_bounds.min[a],
                                               control_bounds.max[a]);
      p[a] = u(rng);
    }
    return p;
  };
  BezierCurve curve;
  curve.p0 = scene.start;
  curve.p1 = draw();
  curve.p2 = draw();
  curve.p3 = scene.intended_goal();
  return curve;
}

inline Trajectory sample_candidate(const GoalScene& scene, std::uint64_t seed,
                                   const Box& control_bounds,
                                   std::size_t n_points =
                                       kDefaultTrajectoryPoints,
                                   double dt = 0.05) {
  detail::require(scene.bounds.contains(control_bounds.min, 1e-12) &&
                      scene.bounds.contains(control_bounds.max, 1e-12),
                  "sample_candidate: control bounds must lie within the "
                  "workspace");
  return resample_arclength(sample_curve(scene, seed, control_bounds),
                            n_points, 512, dt);
}

enum class InsertOutcome { kNewCell, kImproved, kRejected };

inline const char* to_string(InsertOutcome o) {
  switch (o) {
    case InsertOutcome::kNewCell:
      return "new_cell";
    case InsertOutcome::kImproved:
      return "improved";
    case InsertOutcome::kRejected:
      return "rejected";
  }
  return "?";
}

struct Elite {
  Trajectory trajectory;
  double lp_raw = 0.0;
  DeviationDescriptor descriptor;
  std::uint64_t seed = 0;
};

struct InsertionEvent {
  std::optional<std::size_t> cell;  // empty for out-of-bounds rejections
  InsertOutcome outcome = InsertOutcome::kRejected;
  double lp_raw = 0.0;
  double cell_quality = 0.0;  // incumbent quality after the insertion
};

// Descriptor-indexed elite archive over the scene's workspace bounds.
class Archive {
 public:
  Archive(GoalScene scene, std::vector<std::size_t> cell_grid,
          bool keep_log = false)
      : scene_(std::move(scene)),
        cell_grid_(std::move(cell_grid)),
        keep_log_(keep_log) {
    scene_.validate();
    detail::require(cell_grid_.size() == static_cast<std::size_t>(scene_.dim()),
                    "Archive: cell grid needs one count per axis");
    for (std::size_t c : cell_grid_) {
      detail::require(c >= 1, "Archive: cell counts must be positive");
    }
  }

  const GoalScene& scene() const { return scene_; }
  const std::vector<std::size_t>& cell_grid() const { return cell_grid_; }
  const std::map<std::size_t, Elite>& cells() const { return cells_; }
  std::size_t fill_count() const { return cells_.size(); }
  std::size_t out_of_bounds() const { return out_of_bounds_; }
  const std::vector<InsertionEvent>& log() const { return log_; }

  std::size_t cell_count() const {
    std::size_t n = 1;
    for (std::size_t c : cell_grid_) n *= c;
    return n;
  }

  // Flat cell index (axis 0 fastest), or nullopt outside the bounds. The
  // upper face belongs to the last cell.
  std::optional<std::size_t> cell_index(const Point& p) const {
    const Box& b = scene_.bounds;
    if (!b.contains(p)) return std::nullopt;
    std::size_t idx = 0;
    for (int a = scene_.dim() - 1; a >= 0; --a) {
      const double rel = (p[a] - b.min[a]) / (b.max[a] - b.min[a]);
      std::size_t c = static_cast<std::size_t>(
          std::floor(rel * static_cast<double>(cell_grid_[a])));
      c = std::min(c, cell_grid_[a] - 1);
      idx = idx * cell_grid_[a] + c;
    }
    return idx;
  }

  // Strict improvement: a quality tie keeps the incumbent.
  InsertOutcome insert(const Trajectory& traj, double sigma, double alpha,
                       std::uint64_t seed = 0) {
    detail::require(traj.size() >= 2, "archive_insert: trajectory too short");
    detail::require(
        (traj.states.front() - scene_.start).norm() <= 1e-9 &&
            (traj.states.back() - scene_.intended_goal()).norm() <= 1e-9,
        "archive_insert: trajectory endpoints must match start and goal");
    const DeviationDescriptor desc =
        deviation_descriptor(traj, scene_.start, scene_.intended_goal());
    const std::optional<std::size_t> cell = cell_index(desc.position);
    if (!cell) {
      ++out_of_bounds_;
      record({std::nullopt, InsertOutcome::kRejected, 0.0, 0.0});
      return InsertOutcome::kRejected;
    }
    const double lp = score_lp_train(traj, scene_, sigma, alpha);
    auto it = cells_.find(*cell);
    InsertOutcome outcome;
    if (it == cells_.end()) {
      cells_.emplace(*cell, Elite{traj, lp, desc, seed});
      outcome = InsertOutcome::kNewCell;
    } else if (lp > it->second.lp_raw) {
      it->second = Elite{traj, lp, desc, seed};
      outcome = InsertOutcome::kImproved;
    } else {
      outcome = InsertOutcome::kRejected;
    }
    record({cell, outcome, lp, cells_.at(*cell).lp_raw});
    return outcome;
  }

 private:
  void record(const InsertionEvent& e) {
    if (keep_log_) log_.push_back(e);
  }

  GoalScene scene_;
  std::vector<std::size_t> cell_grid_;
  bool keep_log_ = false;
  std::map<std::size_t, Elite> cells_;
  std::size_t out_of_bounds_ = 0;
  std::vector<InsertionEvent> log_;
};

inline InsertOutcome archive_insert(Archive& archive, const Trajectory& traj,
                                    double sigma, double alpha) {
  return archive.insert(traj, sigma, alpha);
}

struct DatasetConfig {
  std::vector<std::size_t> cells;  // empty: default grid for the dimension
  double alpha = kDefaultAlpha;
  std::size_t k = kDefaultPathLength;
  std::uint64_t seed = 0;
  std::size_t budget = 10000;
  std::size_t n_points = kDefaultTrajectoryPoints;
  std::optional<Box> control_bounds;  // empty: workspace bounds
};

struct DatasetRecord {
  std::size_t scene_id = 0;  // index into Dataset::scenes
  std::uint64_t seed = 0;
  Trajectory trajectory;
  Path path;
  LegibilityLabel label;
  DeviationDescriptor descriptor;
  std::size_t cell = 0;
};

// One cohort per scene (target); labels are ranked within a cohort.
struct Dataset {
  DatasetConfig config;
  std::vector<SceneConfig> scenes;
  std::vector<double> straight_line_ell;  // per scene
  std::vector<DatasetRecord> records;

  std::vector<const DatasetRecord*> cohort(std::size_t scene_id) const {
    std::vector<const DatasetRecord*> out;
    for (const DatasetRecord& r : records) {
      if (r.scene_id == scene_id) out.push_back(&r);
    }
    return out;
  }
};

struct DemoResult {
  Trajectory trajectory;
  std::size_t clipped = 0;  // actions that hit the per-axis bound
};

// Inverse dynamics of the velocity-integrator point mass: a_i = (x_{i+1} -
// x_i) / dt, clipped to the action bound. States are replaced by the replay
// of the (possibly clipped) actions so the result is dynamically consistent.
inline DemoResult demo_rollout(const Trajectory& traj,
                               const Dynamics& dynamics) {
  detail::require(traj.size() >= 2, "demo_rollout: trajectory too short");
  dynamics.validate();
  DemoResult result;
  Trajectory& out = result.trajectory;
  out.dt = dynamics.dt;
  out.states.reserve(traj.size());
  out.actions.reserve(traj.size() - 1);
  out.states.push_back(traj.states.front());
  double divergence = 0.0;
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const Point raw = (traj.states[i + 1] - traj.states[i]) / dynamics.dt;
    const Point a = clip_action(raw, dynamics.action_bound);
    if ((a - raw).cwiseAbs().maxCoeff() > 0.0) ++result.clipped;
    out.actions.push_back(a);
    out.states.push_back(out.states.back() + a * dynamics.dt);
    divergence =
        std::max(divergence, (out.states.back() - traj.states[i + 1]).norm());
  }
  if (divergence > 1e-3) {
    throw InfeasibleDemoError(
        "demo_rollout: clipped replay diverges by " +
        std::to_string(divergence) + " (> 1e-3)");
  }
  return result;
}

// Runs `budget` sample/insert iterations for the scene's intended goal.
// Candidate seeds are drawn in order from an engine seeded with
// `config.seed`, so the archive is a pure function of (scene, config).
inline Archive run_archive(const SceneConfig& cfg, const DatasetConfig& config,
                           bool keep_log = false) {
  cfg.validate();
  const std::vector<std::size_t> cells =
      config.cells.empty() ? default_cell_grid(cfg.dim()) : config.cells;
  Archive archive(cfg.scene, cells, keep_log);
  detail::require(config.budget >= archive.cell_count(),
                  "generate_dataset: budget must cover the cell count");
  const Box control = config.control_bounds.value_or(cfg.scene.bounds);
  std::mt19937_64 seeds = seeded_engine(config.seed);
  for (std::size_t it = 0; it < config.budget; ++it) {
    const std::uint64_t s = seeds();
    Trajectory traj;
    try {
      traj = sample_candidate(cfg.scene, s, control, config.n_points,
                              cfg.dynamics.dt);
    } catch (const DegenerateGeometryError&) {
      continue;
    }
    archive.insert(traj, cfg.sigma, config.alpha, s);
  }
  return archive;
}

// One record per occupied cell, sorted by cell index, rank-labelled as one
// cohort, with actions synthesized by demo_rollout.
inline Dataset dataset_from_archive(const SceneConfig& cfg,
                                    const DatasetConfig& config,
                                    const Archive& archive) {
  detail::require(config.k >= 2, "generate_dataset: k must be >= 2");
  detail::require(config.n_points >= config.k,
                  "generate_dataset: n_points must be >= k");
  if (archive.fill_count() < 2) {
    throw CohortTooSmallError("generate_dataset: fewer than 2 occupied cells");
  }
  std::vector<double> raw;
  raw.reserve(archive.fill_count());
  for (const auto& [cell, elite] : archive.cells()) raw.push_back(elite.lp_raw);
  const std::vector<LegibilityLabel> labels = rank_normalize(raw);

  Dataset ds;
  ds.config = config;
  ds.config.cells = archive.cell_grid();
  ds.scenes.push_back(cfg);
  const Trajectory line =
      straight_line(cfg.scene.start, cfg.scene.intended_goal(),
                    config.n_points, cfg.dynamics.dt);
  ds.straight_line_ell.push_back(interpolate_label(
      raw, score_lp_train(line, cfg.scene, cfg.sigma, config.alpha)));
  std::size_t i = 0;
  for (const auto& [cell, elite] : archive.cells()) {
    DatasetRecord rec;
    rec.scene_id = 0;
    rec.seed = elite.seed;
    rec.trajectory = demo_rollout(elite.trajectory, cfg.dynamics).trajectory;
    rec.path = subsample_path(rec.trajectory, config.k);
    rec.label = labels[i++];
    rec.descriptor = elite.descriptor;
    rec.cell = cell;
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

inline Dataset generate_dataset(const SceneConfig& cfg,
                                const DatasetConfig& config) {
  detail::require(config.k >= 2, "generate_dataset: k must be >= 2");
  return dataset_from_archive(cfg, config, run_archive(cfg, config));
}

// One cohort per goal, each goal taking its turn as the intended one.
// Cohort i uses seed config.seed + i.
inline Dataset generate_dataset_all_targets(const SceneConfig& cfg,
                                            const DatasetConfig& config) {
  Dataset all;
  for (std::size_t g = 0; g < cfg.scene.goals.size(); ++g) {
    DatasetConfig c = config;
    c.seed = config.seed + g;
    Dataset part = generate_dataset(cfg.with_intended(g), c);
    if (g == 0) all.config = part.config;
    const std::size_t id = all.scenes.size();
    all.scenes.push_back(part.scenes.front());
    all.straight_line_ell.push_back(part.straight_line_ell.front());
    for (DatasetRecord& r : part.records) {
      r.scene_id = id;
      all.records.push_back(std::move(r));
    }
  }
  return all;
}

}  // namespace legimod

#endif  // LEGIMOD_QD_DATASET_HPP_
