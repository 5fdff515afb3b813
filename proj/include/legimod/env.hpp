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

// Block-reaching environments: a velocity-controlled point mass in the unit
// square or cube that must reach one of two blocks.

#ifndef LEGIMOD_ENV_HPP_
#define LEGIMOD_ENV_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "legimod/errors.hpp"
#include "legimod/geometry.hpp"
#include "legimod/ipf.hpp"

namespace legimod {

struct Dynamics {
  double dt = 0.05;             // seconds per step
  double action_bound = 1.5;    // per-axis |a| in units/s
  double success_radius = 0.05;
  std::size_t max_steps = 200;

  void validate() const {
    detail::require(dt > 0.0, "Dynamics: dt must be positive");
    detail::require(action_bound > 0.0,
                    "Dynamics: action bound must be positive");
    detail::require(success_radius > 0.0,
                    "Dynamics: success radius must be positive");
  }
};

// Everything a scene file carries: geometry, likelihood width, dynamics.
struct SceneConfig {
  GoalScene scene;
  double sigma = 0.0;
  Dynamics dynamics;

  int dim() const { return scene.dim(); }

  SceneConfig with_intended(std::size_t index) const {
    SceneConfig copy = *this;
    copy.scene = scene.with_intended(index);
    return copy;
  }

  // The first non-intended goal; the distractor of a two-goal scene.
  const Point& distractor() const {
    return scene.goals[scene.intended == 0 ? 1 : 0];
  }

  void validate() const {
    scene.validate();
    check_sigma(sigma);
    dynamics.validate();
  }
};

enum class SceneVariant { k2dDefault, k3dDefault, kCustom };

struct CustomSceneParams {
  Point start;
  std::vector<Point> goals;
  std::size_t intended = 0;
  Box bounds;
  std::optional<double> sigma;
  Dynamics dynamics;
};

// Default layouts are symmetric about x = 0.5 with two adjacent blocks.
//   2d: unit square, start (0.5, 0.1), R = (0.3, 0.9), G = (0.7, 0.9)
//   3d: unit cube, start (0.5, 0.5, 0.1), R = (0.3, 0.5, 0.9),
//       G = (0.7, 0.5, 0.9)
// Sigma defaults to 0.2 x the nearest-goal distance.
inline SceneConfig make_scene(SceneVariant variant,
                              const std::optional<CustomSceneParams>& custom =
                                  std::nullopt,
                              std::size_t intended = 0) {
  SceneConfig cfg;
  switch (variant) {
    case SceneVariant::k2dDefault:
      cfg.scene.start = make_point({0.5, 0.1});
      cfg.scene.goals = {make_point({0.3, 0.9}), make_point({0.7, 0.9})};
      cfg.scene.bounds = Box::unit(2);
      cfg.scene.intended = intended;
      break;
    case SceneVariant::k3dDefault:
      cfg.scene.start = make_point({0.5, 0.5, 0.1});
      cfg.scene.goals = {make_point({0.3, 0.5, 0.9}),
                         make_point({0.7, 0.5, 0.9})};
      cfg.scene.bounds = Box::unit(3);
      cfg.scene.intended = intended;
      break;
    case SceneVariant::kCustom:
      if (!custom) throw DomainError("make_scene: custom variant needs params");
      cfg.scene.start = custom->start;
      cfg.scene.goals = custom->goals;
      cfg.scene.intended = custom->intended;
      cfg.scene.bounds = custom->bounds;
      cfg.dynamics = custom->dynamics;
      break;
  }
  cfg.scene.validate();
  cfg.sigma = custom && custom->sigma ? *custom->sigma
                                      : default_sigma(cfg.scene);
  cfg.validate();
  return cfg;
}

enum class EpisodeStatus { kRunning, kSuccess, kTimeout };

struct EnvState {
  Point position;
  std::size_t step_count = 0;
  EpisodeStatus status = EpisodeStatus::kRunning;

  bool done() const { return status != EpisodeStatus::kRunning; }
};

inline EnvState reset(const SceneConfig& cfg) {
  EnvState s;
  s.position = cfg.scene.start;
  if (cfg.dynamics.max_steps == 0) s.status = EpisodeStatus::kTimeout;
  return s;
}

inline Point clip_action(const Point& action, double bound) {
  return action.cwiseMax(-bound).cwiseMin(bound);
}

// x' = clamp(x + clip(a) dt) to the workspace; success inside the radius of
// the intended goal, timeout once max_steps is reached.
inline EnvState step(const EnvState& state, const Point& action,
                     const SceneConfig& cfg) {
  if (state.done()) throw UsageError("step: episode already terminated");
  detail::require(action.size() == cfg.dim(), "step: action dimension");
  EnvState next;
  next.position = cfg.scene.bounds.clamp(
      state.position +
      clip_action(action, cfg.dynamics.action_bound) * cfg.dynamics.dt);
  next.step_count = state.step_count + 1;
  if ((next.position - cfg.scene.intended_goal()).norm() <=
      cfg.dynamics.success_radius) {
    next.status = EpisodeStatus::kSuccess;
  } else if (next.step_count >= cfg.dynamics.max_steps) {
    next.status = EpisodeStatus::kTimeout;
  }
  return next;
}

// Scripted agent moving along the start->goal chord at constant speed,
// covering the chord in `n_states - 1` steps, until success or timeout.
inline Trajectory scripted_straight_line(const SceneConfig& cfg,
                                         std::size_t n_states = 100) {
  detail::require(n_states >= 2, "scripted_straight_line: n_states >= 2");
  const Point velocity = (cfg.scene.intended_goal() - cfg.scene.start) /
                         (static_cast<double>(n_states - 1) * cfg.dynamics.dt);
  Trajectory traj;
  traj.dt = cfg.dynamics.dt;
  EnvState s = reset(cfg);
  traj.states.push_back(s.position);
  while (!s.done()) {
    const Point a = clip_action(velocity, cfg.dynamics.action_bound);
    s = step(s, a, cfg);
    traj.actions.push_back(a);
    traj.states.push_back(s.position);
  }
  return traj;
}

}  // namespace legimod

#endif  // LEGIMOD_ENV_HPP_
