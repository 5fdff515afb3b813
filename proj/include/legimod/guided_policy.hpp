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

// Stage 2: a diffusion policy that maps (state history, goal, path) to an
// H-step chunk of velocity commands, executed receding-horizon.

#ifndef LEGIMOD_GUIDED_POLICY_HPP_
#define LEGIMOD_GUIDED_POLICY_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "legimod/diffusion.hpp"
#include "legimod/env.hpp"
#include "legimod/errors.hpp"
#include "legimod/geometry.hpp"
#include "legimod/path_diffuser.hpp"
#include "legimod/qd_dataset.hpp"

namespace legimod {

struct PolicyConfig {
  std::size_t n_obs = 2;
  std::size_t horizon = 8;  // H
  std::size_t stride = 0;   // chunk spacing in training; 0 means H
  std::size_t k = kDefaultPathLength;
  int hidden = 128;
  int blocks = 3;
  int time_embed = 16;
  int cond_width = 64;
  std::size_t diffusion_steps = 100;
  TrainConfig train;
  double clip = 1.0;

  std::size_t chunk_stride() const { return stride == 0 ? horizon : stride; }
};

struct PolicyObservation {
  std::vector<Point> history;  // oldest first, newest last
  Point goal;
  Path path;
};

struct ActionChunk {
  std::vector<Point> actions;
};

struct GuidedPolicy {
  DiffusionModel model;
  PolicyConfig config;
  int dim = 2;
  Box bounds;          // workspace used to normalize contexts
  double action_bound = 1.5;
};

// The last n_obs states up to index `t`, padded at the front by repeating
// the first state.
inline std::vector<Point> observation_history(const std::vector<Point>& states,
                                              std::size_t t,
                                              std::size_t n_obs) {
  detail::require(t < states.size(), "observation_history: index range");
  std::vector<Point> out;
  out.reserve(n_obs);
  for (std::size_t i = 0; i < n_obs; ++i) {
    const std::size_t back = n_obs - 1 - i;
    out.push_back(back > t ? states.front() : states[t - back]);
  }
  return out;
}

// Action chunks starting every `stride` actions. A chunk running past the
// last action is padded by repeating it. Returns (start index, chunk).
inline std::vector<std::pair<std::size_t, ActionChunk>> slice_chunks(
    const Trajectory& traj, std::size_t horizon, std::size_t stride) {
  detail::require(horizon >= 1 && stride >= 1,
                  "slice_chunks: horizon and stride must be positive");
  if (!traj.has_actions() || traj.actions.empty()) {
    throw DomainError("slice_chunks: trajectory has no actions");
  }
  std::vector<std::pair<std::size_t, ActionChunk>> out;
  const std::size_t n = traj.actions.size();
  for (std::size_t s = 0; s < n; s += stride) {
    ActionChunk chunk;
    for (std::size_t h = 0; h < horizon; ++h) {
      chunk.actions.push_back(traj.actions[std::min(s + h, n - 1)]);
    }
    out.emplace_back(s, std::move(chunk));
  }
  return out;
}

// [history (n_obs d) | goal (d) | path (k d)]
inline ContextLayout stage2_layout(int dim, std::size_t n_obs, std::size_t k) {
  ContextLayout layout;
  layout.add("history", static_cast<int>(n_obs) * dim);
  layout.add("goal", dim);
  layout.add("path", static_cast<int>(k) * dim);
  return layout;
}

inline VectorXd stage2_context(const PolicyObservation& obs, const Box& bounds,
                               std::size_t n_obs, std::size_t k) {
  const int d = obs.goal.size();
  detail::require(obs.history.size() == n_obs,
                  "stage2_context: history length must equal n_obs");
  detail::require(obs.path.size() == k,
                  "stage2_context: path length must equal k");
  const ContextLayout layout = stage2_layout(d, n_obs, k);
  VectorXd c(layout.size());
  const int h0 = layout.field("history").offset;
  for (std::size_t i = 0; i < n_obs; ++i) {
    detail::require(obs.history[i].size() == d,
                    "stage2_context: history dimension");
    c.segment(h0 + static_cast<int>(i) * d, d) =
        bounds_normalized(obs.history[i], bounds);
  }
  c.segment(layout.field("goal").offset, d) = bounds_normalized(obs.goal, bounds);
  const int p0 = layout.field("path").offset;
  for (std::size_t i = 0; i < k; ++i) {
    detail::require(obs.path.waypoints[i].size() == d,
                    "stage2_context: path dimension");
    c.segment(p0 + static_cast<int>(i) * d, d) =
        bounds_normalized(obs.path.waypoints[i], bounds);
  }
  return c;
}

// Trains on action chunks sliced from every record, each paired with the
// observation at its first step and the record's own path.
inline GuidedPolicy train_stage2(const Dataset& dataset,
                                 const PolicyConfig& config) {
  detail::require(!dataset.records.empty(), "train_stage2: empty dataset");
  detail::require(config.n_obs >= 1, "train_stage2: n_obs >= 1");
  const SceneConfig& first_scene =
      dataset.scenes.at(dataset.records.front().scene_id);
  const int dim = first_scene.dim();
  const ContextLayout layout = stage2_layout(dim, config.n_obs, config.k);

  std::vector<VectorXd> xs;
  std::vector<VectorXd> cs;
  for (const DatasetRecord& r : dataset.records) {
    const SceneConfig& sc = dataset.scenes.at(r.scene_id);
    detail::require(sc.dim() == dim, "train_stage2: mixed dimensions");
    if (!r.trajectory.has_actions()) {
      throw DomainError("train_stage2: record without actions");
    }
    for (auto& [s, chunk] :
         slice_chunks(r.trajectory, config.horizon, config.chunk_stride())) {
      PolicyObservation obs{
          observation_history(r.trajectory.states, s, config.n_obs),
          sc.scene.intended_goal(), r.path};
      cs.push_back(stage2_context(obs, first_scene.scene.bounds, config.n_obs,
                                  config.k));
      xs.push_back(flatten(chunk.actions));
    }
  }
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  const Eigen::Index data_dim = static_cast<Eigen::Index>(config.horizon) * dim;
  MatrixXd data(data_dim, n);
  MatrixXd context(layout.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.col(i) = xs[static_cast<std::size_t>(i)];
    context.col(i) = cs[static_cast<std::size_t>(i)];
  }

  GuidedPolicy out;
  out.config = config;
  out.dim = dim;
  out.bounds = first_scene.scene.bounds;
  out.action_bound = first_scene.dynamics.action_bound;
  DiffusionModel& m = out.model;
  m.kind = "guided-policy";
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

// One sampled chunk, clipped to the action bound.
inline ActionChunk act(const GuidedPolicy& policy, const PolicyObservation& obs,
                       std::uint64_t seed) {
  detail::require(obs.goal.size() == policy.dim, "act: goal dimension");
  const PolicyConfig& c = policy.config;
  const VectorXd ctx = stage2_context(obs, policy.bounds, c.n_obs, c.k);
  const VectorXd raw = sample(policy.model.net, ctx, policy.model.schedule,
                              seed, SampleOptions{c.clip});
  ActionChunk chunk;
  for (const Point& a :
       unflatten(policy.model.norm.denormalize(raw), policy.dim)) {
    chunk.actions.push_back(clip_action(a, policy.action_bound));
  }
  return chunk;
}

struct RolloutResult {
  Trajectory trajectory;
  EpisodeStatus status = EpisodeStatus::kRunning;
  std::size_t replans = 0;

  bool success() const { return status == EpisodeStatus::kSuccess; }
};

// Receding-horizon execution: sample a chunk from the current observation,
// run all H actions, re-observe with the same path, repeat. Chunk j uses
// seed + j. The episode ends on success or after max_steps.
inline RolloutResult rollout(const GuidedPolicy& policy, const SceneConfig& cfg,
                             const Path& path, std::size_t max_steps,
                             std::uint64_t seed) {
  if (cfg.dim() != policy.dim) {
    throw DomainError("rollout: scene dimension differs from policy");
  }
  detail::require(path.size() == policy.config.k,
                  "rollout: path length differs from k");
  SceneConfig run = cfg;
  run.dynamics.max_steps = max_steps;
  RolloutResult out;
  out.trajectory.dt = run.dynamics.dt;
  EnvState s = reset(run);
  out.trajectory.states.push_back(s.position);
  while (!s.done()) {
    PolicyObservation obs{
        observation_history(out.trajectory.states,
                            out.trajectory.states.size() - 1,
                            policy.config.n_obs),
        run.scene.intended_goal(), path};
    const ActionChunk chunk = act(policy, obs, seed + out.replans);
    ++out.replans;
    for (const Point& a : chunk.actions) {
      s = step(s, a, run);
      out.trajectory.actions.push_back(a);
      out.trajectory.states.push_back(s.position);
      if (s.done()) break;
    }
  }
  out.status = s.status;
  return out;
}

}  // namespace legimod

#endif  // LEGIMOD_GUIDED_POLICY_HPP_
