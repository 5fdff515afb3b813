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

// JSON / JSON-lines file formats: scenes, potential grids, datasets,
// checkpoints, paths and trajectories.

#ifndef LEGIMOD_IO_HPP_
#define LEGIMOD_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "legimod/diffusion.hpp"
#include "legimod/env.hpp"
#include "legimod/errors.hpp"
#include "legimod/geometry.hpp"
#include "legimod/guided_policy.hpp"
#include "legimod/ipf.hpp"
#include "legimod/path_diffuser.hpp"
#include "legimod/qd_dataset.hpp"

namespace legimod {

using Json = nlohmann::json;

inline constexpr const char* kCheckpointFormat = "legimod-checkpoint/1";
inline constexpr const char* kDatasetFormat = "legimod-dataset/1";
inline constexpr const char* kGridFormat = "legimod-ipf/1";

// ---------------------------------------------------------------------------
// Files.

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw FormatError(what + ": " + e.what());
  }
}

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// Field access with format errors instead of json exceptions.
template <typename T>
T get_field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError(std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw FormatError(std::string("field '") + key + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Elementary values.

inline Json to_json(const Point& p) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p[i]);
  return a;
}

inline Point point_from_json(const Json& j) {
  if (!j.is_array() || j.empty() || j.size() > 3) {
    throw FormatError("point: expected an array of 1-3 numbers");
  }
  Point p(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw FormatError("point: non-numeric coordinate");
    p[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return p;
}

inline Json to_json(const std::vector<Point>& points) {
  Json a = Json::array();
  for (const Point& p : points) a.push_back(to_json(p));
  return a;
}

inline std::vector<Point> points_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("points: expected an array");
  std::vector<Point> out;
  for (const Json& e : j) out.push_back(point_from_json(e));
  return out;
}

inline Json to_json(const Box& b) {
  return {{"min", to_json(b.min)}, {"max", to_json(b.max)}};
}

inline Box box_from_json(const Json& j) {
  return {point_from_json(get_field<Json>(j, "min")),
          point_from_json(get_field<Json>(j, "max"))};
}

inline Json to_json(const VectorXd& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline VectorXd vector_from_json(const Json& j) {
  std::vector<double> v;
  try {
    v = j.get<std::vector<double>>();
  } catch (const Json::exception& e) {
    throw FormatError(std::string("vector: ") + e.what());
  }
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---------------------------------------------------------------------------
// Scenes.

inline Json scene_to_json(const SceneConfig& cfg) {
  return {{"dim", cfg.dim()},
          {"bounds", to_json(cfg.scene.bounds)},
          {"start", to_json(cfg.scene.start)},
          {"goals", to_json(cfg.scene.goals)},
          {"intended", cfg.scene.intended},
          {"sigma", cfg.sigma},
          {"dt", cfg.dynamics.dt},
          {"action_bound", cfg.dynamics.action_bound},
          {"success_radius", cfg.dynamics.success_radius},
          {"max_steps", cfg.dynamics.max_steps}};
}

inline SceneConfig scene_from_json(const Json& j) {
  CustomSceneParams p;
  p.start = point_from_json(get_field<Json>(j, "start"));
  p.goals = points_from_json(get_field<Json>(j, "goals"));
  p.intended = get_field<std::size_t>(j, "intended");
  p.bounds = box_from_json(get_field<Json>(j, "bounds"));
  if (j.contains("sigma")) p.sigma = get_field<double>(j, "sigma");
  if (j.contains("dt")) p.dynamics.dt = get_field<double>(j, "dt");
  if (j.contains("action_bound")) {
    p.dynamics.action_bound = get_field<double>(j, "action_bound");
  }
  if (j.contains("success_radius")) {
    p.dynamics.success_radius = get_field<double>(j, "success_radius");
  }
  if (j.contains("max_steps")) {
    p.dynamics.max_steps = get_field<std::size_t>(j, "max_steps");
  }
  const int dim = get_field<int>(j, "dim");
  if (dim != p.start.size()) throw FormatError("scene: dim disagrees with start");
  return make_scene(SceneVariant::kCustom, p);
}

inline void save_scene(const SceneConfig& cfg,
                       const std::filesystem::path& path) {
  write_text(path, scene_to_json(cfg).dump(2) + "\n");
}

inline SceneConfig load_scene(const std::filesystem::path& path) {
  return scene_from_json(parse_json(read_text(path), path.string()));
}

// ---------------------------------------------------------------------------
// Potential grids: a header line, then a line holding the values.

inline std::string grid_to_jsonl(const IpfGrid& grid) {
  Json header = {{"format", kGridFormat},
                 {"dim", grid.bounds.dim()},
                 {"bounds_min", to_json(grid.bounds.min)},
                 {"bounds_max", to_json(grid.bounds.max)},
                 {"resolution", grid.resolution},
                 {"sigma", grid.sigma},
                 {"goals", to_json(grid.goals)},
                 {"intended", grid.intended}};
  Json values = {{"values", grid.values}};
  return header.dump() + "\n" + values.dump() + "\n";
}

inline IpfGrid grid_from_jsonl(const std::string& text) {
  const std::vector<std::string> lines = split_lines(text);
  if (lines.size() != 2) throw FormatError("grid: expected two lines");
  const Json h = parse_json(lines[0], "grid header");
  if (get_field<std::string>(h, "format") != kGridFormat) {
    throw FormatError("grid: unknown format");
  }
  IpfGrid g;
  g.bounds = {point_from_json(get_field<Json>(h, "bounds_min")),
              point_from_json(get_field<Json>(h, "bounds_max"))};
  g.resolution = get_field<std::vector<std::size_t>>(h, "resolution");
  g.sigma = get_field<double>(h, "sigma");
  g.goals = points_from_json(get_field<Json>(h, "goals"));
  g.intended = get_field<std::size_t>(h, "intended");
  g.values = get_field<std::vector<double>>(parse_json(lines[1], "grid values"),
                                            "values");
  if (g.values.size() != g.cell_count()) {
    throw FormatError("grid: value count does not match resolution");
  }
  return g;
}

// ---------------------------------------------------------------------------
// Datasets: a header line, then one record per line.

inline Json dataset_config_to_json(const DatasetConfig& c) {
  Json j = {{"cells", c.cells}, {"alpha", c.alpha}, {"k", c.k},
            {"seed", c.seed},   {"budget", c.budget},
            {"n_points", c.n_points}};
  if (c.control_bounds) j["control_bounds"] = to_json(*c.control_bounds);
  return j;
}

inline DatasetConfig dataset_config_from_json(const Json& j) {
  DatasetConfig c;
  c.cells = get_field<std::vector<std::size_t>>(j, "cells");
  c.alpha = get_field<double>(j, "alpha");
  c.k = get_field<std::size_t>(j, "k");
  c.seed = get_field<std::uint64_t>(j, "seed");
  c.budget = get_field<std::size_t>(j, "budget");
  c.n_points = get_field<std::size_t>(j, "n_points");
  if (j.contains("control_bounds")) {
    c.control_bounds = box_from_json(j.at("control_bounds"));
  }
  return c;
}

inline Json record_to_json(const DatasetRecord& r) {
  return {{"scene_id", r.scene_id},
          {"seed", r.seed},
          {"cell", r.cell},
          {"states", to_json(r.trajectory.states)},
          {"actions", to_json(r.trajectory.actions)},
          {"dt", r.trajectory.dt},
          {"path", to_json(r.path.waypoints)},
          {"lp_raw", r.label.raw},
          {"lp_rank", r.label.rank},
          {"cohort_size", r.label.cohort_size},
          {"ell", r.label.normalized},
          {"descriptor_pos", to_json(r.descriptor.position)},
          {"descriptor_mag", r.descriptor.magnitude},
          {"descriptor_index", r.descriptor.index}};
}

inline DatasetRecord record_from_json(const Json& j) {
  DatasetRecord r;
  r.scene_id = get_field<std::size_t>(j, "scene_id");
  r.seed = get_field<std::uint64_t>(j, "seed");
  r.cell = get_field<std::size_t>(j, "cell");
  r.trajectory.states = points_from_json(get_field<Json>(j, "states"));
  r.trajectory.actions = points_from_json(get_field<Json>(j, "actions"));
  r.trajectory.dt = get_field<double>(j, "dt");
  r.path.waypoints = points_from_json(get_field<Json>(j, "path"));
  r.label.raw = get_field<double>(j, "lp_raw");
  r.label.rank = get_field<std::size_t>(j, "lp_rank");
  r.label.cohort_size = get_field<std::size_t>(j, "cohort_size");
  r.label.normalized = get_field<double>(j, "ell");
  r.descriptor.position = point_from_json(get_field<Json>(j, "descriptor_pos"));
  r.descriptor.magnitude = get_field<double>(j, "descriptor_mag");
  r.descriptor.index = get_field<std::size_t>(j, "descriptor_index");
  return r;
}

inline std::string dataset_to_jsonl(const Dataset& ds) {
  Json scenes = Json::array();
  for (const SceneConfig& s : ds.scenes) scenes.push_back(scene_to_json(s));
  Json header = {{"format", kDatasetFormat},
                 {"config", dataset_config_to_json(ds.config)},
                 {"scenes", scenes},
                 {"straight_line_ell", ds.straight_line_ell},
                 {"records", ds.records.size()}};
  std::string out = header.dump() + "\n";
  for (const DatasetRecord& r : ds.records) out += record_to_json(r).dump() + "\n";
  return out;
}

inline Dataset dataset_from_jsonl(const std::string& text) {
  const std::vector<std::string> lines = split_lines(text);
  if (lines.empty()) throw FormatError("dataset: empty file");
  const Json h = parse_json(lines[0], "dataset header");
  if (get_field<std::string>(h, "format") != kDatasetFormat) {
    throw FormatError("dataset: unknown format");
  }
  Dataset ds;
  ds.config = dataset_config_from_json(get_field<Json>(h, "config"));
  for (const Json& s : get_field<Json>(h, "scenes")) {
    ds.scenes.push_back(scene_from_json(s));
  }
  ds.straight_line_ell = get_field<std::vector<double>>(h, "straight_line_ell");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    ds.records.push_back(record_from_json(parse_json(lines[i], "dataset record")));
    if (ds.records.back().scene_id >= ds.scenes.size()) {
      throw FormatError("dataset: record refers to a missing scene");
    }
  }
  if (ds.records.size() != get_field<std::size_t>(h, "records")) {
    throw FormatError("dataset: record count does not match header");
  }
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  write_text(path, dataset_to_jsonl(ds));
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  return dataset_from_jsonl(read_text(path));
}

// ---------------------------------------------------------------------------
// Checkpoints.

inline Json train_config_to_json(const TrainConfig& t) {
  const OptimizerConfig& o = t.optimizer;
  return {{"steps", t.steps},
          {"batch", t.batch},
          {"seed", t.seed},
          {"optimizer",
           {{"kind", o.kind == OptimizerConfig::Kind::kAdam ? "adam" : "momentum"},
            {"learning_rate", o.learning_rate},
            {"momentum", o.momentum},
            {"beta2", o.beta2},
            {"epsilon", o.epsilon},
            {"clip_norm", o.clip_norm},
            {"final_lr_fraction", o.final_lr_fraction}}}};
}

inline TrainConfig train_config_from_json(const Json& j) {
  TrainConfig t;
  t.steps = get_field<std::size_t>(j, "steps");
  t.batch = get_field<std::size_t>(j, "batch");
  t.seed = get_field<std::uint64_t>(j, "seed");
  const Json o = get_field<Json>(j, "optimizer");
  t.optimizer.kind = get_field<std::string>(o, "kind") == "adam"
                         ? OptimizerConfig::Kind::kAdam
                         : OptimizerConfig::Kind::kMomentum;
  t.optimizer.learning_rate = get_field<double>(o, "learning_rate");
  t.optimizer.momentum = get_field<double>(o, "momentum");
  t.optimizer.beta2 = get_field<double>(o, "beta2");
  t.optimizer.epsilon = get_field<double>(o, "epsilon");
  t.optimizer.clip_norm = get_field<double>(o, "clip_norm");
  t.optimizer.final_lr_fraction = get_field<double>(o, "final_lr_fraction");
  return t;
}

// Weights are stored per named slice (column-major); FiLM heads separately.
inline Json model_to_json(const DiffusionModel& m) {
  const DenoiserConfig& a = m.net.config();
  Json weights = Json::object();
  Json film = Json::object();
  for (const DenoiserNet::Slice& s : m.net.layout()) {
    std::vector<double> v(m.net.params().data() + s.offset,
                          m.net.params().data() + s.offset + s.rows * s.cols);
    (s.film ? film : weights)[s.name] = std::move(v);
  }
  Json layout = Json::array();
  for (const ContextField& f : m.layout.fields) {
    layout.push_back({{"name", f.name}, {"offset", f.offset}, {"length", f.length}});
  }
  return {{"format", kCheckpointFormat},
          {"kind", m.kind},
          {"arch", "residual-mlp-film"},
          {"widths",
           {{"data_dim", a.data_dim},
            {"context_dim", a.context_dim},
            {"hidden", a.hidden},
            {"blocks", a.blocks},
            {"time_embed", a.time_embed},
            {"cond_width", a.cond_width}}},
          {"weights", weights},
          {"film_heads", film},
          {"schedule", {{"betas", m.schedule.betas}}},
          {"norm_stats", {{"lo", m.norm.lo}, {"hi", m.norm.hi}}},
          {"context_layout", layout},
          {"seed", m.seed},
          {"train_steps", m.train_steps},
          {"final_loss", m.final_loss}};
}

inline DiffusionModel model_from_json(const Json& j) {
  if (get_field<std::string>(j, "format") != kCheckpointFormat) {
    throw FormatError("checkpoint: unknown format");
  }
  DiffusionModel m;
  m.kind = get_field<std::string>(j, "kind");
  const Json w = get_field<Json>(j, "widths");
  DenoiserConfig a{get_field<int>(w, "data_dim"), get_field<int>(w, "context_dim"),
                   get_field<int>(w, "hidden"),   get_field<int>(w, "blocks"),
                   get_field<int>(w, "time_embed"),
                   get_field<int>(w, "cond_width")};
  m.net = DenoiserNet(a, 0);
  const Json weights = get_field<Json>(j, "weights");
  const Json film = get_field<Json>(j, "film_heads");
  for (const DenoiserNet::Slice& s : m.net.layout()) {
    const std::vector<double> v =
        get_field<std::vector<double>>(s.film ? film : weights, s.name.c_str());
    if (static_cast<Eigen::Index>(v.size()) != s.rows * s.cols) {
      throw FormatError("checkpoint: slice " + s.name + " has wrong size");
    }
    std::copy(v.begin(), v.end(), m.net.params().data() + s.offset);
  }
  m.schedule = NoiseSchedule::from_betas(
      get_field<std::vector<double>>(get_field<Json>(j, "schedule"), "betas"));
  const Json ns = get_field<Json>(j, "norm_stats");
  m.norm.lo = get_field<std::vector<double>>(ns, "lo");
  m.norm.hi = get_field<std::vector<double>>(ns, "hi");
  for (const Json& f : get_field<Json>(j, "context_layout")) {
    m.layout.add(get_field<std::string>(f, "name"), get_field<int>(f, "length"));
    if (m.layout.fields.back().offset != get_field<int>(f, "offset")) {
      throw FormatError("checkpoint: inconsistent context layout");
    }
  }
  if (m.layout.size() != a.context_dim) {
    throw FormatError("checkpoint: context layout does not match the network");
  }
  m.seed = get_field<std::uint64_t>(j, "seed");
  m.train_steps = get_field<std::size_t>(j, "train_steps");
  m.final_loss = get_field<double>(j, "final_loss");
  return m;
}

inline Json diffuser_to_json(const PathDiffuser& d) {
  Json j = model_to_json(d.model);
  const PathDiffuserConfig& c = d.config;
  j["stage_config"] = {{"dim", d.dim},
                       {"k", c.k},
                       {"grid_resolution", resolved_grid(c, d.dim)},
                       {"pool", resolved_pool(c, d.dim)},
                       {"ell_repeat", c.ell_repeat},
                       {"diffusion_steps", c.diffusion_steps},
                       {"train", train_config_to_json(c.train)},
                       {"clip", c.clip},
                       {"start_snap_radius", c.start_snap_radius},
                       {"goal_miss_radius", c.goal_miss_radius}};
  return j;
}

inline PathDiffuser diffuser_from_json(const Json& j) {
  PathDiffuser d;
  d.model = model_from_json(j);
  if (d.model.kind != "path-diffuser") {
    throw FormatError("checkpoint: not a path-diffuser checkpoint");
  }
  const Json s = get_field<Json>(j, "stage_config");
  PathDiffuserConfig& c = d.config;
  d.dim = get_field<int>(s, "dim");
  c.k = get_field<std::size_t>(s, "k");
  c.grid_resolution = get_field<std::vector<std::size_t>>(s, "grid_resolution");
  c.pool = get_field<std::vector<std::size_t>>(s, "pool");
  c.ell_repeat = get_field<int>(s, "ell_repeat");
  c.diffusion_steps = get_field<std::size_t>(s, "diffusion_steps");
  c.train = train_config_from_json(get_field<Json>(s, "train"));
  c.clip = get_field<double>(s, "clip");
  c.start_snap_radius = get_field<double>(s, "start_snap_radius");
  c.goal_miss_radius = get_field<double>(s, "goal_miss_radius");
  const DenoiserConfig& a = d.model.net.config();
  c.hidden = a.hidden;
  c.blocks = a.blocks;
  c.time_embed = a.time_embed;
  c.cond_width = a.cond_width;
  return d;
}

inline Json policy_to_json(const GuidedPolicy& p) {
  Json j = model_to_json(p.model);
  const PolicyConfig& c = p.config;
  j["stage_config"] = {{"dim", p.dim},
                       {"n_obs", c.n_obs},
                       {"horizon", c.horizon},
                       {"stride", c.stride},
                       {"k", c.k},
                       {"diffusion_steps", c.diffusion_steps},
                       {"train", train_config_to_json(c.train)},
                       {"clip", c.clip},
                       {"bounds", to_json(p.bounds)},
                       {"action_bound", p.action_bound}};
  return j;
}

inline GuidedPolicy policy_from_json(const Json& j) {
  GuidedPolicy p;
  p.model = model_from_json(j);
  if (p.model.kind != "guided-policy") {
    throw FormatError("checkpoint: not a guided-policy checkpoint");
  }
  const Json s = get_field<Json>(j, "stage_config");
  PolicyConfig& c = p.config;
  p.dim = get_field<int>(s, "dim");
  c.n_obs = get_field<std::size_t>(s, "n_obs");
  c.horizon = get_field<std::size_t>(s, "horizon");
  c.stride = get_field<std::size_t>(s, "stride");
  c.k = get_field<std::size_t>(s, "k");
  c.diffusion_steps = get_field<std::size_t>(s, "diffusion_steps");
  c.train = train_config_from_json(get_field<Json>(s, "train"));
  c.clip = get_field<double>(s, "clip");
  p.bounds = box_from_json(get_field<Json>(s, "bounds"));
  p.action_bound = get_field<double>(s, "action_bound");
  const DenoiserConfig& a = p.model.net.config();
  c.hidden = a.hidden;
  c.blocks = a.blocks;
  c.time_embed = a.time_embed;
  c.cond_width = a.cond_width;
  return p;
}

inline void save_diffuser(const PathDiffuser& d,
                          const std::filesystem::path& path) {
  write_text(path, diffuser_to_json(d).dump() + "\n");
}

inline PathDiffuser load_diffuser(const std::filesystem::path& path) {
  return diffuser_from_json(parse_json(read_text(path), path.string()));
}

inline void save_policy(const GuidedPolicy& p,
                        const std::filesystem::path& path) {
  write_text(path, policy_to_json(p).dump() + "\n");
}

inline GuidedPolicy load_policy(const std::filesystem::path& path) {
  return policy_from_json(parse_json(read_text(path), path.string()));
}

// ---------------------------------------------------------------------------
// Paths and trajectories.

inline Json generated_path_to_json(const GeneratedPath& g) {
  return {{"ell", g.ell},
          {"waypoints", to_json(g.path.waypoints)},
          {"start_snapped", g.start_snapped},
          {"start_flagged", g.start_flagged},
          {"goal_miss", g.goal_miss},
          {"goal_distance", g.goal_distance}};
}

inline GeneratedPath generated_path_from_json(const Json& j) {
  GeneratedPath g;
  g.ell = get_field<double>(j, "ell");
  g.path.waypoints = points_from_json(get_field<Json>(j, "waypoints"));
  g.start_snapped = get_field<bool>(j, "start_snapped");
  g.start_flagged = get_field<bool>(j, "start_flagged");
  g.goal_miss = get_field<bool>(j, "goal_miss");
  g.goal_distance = get_field<double>(j, "goal_distance");
  return g;
}

// One line per state: {"t", "state", "action"}; the final state has a null
// action.
inline std::string trajectory_to_jsonl(const Trajectory& traj) {
  std::string out;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    Json line = {{"t", t}, {"state", to_json(traj.states[t])}};
    line["action"] = t < traj.actions.size() ? to_json(traj.actions[t]) : Json();
    out += line.dump() + "\n";
  }
  return out;
}

inline Trajectory trajectory_from_jsonl(const std::string& text,
                                        double dt = 0.05) {
  Trajectory traj;
  traj.dt = dt;
  for (const std::string& l : split_lines(text)) {
    const Json j = parse_json(l, "trajectory line");
    if (get_field<std::size_t>(j, "t") != traj.states.size()) {
      throw FormatError("trajectory: lines out of order");
    }
    traj.states.push_back(point_from_json(get_field<Json>(j, "state")));
    const Json a = get_field<Json>(j, "action");
    if (!a.is_null()) traj.actions.push_back(point_from_json(a));
  }
  return traj;
}

}  // namespace legimod

#endif  // LEGIMOD_IO_HPP_
