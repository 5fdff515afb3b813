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

// legimod: command-line front end for dataset generation, training,
// sampling, rollouts and evaluation.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "legimod/legimod.hpp"

namespace {

using namespace legimod;

// "10x10" -> {10, 10}
std::vector<std::size_t> parse_dims(const std::string& s) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t pos = s.find('x', start);
    const std::string part =
        s.substr(start, pos == std::string::npos ? std::string::npos
                                                 : pos - start);
    if (part.empty()) throw UsageError("bad grid spec '" + s + "'");
    out.push_back(static_cast<std::size_t>(std::stoul(part)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

void print_metrics(const TargetMetrics& m, const char* label) {
  std::printf("%s target=%zu episodes=%zu SR=%.3f L_d=%.4f L_p=%.4f (std %.4f)\n",
              label, m.target, m.episodes, m.sr, m.mean_ld, m.mean_lp,
              m.std_lp);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Legibility-conditioned two-stage diffusion planning"};
  app.require_subcommand(1);

  // make-scene
  std::string variant = "2d";
  std::size_t intended = 0;
  std::string out;
  auto* make = app.add_subcommand("make-scene", "Write a default scene file");
  make->add_option("--variant", variant, "2d or 3d")
      ->check(CLI::IsMember({"2d", "3d"}));
  make->add_option("--intended", intended, "Index of the intended goal");
  make->add_option("--out", out, "Scene file")->required();

  // ipf
  std::string scene_file;
  std::string resolution;
  auto* ipf = app.add_subcommand("ipf", "Rasterize the potential field");
  ipf->add_option("--scene", scene_file)->required();
  ipf->add_option("--resolution", resolution, "e.g. 64x64 (default per dim)");
  ipf->add_option("--out", out)->required();

  // gen-dataset
  std::size_t budget = 10000;
  std::string cells;
  std::uint64_t seed = 0;
  bool all_targets = false;
  std::size_t k = kDefaultPathLength;
  auto* gen = app.add_subcommand("gen-dataset", "Quality-diversity dataset");
  gen->add_option("--scene", scene_file)->required();
  gen->add_option("--budget", budget);
  gen->add_option("--cells", cells, "e.g. 10x10 (default per dim)");
  gen->add_option("--seed", seed);
  gen->add_option("--k", k, "Waypoints per path");
  gen->add_flag("--all-targets", all_targets,
                "One cohort per goal instead of the intended goal only");
  gen->add_option("--out", out)->required();

  // train-diffuser / train-policy
  std::string dataset_file;
  std::size_t steps = 0;
  int hidden = 128;
  std::size_t stride = 1;
  auto* tdiff = app.add_subcommand("train-diffuser", "Train the path diffuser");
  tdiff->add_option("--dataset", dataset_file)->required();
  tdiff->add_option("--out", out)->required();
  tdiff->add_option("--seed", seed);
  tdiff->add_option("--steps", steps, "Training steps (default 6000)");
  tdiff->add_option("--hidden", hidden);
  auto* tpol = app.add_subcommand("train-policy", "Train the guided policy");
  tpol->add_option("--dataset", dataset_file)->required();
  tpol->add_option("--out", out)->required();
  tpol->add_option("--seed", seed);
  tpol->add_option("--steps", steps, "Training steps (default 15000)");
  tpol->add_option("--hidden", hidden);
  tpol->add_option("--stride", stride, "Chunk stride (0 = horizon)");

  // gen-path
  std::string ckpt;
  double ell = 1.0;
  auto* gpath = app.add_subcommand("gen-path", "Sample a path");
  gpath->add_option("--ckpt", ckpt)->required();
  gpath->add_option("--scene", scene_file)->required();
  gpath->add_option("--ell", ell)->check(CLI::Range(-1.0, 1.0));
  gpath->add_option("--seed", seed);
  gpath->add_option("--out", out)->required();

  // rollout
  std::string policy_file, diffuser_file;
  std::size_t max_steps = 0;
  auto* roll = app.add_subcommand("rollout", "Generate a path and execute it");
  roll->add_option("--policy", policy_file)->required();
  roll->add_option("--diffuser", diffuser_file)->required();
  roll->add_option("--scene", scene_file)->required();
  roll->add_option("--ell", ell)->check(CLI::Range(-1.0, 1.0));
  roll->add_option("--seed", seed);
  roll->add_option("--max-steps", max_steps, "0 = scene default");
  roll->add_option("--out", out)->required();

  // eval
  std::string mode = "max";
  std::size_t episodes = 100;
  unsigned workers = 1;
  auto* ev = app.add_subcommand("eval", "Max-legible table or legibility sweep");
  ev->add_option("--diffuser", diffuser_file)->required();
  ev->add_option("--policy", policy_file)->required();
  ev->add_option("--scene", scene_file)->required();
  ev->add_option("--mode", mode)->check(CLI::IsMember({"max", "sweep"}));
  ev->add_option("--episodes", episodes, "Per target (max) or per level (sweep)");
  ev->add_option("--seed", seed);
  ev->add_option("--dataset", dataset_file, "Adds the dataset-oracle rows");
  ev->add_option("--workers", workers);
  ev->add_option("--out", out)->required();

  // score
  std::string traj_file;
  auto* score = app.add_subcommand("score", "Score a trajectory file");
  score->add_option("--traj", traj_file)->required();
  score->add_option("--scene", scene_file)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*make) {
      SceneConfig cfg = make_scene(variant == "2d" ? SceneVariant::k2dDefault
                                                   : SceneVariant::k3dDefault,
                                   std::nullopt, intended);
      save_scene(cfg, out);
    } else if (*ipf) {
      const SceneConfig cfg = load_scene(scene_file);
      const IpfGrid grid = rasterize(
          cfg.scene,
          resolution.empty() ? default_grid_resolution(cfg.dim())
                             : parse_dims(resolution),
          cfg.sigma);
      write_text(out, grid_to_jsonl(grid));
    } else if (*gen) {
      const SceneConfig cfg = load_scene(scene_file);
      DatasetConfig dc;
      dc.budget = budget;
      dc.seed = seed;
      dc.k = k;
      if (!cells.empty()) dc.cells = parse_dims(cells);
      const Dataset ds = all_targets ? generate_dataset_all_targets(cfg, dc)
                                     : generate_dataset(cfg, dc);
      save_dataset(ds, out);
      std::printf("records=%zu\n", ds.records.size());
    } else if (*tdiff) {
      const Dataset ds = load_dataset(dataset_file);
      PathDiffuserConfig c = reference_pipeline_config(seed).stage1;
      c.k = ds.config.k;
      c.hidden = hidden;
      if (steps) c.train.steps = steps;
      const PathDiffuser d = train_stage1(ds, c);
      save_diffuser(d, out);
      std::printf("final_loss=%.6f\n", d.model.final_loss);
    } else if (*tpol) {
      const Dataset ds = load_dataset(dataset_file);
      PolicyConfig c = reference_pipeline_config(seed).stage2;
      c.k = ds.config.k;
      c.hidden = hidden;
      c.stride = stride;
      if (steps) c.train.steps = steps;
      const GuidedPolicy p = train_stage2(ds, c);
      save_policy(p, out);
      std::printf("final_loss=%.6f\n", p.model.final_loss);
    } else if (*gpath) {
      const PathDiffuser d = load_diffuser(ckpt);
      const GeneratedPath g = generate_path(d, load_scene(scene_file), ell, seed);
      if (g.goal_miss) {
        std::fprintf(stderr, "warning: final waypoint %.3f from the goal\n",
                     g.goal_distance);
      }
      write_text(out, generated_path_to_json(g).dump(2) + "\n");
    } else if (*roll) {
      const SceneConfig cfg = load_scene(scene_file);
      const Episode e =
          run_episode(load_diffuser(diffuser_file), load_policy(policy_file),
                      cfg, ell, seed, max_steps);
      write_text(out, trajectory_to_jsonl(e.rollout.trajectory));
      std::printf("status=%s steps=%zu L_p=%.4f L_d=%.4f\n",
                  e.rollout.success() ? "success" : "timeout",
                  e.rollout.trajectory.actions.size(), e.lp, e.ld);
    } else if (*ev) {
      const SceneConfig cfg = load_scene(scene_file);
      const PathDiffuser d = load_diffuser(diffuser_file);
      const GuidedPolicy p = load_policy(policy_file);
      EvalOptions opts;
      opts.workers = workers;
      ReportTables tables;
      if (mode == "max") {
        tables.max_legible = eval_max_legible(d, p, cfg, episodes, seed, opts);
        for (const TargetMetrics& m : tables.max_legible->rows) {
          print_metrics(m, "max");
        }
      } else {
        tables.sweep = eval_sweep(d, p, cfg, default_sweep_levels(), episodes,
                                  seed, opts);
        for (const SweepRow& r : tables.sweep->rows) {
          std::printf("ell=%+.2f ", r.ell);
          print_metrics(r.metrics, "sweep");
        }
        std::printf("spearman=%.4f pooled=%.4f\n", tables.sweep->spearman,
                    tables.sweep->spearman_pooled);
      }
      if (!dataset_file.empty()) {
        tables.oracle = oracle_baseline(load_dataset(dataset_file), cfg);
        for (const OracleMetrics& o : tables.oracle) {
          std::printf("oracle target=%zu L_d=%.4f L_p=%.4f\n", o.target, o.ld,
                      o.lp);
        }
      }
      emit_report(tables, out, cfg.scene.goals);
    } else if (*score) {
      const SceneConfig cfg = load_scene(scene_file);
      const Trajectory t =
          trajectory_from_jsonl(read_text(traj_file), cfg.dynamics.dt);
      std::printf("L_p=%.6f L_d=%.6f L_p_train=%.6f\n",
                  score_lp_eval(t, cfg.scene, cfg.sigma),
                  score_ld(t, cfg.distractor()),
                  score_lp_train(t, cfg.scene, cfg.sigma));
    }
  } catch (const legimod::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
