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

#include "legimod/eval.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace legimod {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + 1)) {
    ++n;
  }
  return n;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("legimod_eval_test_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Spearman, TextbookExample) {
  // Rank differences (1, 1, 1, 1, 0): 1 - 6 * 4 / (5 * 24).
  EXPECT_NEAR(spearman({1, 2, 3, 4, 5}, {2, 1, 4, 3, 5}), 0.8, 1e-15);
  EXPECT_NEAR(spearman({1, 2, 3}, {30, 20, 10}), -1.0, 1e-15);
  EXPECT_NEAR(spearman({1, 2, 3}, {1, 8, 27}), 1.0, 1e-15);
}

TEST(Spearman, TiesUseAverageRanks) {
  // Pearson over ranks x = (1, 2.5, 2.5, 4), y = (1, 2, 3, 4).
  const double rx[] = {1, 2.5, 2.5, 4}, ry[] = {1, 2, 3, 4};
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += (rx[i] - 2.5) * (ry[i] - 2.5);
    sxx += (rx[i] - 2.5) * (rx[i] - 2.5);
    syy += (ry[i] - 2.5) * (ry[i] - 2.5);
  }
  EXPECT_NEAR(spearman({1, 2, 2, 3}, {1, 2, 3, 4}), sxy / std::sqrt(sxx * syy),
              1e-15);
  EXPECT_EQ(average_ranks({5, 1, 5}), (std::vector<double>{2.5, 1.0, 2.5}));
}

TEST(Spearman, ConstantSideIsNan) {
  EXPECT_TRUE(std::isnan(spearman({1, 1, 1}, {1, 2, 3})));
  EXPECT_THROW(spearman({1, 2}, {1}), DomainError);
}

TEST(MixSeed, DistinctStreams) {
  EXPECT_EQ(mix_seed(3, 4), mix_seed(3, 4));
  EXPECT_NE(mix_seed(3, 4), mix_seed(4, 3));
  EXPECT_NE(mix_seed(0, 0), mix_seed(0, 1));
}

TEST(Baselines, StraightLineMatchesDirectScores) {
  const SceneConfig cfg = make_scene(SceneVariant::k2dDefault);
  const std::vector<OracleMetrics> b = straight_line_baseline(cfg);
  ASSERT_EQ(b.size(), 2u);
  const Trajectory line = straight_line(cfg.scene.start, cfg.scene.goals[0], 100);
  EXPECT_EQ(b[0].ld, score_ld(line, cfg.scene.goals[1]));
  EXPECT_EQ(b[0].lp, score_lp_eval(line, cfg.scene, cfg.sigma));
  // Mirror-symmetric scene.
  EXPECT_NEAR(b[0].ld, b[1].ld, 1e-9);
  EXPECT_NEAR(b[0].lp, b[1].lp, 1e-9);
}

TEST(Baselines, OraclePicksTopRankedRecord) {
  const SceneConfig cfg = make_scene(SceneVariant::k2dDefault);
  DatasetConfig dc;
  dc.budget = 300;
  const Dataset ds = generate_dataset_all_targets(cfg, dc);
  const std::vector<OracleMetrics> o = oracle_baseline(ds, cfg);
  ASSERT_EQ(o.size(), 2u);
  for (std::size_t g = 0; g < 2; ++g) {
    double best_raw = -1e300;
    const DatasetRecord* best = nullptr;
    for (const DatasetRecord* r : ds.cohort(g)) {
      if (r->label.raw > best_raw) {
        best_raw = r->label.raw;
        best = r;
      }
    }
    const SceneConfig sc = cfg.with_intended(g);
    EXPECT_EQ(o[g].ell, 1.0);
    EXPECT_EQ(o[g].lp, score_lp_eval(best->trajectory, sc.scene, sc.sigma));
    EXPECT_EQ(o[g].ld, score_ld(best->trajectory, sc.distractor()));
  }
  const Dataset only0 = generate_dataset(cfg, dc);
  EXPECT_THROW(oracle_baseline(only0, cfg), DomainError);
}

TEST(Report, CsvRoundTrip) {
  ReportTables t;
  MaxLegibleTable m;
  m.rows.push_back({0, 60, 0.95, 3.25, 1.0 / 3.0, 0.125});
  m.rows.push_back({1, 60, 1.0, 2.5, 0.1 + 0.2, 1e-17});
  t.max_legible = m;
  t.oracle.push_back({0, 2.715, 1.0006, 1.0});
  const std::vector<MetricRow> rows = metric_rows(t);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(parse_metrics_csv(metrics_csv(rows)), rows);
  EXPECT_EQ(metrics_csv(rows).substr(0, metrics_csv(rows).find('\n')),
            "table,target,ell,episodes,sr,mean_ld,mean_lp,std_lp,spearman");
  EXPECT_THROW(parse_metrics_csv("bogus\n"), FormatError);
  EXPECT_THROW(parse_metrics_csv(std::string(kMetricsHeader) + "\nmax,0,1\n"),
               FormatError);
}

SweepTable synthetic_sweep(int dim) {
  SweepTable s;
  s.bounds = Box::unit(dim);
  for (double ell : default_sweep_levels()) {
    SweepRow r;
    r.ell = ell;
    r.metrics = {0, 4, 1.0, 3.0 + ell, 2.0 - ell, 0.1};
    for (int i = 0; i < 5; ++i) {
      r.example.states.push_back(Point::Constant(dim, 0.1 + 0.2 * i));
    }
    s.rows.push_back(r);
  }
  s.spearman = -1.0;
  return s;
}

TEST(Report, WritesFilesWithOnePolylinePerLevel) {
  ReportTables t;
  t.sweep = synthetic_sweep(2);
  const fs::path dir = scratch_dir("polylines");
  const auto written = emit_report(t, dir, {make_point({0.3, 0.9})});
  ASSERT_EQ(written.size(), 3u);
  const std::string traj = slurp(dir / "trajectories.svg");
  EXPECT_EQ(count_of(traj, "<polyline"), 5u);
  EXPECT_EQ(count_of(traj, "data-ell=\"-0.5\""), 1u);
  const std::string sweep = slurp(dir / "sweep.svg");
  EXPECT_EQ(count_of(sweep, "class=\"mean\""), 1u);
  EXPECT_EQ(parse_metrics_csv(slurp(dir / "metrics.csv")).size(), 5u);
  fs::remove_all(dir);
}

TEST(Report, ByteStableAcrossRuns) {
  ReportTables t;
  t.sweep = synthetic_sweep(3);
  const fs::path a = scratch_dir("stable_a"), b = scratch_dir("stable_b");
  emit_report(t, a);
  emit_report(t, b);
  for (const char* f : {"metrics.csv", "sweep.svg", "trajectories.svg"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Report, EmptySweepWritesNothing) {
  ReportTables t;
  t.sweep = SweepTable{};
  const fs::path dir = scratch_dir("empty");
  EXPECT_THROW(emit_report(t, dir), DomainError);
  EXPECT_FALSE(fs::exists(dir));
  EXPECT_THROW(emit_report(ReportTables{}, dir), DomainError);
}

TEST(Report, UnwritableDirectoryIsIoError) {
  ReportTables t;
  t.sweep = synthetic_sweep(2);
  const fs::path blocker = scratch_dir("blocker");
  std::ofstream(blocker) << "file, not a directory";
  EXPECT_THROW(emit_report(t, blocker / "sub"), IoError);
  fs::remove(blocker);
}

class TinyModels : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = new SceneConfig(make_scene(SceneVariant::k2dDefault));
    DatasetConfig dc;
    dc.budget = 300;
    const Dataset ds = generate_dataset_all_targets(*cfg_, dc);
    PathDiffuserConfig pc;
    pc.hidden = 32;
    pc.blocks = 1;
    pc.cond_width = 16;
    pc.grid_resolution = {16, 16};
    pc.pool = {4, 4};
    pc.diffusion_steps = 20;
    pc.train.steps = 100;
    pc.train.batch = 16;
    diffuser_ = new PathDiffuser(train_stage1(ds, pc));
    PolicyConfig qc;
    qc.hidden = 32;
    qc.blocks = 1;
    qc.cond_width = 16;
    qc.diffusion_steps = 20;
    qc.train.steps = 100;
    qc.train.batch = 16;
    policy_ = new GuidedPolicy(train_stage2(ds, qc));
  }
  static void TearDownTestSuite() {
    delete policy_;
    delete diffuser_;
    delete cfg_;
  }
  static SceneConfig* cfg_;
  static PathDiffuser* diffuser_;
  static GuidedPolicy* policy_;
};

SceneConfig* TinyModels::cfg_ = nullptr;
PathDiffuser* TinyModels::diffuser_ = nullptr;
GuidedPolicy* TinyModels::policy_ = nullptr;

TEST_F(TinyModels, SingleEpisodePerTarget) {
  EvalOptions opts;
  opts.max_steps = 16;
  const MaxLegibleTable t = eval_max_legible(*diffuser_, *policy_, *cfg_, 1, 7, opts);
  ASSERT_EQ(t.rows.size(), 2u);
  for (std::size_t g = 0; g < 2; ++g) {
    EXPECT_EQ(t.rows[g].target, g);
    EXPECT_EQ(t.rows[g].episodes, 1u);
    EXPECT_EQ(t.rows[g].std_lp, 0.0);
  }
  EXPECT_THROW(eval_max_legible(*diffuser_, *policy_, *cfg_, 0, 7, opts),
               DomainError);
}

TEST_F(TinyModels, EpisodeScoresMatchRollout) {
  const Episode e = run_episode(*diffuser_, *policy_, *cfg_, 0.5, 3, 16);
  EXPECT_EQ(e.lp, score_lp_eval(e.rollout.trajectory, cfg_->scene, cfg_->sigma));
  EXPECT_EQ(e.ld, score_ld(e.rollout.trajectory, cfg_->distractor()));
  EXPECT_LE(e.rollout.trajectory.actions.size(), 16u);
}

TEST_F(TinyModels, SweepDeterministicAndWorkerIndependent) {
  EvalOptions one;
  one.max_steps = 16;
  EvalOptions three = one;
  three.workers = 3;
  const SweepTable a =
      eval_sweep(*diffuser_, *policy_, *cfg_, default_sweep_levels(), 3, 11, one);
  const SweepTable b =
      eval_sweep(*diffuser_, *policy_, *cfg_, default_sweep_levels(), 3, 11, three);
  ASSERT_EQ(a.rows.size(), 5u);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_EQ(a.rows[j].metrics.mean_lp, b.rows[j].metrics.mean_lp);
    EXPECT_EQ(a.rows[j].example.states, b.rows[j].example.states);
  }
  if (std::isnan(a.spearman)) {
    EXPECT_TRUE(std::isnan(b.spearman));
  } else {
    EXPECT_EQ(a.spearman, b.spearman);
  }
}

TEST_F(TinyModels, SweepRejections) {
  EXPECT_THROW(eval_sweep(*diffuser_, *policy_, *cfg_, {-1.0, 1.0}, 1, 0),
               DomainError);
  EXPECT_THROW(eval_sweep(*diffuser_, *policy_, *cfg_, {-1.0, 0.0, 1.5}, 1, 0),
               DomainError);
  EXPECT_THROW(eval_sweep(*diffuser_, *policy_, make_scene(SceneVariant::k3dDefault),
                          default_sweep_levels(), 1, 0),
               DomainError);
}

}  // namespace
}  // namespace legimod
