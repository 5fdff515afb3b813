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

// Experiment protocols: max-legible comparison, legibility sweep, dataset
// oracle, and report emission (CSV + SVG).

#ifndef LEGIMOD_EVAL_HPP_
#define LEGIMOD_EVAL_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "legimod/env.hpp"
#include "legimod/errors.hpp"
#include "legimod/geometry.hpp"
#include "legimod/guided_policy.hpp"
#include "legimod/path_diffuser.hpp"
#include "legimod/qd_dataset.hpp"
#include "legimod/scoring.hpp"

namespace legimod {

// splitmix64 finalizer; derives independent per-episode seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Average ranks (ties share the mean rank), 1-based.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = r;
    i = j + 1;
  }
  return ranks;
}

// Pearson correlation of average ranks. NaN when either side is constant.
inline double spearman(const std::vector<double>& x,
                       const std::vector<double>& y) {
  detail::require(x.size() == y.size(), "spearman: length mismatch");
  detail::require(x.size() >= 2, "spearman: needs >= 2 pairs");
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

struct Episode {
  double ell = 0.0;
  GeneratedPath path;
  RolloutResult rollout;
  double lp = 0.0;  // eval L_p of the executed trajectory
  double ld = 0.0;  // L_d against the distractor
};

struct EvalOptions {
  std::size_t max_steps = 0;  // 0: the scene's max_steps
  unsigned workers = 1;       // episodes fan out over this many threads
};

inline void check_models(const PathDiffuser& diffuser,
                         const GuidedPolicy& policy, const SceneConfig& cfg) {
  if (diffuser.dim != cfg.dim() || policy.dim != cfg.dim()) {
    throw DomainError("eval: checkpoint and scene dimensions differ");
  }
  if (diffuser.config.k != policy.config.k) {
    throw DomainError("eval: diffuser and policy disagree on k");
  }
}

// Stage 1 then Stage 2 for one commanded level; the result depends only on
// (models, scene, ell, seed).
inline Episode run_episode(const PathDiffuser& diffuser,
                           const GuidedPolicy& policy, const SceneConfig& cfg,
                           double ell, std::uint64_t seed,
                           std::size_t max_steps) {
  Episode e;
  e.ell = ell;
  e.path = generate_path(diffuser, cfg, ell, mix_seed(seed, 0));
  e.rollout = rollout(policy, cfg, e.path.path,
                      max_steps ? max_steps : cfg.dynamics.max_steps,
                      mix_seed(seed, 1));
  e.lp = score_lp_eval(e.rollout.trajectory, cfg.scene, cfg.sigma);
  e.ld = score_ld(e.rollout.trajectory, cfg.distractor());
  return e;
}

// Runs jobs[i] into out[i]; threads take interleaved indices so the result
// is independent of the worker count.
template <typename Fn>
void fan_out(std::size_t n, unsigned workers, Fn&& fn) {
  const unsigned w = std::max(1u, std::min<unsigned>(
                                      workers, static_cast<unsigned>(n)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (unsigned t = 0; t < w; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::vector<Episode> run_episodes(const PathDiffuser& diffuser,
                                         const GuidedPolicy& policy,
                                         const SceneConfig& cfg, double ell,
                                         std::size_t n, std::uint64_t seed,
                                         const EvalOptions& opts) {
  std::vector<Episode> out(n);
  fan_out(n, opts.workers, [&](std::size_t i) {
    out[i] = run_episode(diffuser, policy, cfg, ell, mix_seed(seed, i),
                         opts.max_steps);
  });
  return out;
}

struct TargetMetrics {
  std::size_t target = 0;
  std::size_t episodes = 0;
  double sr = 0.0;
  double mean_ld = 0.0;
  double mean_lp = 0.0;
  double std_lp = 0.0;
};

inline TargetMetrics summarize(std::size_t target,
                               const std::vector<Episode>& eps) {
  TargetMetrics m;
  m.target = target;
  m.episodes = eps.size();
  if (eps.empty()) return m;
  double succ = 0.0, ld = 0.0, lp = 0.0;
  for (const Episode& e : eps) {
    succ += e.rollout.success() ? 1.0 : 0.0;
    ld += e.ld;
    lp += e.lp;
  }
  const double n = static_cast<double>(eps.size());
  m.sr = succ / n;
  m.mean_ld = ld / n;
  m.mean_lp = lp / n;
  double var = 0.0;
  for (const Episode& e : eps) var += (e.lp - m.mean_lp) * (e.lp - m.mean_lp);
  m.std_lp = std::sqrt(var / n);
  return m;
}

struct MaxLegibleTable {
  std::vector<TargetMetrics> rows;  // one per target
};

// n_episodes rollouts at ell = 1 for each goal taking its turn as the
// intended one. Target g uses seed mix_seed(seed, g).
inline MaxLegibleTable eval_max_legible(const PathDiffuser& diffuser,
                                        const GuidedPolicy& policy,
                                        const SceneConfig& cfg,
                                        std::size_t n_episodes,
                                        std::uint64_t seed,
                                        const EvalOptions& opts = {}) {
  check_models(diffuser, policy, cfg);
  detail::require(n_episodes >= 1, "eval_max_legible: n_episodes >= 1");
  MaxLegibleTable table;
  for (std::size_t g = 0; g < cfg.scene.goals.size(); ++g) {
    const SceneConfig sc = cfg.with_intended(g);
    table.rows.push_back(summarize(
        g, run_episodes(diffuser, policy, sc, 1.0, n_episodes,
                        mix_seed(seed, g), opts)));
  }
  return table;
}

struct SweepRow {
  double ell = 0.0;
  TargetMetrics metrics;
  Trajectory example;  // first rollout at this level, for plotting
};

struct SweepTable {
  std::size_t target = 0;
  std::vector<SweepRow> rows;
  double spearman = 0.0;         // ell vs per-level mean L_p
  double spearman_pooled = 0.0;  // ell vs L_p over every rollout
  Box bounds;
};

inline const std::vector<double>& default_sweep_levels() {
  static const std::vector<double> levels{-1.0, -0.5, 0.0, 0.5, 1.0};
  return levels;
}

// Level j uses seed mix_seed(seed, j); the scene's intended goal is swept.
inline SweepTable eval_sweep(const PathDiffuser& diffuser,
                             const GuidedPolicy& policy, const SceneConfig& cfg,
                             const std::vector<double>& ell_levels,
                             std::size_t n_per_level, std::uint64_t seed,
                             const EvalOptions& opts = {}) {
  check_models(diffuser, policy, cfg);
  detail::require(ell_levels.size() >= 3, "eval_sweep: needs >= 3 levels");
  detail::require(n_per_level >= 1, "eval_sweep: n_per_level >= 1");
  for (double ell : ell_levels) {
    if (!(ell >= -1.0 && ell <= 1.0)) {
      throw DomainError("eval_sweep: levels must lie in [-1, 1]");
    }
  }
  SweepTable table;
  table.target = cfg.scene.intended;
  table.bounds = cfg.scene.bounds;
  std::vector<double> xs, ys, pooled_x, pooled_y;
  for (std::size_t j = 0; j < ell_levels.size(); ++j) {
    const std::vector<Episode> eps =
        run_episodes(diffuser, policy, cfg, ell_levels[j], n_per_level,
                     mix_seed(seed, j), opts);
    SweepRow row;
    row.ell = ell_levels[j];
    row.metrics = summarize(cfg.scene.intended, eps);
    row.example = eps.front().rollout.trajectory;
    for (const Episode& e : eps) {
      pooled_x.push_back(row.ell);
      pooled_y.push_back(e.lp);
    }
    xs.push_back(row.ell);
    ys.push_back(row.metrics.mean_lp);
    table.rows.push_back(std::move(row));
  }
  table.spearman = spearman(xs, ys);
  table.spearman_pooled = spearman(pooled_x, pooled_y);
  return table;
}

struct OracleMetrics {
  std::size_t target = 0;
  double ld = 0.0;
  double lp = 0.0;
  double ell = 1.0;
};

// The ell = 1 record of each target cohort, scored with both metrics.
inline std::vector<OracleMetrics> oracle_baseline(const Dataset& dataset,
                                                  const SceneConfig& cfg) {
  std::vector<OracleMetrics> out;
  for (std::size_t g = 0; g < cfg.scene.goals.size(); ++g) {
    const DatasetRecord* best = nullptr;
    for (const DatasetRecord& r : dataset.records) {
      const SceneConfig& sc = dataset.scenes.at(r.scene_id);
      if (sc.dim() != cfg.dim() || sc.scene.intended != g) continue;
      if ((sc.scene.intended_goal() - cfg.scene.goals[g]).norm() > 1e-12) {
        continue;
      }
      if (r.label.normalized == 1.0) best = &r;
    }
    if (!best) {
      throw DomainError("oracle_baseline: dataset has no cohort for target " +
                        std::to_string(g));
    }
    const SceneConfig sc = cfg.with_intended(g);
    out.push_back({g, score_ld(best->trajectory, sc.distractor()),
                   score_lp_eval(best->trajectory, sc.scene, sc.sigma),
                   best->label.normalized});
  }
  return out;
}

// L_d and L_p of the scripted straight-line agent toward each target.
inline std::vector<OracleMetrics> straight_line_baseline(
    const SceneConfig& cfg, std::size_t n_states = kDefaultTrajectoryPoints) {
  std::vector<OracleMetrics> out;
  for (std::size_t g = 0; g < cfg.scene.goals.size(); ++g) {
    const SceneConfig sc = cfg.with_intended(g);
    const Trajectory line = straight_line(sc.scene.start, sc.scene.intended_goal(),
                                          n_states, sc.dynamics.dt);
    out.push_back({g, score_ld(line, sc.distractor()),
                   score_lp_eval(line, sc.scene, sc.sigma), 0.0});
  }
  return out;
}

// Reference training recipe used by the acceptance runs and the CLI
// defaults.
struct PipelineConfig {
  DatasetConfig dataset;
  PathDiffuserConfig stage1;
  PolicyConfig stage2;
};

inline PipelineConfig reference_pipeline_config(std::uint64_t seed = 0) {
  PipelineConfig p;
  p.dataset.seed = seed;
  p.stage1.train.steps = 6000;
  p.stage1.train.seed = mix_seed(seed, 1);
  p.stage2.train.steps = 15000;
  p.stage2.stride = 1;
  p.stage2.train.seed = mix_seed(seed, 2);
  return p;
}

struct Pipeline {
  Dataset dataset;
  PathDiffuser diffuser;
  GuidedPolicy policy;
};

// Dataset for every target, then both stages.
inline Pipeline train_pipeline(const SceneConfig& cfg,
                               const PipelineConfig& config) {
  Pipeline p;
  p.dataset = generate_dataset_all_targets(cfg, config.dataset);
  p.diffuser = train_stage1(p.dataset, config.stage1);
  p.policy = train_stage2(p.dataset, config.stage2);
  return p;
}

// ---------------------------------------------------------------------------
// Report emission.

struct ReportTables {
  std::optional<MaxLegibleTable> max_legible;
  std::optional<SweepTable> sweep;
  std::vector<OracleMetrics> oracle;
};

// One line of metrics.csv.
struct MetricRow {
  std::string table;  // "max", "sweep" or "oracle"
  std::size_t target = 0;
  double ell = 0.0;
  std::size_t episodes = 0;
  double sr = 0.0;
  double mean_ld = 0.0;
  double mean_lp = 0.0;
  double std_lp = 0.0;
  double spearman = 0.0;  // sweep rows only

  bool operator==(const MetricRow&) const = default;
};

inline constexpr const char* kMetricsHeader =
    "table,target,ell,episodes,sr,mean_ld,mean_lp,std_lp,spearman";

namespace detail {

// Shortest round-trip representation, independent of the C locale.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline std::string format_fixed(double v, int precision) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v,
                               std::chars_format::fixed, precision);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw FormatError("metrics: bad number '" + s + "'");
  }
  return v;
}

inline std::size_t parse_size(const std::string& s) {
  std::size_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw FormatError("metrics: bad integer '" + s + "'");
  }
  return v;
}

}  // namespace detail

inline std::vector<MetricRow> metric_rows(const ReportTables& t) {
  std::vector<MetricRow> rows;
  if (t.max_legible) {
    for (const TargetMetrics& m : t.max_legible->rows) {
      rows.push_back({"max", m.target, 1.0, m.episodes, m.sr, m.mean_ld,
                      m.mean_lp, m.std_lp, 0.0});
    }
  }
  if (t.sweep) {
    for (const SweepRow& r : t.sweep->rows) {
      const TargetMetrics& m = r.metrics;
      rows.push_back({"sweep", m.target, r.ell, m.episodes, m.sr, m.mean_ld,
                      m.mean_lp, m.std_lp, t.sweep->spearman});
    }
  }
  for (const OracleMetrics& o : t.oracle) {
    rows.push_back({"oracle", o.target, o.ell, 1, 1.0, o.ld, o.lp, 0.0, 0.0});
  }
  return rows;
}

inline std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const MetricRow& r : rows) {
    out += r.table + "," + std::to_string(r.target) + "," +
           detail::format_double(r.ell) + "," + std::to_string(r.episodes) +
           "," + detail::format_double(r.sr) + "," +
           detail::format_double(r.mean_ld) + "," +
           detail::format_double(r.mean_lp) + "," +
           detail::format_double(r.std_lp) + "," +
           detail::format_double(r.spearman) + "\n";
  }
  return out;
}

inline std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw FormatError("metrics: missing or unexpected header");
  }
  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t pos; (pos = line.find(',', start)) != std::string::npos;
         start = pos + 1) {
      f.push_back(line.substr(start, pos - start));
    }
    f.push_back(line.substr(start));
    if (f.size() != 9) throw FormatError("metrics: expected 9 fields");
    rows.push_back({f[0], detail::parse_size(f[1]), detail::parse_double(f[2]),
                    detail::parse_size(f[3]), detail::parse_double(f[4]),
                    detail::parse_double(f[5]), detail::parse_double(f[6]),
                    detail::parse_double(f[7]), detail::parse_double(f[8])});
  }
  return rows;
}

namespace detail {

inline std::string svg_open(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(w) + "\" height=\"" + std::to_string(h) +
         "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
         "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string svg_point(double x, double y) {
  return format_fixed(x, 2) + "," + format_fixed(y, 2);
}

inline std::string svg_text(double x, double y, const std::string& s,
                            const char* anchor = "middle") {
  return "<text x=\"" + format_fixed(x, 2) + "\" y=\"" + format_fixed(y, 2) +
         "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"" +
         anchor + "\">" + s + "</text>\n";
}

// Light to dark red as ell goes from -1 to 1.
inline std::string ell_color(double ell) {
  const double u = std::clamp(0.5 * (ell + 1.0), 0.0, 1.0);
  const int lo[3] = {0xfc, 0xbb, 0xa1};
  const int hi[3] = {0x67, 0x00, 0x0d};
  static const char* hex = "0123456789abcdef";
  std::string s = "#";
  for (int c = 0; c < 3; ++c) {
    const int v = static_cast<int>(std::lround(lo[c] + u * (hi[c] - lo[c])));
    s += hex[v / 16];
    s += hex[v % 16];
  }
  return s;
}

}  // namespace detail

// ell vs mean L_p with a +-1 std band.
inline std::string sweep_svg(const SweepTable& sweep) {
  const int w = 640, h = 400;
  const double left = 70, right = 20, top = 30, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  double ymax = 0.0;
  for (const SweepRow& r : sweep.rows) {
    ymax = std::max(ymax, r.metrics.mean_lp + r.metrics.std_lp);
  }
  ymax = ymax > 0.0 ? ymax * 1.05 : 1.0;
  auto px = [&](double ell) { return left + (ell + 1.0) / 2.0 * pw; };
  auto py = [&](double v) {
    return top + ph - std::clamp(v / ymax, 0.0, 1.0) * ph;
  };
  std::string s = detail::svg_open(w, h);
  s += "<line x1=\"" + detail::format_fixed(left, 2) + "\" y1=\"" +
       detail::format_fixed(top + ph, 2) + "\" x2=\"" +
       detail::format_fixed(left + pw, 2) + "\" y2=\"" +
       detail::format_fixed(top + ph, 2) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + detail::format_fixed(left, 2) + "\" y1=\"" +
       detail::format_fixed(top, 2) + "\" x2=\"" + detail::format_fixed(left, 2) +
       "\" y2=\"" + detail::format_fixed(top + ph, 2) +
       "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double ell = -1.0 + 0.5 * i;
    s += detail::svg_text(px(ell), top + ph + 18, detail::format_fixed(ell, 1));
    const double v = ymax * i / 4.0;
    s += detail::svg_text(left - 6, py(v) + 4, detail::format_fixed(v, 2),
                          "end");
  }
  s += detail::svg_text(left + pw / 2, h - 10, "legibility level");
  s += detail::svg_text(18, top + ph / 2, "L_p");
  std::string band;
  for (const SweepRow& r : sweep.rows) {
    band += detail::svg_point(px(r.ell), py(r.metrics.mean_lp + r.metrics.std_lp)) +
            " ";
  }
  for (auto it = sweep.rows.rbegin(); it != sweep.rows.rend(); ++it) {
    band += detail::svg_point(
                px(it->ell),
                py(std::max(0.0, it->metrics.mean_lp - it->metrics.std_lp))) +
            " ";
  }
  if (!band.empty()) band.pop_back();
  s += "<polygon class=\"band\" points=\"" + band +
       "\" fill=\"#c6dbef\" stroke=\"none\"/>\n";
  std::string line;
  for (const SweepRow& r : sweep.rows) {
    line += detail::svg_point(px(r.ell), py(r.metrics.mean_lp)) + " ";
  }
  if (!line.empty()) line.pop_back();
  s += "<polyline class=\"mean\" points=\"" + line +
       "\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\"/>\n";
  s += "</svg>\n";
  return s;
}

// One polyline per sweep level, projected on axes (0, 1) in 2D and (0, 2)
// in 3D.
inline std::string trajectories_svg(const SweepTable& sweep,
                                    const std::vector<Point>& goals = {}) {
  const int size = 480;
  const double margin = 20;
  const int dim = sweep.bounds.dim();
  const int ax = 0;
  const int ay = dim >= 3 ? 2 : 1;
  const double span = size - 2 * margin;
  auto px = [&](const Point& p) {
    return margin + (p[ax] - sweep.bounds.min[ax]) /
                        (sweep.bounds.max[ax] - sweep.bounds.min[ax]) * span;
  };
  auto py = [&](const Point& p) {
    return margin + span -
           (p[ay] - sweep.bounds.min[ay]) /
               (sweep.bounds.max[ay] - sweep.bounds.min[ay]) * span;
  };
  std::string s = detail::svg_open(size, size);
  s += "<rect x=\"" + detail::format_fixed(margin, 2) + "\" y=\"" +
       detail::format_fixed(margin, 2) + "\" width=\"" +
       detail::format_fixed(span, 2) + "\" height=\"" +
       detail::format_fixed(span, 2) +
       "\" fill=\"none\" stroke=\"#999999\"/>\n";
  for (const Point& g : goals) {
    s += "<circle cx=\"" + detail::format_fixed(px(g), 2) + "\" cy=\"" +
         detail::format_fixed(py(g), 2) +
         "\" r=\"6\" fill=\"#dddddd\" stroke=\"black\"/>\n";
  }
  for (const SweepRow& r : sweep.rows) {
    std::string pts;
    for (const Point& p : r.example.states) {
      pts += detail::svg_point(px(p), py(p)) + " ";
    }
    if (!pts.empty()) pts.pop_back();
    s += "<polyline data-ell=\"" + detail::format_double(r.ell) +
         "\" points=\"" + pts + "\" fill=\"none\" stroke=\"" +
         detail::ell_color(r.ell) + "\" stroke-width=\"2\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

// Writes metrics.csv, and sweep.svg + trajectories.svg when a sweep is
// present. Everything is rendered and validated before any file is opened.
inline std::vector<std::filesystem::path> emit_report(
    const ReportTables& tables, const std::filesystem::path& out_dir,
    const std::vector<Point>& goals = {}) {
  if (!tables.max_legible && !tables.sweep && tables.oracle.empty()) {
    throw DomainError("emit_report: no tables");
  }
  if (tables.max_legible && tables.max_legible->rows.empty()) {
    throw DomainError("emit_report: empty max-legible table");
  }
  if (tables.sweep && tables.sweep->rows.empty()) {
    throw DomainError("emit_report: empty sweep");
  }
  std::vector<std::pair<std::string, std::string>> files;
  files.emplace_back("metrics.csv", metrics_csv(metric_rows(tables)));
  if (tables.sweep) {
    files.emplace_back("sweep.svg", sweep_svg(*tables.sweep));
    files.emplace_back("trajectories.svg",
                       trajectories_svg(*tables.sweep, goals));
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("emit_report: cannot create " + out_dir.string());
  }
  std::vector<std::filesystem::path> written;
  for (const auto& [name, body] : files) {
    const std::filesystem::path p = out_dir / name;
    std::ofstream f(p, std::ios::binary);
    f << body;
    if (!f) throw IoError("emit_report: cannot write " + p.string());
    written.push_back(p);
  }
  return written;
}

}  // namespace legimod

#endif  // LEGIMOD_EVAL_HPP_
