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

#include "legimod/ipf.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

namespace legimod {
namespace {

GoalScene two_goal_scene() {
  GoalScene s;
  s.start = make_point({0.5, 0.1});
  s.goals = {make_point({0.3, 0.9}), make_point({0.7, 0.9})};
  s.intended = 0;
  s.bounds = Box::unit(2);
  return s;
}

// exp(-|x-g|^2 / 2 s^2) ratios, evaluated directly.
double naive_posterior(const Point& x, const GoalScene& s, double sigma) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.goals.size(); ++i) {
    const double w =
        std::exp(-(x - s.goals[i]).squaredNorm() / (2 * sigma * sigma));
    den += w;
    if (i == s.intended) num = w;
  }
  return num / den;
}

TEST(Likelihood, DensityAtMean) {
  EXPECT_NEAR(likelihood(make_point({0.3, 0.3}), make_point({0.3, 0.3}), 1.0),
              1.0 / (2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(likelihood(make_point({0, 0, 0}), make_point({0, 0, 0}), 0.5),
              std::pow(2.0 * std::numbers::pi * 0.25, -1.5), 1e-12);
}

TEST(Likelihood, SymmetricAndDecaying) {
  const Point x = make_point({0.1, 0.7}), g = make_point({0.4, 0.2});
  EXPECT_EQ(likelihood(x, g, 0.3), likelihood(g, x, 0.3));
  double prev = likelihood(g, g, 0.2);
  for (int i = 1; i <= 50; ++i) {
    const double v = likelihood(g + make_point({0.02 * i, 0.0}), g, 0.2);
    EXPECT_LT(v, prev);
    EXPECT_GT(v, 0.0);
    prev = v;
  }
}

TEST(Likelihood, NonPositiveSigmaThrows) {
  const Point p = make_point({0, 0});
  EXPECT_THROW(likelihood(p, p, 0.0), DomainError);
  EXPECT_THROW(likelihood(p, p, -1.0), DomainError);
  EXPECT_THROW(posterior(p, two_goal_scene(), 0.0), DomainError);
}

TEST(Posterior, EquidistantIsHalf) {
  const GoalScene s = two_goal_scene();
  EXPECT_NEAR(posterior(make_point({0.5, 0.3}), s, 0.08), 0.5, 1e-15);
  EXPECT_NEAR(potential(make_point({0.5, 0.3}), s, 0.08), std::log(2.0), 1e-12);
}

TEST(Posterior, AtIntendedGoalFarDistractor) {
  GoalScene s;
  s.start = make_point({0, 0});
  s.goals = {make_point({0, 0}), make_point({1, 0})};
  s.bounds = Box{make_point({-1, -1}), make_point({2, 2})};
  EXPECT_GT(posterior(make_point({0, 0}), s, 0.1), 1.0 - 1e-9);
}

TEST(Posterior, ThreeEquidistantGoals) {
  GoalScene s;
  s.start = make_point({0.5, 0.5});
  const double r = 0.3;
  for (int i = 0; i < 3; ++i) {
    const double a = 2.0 * std::numbers::pi * i / 3.0;
    s.goals.push_back(make_point({0.5 + r * std::cos(a), 0.5 + r * std::sin(a)}));
  }
  s.bounds = Box::unit(2);
  EXPECT_NEAR(posterior(make_point({0.5, 0.5}), s, 0.1), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(potential(make_point({0.5, 0.5}), s, 0.1), std::log(3.0), 1e-12);
}

TEST(Posterior, NormalizesOverRandomScenes) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = trial % 2 ? 3 : 2;
    GoalScene s;
    s.start = Point::Constant(d, 0.5);
    s.bounds = Box::unit(d);
    const int n = 2 + trial % 4;
    for (int i = 0; i < n; ++i) {
      Point g(d);
      for (int a = 0; a < d; ++a) g[a] = u(rng);
      s.goals.push_back(g);
    }
    Point x(d);
    for (int a = 0; a < d; ++a) x[a] = u(rng);
    const double sigma = 0.05 + 0.3 * u(rng);
    double sum = 0.0;
    for (double p : posteriors(x, s, sigma)) sum += p;
    ASSERT_NEAR(sum, 1.0, 1e-12);
    s.intended = static_cast<std::size_t>(trial) % s.goals.size();
    ASSERT_NEAR(posterior(x, s, sigma), naive_posterior(x, s, sigma), 1e-12);
  }
}

TEST(Posterior, FiniteFarFromAllGoals) {
  GoalScene s = two_goal_scene();
  s.bounds = Box{make_point({-100, -100}), make_point({100, 100})};
  const double phi = potential(make_point({90, -90}), s, 0.01);
  EXPECT_TRUE(std::isfinite(phi));
  EXPECT_GE(phi, 0.0);
}

TEST(Potential, DecreasesTowardIntendedGoal) {
  const GoalScene s = two_goal_scene();
  const Point mid = make_point({0.5, 0.9});
  double prev = potential(mid, s, 0.08);
  EXPECT_NEAR(prev, std::log(2.0), 1e-12);
  for (int i = 1; i <= 100; ++i) {
    const Point x = mid + (s.goals[0] - mid) * (i / 100.0);
    const double v = potential(x, s, 0.08);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Potential, MirrorSwapsPosteriors) {
  const GoalScene s = two_goal_scene();
  const GoalScene other = s.with_intended(1);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const Point x = make_point({u(rng), u(rng)});
    const Point mx = make_point({1.0 - x[0], x[1]});
    EXPECT_NEAR(posterior(x, s, 0.08), posterior(mx, other, 0.08), 1e-12);
  }
}

TEST(Potential, TranslationInvariant) {
  GoalScene s = two_goal_scene();
  GoalScene t = s;
  const Point shift = make_point({3.25, -1.5});
  t.start += shift;
  for (Point& g : t.goals) g += shift;
  t.bounds = Box{s.bounds.min + shift, s.bounds.max + shift};
  const Point x = make_point({0.42, 0.61});
  EXPECT_NEAR(potential(x, s, 0.08), potential(x + shift, t, 0.08), 1e-12);
}

TEST(Scene, ValidationRejectsBadScenes) {
  GoalScene s = two_goal_scene();
  s.goals[1] = s.goals[0];
  EXPECT_THROW(s.validate(), DomainError);
  s = two_goal_scene();
  s.intended = 2;
  EXPECT_THROW(s.validate(), DomainError);
  s = two_goal_scene();
  s.start = make_point({1.5, 0.5});
  EXPECT_THROW(s.validate(), DomainError);
  s = two_goal_scene();
  s.goals.pop_back();
  EXPECT_THROW(s.validate(), DomainError);
}

TEST(Scene, DefaultSigmaIsFifthOfNearestGoalGap) {
  EXPECT_NEAR(default_sigma(two_goal_scene()), 0.08, 1e-15);
}

TEST(Rasterize, CellCentersMatchPotential) {
  const GoalScene s = two_goal_scene();
  const IpfGrid g = rasterize(s, {16, 12}, 0.08);
  ASSERT_EQ(g.values.size(), 16u * 12u);
  EXPECT_EQ(g.sigma, 0.08);
  for (std::size_t iy = 0; iy < 12; ++iy) {
    for (std::size_t ix = 0; ix < 16; ++ix) {
      const Point c = make_point({(ix + 0.5) / 16.0, (iy + 0.5) / 12.0});
      EXPECT_NEAR(g.values[iy * 16 + ix], potential(c, s, 0.08), 1e-12);
      EXPECT_NEAR(g.interpolate(c), potential(c, s, 0.08), 1e-12);
    }
  }
}

TEST(Rasterize, BisectorCellNearLn2) {
  const GoalScene s = two_goal_scene();
  const IpfGrid g = rasterize(s, {64, 64}, 0.08);
  const Point mid = make_point({0.5, 0.9});
  const std::vector<std::size_t> cell = g.cell_containing(mid);
  // Largest change of the potential across the cell's neighbourhood.
  const Point h = g.cell_size();
  double variation = 0.0;
  for (int dx = -1; dx <= 1; ++dx) {
    for (int dy = -1; dy <= 1; ++dy) {
      variation = std::max(
          variation, std::abs(potential(mid + make_point({dx * h[0], dy * h[1]}),
                                        s, 0.08) -
                              std::log(2.0)));
    }
  }
  EXPECT_NEAR(g.at(cell), std::log(2.0), variation);
}

TEST(Rasterize, FinerGridInterpolatesBetter) {
  const GoalScene s = two_goal_scene();
  auto max_error = [&](std::size_t n) {
    const IpfGrid g = rasterize(s, {n, n}, 0.08);
    double worst = 0.0;
    for (int i = 0; i < 60; ++i) {
      for (int j = 0; j < 60; ++j) {
        const Point x = make_point({0.1 + 0.8 * i / 59.0, 0.1 + 0.8 * j / 59.0});
        worst = std::max(worst, std::abs(g.interpolate(x) - potential(x, s, 0.08)));
      }
    }
    return worst;
  };
  EXPECT_LT(max_error(32), max_error(16));
}

TEST(Rasterize, ValuesFiniteAndNonNegative3d) {
  GoalScene s;
  s.start = make_point({0.5, 0.5, 0.1});
  s.goals = {make_point({0.3, 0.5, 0.9}), make_point({0.7, 0.5, 0.9})};
  s.bounds = Box::unit(3);
  const IpfGrid g = rasterize(s, default_grid_resolution(3), 0.08);
  ASSERT_EQ(g.values.size(), 32u * 32u * 32u);
  for (double v : g.values) {
    ASSERT_TRUE(std::isfinite(v));
    ASSERT_GE(v, 0.0);
  }
  const std::vector<std::size_t> cell{3, 7, 11};
  EXPECT_EQ(g.cell_of_index(g.flat_index(cell)), cell);
  EXPECT_EQ(g.flat_index(cell), (11u * 32u + 7u) * 32u + 3u);
}

TEST(Rasterize, RejectsSingleCellAxis) {
  EXPECT_THROW(rasterize(two_goal_scene(), {1, 8}, 0.08), DomainError);
  EXPECT_THROW(rasterize(two_goal_scene(), {8, 8, 8}, 0.08), DomainError);
  EXPECT_THROW(rasterize(two_goal_scene(), {8, 8}, -0.1), DomainError);
}

}  // namespace
}  // namespace legimod
