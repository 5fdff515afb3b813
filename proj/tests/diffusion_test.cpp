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

#include "legimod/diffusion.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

namespace legimod {
namespace {

DenoiserConfig small_config() {
  DenoiserConfig c;
  c.data_dim = 4;
  c.context_dim = 3;
  c.hidden = 24;
  c.blocks = 2;
  c.time_embed = 6;
  c.cond_width = 10;
  return c;
}

MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  }
  return m;
}

TEST(Schedule, ScaledLinearEndpointsAndMonotone) {
  const NoiseSchedule s = NoiseSchedule::scaled_linear(100);
  ASSERT_EQ(s.num_steps(), 100u);
  EXPECT_NEAR(s.beta(1), 1e-3, 1e-15);
  EXPECT_NEAR(s.beta(100), 0.2, 1e-15);
  double prod = 1.0;
  for (std::size_t t = 1; t <= 100; ++t) {
    prod *= 1.0 - s.beta(t);
    EXPECT_NEAR(s.alpha_bar(t), prod, 1e-15);
    EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
  }
  EXPECT_LT(s.alpha_bar(100), 1e-3);
  EXPECT_GT(s.alpha_bar(1), 0.99);
}

TEST(Schedule, RejectsInvalidBetas) {
  EXPECT_THROW(NoiseSchedule::from_betas({}), DomainError);
  EXPECT_THROW(NoiseSchedule::from_betas({0.1, 0.0}), DomainError);
  EXPECT_THROW(NoiseSchedule::from_betas({0.2, 0.1}), DomainError);
  EXPECT_THROW(NoiseSchedule::from_betas({0.5, 1.0}), DomainError);
}

TEST(ForwardNoise, ZeroNoiseScalesInput) {
  const NoiseSchedule s = NoiseSchedule::scaled_linear(100);
  VectorXd x0(3);
  x0 << 0.5, -1.0, 2.0;
  const VectorXd xt = forward_noise(x0, 40, s, VectorXd::Zero(3));
  EXPECT_NEAR((xt - std::sqrt(s.alpha_bar(40)) * x0).norm(), 0.0, 1e-15);
  EXPECT_THROW(forward_noise(x0, 0, s, VectorXd::Zero(3)), DomainError);
  EXPECT_THROW(forward_noise(x0, 101, s, VectorXd::Zero(3)), DomainError);
  EXPECT_THROW(forward_noise(x0, 1, s, VectorXd::Zero(2)), DomainError);
}

TEST(ForwardNoise, MonteCarloMoments) {
  const NoiseSchedule s = NoiseSchedule::scaled_linear(100);
  const std::size_t t = 30;
  const double ab = s.alpha_bar(t);
  VectorXd x0(1);
  x0 << 0.7;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  const int trials = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < trials; ++i) {
    VectorXd e(1);
    e << n(rng);
    const double v = forward_noise(x0, t, s, e)[0];
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / trials;
  const double var = sum2 / trials - mean * mean;
  EXPECT_NEAR(mean, std::sqrt(ab) * 0.7, 0.01);
  EXPECT_NEAR(var, 1.0 - ab, 0.05 * (1.0 - ab));
}

TEST(TimestepEmbedding, BoundedAndDistinct) {
  const VectorXd a = timestep_embedding(1, 100, 16);
  const VectorXd b = timestep_embedding(2, 100, 16);
  EXPECT_EQ(a.size(), 16);
  EXPECT_LE(a.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_GT((a - b).norm(), 1e-3);
}

TEST(Film, ZeroHeadIsIdentity) {
  VectorXd h(3);
  h << 1.0, -2.0, 0.5;
  VectorXd c(2);
  c << 4.0, -7.0;
  EXPECT_EQ(apply_film(h, c, FilmHead::zeros(3, 2)), h);
}

TEST(Film, BiasOnlyHeads) {
  VectorXd h(2);
  h << 1.0, 3.0;
  const VectorXd c = VectorXd::Ones(4);
  FilmHead head = FilmHead::zeros(2, 4);
  head.scale_bias.setConstant(1.0);
  EXPECT_EQ(apply_film(h, c, head), 2.0 * h);
  head = FilmHead::zeros(2, 4);
  head.shift_bias << 0.25, -0.5;
  VectorXd expected(2);
  expected << 1.25, 2.5;
  EXPECT_EQ(apply_film(h, c, head), expected);
}

TEST(Film, DimensionMismatchThrows) {
  EXPECT_THROW(apply_film(VectorXd::Ones(3), VectorXd::Ones(2),
                          FilmHead::zeros(4, 2)),
               DomainError);
  EXPECT_THROW(apply_film(VectorXd::Ones(3), VectorXd::Ones(5),
                          FilmHead::zeros(3, 2)),
               DomainError);
}

TEST(Denoiser, FreshNetIgnoresConditioning) {
  const DenoiserNet net(small_config(), 4);
  const MatrixXd x = random_matrix(4, 5, 1);
  const MatrixXd c1 = net.conditioning(random_matrix(3, 5, 2), {1, 2, 3, 4, 5}, 100);
  const MatrixXd c2 =
      net.conditioning(random_matrix(3, 5, 3), {90, 80, 70, 60, 50}, 100);
  EXPECT_EQ(net.forward(x, c1), net.forward(x, c2));
  for (int j = 0; j < 2; ++j) {
    const FilmHead h = net.film_head(j);
    EXPECT_EQ(h.scale_weight.norm() + h.shift_weight.norm() +
                  h.scale_bias.norm() + h.shift_bias.norm(),
              0.0);
  }
}

TEST(Denoiser, LayoutCoversParameters) {
  const DenoiserNet net(small_config(), 0);
  Eigen::Index next = 0;
  int film = 0;
  for (const DenoiserNet::Slice& s : net.layout()) {
    EXPECT_EQ(s.offset, next);
    next += s.rows * s.cols;
    film += s.film ? 1 : 0;
  }
  EXPECT_EQ(next, net.num_params());
  EXPECT_EQ(film, 2 * 4);
  EXPECT_EQ(small_config().num_params(), net.num_params());
}

TEST(Denoiser, ZeroNoiseLossIsMeanSquaredPrediction) {
  const DenoiserNet net(small_config(), 5);
  const MatrixXd x = random_matrix(4, 6, 7);
  const MatrixXd cond =
      net.conditioning(random_matrix(3, 6, 8), {3, 3, 3, 3, 3, 3}, 100);
  const MatrixXd pred = net.forward(x, cond);
  EXPECT_NEAR(denoising_loss(net, x, cond, MatrixXd::Zero(4, 6)),
              pred.squaredNorm() / 24.0, 1e-14);
}

TEST(Denoiser, GradientMatchesFiniteDifferences) {
  DenoiserNet net(small_config(), 11);
  net.randomize_film_heads(12, 0.3);
  const MatrixXd x = random_matrix(4, 3, 13);
  const MatrixXd noise = random_matrix(4, 3, 14);
  const MatrixXd cond = net.conditioning(random_matrix(3, 3, 15), {5, 50, 95}, 100);
  VectorXd grad;
  denoising_loss(net, x, cond, noise, &grad);
  ASSERT_EQ(grad.size(), net.num_params());
  // Central differences on one entry of every slice.
  const double h = 1e-6;
  for (const DenoiserNet::Slice& s : net.layout()) {
    for (Eigen::Index k : {Eigen::Index{0}, s.rows * s.cols - 1}) {
      const Eigen::Index i = s.offset + k;
      DenoiserNet plus = net, minus = net;
      plus.params()[i] += h;
      minus.params()[i] -= h;
      const double fd = (denoising_loss(plus, x, cond, noise) -
                         denoising_loss(minus, x, cond, noise)) /
                        (2 * h);
      EXPECT_NEAR(grad[i], fd, 1e-6 + 1e-4 * std::abs(fd)) << s.name;
    }
  }
}

TEST(Denoiser, SameSeedSameWeights) {
  EXPECT_EQ(DenoiserNet(small_config(), 3).params(),
            DenoiserNet(small_config(), 3).params());
  EXPECT_NE(DenoiserNet(small_config(), 3).params(),
            DenoiserNet(small_config(), 4).params());
}

TEST(Optimizer, CosineDecayEndpoints) {
  OptimizerConfig oc;
  oc.learning_rate = 1e-2;
  oc.final_lr_fraction = 0.1;
  Optimizer opt(oc, 1, 100);
  EXPECT_NEAR(opt.current_lr(), 1e-2, 1e-15);
  VectorXd p = VectorXd::Zero(1);
  for (int i = 0; i < 50; ++i) opt.apply(p, VectorXd::Ones(1));
  EXPECT_NEAR(opt.current_lr(), 1e-2 * (0.1 + 0.9 * 0.5), 1e-15);
  for (int i = 0; i < 50; ++i) opt.apply(p, VectorXd::Ones(1));
  EXPECT_NEAR(opt.current_lr(), 1e-3, 1e-15);
}

TEST(Optimizer, ClipsGradientNorm) {
  OptimizerConfig oc;
  oc.kind = OptimizerConfig::Kind::kMomentum;
  oc.momentum = 0.0;
  oc.learning_rate = 1.0;
  oc.clip_norm = 1.0;
  oc.final_lr_fraction = 1.0;
  Optimizer opt(oc, 2);
  VectorXd p = VectorXd::Zero(2);
  VectorXd g(2);
  g << 30.0, 40.0;
  opt.apply(p, g);
  EXPECT_NEAR(p[0], -0.6, 1e-15);
  EXPECT_NEAR(p[1], -0.8, 1e-15);
}

TEST(Optimizer, AdamFirstStepIsLearningRateSized) {
  OptimizerConfig oc;
  oc.learning_rate = 0.01;
  oc.clip_norm = 0.0;
  oc.final_lr_fraction = 1.0;
  Optimizer opt(oc, 2);
  VectorXd p = VectorXd::Zero(2);
  VectorXd g(2);
  g << 3.0, -0.002;
  opt.apply(p, g);
  EXPECT_NEAR(p[0], -0.01, 1e-8);
  EXPECT_NEAR(p[1], 0.01, 1e-4);
}

class TrainingTest : public ::testing::Test {
 protected:
  static DenoiserConfig config() {
    DenoiserConfig c;
    c.data_dim = 4;
    c.context_dim = 2;
    c.hidden = 32;
    c.blocks = 2;
    c.time_embed = 8;
    c.cond_width = 16;
    return c;
  }
};

TEST_F(TrainingTest, LossDropsOnSmallDataset) {
  const MatrixXd data = random_matrix(4, 16, 21).cwiseMax(-1.0).cwiseMin(1.0);
  const MatrixXd ctx = random_matrix(2, 16, 22);
  DenoiserNet net(config(), 23);
  TrainConfig tc;
  tc.steps = 2000;
  tc.batch = 16;
  tc.seed = 24;
  const NoiseSchedule s = NoiseSchedule::scaled_linear(100);
  const TrainResult r = train_denoiser(net, data, ctx, s, tc);
  ASSERT_EQ(r.losses.size(), 2000u);
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 100; ++i) {
    head += r.losses[static_cast<std::size_t>(i)];
    tail += r.losses[r.losses.size() - 1 - static_cast<std::size_t>(i)];
  }
  EXPECT_LT(tail, 0.5 * head);
}

TEST_F(TrainingTest, OverfitsSingleSample) {
  MatrixXd data(4, 1);
  data << 0.6, -0.3, 0.1, 0.9;
  const MatrixXd ctx = MatrixXd::Zero(2, 1);
  DenoiserNet net(config(), 31);
  TrainConfig tc;
  tc.steps = 3000;
  tc.batch = 32;
  tc.seed = 32;
  const NoiseSchedule s = NoiseSchedule::scaled_linear(100);
  train_denoiser(net, data, ctx, s, tc);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const VectorXd x = sample(net, ctx.col(0), s, seed);
    EXPECT_LT((x - data.col(0)).norm(), 0.05) << "seed " << seed;
  }
}

TEST_F(TrainingTest, DeterministicGivenSeeds) {
  const MatrixXd data = random_matrix(4, 8, 41).cwiseMax(-1.0).cwiseMin(1.0);
  const MatrixXd ctx = random_matrix(2, 8, 42);
  const NoiseSchedule s = NoiseSchedule::scaled_linear(20);
  TrainConfig tc;
  tc.steps = 50;
  tc.batch = 8;
  tc.seed = 43;
  DenoiserNet a(config(), 44), b(config(), 44);
  const TrainResult ra = train_denoiser(a, data, ctx, s, tc);
  const TrainResult rb = train_denoiser(b, data, ctx, s, tc);
  EXPECT_EQ(ra.losses, rb.losses);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_EQ(sample(a, ctx.col(0), s, 7), sample(b, ctx.col(0), s, 7));
  EXPECT_NE(sample(a, ctx.col(0), s, 7), sample(a, ctx.col(0), s, 8));
}

TEST_F(TrainingTest, NonFiniteLossRaisesDivergence) {
  DenoiserNet net(config(), 51);
  net.params()[0] = std::numeric_limits<double>::quiet_NaN();
  const MatrixXd data = MatrixXd::Zero(4, 2);
  const MatrixXd ctx = MatrixXd::Zero(2, 2);
  TrainConfig tc;
  tc.steps = 1;
  EXPECT_THROW(train_denoiser(net, data, ctx, NoiseSchedule::scaled_linear(10), tc),
               DivergenceError);
}

TEST_F(TrainingTest, ClampKeepsSamplesInRange) {
  DenoiserNet net(config(), 61);
  net.randomize_film_heads(62, 1.0);
  const NoiseSchedule s = NoiseSchedule::scaled_linear(50);
  std::mt19937_64 rng(63);
  const MatrixXd x = sample_batch(net, random_matrix(2, 32, 64), s, rng);
  // The last step returns the clamped clean estimate mixed with x_1; with a
  // tiny beta_1 the result stays close to the [-1, 1] box.
  EXPECT_LE(x.cwiseAbs().maxCoeff(), 1.05);
}

TEST(Normalizer, RoundTripAndRange) {
  MatrixXd data(4, 3);
  data << 0.1, 0.5, 0.9,  //
      0.2, 0.4, 0.8,      //
      0.3, 0.7, 0.1,      //
      0.6, 0.6, 0.6;
  const AxisNormalizer n = AxisNormalizer::fit(data, 2);
  EXPECT_EQ(n.lo[0], 0.1);
  EXPECT_EQ(n.hi[0], 0.9);
  EXPECT_EQ(n.lo[1], 0.2);
  EXPECT_EQ(n.hi[1], 0.8);
  const MatrixXd z = n.normalize_columns(data);
  EXPECT_LE(z.cwiseAbs().maxCoeff(), 1.0 + 1e-15);
  for (Eigen::Index c = 0; c < 3; ++c) {
    EXPECT_LT((n.denormalize(z.col(c)) - data.col(c)).norm(), 1e-15);
  }
  MatrixXd flat = MatrixXd::Constant(2, 2, 0.4);
  const AxisNormalizer f = AxisNormalizer::fit(flat, 2);
  EXPECT_EQ(f.normalize(flat.col(0)), VectorXd::Zero(2));
}

TEST(Layout, FieldsAreContiguous) {
  ContextLayout l;
  l.add("start", 2);
  l.add("goal", 2);
  l.add("ell", 4);
  EXPECT_EQ(l.size(), 8);
  EXPECT_EQ(l.field("ell").offset, 4);
  EXPECT_THROW(l.field("nope"), DomainError);
  ContextLayout m = l;
  EXPECT_TRUE(l == m);
  m.add("x", 1);
  EXPECT_FALSE(l == m);
}

}  // namespace
}  // namespace legimod
