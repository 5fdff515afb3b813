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

// Denoising diffusion shared by both generation stages: noise schedule,
// forward noising, an epsilon-prediction denoiser with FiLM conditioning,
// its training step, and ancestral sampling.

#ifndef LEGIMOD_DIFFUSION_HPP_
#define LEGIMOD_DIFFUSION_HPP_

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "legimod/errors.hpp"

namespace legimod {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct NoiseSchedule {
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  std::size_t num_steps() const { return betas.size(); }

  // 1-based accessors; alpha_bar(0) == 1.
  double beta(std::size_t t) const { return betas.at(t - 1); }
  double alpha(std::size_t t) const { return alphas.at(t - 1); }
  double alpha_bar(std::size_t t) const {
    return t == 0 ? 1.0 : alpha_bars.at(t - 1);
  }

  static NoiseSchedule from_betas(std::vector<double> betas) {
    NoiseSchedule s;
    s.betas = std::move(betas);
    s.alphas.resize(s.betas.size());
    s.alpha_bars.resize(s.betas.size());
    double acc = 1.0;
    for (std::size_t i = 0; i < s.betas.size(); ++i) {
      s.alphas[i] = 1.0 - s.betas[i];
      acc *= s.alphas[i];
      s.alpha_bars[i] = acc;
    }
    s.validate();
    return s;
  }

  static NoiseSchedule linear(std::size_t steps, double beta_start,
                              double beta_end) {
    detail::require(steps >= 1, "NoiseSchedule: needs at least one step");
    std::vector<double> b(steps);
    for (std::size_t i = 0; i < steps; ++i) {
      const double f = steps == 1 ? 0.0
                                  : static_cast<double>(i) /
                                        static_cast<double>(steps - 1);
      b[i] = beta_start + f * (beta_end - beta_start);
    }
    return from_betas(std::move(b));
  }

  // Linear betas from 1e-4 to 0.02 stretched by 1000 / steps, so a short
  // chain ends as close to pure noise as a 1000-step one. For 100 steps
  // that is 1e-3 -> 0.2 and alpha_bar(T) ~ 4e-5.
  static NoiseSchedule scaled_linear(std::size_t steps = 100) {
    const double scale = 1000.0 / static_cast<double>(steps);
    return linear(steps, std::min(1e-4 * scale, 0.5),
                  std::min(0.02 * scale, 0.999));
  }

  void validate() const {
    detail::require(!betas.empty(), "NoiseSchedule: empty");
    for (std::size_t i = 0; i < betas.size(); ++i) {
      detail::require(betas[i] > 0.0 && betas[i] < 1.0,
                      "NoiseSchedule: betas must lie in (0,1)");
      if (i > 0) {
        detail::require(betas[i] >= betas[i - 1],
                        "NoiseSchedule: betas must be non-decreasing");
        detail::require(alpha_bars[i] < alpha_bars[i - 1],
                        "NoiseSchedule: alpha_bars must strictly decrease");
      }
    }
  }
};

// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) noise, t in [1, T].
inline VectorXd forward_noise(const VectorXd& x0, std::size_t t,
                              const NoiseSchedule& schedule,
                              const VectorXd& noise) {
  if (t < 1 || t > schedule.num_steps()) {
    throw DomainError("forward_noise: step index out of range");
  }
  detail::require(x0.size() == noise.size(), "forward_noise: size mismatch");
  const double ab = schedule.alpha_bar(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * noise;
}

// Sinusoidal embedding of the step index, rescaled to a 1000-step range.
inline VectorXd timestep_embedding(std::size_t t, std::size_t total_steps,
                                   int width) {
  VectorXd e(width);
  const int half = width / 2;
  const double tt = static_cast<double>(t) * 1000.0 /
                    static_cast<double>(std::max<std::size_t>(total_steps, 1));
  for (int i = 0; i < half; ++i) {
    const double freq =
        std::exp(-std::log(10000.0) * static_cast<double>(i) /
                 static_cast<double>(std::max(half - 1, 1)));
    e[i] = std::sin(tt * freq);
    e[half + i] = std::cos(tt * freq);
  }
  if (width % 2 == 1) e[width - 1] = 0.0;
  return e;
}

// Affine generators context -> (scale, shift) for one hidden layer.
struct FilmHead {
  MatrixXd scale_weight;  // hidden x context
  VectorXd scale_bias;
  MatrixXd shift_weight;
  VectorXd shift_bias;

  static FilmHead zeros(int hidden, int context) {
    return {MatrixXd::Zero(hidden, context), VectorXd::Zero(hidden),
            MatrixXd::Zero(hidden, context), VectorXd::Zero(hidden)};
  }
};

// (1 + scale(context)) * hidden + shift(context), elementwise.
inline VectorXd apply_film(const VectorXd& hidden, const VectorXd& context,
                           const FilmHead& head) {
  if (head.scale_weight.rows() != hidden.size() ||
      head.shift_weight.rows() != hidden.size() ||
      head.scale_bias.size() != hidden.size() ||
      head.shift_bias.size() != hidden.size() ||
      head.scale_weight.cols() != context.size() ||
      head.shift_weight.cols() != context.size()) {
    throw DomainError("apply_film: head dimensions do not match");
  }
  const VectorXd scale = head.scale_weight * context + head.scale_bias;
  const VectorXd shift = head.shift_weight * context + head.shift_bias;
  return ((1.0 + scale.array()) * hidden.array() + shift.array()).matrix();
}

struct DenoiserConfig {
  int data_dim = 16;
  int context_dim = 8;
  int hidden = 128;
  int blocks = 3;
  int time_embed = 16;
  int cond_width = 64;

  int num_params() const;
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline MatrixXd silu(const MatrixXd& x) {
  return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

inline MatrixXd silu_grad(const MatrixXd& x) {
  return x.unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  });
}

}  // namespace detail

// Residual MLP denoiser predicting the injected noise.
//
//   c  = [context; timestep_embedding(t)]
//   e  = silu(We c + be)                         conditioning encoder
//   h  = Win x + bin
//   per block j:
//     z = W1 h + b1
//     u = (1 + Gs e + gs) * z + (Gb e + gb)      FiLM, heads start at zero
//     h = h + W2 silu(u) + b2
//   y  = Wout silu(h) + bout
//
// All parameters live in one flat vector; `layout()` names each slice.
class DenoiserNet {
 public:
  struct Slice {
    std::string name;
    Eigen::Index offset = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    bool film = false;
  };

  struct Cache {
    MatrixXd x;
    MatrixXd cond;      // c
    MatrixXd cond_pre;  // We c + be
    MatrixXd enc;       // e
    std::vector<MatrixXd> h;  // block inputs, plus the final hidden state
    std::vector<MatrixXd> z;
    std::vector<MatrixXd> scale;
    std::vector<MatrixXd> u;
    std::vector<MatrixXd> act;
    MatrixXd out_act;  // silu(h_final)
  };

  DenoiserNet() = default;

  explicit DenoiserNet(const DenoiserConfig& config, std::uint64_t seed = 0)
      : config_(config) {
    detail::require(config.data_dim > 0 && config.context_dim >= 0 &&
                        config.hidden > 0 && config.blocks >= 0 &&
                        config.time_embed >= 0 && config.cond_width > 0,
                    "DenoiserNet: invalid configuration");
    build_layout();
    initialize(seed);
  }

  const DenoiserConfig& config() const { return config_; }
  const std::vector<Slice>& layout() const { return layout_; }
  VectorXd& params() { return params_; }
  const VectorXd& params() const { return params_; }
  Eigen::Index num_params() const { return params_.size(); }

  int cond_dim() const { return config_.context_dim + config_.time_embed; }

  FilmHead film_head(int block) const {
    return {mat(slot(block, kGs)), mat(slot(block, kGsb)),
            mat(slot(block, kGb)), mat(slot(block, kGbb))};
  }

  void set_film_head(int block, const FilmHead& head) {
    mat(slot(block, kGs)) = head.scale_weight;
    mat(slot(block, kGsb)) = head.scale_bias;
    mat(slot(block, kGb)) = head.shift_weight;
    mat(slot(block, kGbb)) = head.shift_bias;
  }

  // Conditioning input c for a batch: contexts (context_dim x B) stacked
  // over the timestep embeddings.
  MatrixXd conditioning(const MatrixXd& context,
                        const std::vector<std::size_t>& steps,
                        std::size_t total_steps) const {
    const Eigen::Index batch = context.cols();
    detail::require(context.rows() == config_.context_dim,
                    "DenoiserNet: context length mismatch");
    detail::require(static_cast<Eigen::Index>(steps.size()) == batch,
                    "DenoiserNet: one step index per batch column");
    MatrixXd cond(cond_dim(), batch);
    cond.topRows(config_.context_dim) = context;
    if (config_.time_embed > 0) {
      for (Eigen::Index b = 0; b < batch; ++b) {
        cond.col(b).tail(config_.time_embed) =
            timestep_embedding(steps[b], total_steps, config_.time_embed);
      }
    }
    return cond;
  }

  // x: data_dim x B, cond: cond_dim x B (see conditioning()).
  MatrixXd forward(const MatrixXd& x, const MatrixXd& cond,
                   Cache* cache = nullptr) const {
    detail::require(x.rows() == config_.data_dim,
                    "DenoiserNet: data length mismatch");
    detail::require(cond.rows() == cond_dim() && cond.cols() == x.cols(),
                    "DenoiserNet: conditioning shape mismatch");
    Cache local;
    Cache& c = cache ? *cache : local;
    c.x = x;
    c.cond = cond;
    c.cond_pre = (mat(kWe) * cond).colwise() + vec(kBe);
    c.enc = detail::silu(c.cond_pre);
    c.h.assign(1, (mat(kWin) * x).colwise() + vec(kBin));
    c.z.clear();
    c.scale.clear();
    c.u.clear();
    c.act.clear();
    for (int j = 0; j < config_.blocks; ++j) {
      MatrixXd z = (mat(slot(j, kW1)) * c.h.back()).colwise() +
                   vec(slot(j, kB1));
      MatrixXd scale = (mat(slot(j, kGs)) * c.enc).colwise() +
                       vec(slot(j, kGsb));
      MatrixXd shift = (mat(slot(j, kGb)) * c.enc).colwise() +
                       vec(slot(j, kGbb));
      MatrixXd u = ((1.0 + scale.array()) * z.array() + shift.array()).matrix();
      MatrixXd a = detail::silu(u);
      MatrixXd next = c.h.back() + ((mat(slot(j, kW2)) * a).colwise() +
                                    vec(slot(j, kB2)));
      c.z.push_back(std::move(z));
      c.scale.push_back(std::move(scale));
      c.u.push_back(std::move(u));
      c.act.push_back(std::move(a));
      c.h.push_back(std::move(next));
    }
    c.out_act = detail::silu(c.h.back());
    return (mat(kWout) * c.out_act).colwise() + vec(kBout);
  }

  // Accumulates dLoss/dparams into `grad` given dLoss/doutput.
  void backward(const Cache& c, const MatrixXd& dy, VectorXd& grad) const {
    grad.setZero(params_.size());
    auto g = [&](std::size_t s) {
      const Slice& sl = layout_[s];
      return Eigen::Map<MatrixXd>(grad.data() + sl.offset, sl.rows, sl.cols);
    };
    g(kWout) = dy * c.out_act.transpose();
    g(kBout) = dy.rowwise().sum();
    MatrixXd dh = (mat(kWout).transpose() * dy).cwiseProduct(
        detail::silu_grad(c.h.back()));
    MatrixXd denc = MatrixXd::Zero(c.enc.rows(), c.enc.cols());
    for (int j = config_.blocks - 1; j >= 0; --j) {
      const std::size_t jj = static_cast<std::size_t>(j);
      g(slot(j, kW2)) = dh * c.act[jj].transpose();
      g(slot(j, kB2)) = dh.rowwise().sum();
      const MatrixXd du = (mat(slot(j, kW2)).transpose() * dh)
                              .cwiseProduct(detail::silu_grad(c.u[jj]));
      const MatrixXd dscale = du.cwiseProduct(c.z[jj]);
      const MatrixXd dz =
          (du.array() * (1.0 + c.scale[jj].array())).matrix();
      g(slot(j, kGs)) = dscale * c.enc.transpose();
      g(slot(j, kGsb)) = dscale.rowwise().sum();
      g(slot(j, kGb)) = du * c.enc.transpose();
      g(slot(j, kGbb)) = du.rowwise().sum();
      denc.noalias() += mat(slot(j, kGs)).transpose() * dscale;
      denc.noalias() += mat(slot(j, kGb)).transpose() * du;
      g(slot(j, kW1)) = dz * c.h[jj].transpose();
      g(slot(j, kB1)) = dz.rowwise().sum();
      dh += mat(slot(j, kW1)).transpose() * dz;
    }
    g(kWin) = dh * c.x.transpose();
    g(kBin) = dh.rowwise().sum();
    const MatrixXd dpre = denc.cwiseProduct(detail::silu_grad(c.cond_pre));
    g(kWe) = dpre * c.cond.transpose();
    g(kBe) = dpre.rowwise().sum();
  }

  // Fills FiLM heads with small random values (used by gradient checks so
  // that every path carries signal).
  void randomize_film_heads(std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    for (const Slice& s : layout_) {
      if (!s.film) continue;
      for (Eigen::Index i = 0; i < s.rows * s.cols; ++i) {
        params_[s.offset + i] = n(rng);
      }
    }
  }

 private:
  // Fixed slots before the per-block ones.
  static constexpr std::size_t kWe = 0, kBe = 1, kWin = 2, kBin = 3,
                               kWout = 4, kBout = 5, kFixed = 6;
  // Per-block slot offsets.
  static constexpr std::size_t kW1 = 0, kB1 = 1, kGs = 2, kGsb = 3, kGb = 4,
                               kGbb = 5, kW2 = 6, kB2 = 7, kPerBlock = 8;

  static std::size_t slot(int block, std::size_t which) {
    return kFixed + static_cast<std::size_t>(block) * kPerBlock + which;
  }

  Eigen::Map<MatrixXd> mat(std::size_t s) {
    const Slice& sl = layout_[s];
    return {params_.data() + sl.offset, sl.rows, sl.cols};
  }
  Eigen::Map<const MatrixXd> mat(std::size_t s) const {
    const Slice& sl = layout_[s];
    return {params_.data() + sl.offset, sl.rows, sl.cols};
  }
  Eigen::Map<const VectorXd> vec(std::size_t s) const {
    const Slice& sl = layout_[s];
    return {params_.data() + sl.offset, sl.rows};
  }

  void build_layout() {
    const int d = config_.data_dim;
    const int w = config_.hidden;
    const int m = config_.cond_width;
    Eigen::Index offset = 0;
    auto add = [&](std::string name, int rows, int cols, bool film = false) {
      layout_.push_back({std::move(name), offset, rows, cols, film});
      offset += static_cast<Eigen::Index>(rows) * cols;
    };
    add("cond.weight", m, cond_dim());
    add("cond.bias", m, 1);
    add("in.weight", w, d);
    add("in.bias", w, 1);
    add("out.weight", d, w);
    add("out.bias", d, 1);
    for (int j = 0; j < config_.blocks; ++j) {
      const std::string p = "block" + std::to_string(j) + ".";
      add(p + "fc1.weight", w, w);
      add(p + "fc1.bias", w, 1);
      add(p + "film.scale.weight", w, m, true);
      add(p + "film.scale.bias", w, 1, true);
      add(p + "film.shift.weight", w, m, true);
      add(p + "film.shift.bias", w, 1, true);
      add(p + "fc2.weight", w, w);
      add(p + "fc2.bias", w, 1);
    }
    params_ = VectorXd::Zero(offset);
  }

  // LeCun-normal weights, zero biases, zero FiLM heads, residual branches
  // scaled down so the initial network is close to a linear map.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto fill = [&](std::size_t s, double gain) {
      const Slice& sl = layout_[s];
      std::normal_distribution<double> n(
          0.0, gain / std::sqrt(static_cast<double>(std::max<Eigen::Index>(
                          sl.cols, 1))));
      for (Eigen::Index i = 0; i < sl.rows * sl.cols; ++i) {
        params_[sl.offset + i] = n(rng);
      }
    };
    fill(kWe, 1.0);
    fill(kWin, 1.0);
    fill(kWout, 1.0);
    for (int j = 0; j < config_.blocks; ++j) {
      fill(slot(j, kW1), 1.0);
      fill(slot(j, kW2), 0.5);
    }
  }

  DenoiserConfig config_;
  std::vector<Slice> layout_;
  VectorXd params_;
};

inline int DenoiserConfig::num_params() const {
  return static_cast<int>(DenoiserNet(*this).num_params());
}

// Mean squared error between predicted and true noise over every element
// of the batch, with its parameter gradient when `grad` is non-null.
inline double denoising_loss(const DenoiserNet& net, const MatrixXd& noisy,
                             const MatrixXd& cond, const MatrixXd& noise,
                             VectorXd* grad = nullptr) {
  DenoiserNet::Cache cache;
  const MatrixXd pred = net.forward(noisy, cond, grad ? &cache : nullptr);
  const MatrixXd diff = pred - noise;
  const double n = static_cast<double>(diff.size());
  const double loss = diff.squaredNorm() / n;
  if (grad) net.backward(cache, (2.0 / n) * diff, *grad);
  return loss;
}

struct OptimizerConfig {
  enum class Kind { kMomentum, kAdam };

  Kind kind = Kind::kAdam;
  double learning_rate = 2e-3;
  double momentum = 0.9;       // heavy-ball coefficient, or Adam beta1
  double beta2 = 0.999;        // Adam only
  double epsilon = 1e-8;       // Adam only
  double clip_norm = 1.0;      // global gradient-norm clip; <= 0 disables
  double final_lr_fraction = 0.05;  // cosine decay to lr * fraction
};

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(const OptimizerConfig& config, Eigen::Index size,
            std::size_t total_steps = 0)
      : config_(config),
        velocity_(VectorXd::Zero(size)),
        second_(config.kind == OptimizerConfig::Kind::kAdam ? VectorXd::Zero(size)
                                                          : VectorXd()),
        total_steps_(total_steps) {}

  const OptimizerConfig& config() const { return config_; }
  std::size_t steps_taken() const { return step_; }

  double current_lr() const {
    if (total_steps_ == 0 || config_.final_lr_fraction >= 1.0) {
      return config_.learning_rate;
    }
    const double progress = std::min(
        1.0, static_cast<double>(step_) / static_cast<double>(total_steps_));
    const double f = config_.final_lr_fraction;
    return config_.learning_rate *
           (f + (1.0 - f) * 0.5 * (1.0 + std::cos(progress * std::numbers::pi)));
  }

  void apply(VectorXd& params, VectorXd grad) {
    if (config_.clip_norm > 0.0) {
      const double norm = grad.norm();
      if (norm > config_.clip_norm) grad *= config_.clip_norm / norm;
    }
    const double lr = current_lr();
    ++step_;
    if (config_.kind == OptimizerConfig::Kind::kMomentum) {
      velocity_ = config_.momentum * velocity_ + grad;
      params -= lr * velocity_;
      return;
    }
    const double b1 = config_.momentum;
    const double b2 = config_.beta2;
    velocity_ = b1 * velocity_ + (1.0 - b1) * grad;
    second_ = b2 * second_ + (1.0 - b2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    params.array() -= lr * (velocity_.array() / c1) /
                      ((second_.array() / c2).sqrt() + config_.epsilon);
  }

 private:
  OptimizerConfig config_;
  VectorXd velocity_;
  VectorXd second_;
  std::size_t total_steps_ = 0;
  std::size_t step_ = 0;
};

// One stochastic step of the noise-prediction objective: per column a step
// index t ~ U{1..T} and noise ~ N(0, I) are drawn, the loss is evaluated,
// and the optimizer applies its gradient. Returns the pre-update loss.
inline double train_step(DenoiserNet& net, Optimizer& optimizer,
                         const MatrixXd& x0, const MatrixXd& context,
                         const NoiseSchedule& schedule, std::mt19937_64& rng) {
  detail::require(x0.cols() > 0, "train_step: empty batch");
  detail::require(context.cols() == x0.cols(),
                  "train_step: one context per sample");
  const std::size_t steps = schedule.num_steps();
  std::uniform_int_distribution<std::size_t> pick_t(1, steps);
  std::normal_distribution<double> normal;
  std::vector<std::size_t> ts(static_cast<std::size_t>(x0.cols()));
  MatrixXd noise(x0.rows(), x0.cols());
  MatrixXd noisy(x0.rows(), x0.cols());
  for (Eigen::Index b = 0; b < x0.cols(); ++b) {
    ts[static_cast<std::size_t>(b)] = pick_t(rng);
    for (Eigen::Index i = 0; i < x0.rows(); ++i) noise(i, b) = normal(rng);
    const double ab = schedule.alpha_bar(ts[static_cast<std::size_t>(b)]);
    noisy.col(b) = std::sqrt(ab) * x0.col(b) + std::sqrt(1.0 - ab) * noise.col(b);
  }
  const MatrixXd cond = net.conditioning(context, ts, steps);
  VectorXd grad;
  const double loss = denoising_loss(net, noisy, cond, noise, &grad);
  if (!std::isfinite(loss) || !grad.allFinite()) {
    throw DivergenceError("train_step: non-finite loss (" +
                          std::to_string(loss) + ") after " +
                          std::to_string(optimizer.steps_taken()) + " steps");
  }
  optimizer.apply(net.params(), std::move(grad));
  return loss;
}

struct TrainConfig {
  std::size_t steps = 4000;
  std::size_t batch = 64;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
};

struct TrainResult {
  std::vector<double> losses;  // one per step
  double final_loss = 0.0;     // mean of the last 5% of steps
};

// Minibatch training over a fixed data set. data: D x N, context: C x N.
// Minibatches are drawn with replacement; the run is a pure function of
// (initial weights, data, config).
inline TrainResult train_denoiser(DenoiserNet& net, const MatrixXd& data,
                                  const MatrixXd& context,
                                  const NoiseSchedule& schedule,
                                  const TrainConfig& config) {
  detail::require(data.cols() > 0, "train_denoiser: empty data set");
  detail::require(data.cols() == context.cols(),
                  "train_denoiser: one context per sample");
  std::mt19937_64 rng(config.seed);
  Optimizer opt(config.optimizer, net.num_params(), config.steps);
  std::uniform_int_distribution<Eigen::Index> pick(0, data.cols() - 1);
  const Eigen::Index batch = static_cast<Eigen::Index>(
      std::max<std::size_t>(config.batch, 1));
  MatrixXd xb(data.rows(), batch);
  MatrixXd cb(context.rows(), batch);
  TrainResult result;
  result.losses.reserve(config.steps);
  for (std::size_t s = 0; s < config.steps; ++s) {
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Eigen::Index i = pick(rng);
      xb.col(b) = data.col(i);
      cb.col(b) = context.col(i);
    }
    result.losses.push_back(train_step(net, opt, xb, cb, schedule, rng));
  }
  const std::size_t tail = std::max<std::size_t>(1, result.losses.size() / 20);
  double acc = 0.0;
  for (std::size_t i = result.losses.size() - std::min(tail, result.losses.size());
       i < result.losses.size(); ++i) {
    acc += result.losses[i];
  }
  result.final_loss =
      result.losses.empty() ? 0.0
                            : acc / static_cast<double>(std::min(
                                        tail, result.losses.size()));
  return result;
}

struct SampleOptions {
  double clip = 1.0;  // clamp of the predicted clean sample; <= 0 disables
};

// Ancestral sampling for a batch of contexts (C x B), starting from
// standard normal noise. Each reverse step predicts the clean sample from
// the noise estimate, clamps it, and draws from the Gaussian posterior
// q(x_{t-1} | x_t, x0). Returns D x B.
inline MatrixXd sample_batch(const DenoiserNet& net, const MatrixXd& context,
                             const NoiseSchedule& schedule,
                             std::mt19937_64& rng,
                             const SampleOptions& options = {}) {
  const Eigen::Index batch = context.cols();
  const Eigen::Index d = net.config().data_dim;
  std::normal_distribution<double> normal;
  MatrixXd x(d, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index i = 0; i < d; ++i) x(i, b) = normal(rng);
  }
  const std::size_t total = schedule.num_steps();
  for (std::size_t t = total; t >= 1; --t) {
    const std::vector<std::size_t> ts(static_cast<std::size_t>(batch), t);
    const MatrixXd eps = net.forward(x, net.conditioning(context, ts, total));
    const double ab = schedule.alpha_bar(t);
    const double ab_prev = schedule.alpha_bar(t - 1);
    const double beta = schedule.beta(t);
    MatrixXd x0 = (x - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
    if (options.clip > 0.0) {
      x0 = x0.cwiseMax(-options.clip).cwiseMin(options.clip);
    }
    const double c0 = beta * std::sqrt(ab_prev) / (1.0 - ab);
    const double ct = (1.0 - ab_prev) * std::sqrt(schedule.alpha(t)) / (1.0 - ab);
    x = c0 * x0 + ct * x;
    if (t > 1) {
      const double sd = std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab));
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index i = 0; i < d; ++i) x(i, b) += sd * normal(rng);
      }
    }
    if (!x.allFinite()) {
      throw DivergenceError("sample: non-finite iterate at step " +
                            std::to_string(t));
    }
  }
  return x;
}

inline VectorXd sample(const DenoiserNet& net, const VectorXd& context,
                       const NoiseSchedule& schedule, std::uint64_t seed,
                       const SampleOptions& options = {}) {
  std::mt19937_64 rng(seed);
  return sample_batch(net, context, schedule, rng, options).col(0);
}

// Per-axis affine map to [-1, 1] for flattened point sequences: element i
// belongs to axis i % axes. Axes with (near) zero spread are only shifted.
struct AxisNormalizer {
  std::vector<double> lo;
  std::vector<double> hi;

  int axes() const { return static_cast<int>(lo.size()); }

  static AxisNormalizer fit(const MatrixXd& data, int axes) {
    AxisNormalizer n;
    n.lo.assign(static_cast<std::size_t>(axes),
                std::numeric_limits<double>::infinity());
    n.hi.assign(static_cast<std::size_t>(axes),
                -std::numeric_limits<double>::infinity());
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const std::size_t a = static_cast<std::size_t>(i % axes);
        n.lo[a] = std::min(n.lo[a], data(i, c));
        n.hi[a] = std::max(n.hi[a], data(i, c));
      }
    }
    return n;
  }

  double half_span(std::size_t a) const {
    const double h = 0.5 * (hi[a] - lo[a]);
    return h > 1e-9 ? h : 1.0;
  }
  double center(std::size_t a) const { return 0.5 * (hi[a] + lo[a]); }

  VectorXd normalize(const VectorXd& v) const {
    VectorXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const std::size_t a = static_cast<std::size_t>(i % axes());
      out[i] = (v[i] - center(a)) / half_span(a);
    }
    return out;
  }

  VectorXd denormalize(const VectorXd& v) const {
    VectorXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const std::size_t a = static_cast<std::size_t>(i % axes());
      out[i] = v[i] * half_span(a) + center(a);
    }
    return out;
  }

  MatrixXd normalize_columns(const MatrixXd& m) const {
    MatrixXd out(m.rows(), m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out.col(c) = normalize(m.col(c));
    }
    return out;
  }
};

// Named slices of a context vector.
struct ContextField {
  std::string name;
  int offset = 0;
  int length = 0;
};

struct ContextLayout {
  std::vector<ContextField> fields;

  int size() const {
    return fields.empty() ? 0
                          : fields.back().offset + fields.back().length;
  }

  void add(const std::string& name, int length) {
    fields.push_back({name, size(), length});
  }

  const ContextField& field(const std::string& name) const {
    for (const ContextField& f : fields) {
      if (f.name == name) return f;
    }
    throw DomainError("ContextLayout: no field named " + name);
  }

  bool operator==(const ContextLayout& other) const {
    if (fields.size() != other.fields.size()) return false;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].name != other.fields[i].name ||
          fields[i].offset != other.fields[i].offset ||
          fields[i].length != other.fields[i].length) {
        return false;
      }
    }
    return true;
  }
};

// A trained denoiser with everything needed to sample from it again.
struct DiffusionModel {
  std::string kind;  // "path-diffuser" or "guided-policy"
  DenoiserNet net;
  NoiseSchedule schedule;
  AxisNormalizer norm;
  ContextLayout layout;
  std::uint64_t seed = 0;
  std::size_t train_steps = 0;
  double final_loss = 0.0;
};

}  // namespace legimod

#endif  // LEGIMOD_DIFFUSION_HPP_
