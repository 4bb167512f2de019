// Copyright 2026 The stutterkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Two-branch MLP back-end. The fluent branch separates fluent speech from
// any disfluency (pseudo-labels); the disfluent branch types the disfluency
// and never receives loss from fluent samples. Each branch is
//
//   x -> FC -> ReLU -> BN -> dropout -> FC -> ReLU -> BN -> dropout -> FC -> softmax
//
// with all parameters of a branch stored in one flat vector so the optimizer
// and gradient checks can treat them uniformly.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stutterkit/error.hpp"
#include "stutterkit/labels.hpp"
#include "stutterkit/numerics.hpp"
#include "stutterkit/scores.hpp"

namespace stutterkit::mlp {

struct TrainingConfig {
  std::size_t batch_size = 128;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t patience = 7;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 32;
  double dropout = 0.2;
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;

  void validate() const {
    if (batch_size == 0 || !(learning_rate > 0) || patience == 0 || max_epochs == 0 ||
        hidden1 == 0 || hidden2 == 0 || !(dropout >= 0 && dropout < 1) || !(beta1 >= 0 && beta1 < 1) ||
        !(beta2 >= 0 && beta2 < 1) || !(adam_epsilon > 0) || !(bn_epsilon > 0) ||
        !(bn_momentum > 0 && bn_momentum <= 1))
      fail(ErrorCode::BadConfig, "invalid MLP training configuration");
  }
};

/// Offsets of each parameter block inside BranchNet::params.
struct BranchLayout {
  std::size_t in = 0, h1 = 0, h2 = 0, out = 0;
  std::size_t w1 = 0, b1 = 0, g1 = 0, be1 = 0;
  std::size_t w2 = 0, b2 = 0, g2 = 0, be2 = 0;
  std::size_t w3 = 0, b3 = 0, size = 0;

  static BranchLayout make(std::size_t in, std::size_t h1, std::size_t h2, std::size_t out) {
    BranchLayout l{in, h1, h2, out};
    std::size_t o = 0;
    auto take = [&o](std::size_t n) {
      const std::size_t at = o;
      o += n;
      return at;
    };
    l.w1 = take(h1 * in);
    l.b1 = take(h1);
    l.g1 = take(h1);
    l.be1 = take(h1);
    l.w2 = take(h2 * h1);
    l.b2 = take(h2);
    l.g2 = take(h2);
    l.be2 = take(h2);
    l.w3 = take(out * h2);
    l.b3 = take(out);
    l.size = o;
    return l;
  }

  friend bool operator==(const BranchLayout&, const BranchLayout&) = default;
};

/// Per-feature batch-norm running statistics.
struct RunningStats {
  Vector mean;
  Vector var;
};

struct DropoutMasks {
  Matrix m1;  // B x h1, entries 0 or 1/keep
  Matrix m2;  // B x h2
};

/// Intermediate values of a train-mode forward pass, kept for backward.
struct BranchCache {
  Matrix input;
  Matrix z1, xhat1, d1;
  Vector inv_std1, mean1, var1;
  Matrix z2, xhat2, d2;
  Vector inv_std2, mean2, var2;
  Matrix logits, log_probs, probs;
  DropoutMasks masks;
};

inline void softmax_rows(const Matrix& logits, Matrix& log_probs, Matrix& probs) {
  log_probs = Matrix(logits.rows(), logits.cols());
  probs = Matrix(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto z = logits.row(i);
    const double top = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - top);
    const double lse = top + std::log(s);
    for (std::size_t j = 0; j < z.size(); ++j) {
      log_probs(i, j) = z[j] - lse;
      probs(i, j) = std::exp(log_probs(i, j));
    }
  }
}

class BranchNet {
 public:
  BranchNet() = default;
  BranchNet(std::size_t in, std::size_t h1, std::size_t h2, std::size_t out)
      : layout_(BranchLayout::make(in, h1, h2, out)),
        params_(layout_.size, 0.0),
        stats1_{Vector(h1, 0.0), Vector(h1, 1.0)},
        stats2_{Vector(h2, 0.0), Vector(h2, 1.0)} {
    for (std::size_t i = 0; i < h1; ++i) params_[layout_.g1 + i] = 1.0;
    for (std::size_t i = 0; i < h2; ++i) params_[layout_.g2 + i] = 1.0;
  }

  /// Fan-in scaled uniform weights and biases; BN scale 1, shift 0.
  void initialize(SeededRng& rng) {
    auto fill = [&](std::size_t at, std::size_t n, std::size_t fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (std::size_t i = 0; i < n; ++i) params_[at + i] = rng.uniform(-bound, bound);
    };
    const auto& l = layout_;
    fill(l.w1, l.h1 * l.in, l.in);
    fill(l.b1, l.h1, l.in);
    fill(l.w2, l.h2 * l.h1, l.h1);
    fill(l.b2, l.h2, l.h1);
    fill(l.w3, l.out * l.h2, l.h2);
    fill(l.b3, l.out, l.h2);
    for (std::size_t i = 0; i < l.h1; ++i) {
      params_[l.g1 + i] = 1.0;
      params_[l.be1 + i] = 0.0;
    }
    for (std::size_t i = 0; i < l.h2; ++i) {
      params_[l.g2 + i] = 1.0;
      params_[l.be2 + i] = 0.0;
    }
  }

  const BranchLayout& layout() const noexcept { return layout_; }
  const Vector& params() const noexcept { return params_; }
  Vector& params() noexcept { return params_; }
  const RunningStats& stats1() const noexcept { return stats1_; }
  const RunningStats& stats2() const noexcept { return stats2_; }
  RunningStats& stats1() noexcept { return stats1_; }
  RunningStats& stats2() noexcept { return stats2_; }
  bool batchnorm_fitted() const noexcept { return bn_fitted_; }
  void set_batchnorm_fitted(bool v) noexcept { bn_fitted_ = v; }

  DropoutMasks draw_masks(std::size_t batch, double dropout, SeededRng& rng) const {
    const double keep = 1.0 - dropout;
    DropoutMasks m{Matrix(batch, layout_.h1), Matrix(batch, layout_.h2)};
    for (auto& v : m.m1.data()) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
    for (auto& v : m.m2.data()) v = rng.uniform() < keep ? 1.0 / keep : 0.0;
    return m;
  }

  /// Train-mode pass with batch statistics and the given dropout masks.
  /// Does not touch the running statistics.
  BranchCache forward_train(const Matrix& x, const DropoutMasks& masks, double bn_eps) const {
    check_input(x);
    BranchCache c;
    c.input = x;
    c.masks = masks;
    hidden_train(x, layout_.w1, layout_.b1, layout_.g1, layout_.be1, layout_.in, layout_.h1,
                 masks.m1, bn_eps, c.z1, c.xhat1, c.d1, c.inv_std1, c.mean1, c.var1);
    hidden_train(c.d1, layout_.w2, layout_.b2, layout_.g2, layout_.be2, layout_.h1, layout_.h2,
                 masks.m2, bn_eps, c.z2, c.xhat2, c.d2, c.inv_std2, c.mean2, c.var2);
    c.logits = affine(c.d2, layout_.w3, layout_.b3, layout_.h2, layout_.out);
    softmax_rows(c.logits, c.log_probs, c.probs);
    return c;
  }

  /// Folds a train-mode batch's statistics into the running estimates
  /// (unbiased variance, exponential moving average).
  void update_running_stats(const BranchCache& c, double momentum) {
    const auto b = static_cast<double>(c.input.rows());
    const double unbias = b > 1 ? b / (b - 1) : 1.0;
    for (std::size_t j = 0; j < layout_.h1; ++j) {
      stats1_.mean[j] = (1 - momentum) * stats1_.mean[j] + momentum * c.mean1[j];
      stats1_.var[j] = (1 - momentum) * stats1_.var[j] + momentum * c.var1[j] * unbias;
    }
    for (std::size_t j = 0; j < layout_.h2; ++j) {
      stats2_.mean[j] = (1 - momentum) * stats2_.mean[j] + momentum * c.mean2[j];
      stats2_.var[j] = (1 - momentum) * stats2_.var[j] + momentum * c.var2[j] * unbias;
    }
    bn_fitted_ = true;
  }

  /// Eval-mode log-probabilities: running statistics, no dropout.
  Matrix forward_eval_log_probs(const Matrix& x, double bn_eps) const {
    if (!bn_fitted_) fail(ErrorCode::UnfittedBatchNorm, "eval forward before any training step");
    check_input(x);
    Matrix h1 = hidden_eval(x, layout_.w1, layout_.b1, layout_.g1, layout_.be1, layout_.in,
                            layout_.h1, stats1_, bn_eps);
    Matrix h2 = hidden_eval(h1, layout_.w2, layout_.b2, layout_.g2, layout_.be2, layout_.h1,
                            layout_.h2, stats2_, bn_eps);
    Matrix logits = affine(h2, layout_.w3, layout_.b3, layout_.h2, layout_.out);
    Matrix log_probs, probs;
    softmax_rows(logits, log_probs, probs);
    return log_probs;
  }

  /// Gradient of a loss w.r.t. all parameters given dLoss/dlogits.
  Vector backward(const BranchCache& c, const Matrix& dlogits) const {
    const auto& l = layout_;
    Vector grad(l.size, 0.0);
    Matrix dd2 = affine_backward(c.d2, dlogits, l.w3, l.b3, l.h2, l.out, grad);
    Matrix dd1 = hidden_backward(c.d1, dd2, c.z2, c.xhat2, c.inv_std2,
                                 c.masks.m2, l.w2, l.b2, l.g2, l.be2, l.h1, l.h2, grad);
    hidden_backward(c.input, dd1, c.z1, c.xhat1, c.inv_std1, c.masks.m1, l.w1, l.b1, l.g1,
                    l.be1, l.in, l.h1, grad);
    return grad;
  }

 private:
  void check_input(const Matrix& x) const {
    if (x.cols() != layout_.in)
      fail(ErrorCode::DimMismatch, "network expects " + std::to_string(layout_.in) +
                                       " inputs, got " + std::to_string(x.cols()));
  }

  Matrix affine(const Matrix& x, std::size_t w, std::size_t b, std::size_t in,
                std::size_t out) const {
    Matrix z(x.rows(), out);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto xi = x.row(i);
      for (std::size_t o = 0; o < out; ++o) {
        double s = params_[b + o];
        const double* wr = &params_[w + o * in];
        for (std::size_t k = 0; k < in; ++k) s += wr[k] * xi[k];
        z(i, o) = s;
      }
    }
    return z;
  }

  void hidden_train(const Matrix& x, std::size_t w, std::size_t b, std::size_t g, std::size_t be,
                    std::size_t in, std::size_t out, const Matrix& mask, double eps, Matrix& z,
                    Matrix& xhat, Matrix& dropped, Vector& inv_std, Vector& mean,
                    Vector& var) const {
    z = affine(x, w, b, in, out);
    const std::size_t n = x.rows();
    mean.assign(out, 0.0);
    var.assign(out, 0.0);
    inv_std.assign(out, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < out; ++j) mean[j] += std::max(z(i, j), 0.0);
    for (auto& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < out; ++j) {
        const double dv = std::max(z(i, j), 0.0) - mean[j];
        var[j] += dv * dv;
      }
    for (std::size_t j = 0; j < out; ++j) {
      var[j] /= static_cast<double>(n);
      inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
    }
    xhat = Matrix(n, out);
    dropped = Matrix(n, out);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < out; ++j) {
        xhat(i, j) = (std::max(z(i, j), 0.0) - mean[j]) * inv_std[j];
        dropped(i, j) = (params_[g + j] * xhat(i, j) + params_[be + j]) * mask(i, j);
      }
  }

  Matrix hidden_eval(const Matrix& x, std::size_t w, std::size_t b, std::size_t g, std::size_t be,
                     std::size_t in, std::size_t out, const RunningStats& stats,
                     double eps) const {
    Matrix h = affine(x, w, b, in, out);
    for (std::size_t i = 0; i < h.rows(); ++i)
      for (std::size_t j = 0; j < out; ++j) {
        const double a = std::max(h(i, j), 0.0);
        h(i, j) = params_[g + j] * (a - stats.mean[j]) / std::sqrt(stats.var[j] + eps) +
                  params_[be + j];
      }
    return h;
  }

  // dz is B x out; accumulates dW, db into grad and returns dx (B x in).
  Matrix affine_backward(const Matrix& x, const Matrix& dz, std::size_t w, std::size_t b,
                         std::size_t in, std::size_t out, Vector& grad) const {
    Matrix dx(x.rows(), in);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto xi = x.row(i);
      auto dxi = dx.row(i);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = dz(i, o);
        if (d == 0.0) continue;
        grad[b + o] += d;
        double* gw = &grad[w + o * in];
        const double* wr = &params_[w + o * in];
        for (std::size_t k = 0; k < in; ++k) {
          gw[k] += d * xi[k];
          dxi[k] += d * wr[k];
        }
      }
    }
    return dx;
  }

  Matrix hidden_backward(const Matrix& x, const Matrix& d_dropped, const Matrix& z,
                         const Matrix& xhat, const Vector& inv_std, const Matrix& mask,
                         std::size_t w, std::size_t b, std::size_t g, std::size_t be,
                         std::size_t in, std::size_t out, Vector& grad) const {
    const std::size_t n = x.rows();
    const auto nd = static_cast<double>(n);
    Matrix dz(n, out);
    for (std::size_t j = 0; j < out; ++j) {
      double sum_dxhat = 0.0;
      double sum_dxhat_xhat = 0.0;
      std::vector<double> dxhat(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double dy = d_dropped(i, j) * mask(i, j);
        grad[g + j] += dy * xhat(i, j);
        grad[be + j] += dy;
        dxhat[i] = dy * params_[g + j];
        sum_dxhat += dxhat[i];
        sum_dxhat_xhat += dxhat[i] * xhat(i, j);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double da =
            inv_std[j] / nd * (nd * dxhat[i] - sum_dxhat - xhat(i, j) * sum_dxhat_xhat);
        dz(i, j) = z(i, j) > 0.0 ? da : 0.0;
      }
    }
    return affine_backward(x, dz, w, b, in, out, grad);
  }

  BranchLayout layout_;
  Vector params_;
  RunningStats stats1_, stats2_;
  bool bn_fitted_ = false;
};

/// Fluent-branch class indices.
inline constexpr std::size_t kFluentIndex = 0;
inline constexpr std::size_t kStutterIndex = 1;

struct TwoBranchMlpModel {
  BranchNet fluent;     // 2 outputs: [fluent, stutter]
  BranchNet disfluent;  // 5 outputs in label order; F is never supervised
  TrainingConfig config;
  bool fitted = false;

  std::size_t input_dim() const noexcept { return fluent.layout().in; }
};

inline TwoBranchMlpModel make_model(std::size_t input_dim, const TrainingConfig& cfg) {
  cfg.validate();
  if (input_dim == 0) fail(ErrorCode::DimMismatch, "zero-dimensional input");
  TwoBranchMlpModel m;
  m.config = cfg;
  m.fluent = BranchNet(input_dim, cfg.hidden1, cfg.hidden2, 2);
  m.disfluent = BranchNet(input_dim, cfg.hidden1, cfg.hidden2, kNumClasses);
  SeededRng rng(cfg.seed);
  m.fluent.initialize(rng);
  m.disfluent.initialize(rng);
  return m;
}

struct BranchOutputs {
  Matrix fluent_probs;     // B x 2
  Matrix disfluent_probs;  // B x 5
};

enum class Mode { Train, Eval };

/// Eval mode uses running statistics and no dropout. Train mode draws
/// dropout masks from `rng` and updates the running statistics.
inline BranchOutputs forward(TwoBranchMlpModel& model, const Matrix& batch, Mode mode,
                             SeededRng* rng = nullptr) {
  BranchOutputs out;
  if (mode == Mode::Eval) {
    Matrix lf = model.fluent.forward_eval_log_probs(batch, model.config.bn_epsilon);
    Matrix ld = model.disfluent.forward_eval_log_probs(batch, model.config.bn_epsilon);
    for (auto& v : lf.data()) v = std::exp(v);
    for (auto& v : ld.data()) v = std::exp(v);
    return {std::move(lf), std::move(ld)};
  }
  if (rng == nullptr) fail(ErrorCode::BadConfig, "train-mode forward needs a random stream");
  const auto& cfg = model.config;
  auto cf = model.fluent.forward_train(
      batch, model.fluent.draw_masks(batch.rows(), cfg.dropout, *rng), cfg.bn_epsilon);
  auto cd = model.disfluent.forward_train(
      batch, model.disfluent.draw_masks(batch.rows(), cfg.dropout, *rng), cfg.bn_epsilon);
  model.fluent.update_running_stats(cf, cfg.bn_momentum);
  model.disfluent.update_running_stats(cd, cfg.bn_momentum);
  return {cf.probs, cd.probs};
}

inline BranchOutputs forward_eval(const TwoBranchMlpModel& model, const Matrix& batch) {
  Matrix lf = model.fluent.forward_eval_log_probs(batch, model.config.bn_epsilon);
  Matrix ld = model.disfluent.forward_eval_log_probs(batch, model.config.bn_epsilon);
  for (auto& v : lf.data()) v = std::exp(v);
  for (auto& v : ld.data()) v = std::exp(v);
  return {std::move(lf), std::move(ld)};
}

struct Losses {
  double fluent = 0.0;     // L_f
  double disfluent = 0.0;  // L_d
  double total = 0.0;      // L_f + L_d
};

/// Losses from log-probabilities. L_f is the batch-mean cross-entropy
/// against fluent/stutter pseudo-labels; L_d is the cross-entropy over the
/// disfluent samples only, averaged over them, and exactly 0 when the batch
/// has none.
inline Losses compute_loss_from_log_probs(const Matrix& fluent_log_probs,
                                          const Matrix& disfluent_log_probs,
                                          std::span<const Label> labels) {
  const std::size_t n = labels.size();
  if (fluent_log_probs.rows() != n || disfluent_log_probs.rows() != n ||
      fluent_log_probs.cols() != 2 || disfluent_log_probs.cols() != kNumClasses)
    fail(ErrorCode::ShapeMismatch, "loss inputs disagree with the label count");
  if (n == 0) fail(ErrorCode::EmptySet, "loss over an empty batch");
  Losses l;
  std::size_t n_disfluent = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool fluent = labels[i] == Label::F;
    l.fluent -= fluent_log_probs(i, fluent ? kFluentIndex : kStutterIndex);
    if (!fluent) {
      l.disfluent -= disfluent_log_probs(i, index_of(labels[i]));
      ++n_disfluent;
    }
  }
  l.fluent /= static_cast<double>(n);
  l.disfluent = n_disfluent ? l.disfluent / static_cast<double>(n_disfluent) : 0.0;
  l.total = l.fluent + l.disfluent;
  return l;
}

inline Losses compute_loss(const Matrix& fluent_probs, const Matrix& disfluent_probs,
                           std::span<const Label> labels) {
  Matrix lf = fluent_probs;
  Matrix ld = disfluent_probs;
  for (auto& v : lf.data()) v = std::log(v);
  for (auto& v : ld.data()) v = std::log(v);
  return compute_loss_from_log_probs(lf, ld, labels);
}

/// dL_f/dlogits and dL_d/dlogits for a batch (softmax cross-entropy).
inline std::pair<Matrix, Matrix> loss_logit_gradients(const Matrix& fluent_probs,
                                                      const Matrix& disfluent_probs,
                                                      std::span<const Label> labels) {
  const std::size_t n = labels.size();
  std::size_t n_disfluent = 0;
  for (auto l : labels) n_disfluent += l != Label::F;
  Matrix gf = fluent_probs;
  Matrix gd(n, kNumClasses, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool fluent = labels[i] == Label::F;
    gf(i, fluent ? kFluentIndex : kStutterIndex) -= 1.0;
    for (std::size_t j = 0; j < 2; ++j) gf(i, j) /= static_cast<double>(n);
    if (!fluent) {
      for (std::size_t j = 0; j < kNumClasses; ++j)
        gd(i, j) = (disfluent_probs(i, j) - (j == index_of(labels[i]) ? 1.0 : 0.0)) /
                   static_cast<double>(n_disfluent);
    }
  }
  return {std::move(gf), std::move(gd)};
}

/// Adaptive-moment optimizer state for one flat parameter vector.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, const TrainingConfig& cfg)
      : m_(n, 0.0), v_(n, 0.0), lr_(cfg.learning_rate), beta1_(cfg.beta1), beta2_(cfg.beta2),
        eps_(cfg.adam_epsilon) {}

  void step(Vector& params, const Vector& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

 private:
  Vector m_, v_;
  double lr_ = 1e-2, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::uint64_t t_ = 0;
};

/// Tracks the best validation loss; `update` returns true when training
/// should stop (no strict improvement for `patience` consecutive epochs).
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  bool update(double val_loss) {
    if (val_loss < best_) {
      best_ = val_loss;
      since_best_ = 0;
      improved_ = true;
    } else {
      ++since_best_;
      improved_ = false;
    }
    return since_best_ >= patience_;
  }

  bool improved() const noexcept { return improved_; }
  double best() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t since_best_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
  bool improved_ = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double fluent_loss = 0.0;
  double disfluent_loss = 0.0;
  double total_loss = 0.0;
  double val_total_loss = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  friend bool operator==(const TrainingLog&, const TrainingLog&) = default;
};

struct LabeledSet {
  Matrix x;
  std::vector<Label> y;
};

inline Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = x.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

/// Validation L_tot in eval mode over the whole set.
inline Losses evaluate_loss(const TwoBranchMlpModel& model, const LabeledSet& set) {
  Matrix lf = model.fluent.forward_eval_log_probs(set.x, model.config.bn_epsilon);
  Matrix ld = model.disfluent.forward_eval_log_probs(set.x, model.config.bn_epsilon);
  return compute_loss_from_log_probs(lf, ld, set.y);
}

/// Mini-batch training with per-epoch seeded shuffling and early stopping on
/// validation L_tot. A trailing batch of one sample joins the previous batch.
/// The returned model carries the parameters of the best validation epoch.
inline TrainingLog train(TwoBranchMlpModel& model, const LabeledSet& train_set,
                         const LabeledSet& val_set) {
  const auto& cfg = model.config;
  cfg.validate();
  if (train_set.x.rows() == 0 || val_set.x.rows() == 0)
    fail(ErrorCode::EmptySet, "training and validation sets must be non-empty");
  if (train_set.x.rows() != train_set.y.size() || val_set.x.rows() != val_set.y.size())
    fail(ErrorCode::ShapeMismatch, "features and labels differ in count");
  if (train_set.x.cols() != model.input_dim() || val_set.x.cols() != model.input_dim())
    fail(ErrorCode::DimMismatch, "feature dimension differs from the model input");

  SeededRng rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  Adam opt_f(model.fluent.params().size(), cfg);
  Adam opt_d(model.disfluent.params().size(), cfg);
  EarlyStopping stopper(cfg.patience);
  TrainingLog log;
  std::optional<TwoBranchMlpModel> best;

  const std::size_t n = train_set.x.rows();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    std::vector<std::pair<std::size_t, std::size_t>> batches;  // [begin, end)
    for (std::size_t b = 0; b < n; b += cfg.batch_size) batches.emplace_back(b, std::min(n, b + cfg.batch_size));
    if (batches.size() > 1 && batches.back().second - batches.back().first < 2) {
      batches[batches.size() - 2].second = batches.back().second;
      batches.pop_back();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    for (const auto& [begin, end] : batches) {
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      Matrix xb = gather_rows(train_set.x, idx);
      std::vector<Label> yb(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = train_set.y[idx[i]];

      auto cf = model.fluent.forward_train(
          xb, model.fluent.draw_masks(xb.rows(), cfg.dropout, rng), cfg.bn_epsilon);
      auto cd = model.disfluent.forward_train(
          xb, model.disfluent.draw_masks(xb.rows(), cfg.dropout, rng), cfg.bn_epsilon);
      const Losses l = compute_loss_from_log_probs(cf.log_probs, cd.log_probs, yb);
      if (!std::isfinite(l.total))
        fail(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": L_f=" +
                                           std::to_string(l.fluent) +
                                           " L_d=" + std::to_string(l.disfluent));
      const auto [gf, gd] = loss_logit_gradients(cf.probs, cd.probs, yb);
      opt_f.step(model.fluent.params(), model.fluent.backward(cf, gf));
      opt_d.step(model.disfluent.params(), model.disfluent.backward(cd, gd));
      model.fluent.update_running_stats(cf, cfg.bn_momentum);
      model.disfluent.update_running_stats(cd, cfg.bn_momentum);

      const double w = static_cast<double>(idx.size()) / static_cast<double>(n);
      rec.fluent_loss += w * l.fluent;
      rec.disfluent_loss += w * l.disfluent;
      rec.total_loss += w * l.total;
    }

    const Losses val = evaluate_loss(model, val_set);
    if (!std::isfinite(val.total))
      fail(ErrorCode::NonFiniteLoss, "validation loss at epoch " + std::to_string(epoch));
    rec.val_total_loss = val.total;
    log.epochs.push_back(rec);

    const bool stop = stopper.update(val.total);
    if (stopper.improved()) {
      best = model;
      log.best_epoch = epoch;
    }
    if (stop) {
      log.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }
  if (best) model = std::move(*best);
  model.fitted = true;
  return log;
}

/// Fluent branch decides F; otherwise the disfluent branch picks among R, P,
/// B, I. The score vector is p(F) = p_fluent and p(c) = p_stutter times the
/// disfluent distribution renormalized over R, P, B, I.
inline std::vector<Prediction> predict_batch(const TwoBranchMlpModel& model, const Matrix& x) {
  if (!model.fitted) fail(ErrorCode::UnfittedModel, "predict before train");
  const auto out = forward_eval(model, x);
  std::vector<Prediction> preds(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double pf = out.fluent_probs(i, kFluentIndex);
    const double ps = out.fluent_probs(i, kStutterIndex);
    double z = 0.0;
    for (std::size_t c = 0; c + 1 < kNumClasses; ++c) z += out.disfluent_probs(i, c);
    auto& p = preds[i];
    p.scores.kind = ScoreKind::Posterior;
    p.scores[Label::F] = pf;
    std::size_t best = 0;
    for (std::size_t c = 0; c + 1 < kNumClasses; ++c) {
      p.scores.scores[c] = z > 0 ? ps * out.disfluent_probs(i, c) / z : ps / 4.0;
      if (out.disfluent_probs(i, c) > out.disfluent_probs(i, best)) best = c;
    }
    p.label = pf >= ps ? Label::F : label_at(best);
  }
  return preds;
}

inline Prediction predict(const TwoBranchMlpModel& model, std::span<const double> x) {
  Matrix one(1, x.size(), Vector(x.begin(), x.end()));
  return predict_batch(model, one).front();
}

// Checkpoint: "SKMLP1\n" magic, then little-endian u64/f64 fields.
namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
inline void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }
inline void put_vec(std::ostream& os, const Vector& v) {
  put_u64(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}
inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) fail(ErrorCode::Malformed, "truncated checkpoint");
  return v;
}
inline double get_f64(std::istream& is) {
  double v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) fail(ErrorCode::Malformed, "truncated checkpoint");
  return v;
}
inline Vector get_vec(std::istream& is, std::size_t expected) {
  const auto n = get_u64(is);
  if (n != expected) fail(ErrorCode::Malformed, "checkpoint block has unexpected length");
  Vector v(n);
  if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8)))
    fail(ErrorCode::Malformed, "truncated checkpoint");
  return v;
}

inline void put_branch(std::ostream& os, const BranchNet& b) {
  const auto& l = b.layout();
  put_u64(os, l.in);
  put_u64(os, l.h1);
  put_u64(os, l.h2);
  put_u64(os, l.out);
  put_u64(os, b.batchnorm_fitted() ? 1 : 0);
  put_vec(os, b.params());
  put_vec(os, b.stats1().mean);
  put_vec(os, b.stats1().var);
  put_vec(os, b.stats2().mean);
  put_vec(os, b.stats2().var);
}

inline BranchNet get_branch(std::istream& is) {
  const auto in = get_u64(is), h1 = get_u64(is), h2 = get_u64(is), out = get_u64(is);
  BranchNet b(in, h1, h2, out);
  b.set_batchnorm_fitted(get_u64(is) != 0);
  b.params() = get_vec(is, b.layout().size);
  b.stats1().mean = get_vec(is, h1);
  b.stats1().var = get_vec(is, h1);
  b.stats2().mean = get_vec(is, h2);
  b.stats2().var = get_vec(is, h2);
  return b;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[8] = {'S', 'K', 'M', 'L', 'P', '1', '\n', '\0'};

inline void save_checkpoint(const std::filesystem::path& path, const TwoBranchMlpModel& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::Io, "cannot write " + path.string());
  os.write(kCheckpointMagic, 8);
  const auto& c = m.config;
  detail::put_u64(os, c.batch_size);
  detail::put_f64(os, c.learning_rate);
  detail::put_f64(os, c.beta1);
  detail::put_f64(os, c.beta2);
  detail::put_f64(os, c.adam_epsilon);
  detail::put_u64(os, c.patience);
  detail::put_u64(os, c.max_epochs);
  detail::put_u64(os, c.seed);
  detail::put_u64(os, c.hidden1);
  detail::put_u64(os, c.hidden2);
  detail::put_f64(os, c.dropout);
  detail::put_f64(os, c.bn_momentum);
  detail::put_f64(os, c.bn_epsilon);
  detail::put_u64(os, m.fitted ? 1 : 0);
  detail::put_branch(os, m.fluent);
  detail::put_branch(os, m.disfluent);
  if (!os) fail(ErrorCode::Io, "short write to " + path.string());
}

inline TwoBranchMlpModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::Io, "cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    fail(ErrorCode::BadMagic, path.string() + " is not an MLP checkpoint");
  TwoBranchMlpModel m;
  auto& c = m.config;
  c.batch_size = detail::get_u64(is);
  c.learning_rate = detail::get_f64(is);
  c.beta1 = detail::get_f64(is);
  c.beta2 = detail::get_f64(is);
  c.adam_epsilon = detail::get_f64(is);
  c.patience = detail::get_u64(is);
  c.max_epochs = detail::get_u64(is);
  c.seed = detail::get_u64(is);
  c.hidden1 = detail::get_u64(is);
  c.hidden2 = detail::get_u64(is);
  c.dropout = detail::get_f64(is);
  c.bn_momentum = detail::get_f64(is);
  c.bn_epsilon = detail::get_f64(is);
  m.fitted = detail::get_u64(is) != 0;
  m.fluent = detail::get_branch(is);
  m.disfluent = detail::get_branch(is);
  if (m.fluent.layout().out != 2 || m.disfluent.layout().out != kNumClasses ||
      m.fluent.layout().in != m.disfluent.layout().in)
    fail(ErrorCode::Malformed, "checkpoint branch shapes are inconsistent");
  return m;
}

inline void write_training_log(const std::filesystem::path& path, const TrainingLog& log) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write " + path.string());
  os << "epoch,L_f,L_d,L_tot,val_L_tot\n";
  char buf[160];
  for (const auto& e : log.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.fluent_loss,
                  e.disfluent_loss, e.total_loss, e.val_total_loss);
    os << buf;
  }
}

}  // namespace stutterkit::mlp
