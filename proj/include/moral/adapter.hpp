// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

// Mixture of low-rank experts on top of a frozen two-layer feed-forward block.
//
// The experts decorate the first FFN projection: for an input x,
//
//   h = W1 x + sum_{i in top-k} s_i * (alpha / r) * U_i (D_i x)
//   y = W2 gelu(h)
//
// where s = renormalized top-k of softmax(W_g^T x). With every U_i = 0 the
// layer reproduces the frozen FFN exactly.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "moral/numerics.hpp"

namespace moral {

class Rng;

double gelu(double x);
double gelu_derivative(double x);

class FrozenFfn {
 public:
  FrozenFfn() = default;
  // w1: d_ff x d_model, w2: d_model x d_ff.
  FrozenFfn(Matrix w1, Matrix w2);

  const Matrix& w1() const noexcept { return w1_; }
  const Matrix& w2() const noexcept { return w2_; }
  std::size_t d_model() const noexcept { return w1_.cols(); }
  std::size_t d_ff() const noexcept { return w1_.rows(); }

  Vector forward(std::span<const double> x) const;

 private:
  Matrix w1_;
  Matrix w2_;
};

struct LoraExpert {
  Matrix down;  // rank x d_in
  Matrix up;    // d_out x rank
  double alpha = 16.0;

  std::size_t rank() const noexcept { return down.rows(); }
  std::size_t d_in() const noexcept { return down.cols(); }
  std::size_t d_out() const noexcept { return up.rows(); }
  double scale() const noexcept { return alpha / static_cast<double>(rank()); }

  // down ~ U(-1/sqrt(d_in), 1/sqrt(d_in)), up = 0.
  static LoraExpert initialized(std::size_t d_in, std::size_t d_out, std::size_t rank, double alpha,
                                Rng& rng);
  void validate() const;
};

// (alpha / rank) * up * (down * x)
Vector expert_forward(const LoraExpert& expert, std::span<const double> x);

struct RouterNetwork {
  Matrix w_g;  // d_m x n

  std::size_t input_dim() const noexcept { return w_g.rows(); }
  std::size_t n_experts() const noexcept { return w_g.cols(); }
};

Vector router_logits(const RouterNetwork& router, std::span<const double> x);
// softmax(W_g^T x)
Vector gate(const RouterNetwork& router, std::span<const double> x);

struct SelectedExpert {
  std::size_t index = 0;
  double weight = 0.0;
  friend bool operator==(const SelectedExpert&, const SelectedExpert&) = default;
};

struct GatingDecision {
  std::vector<SelectedExpert> selected;  // descending score, ties by lower index
  Vector full_scores;
};

// Keeps the k largest scores and renormalizes them to sum to one.
GatingDecision select_top_k(std::span<const double> scores, std::size_t k);

struct AdapterSettings {
  std::size_t n_experts = 8;
  std::size_t top_k = 2;
  std::size_t rank = 8;
  double alpha = 16.0;
};

class MoralLayer {
 public:
  MoralLayer(FrozenFfn base, std::vector<LoraExpert> experts, RouterNetwork router,
             std::size_t top_k);

  // Fresh layer: experts per LoraExpert::initialized, router uniform in
  // +-1/sqrt(d_model). Every expert and the router draw from their own stream
  // derived from seed, so expert i is independent of n_experts.
  static MoralLayer initialized(FrozenFfn base, const AdapterSettings& settings, std::uint64_t seed);

  const FrozenFfn& base() const noexcept { return base_; }
  std::size_t d_model() const noexcept { return base_.d_model(); }
  std::size_t d_ff() const noexcept { return base_.d_ff(); }
  std::size_t n_experts() const noexcept { return experts_.size(); }
  std::size_t top_k() const noexcept { return top_k_; }

  std::span<const LoraExpert> experts() const noexcept { return experts_; }
  std::span<LoraExpert> experts() noexcept { return experts_; }
  const RouterNetwork& router() const noexcept { return router_; }
  RouterNetwork& router() noexcept { return router_; }

  // Trainable tensors in a fixed order: down_0, up_0, ..., down_{n-1}, up_{n-1}, w_g.
  std::vector<Matrix*> trainable();
  std::vector<const Matrix*> trainable() const;
  std::size_t trainable_count() const;

 private:
  FrozenFfn base_;
  std::vector<LoraExpert> experts_;
  RouterNetwork router_;
  std::size_t top_k_ = 1;
};

struct MoralForwardCache {
  bool valid = false;
  Vector input;
  GatingDecision decision;
  std::vector<Vector> projected;    // down_i x, per selected expert
  std::vector<Vector> expert_out;   // E_i(x), per selected expert
  Vector pre_activation;
  Vector activation;
};

struct MoralGradients {
  std::vector<Matrix> down;
  std::vector<Matrix> up;
  Matrix w_g;

  static MoralGradients zeros_like(const MoralLayer& layer);
  // Same order as MoralLayer::trainable().
  std::vector<Matrix*> tensors();
};

Vector moral_forward(const MoralLayer& layer, std::span<const double> x,
                     MoralForwardCache* cache = nullptr);

// Adds dL/dparams into grads and returns dL/dx. Throws StateError when the
// cache holds no forward pass.
Vector moral_backward(const MoralLayer& layer, const MoralForwardCache& cache,
                      std::span<const double> upstream, MoralGradients& grads);

MoralGradients moral_gradients(const MoralLayer& layer, const MoralForwardCache& cache,
                               std::span<const double> upstream);

// Single low-rank adapter on the same FFN projection, with no router. Kept as
// a separate code path: it is the reference the n = k = 1 mixture must match.
class LoraLayer {
 public:
  LoraLayer(FrozenFfn base, LoraExpert expert);
  static LoraLayer initialized(FrozenFfn base, std::size_t rank, double alpha, std::uint64_t seed);

  const FrozenFfn& base() const noexcept { return base_; }
  const LoraExpert& expert() const noexcept { return expert_; }
  LoraExpert& expert() noexcept { return expert_; }

  std::vector<Matrix*> trainable();
  std::vector<const Matrix*> trainable() const;
  std::size_t trainable_count() const;

 private:
  FrozenFfn base_;
  LoraExpert expert_;
};

struct LoraForwardCache {
  bool valid = false;
  Vector input;
  Vector projected;
  Vector delta;
  Vector pre_activation;
  Vector activation;
};

struct LoraGradients {
  Matrix down;
  Matrix up;
  static LoraGradients zeros_like(const LoraLayer& layer);
  std::vector<Matrix*> tensors();
};

Vector lora_forward(const LoraLayer& layer, std::span<const double> x,
                    LoraForwardCache* cache = nullptr);
Vector lora_backward(const LoraLayer& layer, const LoraForwardCache& cache,
                     std::span<const double> upstream, LoraGradients& grads);

}  // namespace moral
