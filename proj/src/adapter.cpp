// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#include "moral/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "moral/errors.hpp"
#include "moral/rng.hpp"

namespace moral {

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

void check_input(std::span<const double> x, std::size_t expected, const char* what) {
  if (x.size() != expected) {
    throw ShapeError(std::string(what) + ": expected input of length " + std::to_string(expected) +
                     ", got " + std::to_string(x.size()));
  }
}

Vector add(Vector a, std::span<const double> b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

}  // namespace

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_derivative(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

FrozenFfn::FrozenFfn(Matrix w1, Matrix w2) : w1_(std::move(w1)), w2_(std::move(w2)) {
  if (w2_.rows() != w1_.cols() || w2_.cols() != w1_.rows()) {
    throw ShapeError("FFN weights must be d_ff x d_model and d_model x d_ff");
  }
}

Vector FrozenFfn::forward(std::span<const double> x) const {
  check_input(x, d_model(), "FrozenFfn::forward");
  Vector h = matvec(w1_, x);
  for (double& v : h) v = gelu(v);
  return matvec(w2_, h);
}

LoraExpert LoraExpert::initialized(std::size_t d_in, std::size_t d_out, std::size_t rank,
                                   double alpha, Rng& rng) {
  if (rank == 0 || d_in == 0 || d_out == 0) throw ArgumentError("expert dimensions must be >= 1");
  LoraExpert e;
  e.down = Matrix(rank, d_in);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (double& v : e.down.data()) v = rng.uniform(-bound, bound);
  e.up = Matrix(d_out, rank);
  e.alpha = alpha;
  return e;
}

void LoraExpert::validate() const {
  if (rank() == 0) throw ArgumentError("expert rank must be >= 1");
  if (up.cols() != rank()) throw ShapeError("expert up.cols must equal rank");
  if (!std::isfinite(alpha)) throw ArgumentError("expert alpha must be finite");
}

Vector expert_forward(const LoraExpert& expert, std::span<const double> x) {
  check_input(x, expert.d_in(), "expert_forward");
  const Vector projected = matvec(expert.down, x);
  Vector out = matvec(expert.up, projected);
  const double s = expert.scale();
  for (double& v : out) v *= s;
  return out;
}

Vector router_logits(const RouterNetwork& router, std::span<const double> x) {
  check_input(x, router.input_dim(), "gate");
  return matvec_transposed(router.w_g, x);
}

Vector gate(const RouterNetwork& router, std::span<const double> x) {
  return softmax(router_logits(router, x));
}

GatingDecision select_top_k(std::span<const double> scores, std::size_t k) {
  const std::size_t n = scores.size();
  if (n == 0) throw ArgumentError("select_top_k: empty score vector");
  if (k < 1 || k > n) {
    throw ArgumentError("select_top_k: k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(n) + "]");
  }
  double total = 0.0;
  for (double s : scores) {
    if (!std::isfinite(s) || s < 0.0) throw ArgumentError("select_top_k: scores must be on the simplex");
    total += s;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("select_top_k: scores must sum to 1");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  GatingDecision decision;
  decision.full_scores.assign(scores.begin(), scores.end());
  double kept = 0.0;
  for (std::size_t i = 0; i < k; ++i) kept += scores[order[i]];
  for (std::size_t i = 0; i < k; ++i) {
    decision.selected.push_back({order[i], scores[order[i]] / kept});
  }
  return decision;
}

MoralLayer::MoralLayer(FrozenFfn base, std::vector<LoraExpert> experts, RouterNetwork router,
                       std::size_t top_k)
    : base_(std::move(base)), experts_(std::move(experts)), router_(std::move(router)), top_k_(top_k) {
  if (experts_.empty()) throw ArgumentError("MoralLayer needs at least one expert");
  if (top_k_ < 1 || top_k_ > experts_.size()) {
    throw ArgumentError("top_k must lie in [1, n_experts]");
  }
  for (const auto& e : experts_) {
    e.validate();
    if (e.d_in() != base_.d_model() || e.d_out() != base_.d_ff()) {
      throw ShapeError("expert dims must be d_model -> d_ff of the decorated FFN");
    }
  }
  if (router_.input_dim() != base_.d_model() || router_.n_experts() != experts_.size()) {
    throw ShapeError("router W_g must be d_model x n_experts");
  }
}

MoralLayer MoralLayer::initialized(FrozenFfn base, const AdapterSettings& settings,
                                   std::uint64_t seed) {
  const std::size_t d_m = base.d_model();
  const std::size_t d_ff = base.d_ff();
  std::vector<LoraExpert> experts;
  experts.reserve(settings.n_experts);
  for (std::size_t i = 0; i < settings.n_experts; ++i) {
    Rng rng(derive_seed(seed, "expert", i));
    experts.push_back(LoraExpert::initialized(d_m, d_ff, settings.rank, settings.alpha, rng));
  }
  RouterNetwork router{Matrix(d_m, settings.n_experts)};
  Rng rng(derive_seed(seed, "router"));
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_m));
  for (double& v : router.w_g.data()) v = rng.uniform(-bound, bound);
  return MoralLayer(std::move(base), std::move(experts), std::move(router), settings.top_k);
}

std::vector<Matrix*> MoralLayer::trainable() {
  std::vector<Matrix*> out;
  for (auto& e : experts_) {
    out.push_back(&e.down);
    out.push_back(&e.up);
  }
  out.push_back(&router_.w_g);
  return out;
}

std::vector<const Matrix*> MoralLayer::trainable() const {
  std::vector<const Matrix*> out;
  for (const auto& e : experts_) {
    out.push_back(&e.down);
    out.push_back(&e.up);
  }
  out.push_back(&router_.w_g);
  return out;
}

std::size_t MoralLayer::trainable_count() const {
  std::size_t total = 0;
  for (const Matrix* m : trainable()) total += m->size();
  return total;
}

MoralGradients MoralGradients::zeros_like(const MoralLayer& layer) {
  MoralGradients g;
  for (const auto& e : layer.experts()) {
    g.down.emplace_back(e.down.rows(), e.down.cols());
    g.up.emplace_back(e.up.rows(), e.up.cols());
  }
  g.w_g = Matrix(layer.router().w_g.rows(), layer.router().w_g.cols());
  return g;
}

std::vector<Matrix*> MoralGradients::tensors() {
  std::vector<Matrix*> out;
  for (std::size_t i = 0; i < down.size(); ++i) {
    out.push_back(&down[i]);
    out.push_back(&up[i]);
  }
  out.push_back(&w_g);
  return out;
}

Vector moral_forward(const MoralLayer& layer, std::span<const double> x, MoralForwardCache* cache) {
  check_input(x, layer.d_model(), "moral_forward");
  GatingDecision decision = select_top_k(gate(layer.router(), x), layer.top_k());

  Vector h = matvec(layer.base().w1(), x);
  std::vector<Vector> projected;
  std::vector<Vector> expert_out;
  projected.reserve(decision.selected.size());
  expert_out.reserve(decision.selected.size());
  for (const auto& sel : decision.selected) {
    const LoraExpert& e = layer.experts()[sel.index];
    Vector p = matvec(e.down, x);
    Vector out = matvec(e.up, p);
    const double s = e.scale();
    for (double& v : out) v *= s;
    for (std::size_t j = 0; j < h.size(); ++j) h[j] += sel.weight * out[j];
    projected.push_back(std::move(p));
    expert_out.push_back(std::move(out));
  }

  Vector a(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) a[j] = gelu(h[j]);
  Vector y = matvec(layer.base().w2(), a);

  if (cache != nullptr) {
    cache->valid = true;
    cache->input.assign(x.begin(), x.end());
    cache->decision = std::move(decision);
    cache->projected = std::move(projected);
    cache->expert_out = std::move(expert_out);
    cache->pre_activation = std::move(h);
    cache->activation = std::move(a);
  }
  return y;
}

Vector moral_backward(const MoralLayer& layer, const MoralForwardCache& cache,
                      std::span<const double> upstream, MoralGradients& grads) {
  if (!cache.valid) throw StateError("moral_backward called without a cached forward pass");
  check_input(upstream, layer.d_model(), "moral_backward");
  const auto& x = cache.input;

  Vector dh = matvec_transposed(layer.base().w2(), upstream);
  for (std::size_t j = 0; j < dh.size(); ++j) dh[j] *= gelu_derivative(cache.pre_activation[j]);

  Vector dx = matvec_transposed(layer.base().w1(), dh);

  // dL/dw_i for the renormalized top-k weights.
  const auto& selected = cache.decision.selected;
  Vector dweight(selected.size());
  double weighted_mean = 0.0;
  for (std::size_t s = 0; s < selected.size(); ++s) {
    dweight[s] = dot(dh, cache.expert_out[s]);
    weighted_mean += selected[s].weight * dweight[s];
  }

  Vector dlogits(layer.n_experts(), 0.0);
  for (std::size_t s = 0; s < selected.size(); ++s) {
    const std::size_t i = selected[s].index;
    const LoraExpert& e = layer.experts()[i];
    const double coeff = selected[s].weight * e.scale();
    // Renormalized top-k weights equal a softmax over the selected logits.
    dlogits[i] = selected[s].weight * (dweight[s] - weighted_mean);

    add_outer(grads.up[i], dh, cache.projected[s], coeff);
    Vector dproj = matvec_transposed(e.up, dh);
    for (double& v : dproj) v *= coeff;
    add_outer(grads.down[i], dproj, x);
    add_matvec_transposed(e.down, dproj, dx);
  }

  add_outer(grads.w_g, x, dlogits);
  Vector dx_router = matvec(layer.router().w_g, dlogits);
  return add(std::move(dx), dx_router);
}

MoralGradients moral_gradients(const MoralLayer& layer, const MoralForwardCache& cache,
                               std::span<const double> upstream) {
  MoralGradients grads = MoralGradients::zeros_like(layer);
  moral_backward(layer, cache, upstream, grads);
  return grads;
}

LoraLayer::LoraLayer(FrozenFfn base, LoraExpert expert)
    : base_(std::move(base)), expert_(std::move(expert)) {
  expert_.validate();
  if (expert_.d_in() != base_.d_model() || expert_.d_out() != base_.d_ff()) {
    throw ShapeError("LoRA dims must be d_model -> d_ff of the decorated FFN");
  }
}

LoraLayer LoraLayer::initialized(FrozenFfn base, std::size_t rank, double alpha,
                                 std::uint64_t seed) {
  Rng rng(derive_seed(seed, "expert", 0));
  LoraExpert e = LoraExpert::initialized(base.d_model(), base.d_ff(), rank, alpha, rng);
  return LoraLayer(std::move(base), std::move(e));
}

std::vector<Matrix*> LoraLayer::trainable() { return {&expert_.down, &expert_.up}; }
std::vector<const Matrix*> LoraLayer::trainable() const { return {&expert_.down, &expert_.up}; }
std::size_t LoraLayer::trainable_count() const { return expert_.down.size() + expert_.up.size(); }

LoraGradients LoraGradients::zeros_like(const LoraLayer& layer) {
  const auto& e = layer.expert();
  return {Matrix(e.down.rows(), e.down.cols()), Matrix(e.up.rows(), e.up.cols())};
}

std::vector<Matrix*> LoraGradients::tensors() { return {&down, &up}; }

Vector lora_forward(const LoraLayer& layer, std::span<const double> x, LoraForwardCache* cache) {
  const FrozenFfn& ffn = layer.base();
  const LoraExpert& e = layer.expert();
  check_input(x, ffn.d_model(), "lora_forward");

  Vector projected = matvec(e.down, x);
  Vector delta = matvec(e.up, projected);
  const double s = e.scale();
  for (double& v : delta) v *= s;

  Vector h = matvec(ffn.w1(), x);
  for (std::size_t j = 0; j < h.size(); ++j) h[j] += delta[j];
  Vector a(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) a[j] = gelu(h[j]);
  Vector y = matvec(ffn.w2(), a);

  if (cache != nullptr) {
    cache->valid = true;
    cache->input.assign(x.begin(), x.end());
    cache->projected = std::move(projected);
    cache->delta = std::move(delta);
    cache->pre_activation = std::move(h);
    cache->activation = std::move(a);
  }
  return y;
}

Vector lora_backward(const LoraLayer& layer, const LoraForwardCache& cache,
                     std::span<const double> upstream, LoraGradients& grads) {
  if (!cache.valid) throw StateError("lora_backward called without a cached forward pass");
  const FrozenFfn& ffn = layer.base();
  const LoraExpert& e = layer.expert();
  check_input(upstream, ffn.d_model(), "lora_backward");

  Vector dh = matvec_transposed(ffn.w2(), upstream);
  for (std::size_t j = 0; j < dh.size(); ++j) dh[j] *= gelu_derivative(cache.pre_activation[j]);

  Vector dx = matvec_transposed(ffn.w1(), dh);
  const double s = e.scale();
  add_outer(grads.up, dh, cache.projected, s);
  Vector dproj = matvec_transposed(e.up, dh);
  for (double& v : dproj) v *= s;
  add_outer(grads.down, dproj, cache.input);
  add_matvec_transposed(e.down, dproj, dx);
  return dx;
}

}  // namespace moral
