// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#include "moral/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "moral/errors.hpp"
#include "moral/prompts.hpp"
#include "moral/rng.hpp"
#include "moral/tokenizer.hpp"

namespace moral {

namespace {

constexpr double kLayerNormEps = 1e-5;

Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = stddev * rng.normal();
  return m;
}

// Y = X W^T for row-major X (T x in) and W (out x in).
Matrix linear(const Matrix& x, const Matrix& w) {
  Matrix y(x.rows(), w.rows());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const auto xr = x.row(t);
    auto yr = y.row(t);
    for (std::size_t o = 0; o < w.rows(); ++o) {
      const auto wr = w.row(o);
      double s = 0.0;
      for (std::size_t i = 0; i < xr.size(); ++i) s += xr[i] * wr[i];
      yr[o] = s;
    }
  }
  return y;
}

// dX += dY W
void linear_backward(const Matrix& dy, const Matrix& w, Matrix& dx) {
  for (std::size_t t = 0; t < dy.rows(); ++t) {
    const auto dyr = dy.row(t);
    auto dxr = dx.row(t);
    for (std::size_t o = 0; o < w.rows(); ++o) {
      const double g = dyr[o];
      if (g == 0.0) continue;
      const auto wr = w.row(o);
      for (std::size_t i = 0; i < dxr.size(); ++i) dxr[i] += g * wr[i];
    }
  }
}

struct NormOut {
  Matrix y;
  Vector inv_std;
};

NormOut layer_norm(const Matrix& x) {
  NormOut out{Matrix(x.rows(), x.cols()), Vector(x.rows())};
  const double d = static_cast<double>(x.cols());
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const auto xr = x.row(t);
    const double mean = std::accumulate(xr.begin(), xr.end(), 0.0) / d;
    double var = 0.0;
    for (double v : xr) var += (v - mean) * (v - mean);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    auto yr = out.y.row(t);
    for (std::size_t i = 0; i < xr.size(); ++i) yr[i] = (xr[i] - mean) * inv;
    out.inv_std[t] = inv;
  }
  return out;
}

// dX += LN'(dY)
void layer_norm_backward(const NormOut& norm, const Matrix& dy, Matrix& dx) {
  const double d = static_cast<double>(dy.cols());
  for (std::size_t t = 0; t < dy.rows(); ++t) {
    const auto yr = norm.y.row(t);
    const auto dyr = dy.row(t);
    double mean_dy = 0.0;
    double mean_dyy = 0.0;
    for (std::size_t i = 0; i < dyr.size(); ++i) {
      mean_dy += dyr[i];
      mean_dyy += dyr[i] * yr[i];
    }
    mean_dy /= d;
    mean_dyy /= d;
    auto dxr = dx.row(t);
    for (std::size_t i = 0; i < dyr.size(); ++i) {
      dxr[i] += norm.inv_std[t] * (dyr[i] - mean_dy - yr[i] * mean_dyy);
    }
  }
}

struct BlockCache {
  NormOut ln1;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head, T x T, zero above the diagonal
  Matrix attn;                // concatenated head outputs before Wo
  NormOut ln2;
  std::vector<MoralForwardCache> moral;
  std::vector<LoraForwardCache> lora;
};

struct SequenceCache {
  std::vector<BlockCache> blocks;
  NormOut final_norm;
};

void check_tokens(const ToyModelConfig& cfg, std::span<const int> tokens) {
  if (tokens.empty()) throw InputError("empty token sequence");
  if (tokens.size() > cfg.max_seq_len) {
    throw InputError("sequence length " + std::to_string(tokens.size()) + " exceeds max_seq_len " +
                     std::to_string(cfg.max_seq_len));
  }
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size) {
      throw InputError("token id " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(cfg.vocab_size));
    }
  }
}

// Returns the final normalized hidden states (T x d).
Matrix run_hidden(const ToyModel& model, std::span<const int> tokens, bool use_adapters,
                  SequenceCache* cache) {
  const auto& cfg = model.config();
  const auto& base = model.base();
  check_tokens(cfg, tokens);
  const std::size_t T = tokens.size();
  const std::size_t d = cfg.d_model;
  const std::size_t n_heads = cfg.n_heads;
  const std::size_t dh = d / n_heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix x(T, d);
  for (std::size_t t = 0; t < T; ++t) {
    const auto te = base.token_embedding.row(static_cast<std::size_t>(tokens[t]));
    const auto pe = base.position_embedding.row(t);
    auto xr = x.row(t);
    for (std::size_t i = 0; i < d; ++i) xr[i] = te[i] + pe[i];
  }

  if (cache != nullptr) cache->blocks.assign(cfg.n_layers, {});
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const AttentionWeights& aw = base.attention[l];
    NormOut ln1 = layer_norm(x);
    Matrix q = linear(ln1.y, aw.wq);
    Matrix k = linear(ln1.y, aw.wk);
    Matrix v = linear(ln1.y, aw.wv);
    Matrix attn(T, d);
    std::vector<Matrix> probs;
    if (cache != nullptr) probs.assign(n_heads, Matrix(T, T));
    Vector scores(T);
    for (std::size_t h = 0; h < n_heads; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < T; ++i) {
        double max_s = -INFINITY;
        for (std::size_t j = 0; j <= i; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += q(i, off + c) * k(j, off + c);
          scores[j] = s * att_scale;
          max_s = std::max(max_s, scores[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          scores[j] = std::exp(scores[j] - max_s);
          total += scores[j];
        }
        for (std::size_t j = 0; j <= i; ++j) {
          const double p = scores[j] / total;
          for (std::size_t c = 0; c < dh; ++c) attn(i, off + c) += p * v(j, off + c);
          if (cache != nullptr) probs[h](i, j) = p;
        }
      }
    }
    const Matrix attn_out = linear(attn, aw.wo);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += attn_out.data()[i];

    NormOut ln2 = layer_norm(x);
    const AdaptedFfn& layer = model.layers()[l];
    BlockCache* bc = cache != nullptr ? &cache->blocks[l] : nullptr;
    if (bc != nullptr) {
      if (std::holds_alternative<MoralLayer>(layer)) bc->moral.resize(T);
      else bc->lora.resize(T);
    }
    for (std::size_t t = 0; t < T; ++t) {
      const auto in = ln2.y.row(t);
      Vector f;
      if (!use_adapters) {
        f = model.ffn(l).forward(in);
      } else if (const auto* moral = std::get_if<MoralLayer>(&layer)) {
        f = moral_forward(*moral, in, bc != nullptr ? &bc->moral[t] : nullptr);
      } else {
        f = lora_forward(std::get<LoraLayer>(layer), in, bc != nullptr ? &bc->lora[t] : nullptr);
      }
      auto xr = x.row(t);
      for (std::size_t i = 0; i < d; ++i) xr[i] += f[i];
    }

    if (bc != nullptr) {
      bc->ln1 = std::move(ln1);
      bc->q = std::move(q);
      bc->k = std::move(k);
      bc->v = std::move(v);
      bc->probs = std::move(probs);
      bc->attn = std::move(attn);
      bc->ln2 = std::move(ln2);
    }
  }

  NormOut final_norm = layer_norm(x);
  Matrix hidden = final_norm.y;
  if (cache != nullptr) cache->final_norm = std::move(final_norm);
  return hidden;
}

// dL/dx entering the block stack, propagated back through every block; adapter
// parameter gradients are accumulated into grads along the way.
void backward_hidden(const ToyModel& model, const SequenceCache& cache, const Matrix& dhidden,
                     ModelGradients& grads) {
  const auto& cfg = model.config();
  const auto& base = model.base();
  const std::size_t T = dhidden.rows();
  const std::size_t d = cfg.d_model;
  const std::size_t n_heads = cfg.n_heads;
  const std::size_t dh = d / n_heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dx(T, d);
  layer_norm_backward(cache.final_norm, dhidden, dx);

  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    const BlockCache& bc = cache.blocks[l];
    const AttentionWeights& aw = base.attention[l];
    const AdaptedFfn& layer = model.layers()[l];

    // FFN sublayer: x_out = x_mid + F(LN2(x_mid)).
    Matrix dln2(T, d);
    for (std::size_t t = 0; t < T; ++t) {
      const auto up = dx.row(t);
      Vector din;
      if (const auto* moral = std::get_if<MoralLayer>(&layer)) {
        din = moral_backward(*moral, bc.moral[t], up, std::get<MoralGradients>(grads.layers[l]));
      } else {
        din = lora_backward(std::get<LoraLayer>(layer), bc.lora[t], up,
                            std::get<LoraGradients>(grads.layers[l]));
      }
      std::copy(din.begin(), din.end(), dln2.row(t).begin());
    }
    layer_norm_backward(bc.ln2, dln2, dx);

    // Attention sublayer: x_mid = x_in + Wo * attn(LN1(x_in)).
    Matrix dattn(T, d);
    linear_backward(dx, aw.wo, dattn);
    Matrix dq(T, d), dk(T, d), dv(T, d);
    Vector dp(T);
    for (std::size_t h = 0; h < n_heads; ++h) {
      const std::size_t off = h * dh;
      const Matrix& P = bc.probs[h];
      for (std::size_t i = 0; i < T; ++i) {
        double weighted = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += dattn(i, off + c) * bc.v(j, off + c);
          dp[j] = s;
          weighted += P(i, j) * s;
          const double p = P(i, j);
          for (std::size_t c = 0; c < dh; ++c) dv(j, off + c) += p * dattn(i, off + c);
        }
        for (std::size_t j = 0; j <= i; ++j) {
          const double ds = P(i, j) * (dp[j] - weighted) * att_scale;
          if (ds == 0.0) continue;
          for (std::size_t c = 0; c < dh; ++c) {
            dq(i, off + c) += ds * bc.k(j, off + c);
            dk(j, off + c) += ds * bc.q(i, off + c);
          }
        }
      }
    }
    Matrix dln1(T, d);
    linear_backward(dq, aw.wq, dln1);
    linear_backward(dk, aw.wk, dln1);
    linear_backward(dv, aw.wv, dln1);
    layer_norm_backward(bc.ln1, dln1, dx);
  }
}

Matrix logits_from_hidden(const Matrix& hidden, const Matrix& unembedding) {
  return linear(hidden, unembedding);
}

}  // namespace

void ToyModelConfig::validate() const {
  if (vocab_size < 1 || d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1 || max_seq_len < 1) {
    throw ConfigError("model dimensions must all be >= 1");
  }
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
}

ToyModel::ToyModel(ToyModelConfig config, BaseWeights base, std::vector<AdaptedFfn> layers)
    : config_(config), base_(std::move(base)), layers_(std::move(layers)) {
  config_.validate();
  const std::size_t d = config_.d_model;
  if (base_.token_embedding.rows() != config_.vocab_size || base_.token_embedding.cols() != d ||
      base_.position_embedding.rows() != config_.max_seq_len || base_.position_embedding.cols() != d ||
      base_.unembedding.rows() != config_.vocab_size || base_.unembedding.cols() != d) {
    throw ShapeError("embedding shapes do not match the model config");
  }
  if (base_.attention.size() != config_.n_layers || layers_.size() != config_.n_layers) {
    throw ShapeError("layer count does not match the model config");
  }
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    for (const Matrix* w : {&base_.attention[l].wq, &base_.attention[l].wk, &base_.attention[l].wv,
                            &base_.attention[l].wo}) {
      if (w->rows() != d || w->cols() != d) throw ShapeError("attention weights must be d x d");
    }
    const FrozenFfn& f = ffn(l);
    if (f.d_model() != d || f.d_ff() != config_.d_ff) throw ShapeError("FFN shape mismatch");
  }
  if (layers_.size() > 1) {
    const auto kind0 = layers_.front().index();
    for (const auto& l : layers_) {
      if (l.index() != kind0) throw ConfigError("all layers must carry the same adapter kind");
    }
  }
}

const FrozenFfn& ToyModel::ffn(std::size_t layer) const {
  return std::visit([](const auto& l) -> const FrozenFfn& { return l.base(); }, layers_.at(layer));
}

AdapterKind ToyModel::adapter_kind() const {
  return std::holds_alternative<MoralLayer>(layers_.front()) ? AdapterKind::kMoral
                                                             : AdapterKind::kLora;
}

std::vector<Matrix*> ToyModel::trainable() {
  std::vector<Matrix*> out;
  for (auto& l : layers_) {
    auto t = std::visit([](auto& layer) { return layer.trainable(); }, l);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

std::vector<const Matrix*> ToyModel::trainable() const {
  std::vector<const Matrix*> out;
  for (const auto& l : layers_) {
    auto t = std::visit([](const auto& layer) { return layer.trainable(); }, l);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

std::size_t ToyModel::trainable_count() const {
  std::size_t total = 0;
  for (const Matrix* m : trainable()) total += m->size();
  return total;
}

ToyModel build_frozen_model(const ToyModelConfig& config, const AdapterConfig& adapters) {
  config.validate();
  const std::size_t d = config.d_model;
  Rng rng(derive_seed(config.seed, "base"));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double inv_sqrt_ff = 1.0 / std::sqrt(static_cast<double>(config.d_ff));

  BaseWeights base;
  base.token_embedding = random_normal(config.vocab_size, d, 1.0, rng);
  base.position_embedding = random_normal(config.max_seq_len, d, 0.5, rng);
  std::vector<FrozenFfn> ffns;
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    AttentionWeights aw;
    aw.wq = random_normal(d, d, inv_sqrt_d, rng);
    aw.wk = random_normal(d, d, inv_sqrt_d, rng);
    aw.wv = random_normal(d, d, inv_sqrt_d, rng);
    aw.wo = random_normal(d, d, inv_sqrt_d, rng);
    base.attention.push_back(std::move(aw));
    Matrix w1 = random_normal(config.d_ff, d, inv_sqrt_d, rng);
    Matrix w2 = random_normal(d, config.d_ff, inv_sqrt_ff, rng);
    ffns.emplace_back(std::move(w1), std::move(w2));
  }
  base.unembedding = random_normal(config.vocab_size, d, inv_sqrt_d, rng);

  std::vector<AdaptedFfn> layers;
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::uint64_t layer_seed = derive_seed(config.seed, "adapter", l);
    if (adapters.kind == AdapterKind::kMoral) {
      layers.emplace_back(MoralLayer::initialized(std::move(ffns[l]), adapters.settings, layer_seed));
    } else {
      layers.emplace_back(LoraLayer::initialized(std::move(ffns[l]), adapters.settings.rank,
                                                 adapters.settings.alpha, layer_seed));
    }
  }
  return ToyModel(config, std::move(base), std::move(layers));
}

Matrix forward_lm(const ToyModel& model, std::span<const int> tokens) {
  return logits_from_hidden(run_hidden(model, tokens, true, nullptr), model.base().unembedding);
}

Matrix forward_base(const ToyModel& model, std::span<const int> tokens) {
  return logits_from_hidden(run_hidden(model, tokens, false, nullptr), model.base().unembedding);
}

TrainingExample to_training_example(const QaPair& pair, PromptStyle style) {
  std::string answer = pair.answer;
  std::replace(answer.begin(), answer.end(), '\n', ' ');
  std::string prompt;
  if (style == PromptStyle::kQa) {
    prompt = "Q: " + pair.question + "\nA: ";
  } else {
    prompt = render_closed_book_prompt(pair.question);
  }
  return {std::move(prompt), answer + "\n"};
}

std::size_t prompt_budget(std::size_t max_seq_len) noexcept { return max_seq_len - max_seq_len / 4; }

EncodedExample encode_example(const TrainingExample& example, std::size_t max_seq_len) {
  if (example.prompt.empty()) throw InputError("training example needs a nonempty prompt");
  if (example.completion.empty()) throw InputError("training example needs a nonempty completion");
  std::vector<int> prompt = encode(example.prompt);
  const std::vector<int> completion = encode(example.completion);
  if (completion.size() + 1 > max_seq_len) {
    throw InputError("completion does not fit in max_seq_len");
  }
  const std::size_t room = std::min(prompt_budget(max_seq_len), max_seq_len - completion.size());
  if (prompt.size() > room) prompt.erase(prompt.begin(), prompt.end() - static_cast<long>(room));
  EncodedExample out;
  out.first_target = prompt.size() - 1;
  out.tokens = std::move(prompt);
  out.tokens.insert(out.tokens.end(), completion.begin(), completion.end());
  return out;
}

ModelGradients ModelGradients::zeros_like(const ToyModel& model) {
  ModelGradients g;
  for (const auto& l : model.layers()) {
    if (const auto* moral = std::get_if<MoralLayer>(&l)) {
      g.layers.emplace_back(MoralGradients::zeros_like(*moral));
    } else {
      g.layers.emplace_back(LoraGradients::zeros_like(std::get<LoraLayer>(l)));
    }
  }
  return g;
}

std::vector<Matrix*> ModelGradients::tensors() {
  std::vector<Matrix*> out;
  for (auto& l : layers) {
    auto t = std::visit([](auto& g) { return g.tensors(); }, l);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

void ModelGradients::scale(double factor) {
  for (Matrix* m : tensors())
    for (double& v : m->data()) v *= factor;
}

std::pair<double, std::size_t> example_loss(const ToyModel& model, const EncodedExample& example,
                                            ModelGradients* grads) {
  const auto& tokens = example.tokens;
  SequenceCache cache;
  const Matrix hidden = run_hidden(model, tokens, true, grads != nullptr ? &cache : nullptr);
  const Matrix& unemb = model.base().unembedding;
  const std::size_t T = tokens.size();
  const std::size_t V = unemb.rows();

  double loss = 0.0;
  std::size_t count = 0;
  Matrix dhidden(T, hidden.cols());
  Vector logits(V);
  for (std::size_t t = example.first_target; t + 1 < T; ++t) {
    const auto hr = hidden.row(t);
    double max_logit = -INFINITY;
    for (std::size_t v = 0; v < V; ++v) {
      logits[v] = dot(hr, unemb.row(v));
      max_logit = std::max(max_logit, logits[v]);
    }
    double total = 0.0;
    for (std::size_t v = 0; v < V; ++v) total += std::exp(logits[v] - max_logit);
    const double log_z = max_logit + std::log(total);
    const auto target = static_cast<std::size_t>(tokens[t + 1]);
    loss += log_z - logits[target];
    ++count;
    if (grads != nullptr) {
      auto dr = dhidden.row(t);
      for (std::size_t v = 0; v < V; ++v) {
        double g = std::exp(logits[v] - log_z);
        if (v == target) g -= 1.0;
        const auto ur = unemb.row(v);
        for (std::size_t i = 0; i < dr.size(); ++i) dr[i] += g * ur[i];
      }
    }
  }
  if (grads != nullptr) backward_hidden(model, cache, dhidden, *grads);
  return {loss, count};
}

double mean_loss(const ToyModel& model, std::span<const EncodedExample> examples) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& ex : examples) {
    const auto [l, c] = example_loss(model, ex);
    total += l;
    count += c;
  }
  if (count == 0) throw ArgumentError("no completion tokens to score");
  return total / static_cast<double>(count);
}

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (n_experts < 1 || top_k < 1 || top_k > n_experts) {
    throw ConfigError("top_k must lie in [1, n_experts]");
  }
  if (rank < 1) throw ConfigError("rank must be >= 1");
}

AdapterConfig TrainConfig::adapter_config(AdapterKind kind) const {
  return {kind, AdapterSettings{n_experts, top_k, rank, alpha}};
}

TrainResult train(ToyModel& model, std::span<const TrainingExample> examples,
                  const TrainConfig& config) {
  config.validate();
  if (examples.empty()) throw ArgumentError("cannot train on an empty dataset");
  std::vector<EncodedExample> encoded;
  encoded.reserve(examples.size());
  for (const auto& ex : examples) encoded.push_back(encode_example(ex, model.config().max_seq_len));

  std::vector<Matrix*> params = model.trainable();
  std::vector<AdamState> optim;
  optim.reserve(params.size());
  for (const Matrix* p : params) optim.emplace_back(p->rows(), p->cols(), config.lr);

  TrainResult result;
  std::vector<std::size_t> order(encoded.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, "epoch", epoch));
    rng.shuffle(std::span<std::size_t>(order));

    double epoch_total = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      ModelGradients grads = ModelGradients::zeros_like(model);
      double loss_sum = 0.0;
      std::size_t targets = 0;
      for (std::size_t i = start; i < stop; ++i) {
        const auto [l, c] = example_loss(model, encoded[order[i]], &grads);
        loss_sum += l;
        targets += c;
      }
      const double inv = 1.0 / static_cast<double>(targets);
      grads.scale(inv);
      const std::vector<Matrix*> g = grads.tensors();
      for (std::size_t p = 0; p < params.size(); ++p) adam_step(*params[p], *g[p], optim[p]);

      const double step_loss = loss_sum * inv;
      result.loss_trace.push_back(step_loss);
      epoch_total += step_loss;
      ++epoch_steps;
    }
    result.epoch_losses.push_back(epoch_total / static_cast<double>(epoch_steps));
  }
  return result;
}

TrainResult train(ToyModel& model, std::span<const QaPair> pairs, const TrainConfig& config,
                  PromptStyle style) {
  std::vector<TrainingExample> examples;
  examples.reserve(pairs.size());
  for (const auto& p : pairs) examples.push_back(to_training_example(p, style));
  return train(model, examples, config);
}

GradientCheckResult gradient_check(const ToyModel& model, const TrainingExample& sample,
                                   double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ArgumentError("gradient_check epsilon must be positive");
  }
  const std::size_t n_params = model.trainable_count();
  if (n_params > kGradientCheckParameterLimit) {
    throw ConfigError("gradient_check refuses models with " + std::to_string(n_params) +
                      " trainable scalars (limit " +
                      std::to_string(kGradientCheckParameterLimit) + ")");
  }
  const EncodedExample encoded = encode_example(sample, model.config().max_seq_len);

  ModelGradients grads = ModelGradients::zeros_like(model);
  const auto [loss_sum, count] = example_loss(model, encoded, &grads);
  (void)loss_sum;
  grads.scale(1.0 / static_cast<double>(count));
  const std::vector<Matrix*> analytic = grads.tensors();

  ToyModel probe = model;
  std::vector<Matrix*> params = probe.trainable();
  auto loss_at = [&]() {
    const auto [l, c] = example_loss(probe, encoded);
    return l / static_cast<double>(c);
  };

  GradientCheckResult result;
  std::size_t flat = 0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto values = params[p]->data();
    const auto grad_values = analytic[p]->data();
    for (std::size_t i = 0; i < values.size(); ++i, ++flat) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double plus = loss_at();
      values[i] = saved - epsilon;
      const double minus = loss_at();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = grad_values[i];
      const double rel = relative_error(a, numeric);
      if (a != 0.0) ++result.nonzero_gradients;
      result.max_absolute_error = std::max(result.max_absolute_error, std::abs(a - numeric));
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = flat;
      }
      ++result.parameters_checked;
    }
  }
  return result;
}

std::string generate(const ToyModel& model, std::string_view prompt, std::size_t max_new_tokens,
                     std::optional<char> stop_byte) {
  const std::size_t ctx = model.config().max_seq_len;
  if (model.config().vocab_size > kByteVocabSize) {
    throw ConfigError("text generation needs a byte-level vocabulary");
  }
  std::vector<int> tokens = encode(prompt);
  if (tokens.empty()) throw InputError("generate needs a nonempty prompt");
  const std::size_t budget = prompt_budget(ctx);
  if (tokens.size() > budget) tokens.erase(tokens.begin(), tokens.end() - static_cast<long>(budget));
  std::string out;
  for (std::size_t step = 0; step < max_new_tokens; ++step) {
    std::span<const int> window(tokens);
    if (window.size() > ctx) window = window.subspan(window.size() - ctx);
    const Matrix hidden = run_hidden(model, window, true, nullptr);
    const auto last = hidden.row(hidden.rows() - 1);
    const Matrix& unemb = model.base().unembedding;
    std::size_t best = 0;
    double best_logit = -INFINITY;
    for (std::size_t v = 0; v < unemb.rows(); ++v) {
      const double z = dot(last, unemb.row(v));
      if (z > best_logit) {
        best_logit = z;
        best = v;
      }
    }
    const char c = static_cast<char>(static_cast<unsigned char>(best));
    if (stop_byte && c == *stop_byte) break;
    out.push_back(c);
    tokens.push_back(static_cast<int>(best));
  }
  return out;
}

}  // namespace moral
