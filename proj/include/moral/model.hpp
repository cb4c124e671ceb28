// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

// Frozen toy causal language model whose FFN sublayers carry trainable
// adapters, plus the adapter-only training loop.
//
// Block layout (pre-norm, no learned norm gains):
//   x = x + Wo * attention(LN(x))
//   x = x + AdaptedFFN(LN(x))
// followed by a final LN and an untied unembedding.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "moral/adapter.hpp"
#include "moral/numerics.hpp"

namespace moral {

struct ToyModelConfig {
  std::size_t vocab_size = 256;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t d_ff = 128;
  std::size_t max_seq_len = 256;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  friend bool operator==(const ToyModelConfig&, const ToyModelConfig&) = default;
};

enum class AdapterKind { kMoral, kLora };

struct AdapterConfig {
  AdapterKind kind = AdapterKind::kMoral;
  AdapterSettings settings;  // n_experts / top_k ignored for kLora
};

struct AttentionWeights {
  Matrix wq;  // d x d
  Matrix wk;
  Matrix wv;
  Matrix wo;
};

// Everything that stays frozen apart from the FFN weights, which live in the
// adapted layers.
struct BaseWeights {
  Matrix token_embedding;     // vocab x d
  Matrix position_embedding;  // max_seq_len x d
  std::vector<AttentionWeights> attention;
  Matrix unembedding;  // vocab x d
};

using AdaptedFfn = std::variant<MoralLayer, LoraLayer>;

class ToyModel {
 public:
  ToyModel(ToyModelConfig config, BaseWeights base, std::vector<AdaptedFfn> layers);

  const ToyModelConfig& config() const noexcept { return config_; }
  const BaseWeights& base() const noexcept { return base_; }
  std::span<const AdaptedFfn> layers() const noexcept { return layers_; }
  std::span<AdaptedFfn> layers() noexcept { return layers_; }
  const FrozenFfn& ffn(std::size_t layer) const;
  AdapterKind adapter_kind() const;

  // Trainable tensors in layer order, each layer in its own trainable() order.
  std::vector<Matrix*> trainable();
  std::vector<const Matrix*> trainable() const;
  std::size_t trainable_count() const;

 private:
  ToyModelConfig config_;
  BaseWeights base_;
  std::vector<AdaptedFfn> layers_;
};

// Seeded construction. Base weights depend only on config.seed; adapter
// initialization for layer l depends only on (config.seed, l), so a mixture
// with n = 1 and a plain LoRA start from identical factors.
ToyModel build_frozen_model(const ToyModelConfig& config, const AdapterConfig& adapters = {});

// Logits (T x vocab) through the adapted model. Throws InputError for empty
// or over-long sequences and out-of-range tokens.
Matrix forward_lm(const ToyModel& model, std::span<const int> tokens);
// Same network with every FFN evaluated without its adapter.
Matrix forward_base(const ToyModel& model, std::span<const int> tokens);

struct QaPair {
  std::string question;
  std::string answer;
};

// A prompt followed by the completion the loss is computed on.
struct TrainingExample {
  std::string prompt;
  std::string completion;
};

enum class PromptStyle { kQa, kClosedBook };

// kQa renders "Q: {q}\nA: " + "{a}\n"; kClosedBook uses the closed-book
// evaluation prompt unchanged, so training and evaluation see the same bytes.
// Newlines inside the answer become spaces so the trailing newline is an
// unambiguous stop symbol.
TrainingExample to_training_example(const QaPair& pair, PromptStyle style = PromptStyle::kQa);

struct EncodedExample {
  std::vector<int> tokens;
  std::size_t first_target = 0;  // position whose logits predict the first completion token
};

// Longest prompt kept by training and generation: three quarters of the
// context, so prompt tokens sit at the same positions in both whenever the
// completion fits in the remaining quarter.
std::size_t prompt_budget(std::size_t max_seq_len) noexcept;

// Left-truncates the prompt to the smaller of prompt_budget and the room left
// by the completion. Throws InputError when the completion alone does not fit.
EncodedExample encode_example(const TrainingExample& example, std::size_t max_seq_len);

struct ModelGradients {
  std::vector<std::variant<MoralGradients, LoraGradients>> layers;

  static ModelGradients zeros_like(const ToyModel& model);
  std::vector<Matrix*> tensors();
  void scale(double factor);
};

// Summed cross-entropy over completion tokens of one example; when grads is
// given, adds d(sum)/d(params) into it. Returns {loss_sum, target_count}.
std::pair<double, std::size_t> example_loss(const ToyModel& model, const EncodedExample& example,
                                            ModelGradients* grads = nullptr);

// Mean cross-entropy over the completion tokens of the given examples.
double mean_loss(const ToyModel& model, std::span<const EncodedExample> examples);

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 16;
  std::size_t epochs = 2;
  std::size_t n_experts = 8;
  std::size_t top_k = 2;
  std::size_t rank = 8;
  double alpha = 16.0;
  std::uint64_t seed = 0;

  void validate() const;
  AdapterConfig adapter_config(AdapterKind kind = AdapterKind::kMoral) const;
};

struct TrainResult {
  std::vector<double> loss_trace;    // one entry per optimizer step, pre-update batch loss
  std::vector<double> epoch_losses;  // mean of the step losses of each epoch
};

// Adam over adapter parameters only. Mini-batches follow a seeded
// permutation per epoch.
TrainResult train(ToyModel& model, std::span<const TrainingExample> examples,
                  const TrainConfig& config);
TrainResult train(ToyModel& model, std::span<const QaPair> pairs, const TrainConfig& config,
                  PromptStyle style = PromptStyle::kQa);

inline constexpr std::size_t kGradientCheckParameterLimit = 5000;

struct GradientCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t parameters_checked = 0;
  std::size_t worst_parameter = 0;
  std::size_t nonzero_gradients = 0;
};

// Compares the analytic gradient of the mean completion loss against central
// differences for every trainable scalar. Throws ConfigError when the model
// has more than kGradientCheckParameterLimit trainable scalars and
// ArgumentError for a non-positive epsilon.
GradientCheckResult gradient_check(const ToyModel& model, const TrainingExample& sample,
                                   double epsilon = 1e-5);

// Greedy decoding from a text prompt; stops at stop_byte (not included) or
// after max_new_tokens. The prompt is left-truncated to prompt_budget; once
// the sequence outgrows the context the window slides.
std::string generate(const ToyModel& model, std::string_view prompt, std::size_t max_new_tokens,
                     std::optional<char> stop_byte = '\n');

}  // namespace moral
