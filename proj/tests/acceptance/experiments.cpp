// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#include "experiments.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "moral/clients.hpp"
#include "moral/curation.hpp"
#include "moral/evaluation.hpp"
#include "moral/model.hpp"
#include "moral/rng.hpp"
#include "moral/text.hpp"

namespace moral::acceptance {
namespace {

std::string random_word(Rng& rng, std::string_view alphabet, std::size_t min_len, std::size_t max_len) {
  std::string w(min_len + rng.below(max_len - min_len + 1), ' ');
  for (char& c : w) c = alphabet[rng.below(alphabet.size())];
  return w;
}

// Keys and answers are fresh words: nothing in `used` is reused, and every
// word drawn is added to it, so two tasks drawn in turn share no vocabulary.
std::vector<QaPair> synthetic_task(Rng& rng, std::set<std::string>& used, std::size_t n) {
  constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz";
  const auto fresh = [&](std::size_t min_len, std::size_t max_len) {
    std::string w = random_word(rng, kAlphabet, min_len, max_len);
    while (!used.insert(w).second) w = random_word(rng, kAlphabet, min_len, max_len);
    return w;
  };
  std::vector<QaPair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    std::string key = fresh(3, 5);
    pairs.push_back({key + "?", fresh(4, 6)});
  }
  return pairs;
}

double mean_ra(const ToyModel& model, std::span<const QaPair> pairs, const Embedder& embedder) {
  double total = 0.0;
  for (const QaPair& p : pairs) {
    const std::string answer = sanitize_utf8(generate(model, to_training_example(p).prompt, 12, '\n'));
    total += answer.empty() ? 0.0 : compute_ra(answer, p.answer, {}, embedder);
  }
  return total / static_cast<double>(pairs.size());
}

struct Retention {
  double after_a = 0.0;  // task-A RA after phase A
  double after_b = 0.0;  // task-A RA after phase B: the retention score
  double task_b = 0.0;   // task-B RA after phase B
  std::size_t trainable = 0;
};

Retention sequential_run(AdapterKind kind, std::uint64_t seed, std::span<const QaPair> a, std::span<const QaPair> b) {
  const ToyModelConfig mc{256, 32, 2, 2, 64, 32, seed};
  TrainConfig tc;
  tc.lr = 1e-2;
  tc.batch_size = 4;
  tc.epochs = 100;
  tc.seed = seed;
  if (kind == AdapterKind::kLora) {
    tc.n_experts = 1;
    tc.top_k = 1;
    tc.rank = 9;
  } else {
    tc.n_experts = 4;
    tc.top_k = 2;
    tc.rank = 2;
  }
  tc.alpha = 2.0 * static_cast<double>(tc.rank);
  ToyModel model = build_frozen_model(mc, tc.adapter_config(kind));
  const TrigramEmbedder embedder;
  Retention r;
  r.trainable = model.trainable_count();
  train(model, a, tc);
  r.after_a = mean_ra(model, a, embedder);
  tc.seed = derive_seed(seed, "phase-b");
  train(model, b, tc);
  r.after_b = mean_ra(model, a, embedder);
  r.task_b = mean_ra(model, b, embedder);
  return r;
}

}  // namespace

Outcome forgetting_experiment() {
  Outcome out;
  std::size_t wins = 0, ties = 0;
  double lora_sum = 0.0, moral_sum = 0.0, best = 0.0;
  std::size_t lora_params = 0, moral_params = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(derive_seed(seed, "forgetting-tasks"));
    std::set<std::string> used;
    const auto task_a = synthetic_task(rng, used, 10);
    const auto task_b = synthetic_task(rng, used, 10);
    const Retention lora = sequential_run(AdapterKind::kLora, seed, task_a, task_b);
    const Retention mix = sequential_run(AdapterKind::kMoral, seed, task_a, task_b);
    lora_params = lora.trainable;
    moral_params = mix.trainable;
    wins += mix.after_b > lora.after_b ? 1 : 0;
    ties += mix.after_b == lora.after_b ? 1 : 0;
    lora_sum += lora.after_b;
    moral_sum += mix.after_b;
    best = std::max({best, lora.after_b, mix.after_b});
    out.trace.push_back(fmt::format("seed {}: task-A RA after A / after B, task-B RA: LoRA {:.3f} / {:.3f}, {:.3f}; "
                                    "MoRAL {:.3f} / {:.3f}, {:.3f}",
                                    seed, lora.after_a, lora.after_b, lora.task_b, mix.after_a, mix.after_b,
                                    mix.task_b));
  }
  out.pass = wins + ties >= 3 && best >= 0.05;
  out.detail = fmt::format(
      "MoRAL task-A retention >= LoRA on {} of 5 seeds ({} strictly, {} ties; need 3); mean retention MoRAL {:.3f}, "
      "LoRA {:.3f}; trainable parameters MoRAL {}, LoRA {}",
      wins + ties, wins, ties, moral_sum / 5.0, lora_sum / 5.0, moral_params, lora_params);
  if (best < 0.05)
    out.trace.push_back("both adapters keep less than 0.05 task-A RA on every seed: the comparison sits at the noise "
                        "floor and says nothing about retention, so the criterion is not met");
  return out;
}

Outcome open_book_experiment() {
  Rng rng(derive_seed(1, "vault-facts"));
  std::vector<Chunk> chunks;
  std::vector<QaRecord> records;
  for (std::size_t i = 0; i < 170; ++i) {
    const std::string name = random_word(rng, "abcdefghijklmnopqrstuvwxyz", 4, 4);
    const std::string digit = std::to_string(rng.below(10));
    const std::string id = chunk_id("vault/" + name, i);
    chunks.push_back({id, fmt::format("The vault of {} holds the number {}.", name, digit), "vault/" + name, 0, {}});
    records.push_back({fmt::format("What number does the vault of {} hold?", name), id, {id}, std::nullopt,
                       std::nullopt, digit, "vault"});
  }
  const TrigramEmbedder embedder(64);
  const VectorIndex index = build_index(chunks, embedder);
  const std::span<const QaRecord> train_split(records.data(), 150);
  const std::span<const QaRecord> test_split(records.data() + 150, 20);

  auto examples = training_examples(train_split, index, TrainingPrompt::kOpenBook);
  const auto closed = training_examples(train_split, index, TrainingPrompt::kClosedBook);
  examples.insert(examples.end(), closed.begin(), closed.end());

  TrainConfig tc;
  tc.lr = 1e-2;
  tc.batch_size = 8;
  tc.epochs = 100;
  tc.n_experts = 4;
  tc.top_k = 2;
  tc.rank = 4;
  tc.alpha = 8.0;
  tc.seed = 1;
  ToyModel model = build_frozen_model({256, 32, 2, 2, 64, 160, 1}, tc.adapter_config());
  const TrainResult fit = train(model, examples, tc);

  ToyModelResponder responder(model, 4);
  RuleBasedGenerator generator;
  HeuristicJudge judge;
  EvalConfig cfg;
  cfg.recompute_retrieval = false;
  const EvalClients clients{embedder, generator, {&judge}};
  const EvalReport open = evaluate(test_split, index, responder, EvalMode::kOpen, clients, cfg);
  const EvalReport closed_report = evaluate(test_split, index, responder, EvalMode::kClosed, clients, cfg);
  const double ra_open = open.ra_open.value_or(0.0);
  const double ra_closed = closed_report.ra_closed.value_or(0.0);

  Outcome out;
  out.pass = ra_open > ra_closed && !open.partial() && !closed_report.partial();
  out.detail = fmt::format("held-out RA-open {:.3f} vs RA-closed {:.3f} on {} facts", ra_open, ra_closed,
                           test_split.size());
  out.trace.push_back(fmt::format("epoch loss {:.3f} -> {:.3f} over {} steps", fit.epoch_losses.front(),
                                  fit.epoch_losses.back(), fit.loss_trace.size()));
  std::string sample = "first held-out answers (truth/open/closed):";
  for (std::size_t i = 0; i < 5; ++i)
    sample += fmt::format(" {}/{}/{}", open.records[i].ground_truth, open.records[i].open_response.value_or("-"),
                          closed_report.records[i].closed_response.value_or("-"));
  out.trace.push_back(sample);
  return out;
}

}  // namespace moral::acceptance
