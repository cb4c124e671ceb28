// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moral/clients.hpp"
#include "moral/evaluation.hpp"
#include "moral/model.hpp"
#include "moral/retrieval.hpp"

namespace moral::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitPartial = 3;

struct ClientSpec {
  // embedder: "trigram" | "remote"; generator and judges: "stub" | "chat".
  std::string kind;
  HttpEndpoint endpoint;
  std::size_t dim = 256;
};

struct GradcheckSettings {
  double epsilon = 1e-5;
  ToyModelConfig model{256, 4, 2, 2, 8, 32, 0};
  AdapterSettings adapter{4, 2, 2, 4.0};
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "run";
  std::filesystem::path corpus = "corpus";
  // Relative to output_dir.
  std::filesystem::path dataset_dir = "dataset";
  std::filesystem::path index_file = "index.jsonl";
  std::filesystem::path checkpoint_dir = "checkpoint";
  std::filesystem::path reports_dir = "reports";

  SplitOptions split;
  RetrievalConfig retrieval;
  bool recompute_retrieval = true;
  double train_fraction = 0.8;
  std::size_t curation_in_flight = 4;

  ToyModelConfig model;
  TrainConfig train;
  AdapterKind adapter = AdapterKind::kMoral;
  TrainingPrompt training_prompt = TrainingPrompt::kQa;

  RaWeights weights;
  std::size_t qr_questions = 1;
  std::size_t max_new_tokens = 32;
  std::size_t eval_in_flight = 1;
  std::vector<std::string> refusal_phrases = kDefaultRefusalPhrases;

  ClientSpec embedder{"trigram", {}, 256};
  ClientSpec generator{"stub", {}, 0};
  std::vector<ClientSpec> judges{ClientSpec{"stub", {}, 0}};

  GradcheckSettings gradcheck;
};

// Overlays the keys present in j onto base. Unknown keys, credentials in the
// file and output paths that are absolute or contain ".." are ConfigErrors.
RunConfig apply_config_json(const nlohmann::json& j, RunConfig base = {});

// Entry point; returns the process exit code.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace moral::cli
