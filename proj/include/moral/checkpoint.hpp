// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint directory layout:
//   model_config.json  ToyModelConfig fields
//   adapter.json       {"kind", "layers": [{n, k, rank, alpha, d_m, d_ff,
//                       experts: [{down, up}], router: {w_g}}]}, matrices as
//                       arrays of rows; LoRA layers have n = k = 1 and no router
//   base_weights.bin   16-byte magic, version byte, then per tensor u64 rows,
//                       u64 cols and row-major float64, all little-endian
//   loss.csv           step,loss

#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moral/model.hpp"

namespace moral {

inline constexpr std::string_view kBaseWeightsMagic{"MORALBENCH-BASE\0", 16};
inline constexpr unsigned char kBaseWeightsVersion = 1;

// Token and position embeddings, then per layer wq, wk, wv, wo, w1, w2, then
// the unembedding.
void write_base_weights(std::ostream& out, const ToyModel& model);

std::string sha256_hex(std::string_view bytes);
// SHA-256 of the base_weights.bin encoding.
std::string base_weights_sha256(const ToyModel& model);

// Creates dir if needed and overwrites the four files.
void save_checkpoint(const std::filesystem::path& dir, const ToyModel& model,
                     std::span<const double> loss_trace = {});
// Throws InputError on missing or malformed files.
ToyModel load_checkpoint(const std::filesystem::path& dir);

std::string config_to_json(const ToyModelConfig& config);
ToyModelConfig config_from_json(std::string_view json);

}  // namespace moral
