// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace moral {

// Byte-level tokenizer: one token per byte, vocabulary of 256.
inline constexpr std::size_t kByteVocabSize = 256;

std::vector<int> encode(std::string_view text);
std::string decode(const std::vector<int>& tokens);

}  // namespace moral
