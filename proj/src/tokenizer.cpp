// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#include "moral/tokenizer.hpp"

#include "moral/errors.hpp"

namespace moral {

std::vector<int> encode(std::string_view text) {
  std::vector<int> tokens;
  tokens.reserve(text.size());
  for (unsigned char c : text) tokens.push_back(static_cast<int>(c));
  return tokens;
}

std::string decode(const std::vector<int>& tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (int t : tokens) {
    if (t < 0 || t >= static_cast<int>(kByteVocabSize)) {
      throw InputError("token id " + std::to_string(t) + " is not a byte");
    }
    out.push_back(static_cast<char>(static_cast<unsigned char>(t)));
  }
  return out;
}

}  // namespace moral
