// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace moral {

std::string_view trim(std::string_view s) noexcept;

// Text up to and including the first '.', '!' or '?' that is followed by
// whitespace or the end of input, trimmed. The whole trimmed text if there is
// no such terminator.
std::string first_sentence(std::string_view text);

// All sentences in order, as repeated first_sentence would find them.
std::vector<std::string> split_sentences(std::string_view text);

// ASCII-lowercases, deletes apostrophes (ASCII and U+2019), turns other ASCII punctuation into
// spaces and collapses whitespace. Bytes >= 0x80 are kept as word characters.
std::string normalize_text(std::string_view text);

// Whitespace tokens of normalize_text.
std::vector<std::string> normalized_tokens(std::string_view text);

bool is_stopword(std::string_view token) noexcept;

// normalized_tokens without stopwords.
std::vector<std::string> content_tokens(std::string_view text);

// Copy of text with each maximal invalid UTF-8 subsequence replaced by U+FFFD.
std::string sanitize_utf8(std::string_view text);

}  // namespace moral
