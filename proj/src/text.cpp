// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#include "moral/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace moral {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u);
}

// U+2019, the typographic apostrophe.
constexpr std::string_view kRightQuote = "\xE2\x80\x99";

constexpr std::array<std::string_view, 48> kStopwords{
    "a",    "an",   "and",   "are",  "as",   "at",    "be",   "been", "but",  "by",    "can",  "did",
    "do",   "does", "for",   "from", "had",  "has",   "have", "he",   "her",  "his",   "how",  "i",
    "in",   "is",   "it",    "its",  "of",   "on",    "or",   "she",  "that", "the",   "their", "them",
    "they", "this", "to",    "was",  "we",   "were",  "what", "which", "who", "will",  "with", "you"};

}  // namespace

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string first_sentence(std::string_view text) {
  text = trim(text);
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (is_terminator(text[i]) && (i + 1 == text.size() || is_space(text[i + 1])))
      return std::string(trim(text.substr(0, i + 1)));
  }
  return std::string(text);
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  text = trim(text);
  while (!text.empty()) {
    std::string s = first_sentence(text);
    // first_sentence returns a trimmed prefix of the trimmed input.
    text = trim(text.substr(s.size()));
    out.push_back(std::move(s));
  }
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\'') continue;
    if (text.substr(i, kRightQuote.size()) == kRightQuote) {
      i += kRightQuote.size() - 1;
      continue;
    }
    if (is_space(c) || is_ascii_punct(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

std::vector<std::string> normalized_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  const std::string norm = normalize_text(text);
  std::size_t start = 0;
  while (start < norm.size()) {
    std::size_t end = norm.find(' ', start);
    if (end == std::string::npos) end = norm.size();
    tokens.push_back(norm.substr(start, end - start));
    start = end + 1;
  }
  return tokens;
}

bool is_stopword(std::string_view token) noexcept {
  return std::find(kStopwords.begin(), kStopwords.end(), token) != kStopwords.end();
}

std::vector<std::string> content_tokens(std::string_view text) {
  auto tokens = normalized_tokens(text);
  std::erase_if(tokens, [](const std::string& t) { return is_stopword(t); });
  return tokens;
}

std::string sanitize_utf8(std::string_view text) {
  static constexpr std::string_view kReplacement = "\xEF\xBF\xBD";
  std::string out;
  out.reserve(text.size());
  const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(text[i]); };
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char b = byte(i);
    std::size_t len = 0;
    unsigned char lo = 0x80, hi = 0xBF;
    if (b < 0x80) {
      out.push_back(static_cast<char>(b));
      ++i;
      continue;
    } else if (b >= 0xC2 && b <= 0xDF) {
      len = 2;
    } else if (b >= 0xE0 && b <= 0xEF) {
      len = 3;
      if (b == 0xE0) lo = 0xA0;
      if (b == 0xED) hi = 0x9F;
    } else if (b >= 0xF0 && b <= 0xF4) {
      len = 4;
      if (b == 0xF0) lo = 0x90;
      if (b == 0xF4) hi = 0x8F;
    }
    std::size_t valid = len == 0 ? 0 : 1;
    for (; valid > 0 && valid < len && i + valid < text.size(); ++valid) {
      const unsigned char c = byte(i + valid);
      if (c < (valid == 1 ? lo : 0x80) || c > (valid == 1 ? hi : 0xBF)) break;
    }
    if (len > 0 && valid == len) {
      out.append(text.substr(i, len));
      i += len;
    } else {
      out.append(kReplacement);
      i += std::max<std::size_t>(valid, 1);
    }
  }
  return out;
}

}  // namespace moral
