// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#include "moral/prompts.hpp"

#include <span>
#include <utility>

#include "moral/errors.hpp"

namespace moral {

namespace assets {
std::span<const std::pair<std::string_view, std::string_view>> prompt_asset_table();
}  // namespace assets

std::string_view prompt_asset_name(PromptId id) {
  switch (id) {
    case PromptId::kQuestionGeneration: return "question_generation.txt";
    case PromptId::kGroundTruthGeneration: return "ground_truth_generation.txt";
    case PromptId::kOpenBook: return "open_book.txt";
    case PromptId::kClosedBook: return "closed_book.txt";
    case PromptId::kFluency: return "fluency.txt";
    case PromptId::kFaithfulness: return "faithfulness.txt";
    case PromptId::kFiltering: return "filtering.txt";
    case PromptId::kQueryFromResponse: return "query_from_response.txt";
  }
  throw ArgumentError("unknown prompt id");
}

std::string_view prompt_template(PromptId id) {
  const std::string_view name = prompt_asset_name(id);
  for (const auto& [asset, text] : assets::prompt_asset_table()) {
    if (asset == name) return text;
  }
  throw ConfigError("prompt asset missing from build: " + std::string(name));
}

std::string render_prompt(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) break;
    out.append(tmpl.substr(pos, open - pos));
    const std::string key(tmpl.substr(open + 1, close - open - 1));
    if (auto it = values.find(key); it != values.end()) {
      out.append(it->second);
    } else {
      out.append(tmpl.substr(open, close - open + 1));
    }
    pos = close + 1;
  }
  out.append(tmpl.substr(pos));
  return out;
}

std::string render_question_prompt(std::string_view context) {
  return render_prompt(prompt_template(PromptId::kQuestionGeneration),
                       {{"context", std::string(context)}});
}

std::string render_ground_truth_prompt(std::string_view context, std::string_view question) {
  return render_prompt(prompt_template(PromptId::kGroundTruthGeneration),
                       {{"context", std::string(context)}, {"question", std::string(question)}});
}

std::string render_open_book_prompt(std::string_view context, std::string_view question) {
  return render_prompt(prompt_template(PromptId::kOpenBook),
                       {{"context", std::string(context)}, {"question", std::string(question)}});
}

std::string render_closed_book_prompt(std::string_view question) {
  return render_prompt(prompt_template(PromptId::kClosedBook), {{"question", std::string(question)}});
}

std::string render_fluency_prompt(std::string_view response) {
  return render_prompt(prompt_template(PromptId::kFluency), {{"response", std::string(response)}});
}

}  // namespace moral
