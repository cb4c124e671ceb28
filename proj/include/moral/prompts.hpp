// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

// Prompt templates, compiled in from assets/prompts/<version>/.
//
// question_generation, ground_truth_generation, open_book, closed_book and
// fluency are kept byte-identical to the published benchmark prompts (line
// breaks and literal "\n" sequences included). faithfulness, filtering and
// query_from_response are authored for this project.

#pragma once

#include <map>
#include <string>
#include <string_view>

namespace moral {

inline constexpr std::string_view kPromptVersion = "v1";

enum class PromptId {
  kQuestionGeneration,
  kGroundTruthGeneration,
  kOpenBook,
  kClosedBook,
  kFluency,
  kFaithfulness,
  kFiltering,
  kQueryFromResponse,
};

std::string_view prompt_template(PromptId id);
std::string_view prompt_asset_name(PromptId id);

// Replaces every "{key}" with its value. Unknown placeholders are left as-is.
std::string render_prompt(std::string_view tmpl, const std::map<std::string, std::string>& values);

std::string render_question_prompt(std::string_view context);
std::string render_ground_truth_prompt(std::string_view context, std::string_view question);
std::string render_open_book_prompt(std::string_view context, std::string_view question);
std::string render_closed_book_prompt(std::string_view question);
std::string render_fluency_prompt(std::string_view response);

}  // namespace moral
