// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#include "moral/clients.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "moral/errors.hpp"
#include "moral/text.hpp"

namespace moral {
namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_lower_word(std::string_view w) {
  return !w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

std::string base_form(std::string_view verb) {
  if (ends_with(verb, "ies")) return std::string(verb.substr(0, verb.size() - 3)) + "y";
  for (std::string_view e : {"sses", "shes", "ches", "xes", "zes", "oes"})
    if (ends_with(verb, e)) return std::string(verb.substr(0, verb.size() - 2));
  return std::string(verb.substr(0, verb.size() - 1));
}

std::string question_json(std::string_view question) {
  return nlohmann::json{{"question", question}}.dump();
}

constexpr std::string_view kNegations[] = {
    "not",  "no",    "never", "cannot", "neither", "nor",    "none",   "isnt",     "arent",
    "wasnt", "werent", "dont", "doesnt", "didnt",  "cant",   "couldnt", "wont",    "wouldnt",
    "shouldnt", "hasnt", "havent", "hadnt"};

bool has_negation(const std::vector<std::string>& tokens) {
  return std::any_of(tokens.begin(), tokens.end(), [](const std::string& t) {
    return std::find(std::begin(kNegations), std::end(kNegations), t) != std::end(kNegations);
  });
}

}  // namespace

const std::string& ClientRequest::field(const std::string& key) const {
  static const std::string kEmpty;
  const auto it = fields.find(key);
  return it == fields.end() ? kEmpty : it->second;
}

double JudgeClient::score(const ClientRequest& request) {
  const double s = raw_score(request);
  if (!std::isfinite(s)) throw FormatError("judge returned a non-finite score", fmt::format("{}", s));
  return std::clamp(s, 0.0, 1.0);
}

std::string interrogative_from_sentence(std::string_view text) {
  std::string sentence = first_sentence(text);
  while (!sentence.empty() && (sentence.back() == '.' || sentence.back() == '!' || sentence.back() == '?'))
    sentence.pop_back();
  std::vector<std::string> words;
  for (std::size_t pos = 0; pos < sentence.size();) {
    const std::size_t next = sentence.find_first_of(" \t\n", pos);
    const std::size_t end = next == std::string::npos ? sentence.size() : next;
    if (end > pos) words.push_back(sentence.substr(pos, end - pos));
    pos = end + 1;
  }
  const auto fallback = "What does the passage say about " + sentence + "?";
  if (words.size() < 2) return fallback;
  for (std::string_view det : {"The", "A", "An", "This", "These"})
    if (words[0] == det) words[0][0] = static_cast<char>(words[0][0] - 'A' + 'a');

  for (std::size_t i = 1; i < words.size(); ++i) {
    const std::string& w = words[i];
    std::string subject = words[0];
    for (std::size_t j = 1; j < i; ++j) subject += " " + words[j];
    if (w == "is" || w == "are" || w == "was" || w == "were") return "What " + w + " " + subject + "?";
    if (w == "has") return "What does " + subject + " have?";
    if (w == "have") return "What do " + subject + " have?";
    if (is_lower_word(w) && w.size() >= 3 && w.back() == 's' && !ends_with(w, "ss") && !ends_with(w, "us") &&
        !ends_with(w, "is"))
      return "What does " + subject + " " + base_form(w) + "?";
  }
  return fallback;
}

std::string RuleBasedGenerator::complete(const ClientRequest& request) {
  switch (request.task) {
    case PromptId::kQuestionGeneration:
      return question_json(interrogative_from_sentence(request.field("context")));
    case PromptId::kGroundTruthGeneration:
      return nlohmann::json{{"ground truth", first_sentence(request.field("context"))}}.dump();
    case PromptId::kQueryFromResponse:
      return question_json(interrogative_from_sentence(request.field("response")));
    default:
      return first_sentence(request.field("context"));
  }
}

ScriptedGenerator::ScriptedGenerator(std::vector<std::string> replies) : replies_(std::move(replies)) {
  if (replies_.empty()) throw ArgumentError("scripted generator needs at least one reply");
}

std::string ScriptedGenerator::complete(const ClientRequest&) {
  std::lock_guard lock(mutex_);
  return replies_[calls_++ % replies_.size()];
}

std::size_t ScriptedGenerator::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

double heuristic_fluency(std::string_view response) {
  const std::string_view r = trim(response);
  if (r.empty()) return 0.0;
  double score = 0.0;
  if (r.front() >= 'A' && r.front() <= 'Z') score += 0.25;
  if (r.back() == '.' || r.back() == '!' || r.back() == '?') score += 0.25;
  std::size_t words = 0, alphabetic = 0;
  for (std::size_t pos = 0; pos < r.size();) {
    const std::size_t next = r.find_first_of(" \t\n", pos);
    const std::size_t end = next == std::string_view::npos ? r.size() : next;
    std::string_view w = r.substr(pos, end - pos);
    pos = end + 1;
    if (w.empty()) continue;
    ++words;
    while (!w.empty() && std::string_view(".,;:!?\"')").find(w.back()) != std::string_view::npos) w.remove_suffix(1);
    while (!w.empty() && std::string_view("\"'(").find(w.front()) != std::string_view::npos) w.remove_prefix(1);
    if (!w.empty() && std::all_of(w.begin(), w.end(), [](char c) {
          return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
        }))
      ++alphabetic;
  }
  score += 0.25 * std::min(1.0, static_cast<double>(words) / 5.0);
  score += 0.25 * static_cast<double>(alphabetic) / static_cast<double>(words);
  return score;
}

double heuristic_faithfulness(std::string_view response, std::string_view context) {
  const std::string anchor = first_sentence(context);
  if (!anchor.empty() && response.find(anchor) != std::string_view::npos) return 1.0;
  if (has_negation(normalized_tokens(response)) && !has_negation(normalized_tokens(context))) return 0.0;
  const auto tokens = content_tokens(response);
  if (tokens.empty()) return 0.0;
  const auto ctx = content_tokens(context);
  const std::set<std::string> known(ctx.begin(), ctx.end());
  const auto hits = std::count_if(tokens.begin(), tokens.end(), [&](const auto& t) { return known.contains(t); });
  return static_cast<double>(hits) / static_cast<double>(tokens.size());
}

double heuristic_filtering(std::string_view response, std::string_view context, std::string_view distractors) {
  const auto r = content_tokens(response);
  const auto c = content_tokens(context);
  const auto d = content_tokens(distractors);
  const std::set<std::string> golden(c.begin(), c.end());
  const std::set<std::string> other(d.begin(), d.end());
  std::size_t g = 0, x = 0;
  for (const auto& t : std::set<std::string>(r.begin(), r.end())) {
    if (golden.contains(t))
      ++g;
    else if (other.contains(t))
      ++x;
  }
  return g + x == 0 ? 0.0 : static_cast<double>(g) / static_cast<double>(g + x);
}

double HeuristicJudge::raw_score(const ClientRequest& request) {
  switch (request.task) {
    case PromptId::kFluency:
      return heuristic_fluency(request.field("response"));
    case PromptId::kFaithfulness:
      return heuristic_faithfulness(request.field("response"), request.field("context"));
    case PromptId::kFiltering:
      return heuristic_filtering(request.field("response"), request.field("context"), request.field("distractors"));
    default:
      throw ArgumentError(fmt::format("heuristic judge has no rule for prompt '{}'", prompt_asset_name(request.task)));
  }
}

}  // namespace moral
