// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

// Generator and judge clients. Remote implementations send the rendered
// prompt to a chat-completion endpoint; the offline stubs ignore the prompt
// and apply fixed rules to the structured fields.

#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "moral/prompts.hpp"
#include "moral/retrieval.hpp"

namespace moral {

struct ClientRequest {
  PromptId task;
  std::string prompt;
  // Template inputs by placeholder name: context, question, response, distractors.
  std::map<std::string, std::string> fields;

  const std::string& field(const std::string& key) const;
};

class GeneratorClient {
 public:
  virtual ~GeneratorClient() = default;
  // Raw completion text. Throws ClientError on transport failure.
  virtual std::string complete(const ClientRequest& request) = 0;
};

class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  // Score clamped to [0, 1]. Throws FormatError on a non-finite raw score.
  double score(const ClientRequest& request);

 protected:
  virtual double raw_score(const ClientRequest& request) = 0;
};

// Declarative sentence to question, applied to the first sentence:
//   "<subject> is|are|was|were <rest>."  -> "What <verb> <subject>?"
//   "<subject> has|have <rest>."         -> "What does|do <subject> have?"
//   "<subject> <verb>s <rest>."          -> "What does <subject> <verb>?"
// where the verb is the first later word that is a copula, has/have, or a
// lowercase word ending in "s" but not "ss", "us" or "is". Third-person
// endings are undone as -ies -> -y, -(ss|sh|ch|x|z|o)es -> drop "es",
// otherwise drop "s". A leading "The", "A", "An", "This" or "These" is
// lowercased. Without a verb: "What does the passage say about <sentence>?"
std::string interrogative_from_sentence(std::string_view text);

// Deterministic offline generator.
//   question generation       -> {"question": interrogative(first sentence of context)}
//   ground-truth generation   -> {"ground truth": first sentence of context}
//   query from response       -> {"question": interrogative(first sentence of response)}
// Other tasks return the first sentence of the context.
class RuleBasedGenerator final : public GeneratorClient {
 public:
  std::string complete(const ClientRequest& request) override;
};

// Returns the given replies in order, cycling. Thread-safe.
class ScriptedGenerator final : public GeneratorClient {
 public:
  explicit ScriptedGenerator(std::vector<std::string> replies);
  std::string complete(const ClientRequest& request) override;
  std::size_t calls() const;

 private:
  std::vector<std::string> replies_;
  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
};

// Deterministic offline judge.
//   fluency: a quarter point each for a leading capital, a closing '.', '!'
//     or '?', min(1, words/5), and the fraction of purely alphabetic words.
//   faithfulness: 1 if the response contains the first sentence of the
//     context; 0 if the response has a negation (not, no, never, cannot, a n't
//     contraction and a few others) and the context has none;
//     otherwise the fraction of response content tokens found in the context.
//   filtering: |G| / (|G| + |D|) over distinct response content tokens, G
//     found in the context, D found only in the distractors; 0 if both empty.
class HeuristicJudge final : public JudgeClient {
 protected:
  double raw_score(const ClientRequest& request) override;
};

double heuristic_fluency(std::string_view response);
double heuristic_faithfulness(std::string_view response, std::string_view context);
double heuristic_filtering(std::string_view response, std::string_view context, std::string_view distractors);

struct HttpEndpoint {
  // scheme://host[:port]
  std::string base_url;
  std::string path;
  std::string model;
  // Name of the environment variable holding a bearer token; empty for none.
  std::string api_key_env;
  double timeout_seconds = 60.0;
  int max_retries = 2;
};

// POST {model, messages:[{role:"user", content}]}, returns
// choices[0].message.content.
class ChatCompletionGenerator final : public GeneratorClient {
 public:
  explicit ChatCompletionGenerator(HttpEndpoint endpoint);
  std::string complete(const ClientRequest& request) override;

 private:
  HttpEndpoint endpoint_;
};

// First decimal number in the reply. Throws FormatError if there is none.
double parse_judge_score(std::string_view reply);

class ChatCompletionJudge final : public JudgeClient {
 public:
  explicit ChatCompletionJudge(HttpEndpoint endpoint);

 protected:
  double raw_score(const ClientRequest& request) override;

 private:
  ChatCompletionGenerator chat_;
};

// POST {"text"} -> {"embedding": [...]}. The reply is L2-normalized.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(HttpEndpoint endpoint, std::size_t dim);
  std::size_t dim() const override { return dim_; }
  Vector embed(std::string_view text) const override;

 private:
  HttpEndpoint endpoint_;
  std::size_t dim_;
};

}  // namespace moral
