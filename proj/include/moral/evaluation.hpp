// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moral/clients.hpp"
#include "moral/curation.hpp"
#include "moral/model.hpp"
#include "moral/retrieval.hpp"

namespace moral {

enum class Scenario { kGoldenContext, kMixedContext, kIrrelevantContext, kEmptyContext };

inline constexpr Scenario kAllScenarios[] = {Scenario::kGoldenContext, Scenario::kMixedContext,
                                             Scenario::kIrrelevantContext, Scenario::kEmptyContext};

// "golden_context", "mixed_context", "irrelevant_context", "empty_context"
std::string_view scenario_name(Scenario s);

// Duplicate ids in retrieved count once.
Scenario classify_scenario(std::span<const std::string> retrieved, std::string_view golden_id);

inline const std::vector<std::string> kDefaultRefusalPhrases{"i don't know", "i do not know"};

// True iff normalize_text(response) equals a normalized phrase or starts with
// one followed by a space.
bool detect_refusal(std::string_view response,
                    std::span<const std::string> phrases = kDefaultRefusalPhrases);

// Fraction refused; nullopt for no responses.
std::optional<double> compute_rr(std::span<const std::string> responses,
                                 std::span<const std::string> phrases = kDefaultRefusalPhrases);

using StatementExtractor = std::function<std::vector<std::string>(std::string_view)>;

// Normalized word tokens (the default).
std::vector<std::string> token_statements(std::string_view text);
// Normalized sentences.
std::vector<std::string> sentence_statements(std::string_view text);

struct F1Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double f1 = 0.0;
};

// Multiset overlap of statements. F1 = TP / (TP + (FP + FN) / 2), or 0 when
// both sides have no statements. Throws ArgumentError on empty input.
F1Counts statement_f1(std::string_view answer, std::string_view ground_truth,
                      const StatementExtractor& extract = token_statements);

struct RaWeights {
  double w0 = 1.0;
  double w1 = 1.0;
  // Throws ConfigError on negative or non-finite weights, or both zero.
  void validate() const;
};

// (w0 * F1 + w1 * clamp(cos, 0, 1)) / (w0 + w1).
double combine_ra(double f1, double cosine, const RaWeights& weights);

double compute_ra(std::string_view answer, std::string_view ground_truth, const RaWeights& weights,
                  const Embedder& embedder, const StatementExtractor& extract = token_statements);

// Mean over m regenerated questions of clamp(cos(EMB(q), EMB(q_i)), 0, 1).
// Questions come from the query-from-response prompt, key "question".
double compute_qr(std::string_view question, std::string_view response, std::string_view context,
                  GeneratorClient& generator, const Embedder& embedder, std::size_t m = 1);

struct JudgedScore {
  double score = 0.0;
  std::size_t failures = 0;
  bool partial() const noexcept { return failures > 0; }
};

// Mean over judges that answer; throws EvaluationError if none does.
JudgedScore mean_judge_score(const ClientRequest& request, std::span<JudgeClient* const> judges);

JudgedScore compute_fl(std::string_view response, std::span<JudgeClient* const> judges);

// Golden context text and the texts of the other retrieved chunks.
struct ContextView {
  std::string golden;
  std::string distractors;
};
ContextView context_view(const QaRecord& record, const VectorIndex& index);

// Both need record.open_response. Throw ArgumentError if it is missing or the
// record's scenario is not golden (faith) / mixed (filter).
double score_faith(const QaRecord& record, const VectorIndex& index, JudgeClient& judge);
double score_filter(const QaRecord& record, const VectorIndex& index, JudgeClient& judge);

class ResponseModel {
 public:
  virtual ~ResponseModel() = default;
  virtual std::string respond(const std::string& prompt) = 0;
};

// Greedy decoding up to a newline; invalid UTF-8 in the output becomes U+FFFD.
class ToyModelResponder final : public ResponseModel {
 public:
  explicit ToyModelResponder(const ToyModel& model, std::size_t max_new_tokens = 64)
      : model_(model), max_new_tokens_(max_new_tokens) {}
  std::string respond(const std::string& prompt) override;

 private:
  const ToyModel& model_;
  std::size_t max_new_tokens_;
};

enum class TrainingPrompt { kQa, kClosedBook, kOpenBook };
// Throws ArgumentError for anything but "qa", "closed_book", "open_book".
TrainingPrompt parse_training_prompt(std::string_view name);

// (q, ground_truth) pairs rendered with the chosen prompt. kOpenBook puts the
// golden chunk in the open-book template, the prompt the model sees for a
// golden-context record at evaluation time.
std::vector<TrainingExample> training_examples(std::span<const QaRecord> records, const VectorIndex& index,
                                               TrainingPrompt prompt);

enum class EvalMode { kOpen, kClosed, kCross };
std::string_view eval_mode_name(EvalMode mode);
// Throws ArgumentError for anything but "open", "closed", "cross".
EvalMode parse_eval_mode(std::string_view name);

struct EvalConfig {
  RetrievalConfig retrieval;
  RaWeights weights;
  std::size_t qr_questions = 1;
  std::vector<std::string> refusal_phrases = kDefaultRefusalPhrases;
  // Recompute C_r against the index; otherwise use the stored list.
  bool recompute_retrieval = true;
  std::size_t max_in_flight = 1;
};

struct EvalClients {
  const Embedder& embedder;
  GeneratorClient& generator;
  // Used for Faith, Filter and FL; scores are averaged across judges.
  std::vector<JudgeClient*> judges;
};

struct RecordFailure {
  std::string context_id;
  std::string stage;
  std::string message;

  friend bool operator==(const RecordFailure&, const RecordFailure&) = default;
};

struct EvalReport {
  EvalMode mode = EvalMode::kOpen;
  std::size_t record_count = 0;
  std::map<Scenario, std::size_t> scenario_counts;
  std::optional<double> faith;
  std::optional<double> filter;
  std::optional<double> rr;
  std::optional<double> ra_open;
  std::optional<double> ra_closed;
  std::optional<double> qr;
  std::optional<double> fl;
  std::vector<RecordFailure> failures;
  // Input records with the responses produced in this run filled in.
  std::vector<QaRecord> records;

  bool partial() const noexcept { return !failures.empty(); }
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Open: Golden, Mixed and Irrelevant records get the open-book prompt over
// C_r and Empty records the closed-book prompt. Faith on Golden, Filter on
// Mixed, RR on Irrelevant, RA-open on Golden, Mixed and Empty.
// Closed: closed-book prompt and RA-closed on every record.
// Cross: both of the above, plus QR and FL averaged over both responses.
// Metrics are means over contributing records and absent when none
// contributes. A failing client call skips that metric for that record and
// is listed in failures. Throws ArgumentError on an empty dataset.
EvalReport evaluate(std::span<const QaRecord> dataset, const VectorIndex& index, ResponseModel& model,
                    EvalMode mode, const EvalClients& clients, const EvalConfig& config);

// Report without the records array.
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(std::string_view json);

// Columns Faith, Filter, RR, RA-open, RA-closed, QR, FL with "-" for absent
// metrics, followed by scenario counts.
std::string report_to_table(const EvalReport& report);

}  // namespace moral
