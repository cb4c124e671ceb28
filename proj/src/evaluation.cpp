// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#include "moral/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "moral/errors.hpp"
#include "moral/text.hpp"
#include "parallel.hpp"

namespace moral {
namespace {

using Json = nlohmann::ordered_json;

double clamp_unit(double x) { return std::clamp(x, 0.0, 1.0); }

std::string join_texts(std::span<const std::string> ids, const VectorIndex& index, std::string_view skip = {}) {
  std::string out;
  for (const auto& id : ids) {
    if (id == skip) continue;
    const Chunk* c = index.find(id);
    if (c == nullptr) throw ArgumentError(fmt::format("chunk '{}' is not in the index", id));
    if (!out.empty()) out += "\n\n";
    out += c->text;
  }
  return out;
}

ClientRequest judge_request(PromptId task, const QaRecord& record, const VectorIndex& index) {
  if (!record.open_response) throw ArgumentError(fmt::format("record '{}' has no open-book response", record.context_id));
  const ContextView view = context_view(record, index);
  std::map<std::string, std::string> fields{{"context", view.golden},
                                            {"question", record.q},
                                            {"response", *record.open_response},
                                            {"distractors", view.distractors}};
  std::string prompt = render_prompt(prompt_template(task), fields);
  return {task, std::move(prompt), std::move(fields)};
}

// RA of a response, with an empty response scoring 0.
double response_ra(const std::string& response, const QaRecord& record, const EvalConfig& config,
                   const Embedder& embedder) {
  if (trim(response).empty()) return 0.0;
  return compute_ra(response, record.ground_truth, config.weights, embedder);
}

struct RecordOutcome {
  QaRecord record;
  Scenario scenario = Scenario::kEmptyContext;
  std::optional<double> faith, filter, ra_open, ra_closed, qr, fl;
  std::optional<bool> refused;
  std::vector<RecordFailure> failures;
};

template <typename Fn>
void guarded(RecordOutcome& out, std::string_view stage, Fn fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    out.failures.push_back({out.record.context_id, std::string(stage), e.what()});
  }
}

void note_partial(RecordOutcome& out, std::string_view stage, const JudgedScore& s, std::size_t judges) {
  if (s.partial())
    out.failures.push_back({out.record.context_id, std::string(stage),
                            fmt::format("{} of {} judges failed", s.failures, judges)});
}

RecordOutcome evaluate_record(const QaRecord& input, const VectorIndex& index, ResponseModel& model, EvalMode mode,
                              const EvalClients& clients, const EvalConfig& config) {
  RecordOutcome out{input, Scenario::kEmptyContext, {}, {}, {}, {}, {}, {}, {}, {}};
  QaRecord& r = out.record;
  if (config.recompute_retrieval) {
    r.retrieved.clear();
    for (auto& hit : retrieve(r.q, index, clients.embedder, config.retrieval)) r.retrieved.push_back(std::move(hit.id));
  }
  out.scenario = classify_scenario(r.retrieved, r.context_id);

  if (mode != EvalMode::kClosed) {
    guarded(out, "open_response", [&] {
      const std::string prompt = out.scenario == Scenario::kEmptyContext
                                     ? render_closed_book_prompt(r.q)
                                     : render_open_book_prompt(join_texts(r.retrieved, index), r.q);
      r.open_response = model.respond(prompt);
    });
    if (r.open_response) {
      const std::string& ro = *r.open_response;
      switch (out.scenario) {
        case Scenario::kGoldenContext:
          guarded(out, "faith", [&] {
            const auto s = mean_judge_score(judge_request(PromptId::kFaithfulness, r, index), clients.judges);
            note_partial(out, "faith", s, clients.judges.size());
            out.faith = s.score;
          });
          break;
        case Scenario::kMixedContext:
          guarded(out, "filter", [&] {
            const auto s = mean_judge_score(judge_request(PromptId::kFiltering, r, index), clients.judges);
            note_partial(out, "filter", s, clients.judges.size());
            out.filter = s.score;
          });
          break;
        case Scenario::kIrrelevantContext:
          out.refused = detect_refusal(ro, config.refusal_phrases);
          break;
        case Scenario::kEmptyContext:
          break;
      }
      if (out.scenario != Scenario::kIrrelevantContext)
        guarded(out, "ra_open", [&] { out.ra_open = response_ra(ro, r, config, clients.embedder); });
    }
  }

  if (mode != EvalMode::kOpen) {
    guarded(out, "closed_response", [&] { r.closed_response = model.respond(render_closed_book_prompt(r.q)); });
    if (r.closed_response)
      guarded(out, "ra_closed", [&] { out.ra_closed = response_ra(*r.closed_response, r, config, clients.embedder); });
  }

  if (mode == EvalMode::kCross) {
    const Chunk* golden = index.find(r.context_id);
    const std::string context = golden ? golden->text : std::string();
    std::vector<const std::string*> responses;
    if (r.open_response) responses.push_back(&*r.open_response);
    if (r.closed_response) responses.push_back(&*r.closed_response);
    double qr_sum = 0.0, fl_sum = 0.0;
    std::size_t qr_n = 0, fl_n = 0;
    for (const std::string* response : responses) {
      guarded(out, "qr", [&] {
        qr_sum += compute_qr(r.q, *response, context, clients.generator, clients.embedder, config.qr_questions);
        ++qr_n;
      });
      guarded(out, "fl", [&] {
        const auto s = compute_fl(*response, clients.judges);
        note_partial(out, "fl", s, clients.judges.size());
        fl_sum += s.score;
        ++fl_n;
      });
    }
    if (qr_n > 0) out.qr = qr_sum / static_cast<double>(qr_n);
    if (fl_n > 0) out.fl = fl_sum / static_cast<double>(fl_n);
  }
  return out;
}

struct Mean {
  double sum = 0.0;
  std::size_t n = 0;
  void add(const std::optional<double>& v) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  std::optional<double> value() const {
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
};

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> read_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

}  // namespace

std::string_view scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kGoldenContext:
      return "golden_context";
    case Scenario::kMixedContext:
      return "mixed_context";
    case Scenario::kIrrelevantContext:
      return "irrelevant_context";
    case Scenario::kEmptyContext:
      return "empty_context";
  }
  return "unknown";
}

Scenario classify_scenario(std::span<const std::string> retrieved, std::string_view golden_id) {
  const std::set<std::string_view> ids(retrieved.begin(), retrieved.end());
  if (ids.empty()) return Scenario::kEmptyContext;
  if (!ids.contains(golden_id)) return Scenario::kIrrelevantContext;
  return ids.size() == 1 ? Scenario::kGoldenContext : Scenario::kMixedContext;
}

bool detect_refusal(std::string_view response, std::span<const std::string> phrases) {
  const std::string norm = normalize_text(response);
  for (const auto& phrase : phrases) {
    const std::string p = normalize_text(phrase);
    if (p.empty()) continue;
    if (norm.size() >= p.size() && norm.compare(0, p.size(), p) == 0 && (norm.size() == p.size() || norm[p.size()] == ' '))
      return true;
  }
  return false;
}

std::optional<double> compute_rr(std::span<const std::string> responses, std::span<const std::string> phrases) {
  if (responses.empty()) return std::nullopt;
  const auto refused = std::count_if(responses.begin(), responses.end(),
                                     [&](const std::string& r) { return detect_refusal(r, phrases); });
  return static_cast<double>(refused) / static_cast<double>(responses.size());
}

std::vector<std::string> token_statements(std::string_view text) { return normalized_tokens(text); }

std::vector<std::string> sentence_statements(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& s : split_sentences(text)) {
    std::string n = normalize_text(s);
    if (!n.empty()) out.push_back(std::move(n));
  }
  return out;
}

F1Counts statement_f1(std::string_view answer, std::string_view ground_truth, const StatementExtractor& extract) {
  if (answer.empty() || ground_truth.empty()) throw ArgumentError("statement_f1 needs two nonempty texts");
  std::map<std::string, std::size_t> truth;
  for (auto& s : extract(ground_truth)) ++truth[s];
  F1Counts c;
  for (auto& s : extract(answer)) {
    auto it = truth.find(s);
    if (it != truth.end() && it->second > 0) {
      --it->second;
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  for (const auto& [s, left] : truth) c.fn += left;
  const double denom = static_cast<double>(c.tp) + 0.5 * static_cast<double>(c.fp + c.fn);
  c.f1 = denom == 0.0 ? 0.0 : static_cast<double>(c.tp) / denom;
  return c;
}

void RaWeights::validate() const {
  if (!std::isfinite(w0) || !std::isfinite(w1) || w0 < 0.0 || w1 < 0.0 || w0 + w1 == 0.0)
    throw ConfigError("RA weights must be finite, nonnegative and not both zero");
}

double combine_ra(double f1, double cosine, const RaWeights& weights) {
  weights.validate();
  return (weights.w0 * f1 + weights.w1 * clamp_unit(cosine)) / (weights.w0 + weights.w1);
}

double compute_ra(std::string_view answer, std::string_view ground_truth, const RaWeights& weights,
                  const Embedder& embedder, const StatementExtractor& extract) {
  const double f1 = statement_f1(answer, ground_truth, extract).f1;
  const double cos = cosine_similarity(embedder.embed(answer), embedder.embed(ground_truth));
  return combine_ra(f1, cos, weights);
}

double compute_qr(std::string_view question, std::string_view response, std::string_view context,
                  GeneratorClient& generator, const Embedder& embedder, std::size_t m) {
  if (m == 0) throw ArgumentError("compute_qr needs m >= 1");
  const Vector q = embedder.embed(question);
  std::map<std::string, std::string> fields{{"context", std::string(context)}, {"response", std::string(response)}};
  const ClientRequest request{PromptId::kQueryFromResponse, render_prompt(prompt_template(PromptId::kQueryFromResponse), fields),
                              fields};
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::string regenerated = extract_json_field(generator.complete(request), "question");
    sum += clamp_unit(cosine_similarity(q, embedder.embed(regenerated)));
  }
  return sum / static_cast<double>(m);
}

JudgedScore mean_judge_score(const ClientRequest& request, std::span<JudgeClient* const> judges) {
  if (judges.empty()) throw ArgumentError("at least one judge is required");
  JudgedScore out;
  double sum = 0.0;
  std::string last_error;
  for (JudgeClient* judge : judges) {
    try {
      sum += judge->score(request);
    } catch (const std::exception& e) {
      ++out.failures;
      last_error = e.what();
    }
  }
  if (out.failures == judges.size()) throw EvaluationError(fmt::format("every judge failed: {}", last_error));
  out.score = sum / static_cast<double>(judges.size() - out.failures);
  return out;
}

JudgedScore compute_fl(std::string_view response, std::span<JudgeClient* const> judges) {
  const ClientRequest request{PromptId::kFluency, render_fluency_prompt(response), {{"response", std::string(response)}}};
  return mean_judge_score(request, judges);
}

ContextView context_view(const QaRecord& record, const VectorIndex& index) {
  const Chunk* golden = index.find(record.context_id);
  if (golden == nullptr) throw ArgumentError(fmt::format("golden chunk '{}' is not in the index", record.context_id));
  return {golden->text, join_texts(record.retrieved, index, record.context_id)};
}

double score_faith(const QaRecord& record, const VectorIndex& index, JudgeClient& judge) {
  if (classify_scenario(record.retrieved, record.context_id) != Scenario::kGoldenContext)
    throw ArgumentError("faithfulness is scored on golden-context records only");
  return judge.score(judge_request(PromptId::kFaithfulness, record, index));
}

double score_filter(const QaRecord& record, const VectorIndex& index, JudgeClient& judge) {
  if (classify_scenario(record.retrieved, record.context_id) != Scenario::kMixedContext)
    throw ArgumentError("filtering is scored on mixed-context records only");
  return judge.score(judge_request(PromptId::kFiltering, record, index));
}

std::string ToyModelResponder::respond(const std::string& prompt) {
  return sanitize_utf8(generate(model_, prompt, max_new_tokens_, '\n'));
}

TrainingPrompt parse_training_prompt(std::string_view name) {
  if (name == "qa") return TrainingPrompt::kQa;
  if (name == "closed_book") return TrainingPrompt::kClosedBook;
  if (name == "open_book") return TrainingPrompt::kOpenBook;
  throw ArgumentError(fmt::format("unknown training prompt '{}'", name));
}

std::vector<TrainingExample> training_examples(std::span<const QaRecord> records, const VectorIndex& index,
                                               TrainingPrompt prompt) {
  std::vector<TrainingExample> out;
  out.reserve(records.size());
  for (const QaRecord& r : records) {
    const QaPair pair{r.q, r.ground_truth};
    switch (prompt) {
      case TrainingPrompt::kQa:
        out.push_back(to_training_example(pair, PromptStyle::kQa));
        break;
      case TrainingPrompt::kClosedBook:
        out.push_back(to_training_example(pair, PromptStyle::kClosedBook));
        break;
      case TrainingPrompt::kOpenBook: {
        const Chunk* golden = index.find(r.context_id);
        if (golden == nullptr) throw ArgumentError(fmt::format("golden chunk '{}' is not in the index", r.context_id));
        TrainingExample ex = to_training_example(pair, PromptStyle::kQa);
        ex.prompt = render_open_book_prompt(golden->text, r.q);
        out.push_back(std::move(ex));
        break;
      }
    }
  }
  return out;
}

std::string_view eval_mode_name(EvalMode mode) {
  switch (mode) {
    case EvalMode::kOpen:
      return "open";
    case EvalMode::kClosed:
      return "closed";
    case EvalMode::kCross:
      return "cross";
  }
  return "unknown";
}

EvalMode parse_eval_mode(std::string_view name) {
  for (EvalMode m : {EvalMode::kOpen, EvalMode::kClosed, EvalMode::kCross})
    if (eval_mode_name(m) == name) return m;
  throw ArgumentError(fmt::format("unknown evaluation mode '{}'", name));
}

EvalReport evaluate(std::span<const QaRecord> dataset, const VectorIndex& index, ResponseModel& model, EvalMode mode,
                    const EvalClients& clients, const EvalConfig& config) {
  if (dataset.empty()) throw ArgumentError("cannot evaluate an empty dataset");
  config.retrieval.validate();
  config.weights.validate();
  if (clients.judges.empty() && mode != EvalMode::kClosed) throw ArgumentError("open and cross modes need a judge");

  std::vector<std::optional<RecordOutcome>> outcomes(dataset.size());
  detail::parallel_for(dataset.size(), config.max_in_flight, [&](std::size_t i) {
    outcomes[i] = evaluate_record(dataset[i], index, model, mode, clients, config);
  });

  EvalReport report;
  report.mode = mode;
  report.record_count = dataset.size();
  for (Scenario s : kAllScenarios) report.scenario_counts[s] = 0;
  Mean faith, filter, ra_open, ra_closed, qr, fl;
  std::vector<std::string> irrelevant;
  for (auto& o : outcomes) {
    ++report.scenario_counts[o->scenario];
    faith.add(o->faith);
    filter.add(o->filter);
    ra_open.add(o->ra_open);
    ra_closed.add(o->ra_closed);
    qr.add(o->qr);
    fl.add(o->fl);
    if (o->refused) irrelevant.push_back(*o->record.open_response);
    for (auto& f : o->failures) report.failures.push_back(std::move(f));
    report.records.push_back(std::move(o->record));
  }
  report.faith = faith.value();
  report.filter = filter.value();
  report.rr = compute_rr(irrelevant, config.refusal_phrases);
  report.ra_open = ra_open.value();
  report.ra_closed = ra_closed.value();
  report.qr = qr.value();
  report.fl = fl.value();
  return report;
}

std::string report_to_json(const EvalReport& report) {
  Json j;
  j["mode"] = eval_mode_name(report.mode);
  j["record_count"] = report.record_count;
  Json counts = Json::object();
  for (Scenario s : kAllScenarios) {
    const auto it = report.scenario_counts.find(s);
    counts[std::string(scenario_name(s))] = it == report.scenario_counts.end() ? 0 : it->second;
  }
  j["scenario_counts"] = counts;
  j["metrics"] = Json{{"faith", optional_number(report.faith)},     {"filter", optional_number(report.filter)},
                      {"rr", optional_number(report.rr)},           {"ra_open", optional_number(report.ra_open)},
                      {"ra_closed", optional_number(report.ra_closed)}, {"qr", optional_number(report.qr)},
                      {"fl", optional_number(report.fl)}};
  j["partial"] = report.partial();
  Json failures = Json::array();
  for (const auto& f : report.failures)
    failures.push_back(Json{{"context_id", f.context_id}, {"stage", f.stage}, {"message", f.message}});
  j["failures"] = failures;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.mode = parse_eval_mode(j.at("mode").get<std::string>());
    r.record_count = j.at("record_count").get<std::size_t>();
    for (Scenario s : kAllScenarios) r.scenario_counts[s] = j.at("scenario_counts").at(std::string(scenario_name(s))).get<std::size_t>();
    const auto& m = j.at("metrics");
    r.faith = read_optional(m, "faith");
    r.filter = read_optional(m, "filter");
    r.rr = read_optional(m, "rr");
    r.ra_open = read_optional(m, "ra_open");
    r.ra_closed = read_optional(m, "ra_closed");
    r.qr = read_optional(m, "qr");
    r.fl = read_optional(m, "fl");
    for (const auto& f : j.at("failures"))
      r.failures.push_back({f.at("context_id").get<std::string>(), f.at("stage").get<std::string>(),
                            f.at("message").get<std::string>()});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("malformed report: {}", e.what()), std::string(text));
  }
}

std::string report_to_table(const EvalReport& report) {
  const std::pair<const char*, const std::optional<double>*> columns[] = {
      {"Faith", &report.faith},         {"Filter", &report.filter}, {"RR", &report.rr}, {"RA-open", &report.ra_open},
      {"RA-closed", &report.ra_closed}, {"QR", &report.qr},         {"FL", &report.fl}};
  std::string header, values;
  for (const auto& [name, value] : columns) {
    const std::size_t width = std::max<std::size_t>(std::string_view(name).size(), 5) + 2;
    header += fmt::format("{:<{}}", name, width);
    values += fmt::format("{:<{}}", *value ? fmt::format("{:.3f}", **value) : std::string("-"), width);
  }
  while (!header.empty() && header.back() == ' ') header.pop_back();
  while (!values.empty() && values.back() == ' ') values.pop_back();
  std::string out = header + "\n" + values + "\n\n";
  out += fmt::format("mode: {}  records: {}{}\n", eval_mode_name(report.mode), report.record_count,
                     report.partial() ? fmt::format("  partial: {} failures", report.failures.size()) : "");
  for (Scenario s : kAllScenarios) {
    const auto it = report.scenario_counts.find(s);
    out += fmt::format("{:<20}{}\n", scenario_name(s), it == report.scenario_counts.end() ? 0 : it->second);
  }
  return out;
}

}  // namespace moral
