// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#include "moral/curation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "moral/errors.hpp"
#include "moral/rng.hpp"
#include "moral/text.hpp"
#include "parallel.hpp"

namespace moral {
namespace {

using Json = nlohmann::ordered_json;

std::string required_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) throw ValidationError(fmt::format("record field '{}' must be a string", key));
  return j[key].get<std::string>();
}

std::optional<std::string> optional_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(fmt::format("record field '{}' is missing", key));
  if (j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) throw ValidationError(fmt::format("record field '{}' must be a string or null", key));
  return j[key].get<std::string>();
}

}  // namespace

std::string serialize_record(const QaRecord& r) {
  Json j;
  j["q"] = r.q;
  j["context_id"] = r.context_id;
  j["retrieved"] = r.retrieved;
  j["open_response"] = r.open_response ? Json(*r.open_response) : Json(nullptr);
  j["closed_response"] = r.closed_response ? Json(*r.closed_response) : Json(nullptr);
  j["ground_truth"] = r.ground_truth;
  j["domain_tag"] = r.domain_tag;
  return j.dump();
}

QaRecord parse_record(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("record is not JSON: {}", e.what()), std::string(line));
  }
  if (!j.is_object()) throw ValidationError("record must be a JSON object");
  QaRecord r;
  r.q = required_string(j, "q");
  r.context_id = required_string(j, "context_id");
  if (!j.contains("retrieved") || !j["retrieved"].is_array()) throw ValidationError("record field 'retrieved' must be an array");
  for (const auto& id : j["retrieved"]) {
    if (!id.is_string()) throw ValidationError("record field 'retrieved' must hold strings");
    r.retrieved.push_back(id.get<std::string>());
  }
  r.open_response = optional_string(j, "open_response");
  r.closed_response = optional_string(j, "closed_response");
  r.ground_truth = required_string(j, "ground_truth");
  r.domain_tag = required_string(j, "domain_tag");
  if (trim(r.q).empty()) throw ValidationError("record has an empty question");
  if (trim(r.ground_truth).empty()) throw ValidationError("record has an empty ground truth");
  if (r.context_id.empty()) throw ValidationError("record has an empty context_id");
  return r;
}

void write_records(std::ostream& out, std::span<const QaRecord> records) {
  for (const QaRecord& r : records) out << serialize_record(r) << '\n';
}

std::vector<QaRecord> read_records(std::istream& in) {
  std::vector<QaRecord> records;
  std::string line;
  while (std::getline(in, line))
    if (!trim(line).empty()) records.push_back(parse_record(line));
  return records;
}

std::string extract_json_field(std::string_view reply, std::string_view key) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open)
    throw FormatError("reply holds no JSON object", std::string(reply));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(reply.substr(open, close - open + 1));
  } catch (const nlohmann::json::exception&) {
    throw FormatError("reply holds no JSON object", std::string(reply));
  }
  const std::string k(key);
  if (!j.is_object() || !j.contains(k) || !j[k].is_string())
    throw FormatError(fmt::format("reply has no string field \"{}\"", key), std::string(reply));
  const std::string value(trim(j[k].get<std::string>()));
  if (value.empty()) throw ValidationError(fmt::format("reply field \"{}\" is empty", key));
  return value;
}

std::string generate_question(const Chunk& chunk, GeneratorClient& generator) {
  if (trim(chunk.text).empty()) throw ArgumentError(fmt::format("chunk '{}' is blank", chunk.id));
  const ClientRequest request{PromptId::kQuestionGeneration, render_question_prompt(chunk.text),
                              {{"context", chunk.text}}};
  return extract_json_field(generator.complete(request), "question");
}

std::string generate_ground_truth(const Chunk& chunk, std::string_view question, GeneratorClient& generator) {
  if (trim(question).empty()) throw ArgumentError("question is empty");
  const ClientRequest request{PromptId::kGroundTruthGeneration, render_ground_truth_prompt(chunk.text, question),
                              {{"context", chunk.text}, {"question", std::string(question)}}};
  return extract_json_field(generator.complete(request), "ground truth");
}

std::vector<Document> load_corpus(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw InputError(fmt::format("corpus directory '{}' does not exist", root.string()));
  std::vector<fs::path> files;
  for (const auto& domain : fs::directory_iterator(root)) {
    if (!domain.is_directory()) continue;
    for (const auto& file : fs::directory_iterator(domain.path()))
      if (file.is_regular_file() && file.path().extension() == ".txt") files.push_back(file.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Document> docs;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    const std::string domain = path.parent_path().filename().string();
    docs.push_back({domain + "/" + path.stem().string(), domain, text.str()});
  }
  return docs;
}

CuratedDataset curate(std::span<const Document> documents, GeneratorClient& generator, const Embedder& embedder,
                      const CurationConfig& config) {
  config.retrieval.validate();
  if (!(config.train_fraction >= 0.0 && config.train_fraction <= 1.0))
    throw ConfigError("train_fraction must lie in [0, 1]");

  std::vector<Chunk> chunks;
  std::map<std::string, std::string> domain_of;
  for (const Document& doc : documents) {
    for (Chunk& c : split_recursive(doc.text, doc.id, config.split)) {
      if (trim(c.text).empty()) continue;
      domain_of[c.id] = doc.domain;
      chunks.push_back(std::move(c));
    }
  }
  if (chunks.empty()) throw ArgumentError("corpus yields no chunks");

  VectorIndex index = build_index(chunks, embedder);
  std::vector<QaRecord> records(chunks.size());
  detail::parallel_for(chunks.size(), config.max_in_flight, [&](std::size_t i) {
    const Chunk& chunk = index.chunks()[i];
    QaRecord& r = records[i];
    r.q = generate_question(chunk, generator);
    r.ground_truth = generate_ground_truth(chunk, r.q, generator);
    r.context_id = chunk.id;
    r.domain_tag = domain_of.at(chunk.id);
    for (ScoredChunk& hit : retrieve(r.q, index, embedder, config.retrieval)) r.retrieved.push_back(std::move(hit.id));
  });

  std::sort(records.begin(), records.end(), [](const QaRecord& a, const QaRecord& b) { return a.context_id < b.context_id; });
  Rng rng(derive_seed(config.seed, "split"));
  rng.shuffle(std::span<QaRecord>(records));
  const auto n_train = static_cast<std::size_t>(std::llround(config.train_fraction * static_cast<double>(records.size())));

  CuratedDataset out{{}, {}, std::move(index), {}};
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& counts = out.domain_counts[records[i].domain_tag];
    if (i < n_train) {
      ++counts.train;
      out.train.push_back(std::move(records[i]));
    } else {
      ++counts.test;
      out.test.push_back(std::move(records[i]));
    }
  }
  const auto by_context = [](const QaRecord& a, const QaRecord& b) { return a.context_id < b.context_id; };
  std::sort(out.train.begin(), out.train.end(), by_context);
  std::sort(out.test.begin(), out.test.end(), by_context);
  return out;
}

}  // namespace moral
