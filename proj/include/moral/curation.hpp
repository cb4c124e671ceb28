// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moral/clients.hpp"
#include "moral/retrieval.hpp"

namespace moral {

struct QaRecord {
  std::string q;
  std::string context_id;
  std::vector<std::string> retrieved;
  std::optional<std::string> open_response;
  std::optional<std::string> closed_response;
  std::string ground_truth;
  std::string domain_tag;

  friend bool operator==(const QaRecord&, const QaRecord&) = default;
};

// One line of JSON with keys q, context_id, retrieved, open_response,
// closed_response, ground_truth, domain_tag. Absent responses are null.
std::string serialize_record(const QaRecord& record);
// Throws FormatError on malformed JSON and ValidationError on missing keys,
// wrong types or an empty q / ground_truth.
QaRecord parse_record(std::string_view line);

void write_records(std::ostream& out, std::span<const QaRecord> records);
std::vector<QaRecord> read_records(std::istream& in);

// Fills the question-generation template and reads key "question".
// Throws FormatError if the reply holds no JSON object with a string under
// the key, ValidationError if the trimmed value is empty.
std::string generate_question(const Chunk& chunk, GeneratorClient& generator);
// As generate_question, with the ground-truth template and key "ground truth".
std::string generate_ground_truth(const Chunk& chunk, std::string_view question, GeneratorClient& generator);

// Parses the first '{' to the last '}' of a completion as a JSON object and
// returns the trimmed string under key. Shared by every JSON-reply prompt.
std::string extract_json_field(std::string_view reply, std::string_view key);

struct Document {
  std::string id;
  std::string domain;
  std::string text;
};

// corpus/<domain>/<name>.txt, sorted by path. Document ids are
// "<domain>/<name>". Throws InputError if root is not a directory.
std::vector<Document> load_corpus(const std::filesystem::path& root);

struct CurationConfig {
  SplitOptions split;
  RetrievalConfig retrieval;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::size_t max_in_flight = 4;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t test = 0;

  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

struct CuratedDataset {
  std::vector<QaRecord> train;
  std::vector<QaRecord> test;
  VectorIndex index;
  std::map<std::string, SplitCounts> domain_counts;
};

// One record per non-blank chunk. Records are shuffled with the seed, split
// round(train_fraction * n) / rest, and each split is sorted by context_id.
// Throws ArgumentError if no document yields a chunk.
CuratedDataset curate(std::span<const Document> documents, GeneratorClient& generator, const Embedder& embedder,
                      const CurationConfig& config);

}  // namespace moral
