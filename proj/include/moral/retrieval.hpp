// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "moral/numerics.hpp"

namespace moral {

struct Chunk {
  std::string id;
  std::string text;
  std::string source_doc;
  // Byte offset of text within the source document.
  std::size_t offset = 0;
  std::optional<Vector> embedding;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct SplitOptions {
  std::size_t target_size = 1000;
  std::size_t overlap = 100;
  std::vector<std::string> separators{"\n\n", "\n", " ", ""};
};

// "{doc}#{ordinal:04}"
std::string chunk_id(std::string_view source_doc, std::size_t ordinal);

// Sizes are counted in bytes. Separators stay attached to the piece they
// terminate, so concatenating chunks with their overlap prefixes removed
// reproduces the input. The empty separator splits between UTF-8 code points.
// Throws ArgumentError unless target_size > overlap.
std::vector<Chunk> split_recursive(std::string_view text, std::string_view source_doc,
                                   const SplitOptions& options = {});

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  // Unit-norm embedding. Throws ArgumentError on empty text.
  virtual Vector embed(std::string_view text) const = 0;
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

// Hashed character trigram counts. Text is ASCII-lowercased and padded with
// one space on each side before trigrams are taken.
class TrigramEmbedder final : public Embedder {
 public:
  explicit TrigramEmbedder(std::size_t dim = 256);
  std::size_t dim() const override { return dim_; }
  Vector embed(std::string_view text) const override;

  std::size_t bucket(std::string_view trigram) const noexcept { return fnv1a64(trigram) % dim_; }

 private:
  std::size_t dim_;
};

class VectorIndex {
 public:
  explicit VectorIndex(std::size_t dim);

  // The chunk must carry an embedding of length dim with unit norm within
  // 1e-9. Throws ArgumentError on duplicate ids, empty text or a bad vector.
  void add(Chunk chunk);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return chunks_.size(); }
  bool empty() const noexcept { return chunks_.empty(); }
  std::span<const Chunk> chunks() const noexcept { return chunks_; }
  const Chunk* find(std::string_view id) const;

  // One {"id","source_doc","text","embedding"} object per line.
  void save_jsonl(std::ostream& out) const;
  static VectorIndex load_jsonl(std::istream& in);

 private:
  std::size_t dim_;
  std::vector<Chunk> chunks_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// Embeds every chunk and indexes it.
VectorIndex build_index(std::vector<Chunk> chunks, const Embedder& embedder);

struct RetrievalConfig {
  double theta = 0.87;
  // Throws ConfigError unless theta is finite and in (-1, 1).
  void validate() const;
};

struct ScoredChunk {
  std::string id;
  double score = 0.0;

  friend bool operator==(const ScoredChunk&, const ScoredChunk&) = default;
};

// Chunks whose cosine with the query is strictly greater than theta, by
// descending score and then ascending id. Throws ArgumentError on an empty
// index or a query of the wrong dimension.
std::vector<ScoredChunk> retrieve(const Vector& query_embedding, const VectorIndex& index,
                                  const RetrievalConfig& config);
std::vector<ScoredChunk> retrieve(std::string_view query, const VectorIndex& index,
                                  const Embedder& embedder, const RetrievalConfig& config);

}  // namespace moral
