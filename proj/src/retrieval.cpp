// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#include "moral/retrieval.hpp"

#include <algorithm>
#include <cmath>

#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "moral/errors.hpp"

namespace moral {
namespace {

constexpr double kUnitNormTolerance = 1e-9;

bool is_continuation_byte(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

std::vector<std::string_view> split_keeping_separator(std::string_view text, std::string_view sep) {
  std::vector<std::string_view> pieces;
  if (sep.empty()) {
    std::size_t start = 0;
    for (std::size_t i = 1; i <= text.size(); ++i) {
      if (i == text.size() || !is_continuation_byte(text[i])) {
        pieces.push_back(text.substr(start, i - start));
        start = i;
      }
    }
    return pieces;
  }
  std::size_t pos = 0;
  for (std::size_t hit = text.find(sep); hit != std::string_view::npos; hit = text.find(sep, pos)) {
    pieces.push_back(text.substr(pos, hit + sep.size() - pos));
    pos = hit + sep.size();
  }
  if (pos < text.size()) pieces.push_back(text.substr(pos));
  return pieces;
}

// Pieces are contiguous views into one buffer, so merging extends a view.
void split_into(std::string_view text, std::span<const std::string> separators, std::size_t budget,
                std::vector<std::string_view>& out) {
  std::size_t chosen = 0;
  while (chosen < separators.size() && !separators[chosen].empty() &&
         text.find(separators[chosen]) == std::string_view::npos)
    ++chosen;
  if (chosen == separators.size()) {
    out.push_back(text);
    return;
  }
  const auto rest = separators.subspan(chosen + 1);
  std::string_view pending;
  const auto flush = [&] {
    if (!pending.empty()) out.push_back(pending);
    pending = {};
  };
  for (std::string_view piece : split_keeping_separator(text, separators[chosen])) {
    if (piece.size() > budget) {
      flush();
      if (rest.empty())
        out.push_back(piece);
      else
        split_into(piece, rest, budget, out);
    } else if (pending.empty()) {
      pending = piece;
    } else if (pending.size() + piece.size() <= budget) {
      pending = {pending.data(), pending.size() + piece.size()};
    } else {
      flush();
      pending = piece;
    }
  }
  flush();
}

void require_unit_vector(const Vector& v, std::size_t dim, std::string_view id) {
  if (v.size() != dim)
    throw ArgumentError(fmt::format("embedding for '{}' has length {}, index dim is {}", id, v.size(), dim));
  for (double x : v)
    if (!std::isfinite(x)) throw ArgumentError(fmt::format("embedding for '{}' is not finite", id));
  if (std::abs(l2_norm(v) - 1.0) > kUnitNormTolerance)
    throw ArgumentError(fmt::format("embedding for '{}' is not unit norm", id));
}

}  // namespace

std::string chunk_id(std::string_view source_doc, std::size_t ordinal) {
  return fmt::format("{}#{:04}", source_doc, ordinal);
}

std::vector<Chunk> split_recursive(std::string_view text, std::string_view source_doc,
                                   const SplitOptions& options) {
  if (options.target_size <= options.overlap)
    throw ArgumentError(fmt::format("target_size ({}) must exceed overlap ({})", options.target_size,
                                    options.overlap));
  std::vector<Chunk> chunks;
  if (text.empty()) return chunks;

  std::vector<std::string_view> spans;
  split_into(text, options.separators, options.target_size - options.overlap, spans);

  for (std::string_view span : spans) {
    const auto end = static_cast<std::size_t>(span.data() - text.data()) + span.size();
    std::size_t start = static_cast<std::size_t>(span.data() - text.data());
    if (!chunks.empty()) {
      start -= std::min(options.overlap, start);
      while (start < text.size() && is_continuation_byte(text[start])) ++start;
    }
    Chunk c;
    c.id = chunk_id(source_doc, chunks.size());
    c.text = std::string(text.substr(start, end - start));
    c.source_doc = std::string(source_doc);
    c.offset = start;
    chunks.push_back(std::move(c));
  }
  return chunks;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

TrigramEmbedder::TrigramEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ArgumentError("embedding dimension must be positive");
}

Vector TrigramEmbedder::embed(std::string_view text) const {
  if (text.empty()) throw ArgumentError("cannot embed empty text");
  std::string padded;
  padded.reserve(text.size() + 2);
  padded.push_back(' ');
  for (char c : text) padded.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
  padded.push_back(' ');
  Vector counts(dim_, 0.0);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) counts[bucket(std::string_view(padded).substr(i, 3))] += 1.0;
  return normalized(counts);
}

VectorIndex::VectorIndex(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ArgumentError("index dimension must be positive");
}

void VectorIndex::add(Chunk chunk) {
  if (chunk.text.empty()) throw ArgumentError(fmt::format("chunk '{}' has empty text", chunk.id));
  if (!chunk.embedding) throw ArgumentError(fmt::format("chunk '{}' has no embedding", chunk.id));
  require_unit_vector(*chunk.embedding, dim_, chunk.id);
  if (by_id_.contains(chunk.id)) throw ArgumentError(fmt::format("duplicate chunk id '{}'", chunk.id));
  by_id_.emplace(chunk.id, chunks_.size());
  chunks_.push_back(std::move(chunk));
}

const Chunk* VectorIndex::find(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

void VectorIndex::save_jsonl(std::ostream& out) const {
  for (const Chunk& c : chunks_) {
    nlohmann::ordered_json line;
    line["id"] = c.id;
    line["source_doc"] = c.source_doc;
    line["text"] = c.text;
    line["embedding"] = *c.embedding;
    out << line.dump() << '\n';
  }
}

VectorIndex VectorIndex::load_jsonl(std::istream& in) {
  std::optional<VectorIndex> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Chunk c;
      c.id = j.at("id").get<std::string>();
      c.source_doc = j.at("source_doc").get<std::string>();
      c.text = j.at("text").get<std::string>();
      c.embedding = j.at("embedding").get<Vector>();
      if (!index) index.emplace(c.embedding->size());
      index->add(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(fmt::format("index line {}: {}", line_no, e.what()));
    }
  }
  if (!index) throw InputError("index file has no entries");
  return std::move(*index);
}

VectorIndex build_index(std::vector<Chunk> chunks, const Embedder& embedder) {
  VectorIndex index(embedder.dim());
  for (Chunk& c : chunks) {
    c.embedding = embedder.embed(c.text);
    index.add(std::move(c));
  }
  return index;
}

void RetrievalConfig::validate() const {
  if (!std::isfinite(theta) || theta <= -1.0 || theta >= 1.0)
    throw ConfigError(fmt::format("theta must lie in (-1, 1), got {}", theta));
}

std::vector<ScoredChunk> retrieve(const Vector& query_embedding, const VectorIndex& index,
                                  const RetrievalConfig& config) {
  config.validate();
  if (index.empty()) throw ArgumentError("cannot retrieve from an empty index");
  if (query_embedding.size() != index.dim())
    throw ArgumentError(fmt::format("query has length {}, index dim is {}", query_embedding.size(), index.dim()));
  const Vector q = normalized(query_embedding);
  std::vector<ScoredChunk> hits;
  for (const Chunk& c : index.chunks()) {
    const double score = std::clamp(dot(q, *c.embedding), -1.0, 1.0);
    if (score > config.theta) hits.push_back({c.id, score});
  }
  std::sort(hits.begin(), hits.end(), [](const ScoredChunk& a, const ScoredChunk& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  return hits;
}

std::vector<ScoredChunk> retrieve(std::string_view query, const VectorIndex& index,
                                  const Embedder& embedder, const RetrievalConfig& config) {
  return retrieve(embedder.embed(query), index, config);
}

}  // namespace moral
