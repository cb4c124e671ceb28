// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

// Shared fixtures: lookup-table embedder, scripted models and judges, and a
// dataset whose embeddings force one classification per record.

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "moral/clients.hpp"
#include "moral/curation.hpp"
#include "moral/errors.hpp"
#include "moral/evaluation.hpp"
#include "moral/retrieval.hpp"

namespace moral::testing {

// Texts missing from the table go to the fallback when there is one.
class TableEmbedder final : public Embedder {
 public:
  TableEmbedder(std::size_t dim, std::map<std::string, Vector> table, const Embedder* fallback = nullptr)
      : dim_(dim), table_(std::move(table)), fallback_(fallback) {}
  std::size_t dim() const override { return dim_; }
  Vector embed(std::string_view text) const override {
    const auto it = table_.find(std::string(text));
    if (it == table_.end() && fallback_ != nullptr) return fallback_->embed(text);
    if (it == table_.end()) throw ArgumentError("no table entry for '" + std::string(text) + "'");
    return normalized(it->second);
  }
  void set(const std::string& text, Vector v) { table_[text] = std::move(v); }

 private:
  std::size_t dim_;
  std::map<std::string, Vector> table_;
  const Embedder* fallback_;
};

class FunctionModel final : public ResponseModel {
 public:
  explicit FunctionModel(std::function<std::string(const std::string&)> fn) : fn_(std::move(fn)) {}
  std::string respond(const std::string& prompt) override { return fn_(prompt); }

 private:
  std::function<std::string(const std::string&)> fn_;
};

class FixedJudge final : public JudgeClient {
 public:
  explicit FixedJudge(double value) : value_(value) {}

 protected:
  double raw_score(const ClientRequest&) override { return value_; }

 private:
  double value_;
};

class FailingJudge final : public JudgeClient {
 protected:
  double raw_score(const ClientRequest&) override { throw ClientError("judge offline"); }
};

inline Vector basis(std::size_t dim, std::size_t i) {
  Vector v(dim, 0.0);
  v[i] = 1.0;
  return v;
}

struct ScenarioFixture {
  std::vector<QaRecord> records;
  VectorIndex index{8};
  TrigramEmbedder fallback{8};
  TableEmbedder embedder{8, {}, &fallback};

  ScenarioFixture();
  ScenarioFixture(const ScenarioFixture&) = delete;
  ScenarioFixture& operator=(const ScenarioFixture&) = delete;
};

// Chunks c1..c6 at e1, e2, e3, normalize(e3 + 0.2 e4), e5, e6; questions at
// e1, e2, c3, c4, e6 and e7. With theta 0.87: two golden, two mixed (c3 and
// c4 have cosine 0.98), one irrelevant (golden c5, retrieves c6), one empty.
inline void fill_scenario_fixture(ScenarioFixture& f) {
  const std::size_t d = 8;
  Vector c4 = basis(d, 2);
  c4[3] = 0.2;
  const std::vector<Vector> chunk_vecs{basis(d, 0), basis(d, 1), basis(d, 2), c4, basis(d, 4), basis(d, 5)};
  const std::vector<Vector> query_vecs{basis(d, 0), basis(d, 1), basis(d, 2), c4, basis(d, 5), basis(d, 6)};
  const char* facts[] = {"The router uses softmax gating.", "Experts are low rank.",  "Adam keeps two moments.",
                         "Adam corrects its bias.",         "Chunks share an overlap.", "The threshold is strict."};
  for (std::size_t i = 0; i < 6; ++i) {
    const std::string id = "fx#000" + std::to_string(i + 1);
    const std::string text = facts[i];
    const std::string q = "Question " + std::to_string(i + 1) + "?";
    f.embedder.set(text, chunk_vecs[i]);
    f.embedder.set(q, query_vecs[i]);
    f.index.add(Chunk{id, text, "fx", 0, normalized(chunk_vecs[i])});
    f.records.push_back({q, id, {}, std::nullopt, std::nullopt, text, "fixture"});
  }
}

inline ScenarioFixture::ScenarioFixture() { fill_scenario_fixture(*this); }

}  // namespace moral::testing
