// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#include "moral/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "moral/errors.hpp"

namespace moral {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes;
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) throw InputError("base weights file is truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  put_u64(out, m.rows());
  put_u64(out, m.cols());
  for (double x : m.data()) put_u64(out, std::bit_cast<std::uint64_t>(x));
}

Matrix get_matrix(std::istream& in, std::size_t rows, std::size_t cols, std::string_view name) {
  const auto r = get_u64(in), c = get_u64(in);
  if (r != rows || c != cols)
    throw InputError(fmt::format("base tensor {} is {}x{}, expected {}x{}", name, r, c, rows, cols));
  std::vector<double> data(rows * cols);
  for (double& x : data) x = std::bit_cast<double>(get_u64(in));
  return Matrix(rows, cols, std::move(data));
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const std::size_t rows = j.size();
  const std::size_t cols = rows == 0 ? 0 : j[0].size();
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& row : j) {
    if (row.size() != cols) throw InputError("ragged matrix in adapter.json");
    for (const auto& x : row) data.push_back(x.get<double>());
  }
  return Matrix(rows, cols, std::move(data));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("cannot open {}", path.string()));
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(fmt::format("cannot write {}", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string adapter_json(const ToyModel& model) {
  Json layers = Json::array();
  for (const AdaptedFfn& layer : model.layers()) {
    Json l;
    if (const auto* m = std::get_if<MoralLayer>(&layer)) {
      l["n"] = m->n_experts();
      l["k"] = m->top_k();
      l["rank"] = m->experts()[0].rank();
      l["alpha"] = m->experts()[0].alpha;
      l["d_m"] = m->d_model();
      l["d_ff"] = m->d_ff();
      Json experts = Json::array();
      for (const LoraExpert& e : m->experts()) experts.push_back(Json{{"down", matrix_json(e.down)}, {"up", matrix_json(e.up)}});
      l["experts"] = experts;
      l["router"] = Json{{"w_g", matrix_json(m->router().w_g)}};
    } else {
      const auto& lora = std::get<LoraLayer>(layer);
      l["n"] = 1;
      l["k"] = 1;
      l["rank"] = lora.expert().rank();
      l["alpha"] = lora.expert().alpha;
      l["d_m"] = lora.base().d_model();
      l["d_ff"] = lora.base().d_ff();
      l["experts"] = Json::array({Json{{"down", matrix_json(lora.expert().down)}, {"up", matrix_json(lora.expert().up)}}});
    }
    layers.push_back(l);
  }
  Json j;
  j["kind"] = model.adapter_kind() == AdapterKind::kMoral ? "moral" : "lora";
  j["layers"] = layers;
  return j.dump() + "\n";
}

}  // namespace

void write_base_weights(std::ostream& out, const ToyModel& model) {
  out.write(kBaseWeightsMagic.data(), static_cast<std::streamsize>(kBaseWeightsMagic.size()));
  out.put(static_cast<char>(kBaseWeightsVersion));
  const BaseWeights& b = model.base();
  put_matrix(out, b.token_embedding);
  put_matrix(out, b.position_embedding);
  for (std::size_t l = 0; l < model.config().n_layers; ++l) {
    const AttentionWeights& a = b.attention[l];
    for (const Matrix* m : {&a.wq, &a.wk, &a.wv, &a.wo, &model.ffn(l).w1(), &model.ffn(l).w2()}) put_matrix(out, *m);
  }
  put_matrix(out, b.unembedding);
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string base_weights_sha256(const ToyModel& model) {
  std::ostringstream out(std::ios::binary);
  write_base_weights(out, model);
  return sha256_hex(out.str());
}

std::string config_to_json(const ToyModelConfig& c) {
  const Json j{{"vocab_size", c.vocab_size}, {"d_model", c.d_model},         {"n_layers", c.n_layers},
               {"n_heads", c.n_heads},       {"d_ff", c.d_ff},               {"max_seq_len", c.max_seq_len},
               {"seed", c.seed}};
  return j.dump(2) + "\n";
}

ToyModelConfig config_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ToyModelConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("malformed model config: {}", e.what()));
  }
}

void save_checkpoint(const fs::path& dir, const ToyModel& model, std::span<const double> loss_trace) {
  fs::create_directories(dir);
  write_file(dir / "model_config.json", config_to_json(model.config()));
  write_file(dir / "adapter.json", adapter_json(model));
  std::ostringstream base(std::ios::binary);
  write_base_weights(base, model);
  write_file(dir / "base_weights.bin", base.str());
  std::string csv = "step,loss\n";
  for (std::size_t i = 0; i < loss_trace.size(); ++i) csv += fmt::format("{},{}\n", i, loss_trace[i]);
  write_file(dir / "loss.csv", csv);
}

ToyModel load_checkpoint(const fs::path& dir) {
  const ToyModelConfig config = config_from_json(read_file(dir / "model_config.json"));
  config.validate();
  const std::size_t d = config.d_model, ff = config.d_ff;

  std::istringstream in(read_file(dir / "base_weights.bin"), std::ios::binary);
  std::string magic(kBaseWeightsMagic.size(), '\0');
  if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kBaseWeightsMagic)
    throw InputError("base_weights.bin has the wrong magic");
  if (in.get() != kBaseWeightsVersion) throw InputError("unsupported base_weights.bin version");
  BaseWeights base;
  base.token_embedding = get_matrix(in, config.vocab_size, d, "token_embedding");
  base.position_embedding = get_matrix(in, config.max_seq_len, d, "position_embedding");
  std::vector<FrozenFfn> ffns;
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    AttentionWeights a;
    a.wq = get_matrix(in, d, d, "wq");
    a.wk = get_matrix(in, d, d, "wk");
    a.wv = get_matrix(in, d, d, "wv");
    a.wo = get_matrix(in, d, d, "wo");
    base.attention.push_back(std::move(a));
    Matrix w1 = get_matrix(in, ff, d, "w1");
    Matrix w2 = get_matrix(in, d, ff, "w2");
    ffns.emplace_back(std::move(w1), std::move(w2));
  }
  base.unembedding = get_matrix(in, config.vocab_size, d, "unembedding");
  if (in.peek() != std::char_traits<char>::eof()) throw InputError("base_weights.bin has trailing bytes");

  std::vector<AdaptedFfn> layers;
  try {
    const auto j = nlohmann::json::parse(read_file(dir / "adapter.json"));
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "moral" && kind != "lora") throw InputError(fmt::format("unknown adapter kind '{}'", kind));
    const auto& ls = j.at("layers");
    if (ls.size() != config.n_layers) throw InputError("adapter.json layer count does not match the model config");
    for (std::size_t l = 0; l < config.n_layers; ++l) {
      const auto& lj = ls[l];
      const double alpha = lj.at("alpha").get<double>();
      std::vector<LoraExpert> experts;
      for (const auto& e : lj.at("experts"))
        experts.push_back({matrix_from_json(e.at("down")), matrix_from_json(e.at("up")), alpha});
      if (kind == "lora") {
        if (experts.size() != 1) throw InputError("a LoRA layer has exactly one expert");
        layers.emplace_back(LoraLayer(ffns[l], std::move(experts[0])));
      } else {
        layers.emplace_back(MoralLayer(ffns[l], std::move(experts), RouterNetwork{matrix_from_json(lj.at("router").at("w_g"))},
                                       lj.at("k").get<std::size_t>()));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(fmt::format("malformed adapter.json: {}", e.what()));
  } catch (const ShapeError& e) {
    throw InputError(fmt::format("inconsistent adapter.json: {}", e.what()));
  } catch (const ArgumentError& e) {
    throw InputError(fmt::format("inconsistent adapter.json: {}", e.what()));
  }
  return ToyModel(config, std::move(base), std::move(layers));
}

}  // namespace moral
