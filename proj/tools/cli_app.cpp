// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli_app.hpp"

#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "moral/checkpoint.hpp"
#include "moral/curation.hpp"
#include "moral/errors.hpp"
#include "moral/rng.hpp"
#include "moral/text.hpp"

namespace moral::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be a JSON object", where));
  for (const auto& [key, value] : j.items()) {
    if (key == "api_key" || key == "token" || key == "password")
      throw ConfigError(fmt::format("{}: credentials are read from the environment only (use api_key_env)", where));
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
  }
}

template <typename T>
void read(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

fs::path relative_output(const json& j, const char* key, fs::path current) {
  if (!j.contains(key)) return current;
  fs::path p = j.at(key).get<std::string>();
  if (p.empty() || p.is_absolute()) throw ConfigError(fmt::format("paths.{} must be a relative path", key));
  for (const auto& part : p)
    if (part == "..") throw ConfigError(fmt::format("paths.{} must stay inside output_dir", key));
  return p;
}

ClientSpec read_client(const json& j, ClientSpec spec, std::string_view where) {
  check_keys(j, {"kind", "base_url", "path", "model", "api_key_env", "timeout_seconds", "max_retries", "dim"}, where);
  read(j, "kind", spec.kind);
  read(j, "base_url", spec.endpoint.base_url);
  read(j, "path", spec.endpoint.path);
  read(j, "model", spec.endpoint.model);
  read(j, "api_key_env", spec.endpoint.api_key_env);
  read(j, "timeout_seconds", spec.endpoint.timeout_seconds);
  read(j, "max_retries", spec.endpoint.max_retries);
  read(j, "dim", spec.dim);
  return spec;
}

std::unique_ptr<Embedder> make_embedder(const ClientSpec& s) {
  if (s.kind == "trigram") return std::make_unique<TrigramEmbedder>(s.dim);
  if (s.kind == "remote") return std::make_unique<RemoteEmbedder>(s.endpoint, s.dim);
  throw ConfigError(fmt::format("unknown embedder kind '{}'", s.kind));
}

std::unique_ptr<GeneratorClient> make_generator(const ClientSpec& s) {
  if (s.kind == "stub") return std::make_unique<RuleBasedGenerator>();
  if (s.kind == "chat") return std::make_unique<ChatCompletionGenerator>(s.endpoint);
  throw ConfigError(fmt::format("unknown generator kind '{}'", s.kind));
}

std::unique_ptr<JudgeClient> make_judge(const ClientSpec& s) {
  if (s.kind == "stub") return std::make_unique<HeuristicJudge>();
  if (s.kind == "chat") return std::make_unique<ChatCompletionJudge>(s.endpoint);
  throw ConfigError(fmt::format("unknown judge kind '{}'", s.kind));
}

std::string read_text(const fs::path& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(fmt::format("{} not found at {}", what, path.string()));
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, std::string_view text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError(fmt::format("cannot write {}", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::vector<QaRecord> read_dataset(const fs::path& path) {
  std::istringstream in(read_text(path, "dataset"));
  return read_records(in);
}

VectorIndex read_index(const fs::path& path) {
  std::istringstream in(read_text(path, "index"));
  return VectorIndex::load_jsonl(in);
}

std::string records_jsonl(std::span<const QaRecord> records) {
  std::ostringstream out;
  write_records(out, records);
  return out.str();
}

std::string index_jsonl(const VectorIndex& index) {
  std::ostringstream out;
  index.save_jsonl(out);
  return out.str();
}

struct Paths {
  fs::path dataset, index, checkpoint, reports;
  explicit Paths(const RunConfig& c)
      : dataset(c.output_dir / c.dataset_dir),
        index(c.output_dir / c.index_file),
        checkpoint(c.output_dir / c.checkpoint_dir),
        reports(c.output_dir / c.reports_dir) {}
};

CurationConfig curation_config(const RunConfig& c) {
  return {c.split, c.retrieval, c.seed, c.train_fraction, c.curation_in_flight};
}

int cmd_curate(const RunConfig& c, std::ostream& out) {
  const auto docs = load_corpus(c.corpus);
  const auto embedder = make_embedder(c.embedder);
  const auto generator = make_generator(c.generator);
  const CuratedDataset ds = curate(docs, *generator, *embedder, curation_config(c));
  const Paths p(c);
  write_text(p.dataset / "train.jsonl", records_jsonl(ds.train));
  write_text(p.dataset / "test.jsonl", records_jsonl(ds.test));
  write_text(p.index, index_jsonl(ds.index));
  out << fmt::format("documents: {}\nchunks: {}\nrecords: {} (train {}, test {})\n", docs.size(), ds.index.size(),
                     ds.train.size() + ds.test.size(), ds.train.size(), ds.test.size());
  out << fmt::format("{:<20}{:>7}{:>7}\n", "domain", "train", "test");
  for (const auto& [domain, n] : ds.domain_counts) out << fmt::format("{:<20}{:>7}{:>7}\n", domain, n.train, n.test);
  return kExitOk;
}

int cmd_index(const RunConfig& c, std::ostream& out) {
  const auto docs = load_corpus(c.corpus);
  std::vector<Chunk> chunks;
  for (const Document& d : docs)
    for (Chunk& ch : split_recursive(d.text, d.id, c.split))
      if (!trim(ch.text).empty()) chunks.push_back(std::move(ch));
  if (chunks.empty()) throw ArgumentError("corpus yields no chunks");
  const auto embedder = make_embedder(c.embedder);
  const VectorIndex index = build_index(std::move(chunks), *embedder);
  write_text(Paths(c).index, index_jsonl(index));
  out << fmt::format("indexed {} chunks from {} documents (dim {})\n", index.size(), docs.size(), index.dim());
  return kExitOk;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  const Paths p(c);
  const auto records = read_dataset(p.dataset / "train.jsonl");
  std::optional<VectorIndex> index;
  if (c.training_prompt == TrainingPrompt::kOpenBook) index.emplace(read_index(p.index));
  const auto examples = training_examples(records, index ? *index : VectorIndex(1), c.training_prompt);
  ToyModel model = build_frozen_model(c.model, c.train.adapter_config(c.adapter));
  const std::string base_before = base_weights_sha256(model);
  const TrainResult result = examples.empty() ? TrainResult{} : train(model, examples, c.train);
  if (base_weights_sha256(model) != base_before) throw StateError("base weights changed during training");
  save_checkpoint(p.checkpoint, model, result.loss_trace);
  out << fmt::format("examples: {}\nsteps: {}\ntrainable parameters: {}\n", examples.size(), result.loss_trace.size(),
                     model.trainable_count());
  if (!result.loss_trace.empty())
    out << fmt::format("loss: {:.6f} -> {:.6f}\n", result.loss_trace.front(), result.loss_trace.back());
  out << fmt::format("base sha256: {}\n", base_before);
  return kExitOk;
}

int cmd_eval(const RunConfig& c, EvalMode mode, std::ostream& out) {
  const Paths p(c);
  const ToyModel model = load_checkpoint(p.checkpoint);
  const auto records = read_dataset(p.dataset / "test.jsonl");
  const VectorIndex index = read_index(p.index);
  const auto embedder = make_embedder(c.embedder);
  const auto generator = make_generator(c.generator);
  std::vector<std::unique_ptr<JudgeClient>> owned;
  std::vector<JudgeClient*> judges;
  for (const auto& spec : c.judges) {
    owned.push_back(make_judge(spec));
    judges.push_back(owned.back().get());
  }
  ToyModelResponder responder(model, c.max_new_tokens);
  EvalConfig cfg;
  cfg.retrieval = c.retrieval;
  cfg.weights = c.weights;
  cfg.qr_questions = c.qr_questions;
  cfg.refusal_phrases = c.refusal_phrases;
  cfg.recompute_retrieval = c.recompute_retrieval;
  cfg.max_in_flight = c.eval_in_flight;
  const EvalReport report = evaluate(records, index, responder, mode, {*embedder, *generator, judges}, cfg);
  const std::string name(eval_mode_name(mode));
  write_text(p.reports / (name + ".json"), report_to_json(report));
  write_text(p.reports / (name + ".txt"), report_to_table(report));
  write_text(p.reports / (name + "_responses.jsonl"), records_jsonl(report.records));
  out << report_to_table(report);
  for (const auto& f : report.failures) out << fmt::format("failed {} [{}]: {}\n", f.context_id, f.stage, f.message);
  return report.partial() ? kExitPartial : kExitOk;
}

int cmd_report(const RunConfig& c, std::ostream& out) {
  const Paths p(c);
  std::map<EvalMode, EvalReport> found;
  for (EvalMode m : {EvalMode::kOpen, EvalMode::kClosed, EvalMode::kCross}) {
    const fs::path file = p.reports / (std::string(eval_mode_name(m)) + ".json");
    if (fs::exists(file)) found.emplace(m, report_from_json(read_text(file, "report")));
  }
  if (found.empty()) throw InputError(fmt::format("no evaluation reports in {}", p.reports.string()));
  // Open-book cells from the open run, RA-closed from the closed run, QR and
  // FL from the cross run; cross fills any cell whose own run is missing.
  const auto pick = [&](EvalMode primary, std::optional<double> EvalReport::*field) -> std::optional<double> {
    if (found.contains(primary)) return found.at(primary).*field;
    if (found.contains(EvalMode::kCross)) return found.at(EvalMode::kCross).*field;
    return std::nullopt;
  };
  EvalReport summary = found.begin()->second;
  summary.mode = found.contains(EvalMode::kCross) ? EvalMode::kCross : found.begin()->first;
  summary.faith = pick(EvalMode::kOpen, &EvalReport::faith);
  summary.filter = pick(EvalMode::kOpen, &EvalReport::filter);
  summary.rr = pick(EvalMode::kOpen, &EvalReport::rr);
  summary.ra_open = pick(EvalMode::kOpen, &EvalReport::ra_open);
  summary.ra_closed = pick(EvalMode::kClosed, &EvalReport::ra_closed);
  summary.qr = pick(EvalMode::kCross, &EvalReport::qr);
  summary.fl = pick(EvalMode::kCross, &EvalReport::fl);
  summary.failures.clear();
  for (const auto& [m, r] : found) summary.failures.insert(summary.failures.end(), r.failures.begin(), r.failures.end());
  write_text(p.reports / "summary.json", report_to_json(summary));
  write_text(p.reports / "summary.txt", report_to_table(summary));
  out << report_to_table(summary);
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& c, std::ostream& out) {
  const GradcheckSettings& g = c.gradcheck;
  ToyModelConfig mc = g.model;
  mc.seed = c.seed;
  ToyModel model = build_frozen_model(mc, {AdapterKind::kMoral, g.adapter});
  if (model.trainable_count() > kGradientCheckParameterLimit)
    throw ConfigError(fmt::format("gradcheck is limited to {} trainable parameters, this model has {}",
                                  kGradientCheckParameterLimit, model.trainable_count()));
  Rng rng(derive_seed(c.seed, "gradcheck"));
  for (Matrix* m : model.trainable())
    for (double& v : m->data()) v = rng.uniform(-0.5, 0.5);
  const GradientCheckResult r = gradient_check(model, {"Q: sky?\nA: ", "blue\n"}, g.epsilon);
  out << fmt::format("parameters checked: {}\nnonzero gradients: {}\nmax absolute error: {:.3e}\nmax relative error: {:.3e}\n",
                     r.parameters_checked, r.nonzero_gradients, r.max_absolute_error, r.max_relative_error);
  return r.max_relative_error <= 1e-5 ? kExitOk : kExitFailure;
}

}  // namespace

RunConfig apply_config_json(const json& j, RunConfig c) {
  try {
    check_keys(j,
               {"seed", "output_dir", "corpus", "paths", "split", "retrieval", "curation", "model", "train", "eval",
                "embedder", "generator", "judges", "gradcheck"},
               "config");
    read(j, "seed", c.seed);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("corpus")) c.corpus = j.at("corpus").get<std::string>();
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      check_keys(p, {"dataset", "index", "checkpoint", "reports"}, "paths");
      c.dataset_dir = relative_output(p, "dataset", c.dataset_dir);
      c.index_file = relative_output(p, "index", c.index_file);
      c.checkpoint_dir = relative_output(p, "checkpoint", c.checkpoint_dir);
      c.reports_dir = relative_output(p, "reports", c.reports_dir);
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      check_keys(s, {"target_size", "overlap", "separators"}, "split");
      read(s, "target_size", c.split.target_size);
      read(s, "overlap", c.split.overlap);
      read(s, "separators", c.split.separators);
    }
    if (j.contains("retrieval")) {
      const auto& r = j.at("retrieval");
      check_keys(r, {"theta", "recompute"}, "retrieval");
      read(r, "theta", c.retrieval.theta);
      read(r, "recompute", c.recompute_retrieval);
    }
    if (j.contains("curation")) {
      const auto& r = j.at("curation");
      check_keys(r, {"train_fraction", "max_in_flight"}, "curation");
      read(r, "train_fraction", c.train_fraction);
      read(r, "max_in_flight", c.curation_in_flight);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      check_keys(m, {"d_model", "n_layers", "n_heads", "d_ff", "max_seq_len"}, "model");
      read(m, "d_model", c.model.d_model);
      read(m, "n_layers", c.model.n_layers);
      read(m, "n_heads", c.model.n_heads);
      read(m, "d_ff", c.model.d_ff);
      read(m, "max_seq_len", c.model.max_seq_len);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      check_keys(t, {"lr", "batch_size", "epochs", "n_experts", "top_k", "rank", "alpha", "adapter", "prompt"}, "train");
      read(t, "lr", c.train.lr);
      read(t, "batch_size", c.train.batch_size);
      read(t, "epochs", c.train.epochs);
      read(t, "n_experts", c.train.n_experts);
      read(t, "top_k", c.train.top_k);
      read(t, "rank", c.train.rank);
      read(t, "alpha", c.train.alpha);
      if (t.contains("adapter")) {
        const std::string kind = t.at("adapter").get<std::string>();
        if (kind == "moral")
          c.adapter = AdapterKind::kMoral;
        else if (kind == "lora")
          c.adapter = AdapterKind::kLora;
        else
          throw ConfigError(fmt::format("train.adapter must be 'moral' or 'lora', got '{}'", kind));
      }
      if (t.contains("prompt")) c.training_prompt = parse_training_prompt(t.at("prompt").get<std::string>());
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      check_keys(e, {"w0", "w1", "qr_questions", "max_new_tokens", "max_in_flight", "refusal_phrases"}, "eval");
      read(e, "w0", c.weights.w0);
      read(e, "w1", c.weights.w1);
      read(e, "qr_questions", c.qr_questions);
      read(e, "max_new_tokens", c.max_new_tokens);
      read(e, "max_in_flight", c.eval_in_flight);
      read(e, "refusal_phrases", c.refusal_phrases);
    }
    if (j.contains("embedder")) c.embedder = read_client(j.at("embedder"), c.embedder, "embedder");
    if (j.contains("generator")) c.generator = read_client(j.at("generator"), c.generator, "generator");
    if (j.contains("judges")) {
      c.judges.clear();
      for (const auto& jj : j.at("judges")) c.judges.push_back(read_client(jj, ClientSpec{"stub", {}, 0}, "judges[]"));
      if (c.judges.empty()) throw ConfigError("judges must list at least one judge");
    }
    if (j.contains("gradcheck")) {
      const auto& g = j.at("gradcheck");
      check_keys(g,
                 {"epsilon", "d_model", "n_layers", "n_heads", "d_ff", "max_seq_len", "n_experts", "top_k", "rank",
                  "alpha"},
                 "gradcheck");
      read(g, "epsilon", c.gradcheck.epsilon);
      read(g, "d_model", c.gradcheck.model.d_model);
      read(g, "n_layers", c.gradcheck.model.n_layers);
      read(g, "n_heads", c.gradcheck.model.n_heads);
      read(g, "d_ff", c.gradcheck.model.d_ff);
      read(g, "max_seq_len", c.gradcheck.model.max_seq_len);
      read(g, "n_experts", c.gradcheck.adapter.n_experts);
      read(g, "top_k", c.gradcheck.adapter.top_k);
      read(g, "rank", c.gradcheck.adapter.rank);
      read(g, "alpha", c.gradcheck.adapter.alpha);
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mixture-of-adapters benchmark: curate, index, train, evaluate and report.", "moralbench"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, output_dir, corpus, mode_name;
  std::uint64_t seed = 0;
  bool stub_clients = false;
  std::size_t epochs = 0;
  double epsilon = 0.0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for model init, training order and the data split");
  app.add_option("--config", config_path, "JSON run configuration; flags override its values");
  app.add_flag("--stub-clients", stub_clients, "Use the offline generator, judge and trigram embedder");
  auto* out_opt = app.add_option("--output-dir", output_dir, "Directory that receives every output file");

  auto* curate_cmd = app.add_subcommand("curate", "Build the train/test datasets and the chunk index from a corpus");
  auto* curate_corpus = curate_cmd->add_option("--corpus", corpus, "Corpus root: <root>/<domain>/<doc>.txt");
  auto* index_cmd = app.add_subcommand("index", "Chunk and embed a corpus into index.jsonl");
  auto* index_corpus = index_cmd->add_option("--corpus", corpus, "Corpus root: <root>/<domain>/<doc>.txt");
  auto* train_cmd = app.add_subcommand("train", "Fit the adapters on the train split and write a checkpoint");
  auto* epochs_opt = train_cmd->add_option("--epochs", epochs, "Override train.epochs");
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate the checkpoint on the test split");
  eval_cmd->add_option("--mode", mode_name, "open, closed or cross")
      ->required()
      ->check(CLI::IsMember({"open", "closed", "cross"}));
  auto* report_cmd = app.add_subcommand("report", "Merge the evaluation reports into one table");
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients on a toy model");
  auto* eps_opt = grad_cmd->add_option("--epsilon", epsilon, "Finite-difference step");

  std::vector<const char*> argv{"moralbench"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    const CLI::App* scope = &app;
    for (const CLI::App* sub : app.get_subcommands()) scope = sub;
    err << "error: " << e.what() << "\n\n" << scope->help();
    return kExitUsage;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) {
      json j;
      try {
        j = json::parse(read_text(config_path, "config file"));
      } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", config_path, e.what()));
      }
      cfg = apply_config_json(j);
    }
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (out_opt->count() > 0) cfg.output_dir = output_dir;
    if (curate_corpus->count() > 0 || index_corpus->count() > 0) cfg.corpus = corpus;
    if (epochs_opt->count() > 0) cfg.train.epochs = epochs;
    if (eps_opt->count() > 0) cfg.gradcheck.epsilon = epsilon;
    if (stub_clients) {
      cfg.embedder = ClientSpec{"trigram", {}, cfg.embedder.dim};
      cfg.generator = ClientSpec{"stub", {}, 0};
      cfg.judges = {ClientSpec{"stub", {}, 0}};
    }
    cfg.model.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    cfg.retrieval.validate();
    cfg.model.validate();
    cfg.train.validate();
    cfg.weights.validate();

    if (curate_cmd->parsed()) return cmd_curate(cfg, out);
    if (index_cmd->parsed()) return cmd_index(cfg, out);
    if (train_cmd->parsed()) return cmd_train(cfg, out);
    if (eval_cmd->parsed()) return cmd_eval(cfg, parse_eval_mode(mode_name), out);
    if (report_cmd->parsed()) return cmd_report(cfg, out);
    if (grad_cmd->parsed()) return cmd_gradcheck(cfg, out);
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace moral::cli
