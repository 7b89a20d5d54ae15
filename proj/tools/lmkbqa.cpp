#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lmkbqa/checkpoint.hpp"
#include "lmkbqa/errors.hpp"
#include "lmkbqa/evaluation.hpp"
#include "lmkbqa/scoring.hpp"
#include "lmkbqa/toy_world.hpp"
#include "lmkbqa/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace lmkbqa;

namespace {

struct RunConfig {
  std::string triples_path;
  std::string names_path;
  std::string type_relation = "is_a";
  std::string embedding_mode = "stub";  // "stub" or "file"
  std::string embedding_path;
  long embedding_dim = kDefaultStubDim;
  std::uint64_t embedding_seed = 1;
  ModelDims dims;
  TrainingConfig training;
  std::string checkpoint;
  std::string train_dataset;
  std::string validation_dataset;
  std::string test_dataset;
  std::size_t candidate_cap = kDefaultCandidateCap;
  unsigned threads = 1;
};

// Relative paths in a config file are taken relative to the file.
std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig load_config(const std::string& path) {
  RunConfig c;
  if (path.empty()) return c;
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  const json j = json::parse(in);
  if (!j.is_object()) throw Error("config must be a JSON object");
  const fs::path base = fs::path(path).parent_path();
  read(j, "triples_path", c.triples_path);
  read(j, "names_path", c.names_path);
  read(j, "type_relation", c.type_relation);
  read(j, "embedding_mode", c.embedding_mode);
  read(j, "embedding_path", c.embedding_path);
  read(j, "embedding_dim", c.embedding_dim);
  read(j, "embedding_seed", c.embedding_seed);
  read(j, "width", c.dims.width);
  read(j, "heads", c.dims.heads);
  read(j, "ffn_dim", c.dims.ffn_dim);
  read(j, "blocks", c.dims.blocks);
  auto& t = c.training;
  read(j, "lr", t.lr);
  read(j, "batch_size", t.batch_size);
  read(j, "dropout", t.dropout);
  read(j, "margin", t.margin);
  read(j, "negatives_per_positive", t.negatives_per_positive);
  read(j, "lr_decay_factor", t.lr_decay_factor);
  read(j, "patience_epochs", t.patience_epochs);
  read(j, "min_delta", t.min_delta);
  read(j, "max_epochs", t.max_epochs);
  read(j, "seed", t.seed);
  read(j, "answer_threshold", t.answer_threshold);
  read(j, "target_f1", t.target_f1);
  read(j, "checkpoint", c.checkpoint);
  read(j, "train_dataset", c.train_dataset);
  read(j, "validation_dataset", c.validation_dataset);
  read(j, "test_dataset", c.test_dataset);
  read(j, "candidate_cap", c.candidate_cap);
  read(j, "threads", c.threads);
  for (auto* p : {&c.triples_path, &c.names_path, &c.embedding_path, &c.checkpoint, &c.train_dataset,
                  &c.validation_dataset, &c.test_dataset})
    *p = resolve(base, *p);
  return c;
}

struct Flags {
  std::string config;
  std::string question;
  std::string dataset;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string output;
  std::string manifest;
  std::string toy_dir;
};

RunConfig effective_config(const Flags& f) {
  RunConfig c = load_config(f.config);
  if (!f.checkpoint.empty()) c.checkpoint = f.checkpoint;
  if (f.seed) c.training.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (c.threads == 0) throw Error("threads must be >= 1");
  if (c.embedding_mode == "stub") {
    c.dims.embedding_dim = c.embedding_dim;
  } else if (c.embedding_mode != "file") {
    throw Error("embedding_mode must be \"stub\" or \"file\"");
  }
  return c;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw Error(std::string("no ") + what + " configured");
  if (!fs::exists(path)) throw Error(std::string(what) + " not found: " + path);
}

KnowledgeGraph open_kb(const RunConfig& c) {
  require_file(c.triples_path, "triples_path");
  require_file(c.names_path, "names_path");
  return load_kb_files(c.triples_path, c.names_path, c.type_relation);
}

EmbeddingProvider open_embeddings(RunConfig& c) {
  if (c.embedding_mode == "stub") return EmbeddingProvider::stub(c.embedding_dim, c.embedding_seed);
  require_file(c.embedding_path, "embedding_path");
  auto p = EmbeddingProvider::from_file(c.embedding_path, c.embedding_dim);
  c.dims.embedding_dim = p.dim();
  return p;
}

Weights open_weights(const RunConfig& c) {
  c.dims.validate();
  if (c.checkpoint.empty()) return init_weights<double>(c.dims, c.training.seed);
  require_file(c.checkpoint, "checkpoint");
  return load_checkpoint(c.checkpoint, c.dims);
}

AnswerOptions answer_options(const RunConfig& c) {
  AnswerOptions o;
  o.threshold = c.training.answer_threshold;
  o.candidate_cap = c.candidate_cap;
  o.threads = c.threads;
  return o;
}

std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int cmd_build_kb(const Flags& f) {
  RunConfig c = effective_config(f);
  if (!f.toy_dir.empty()) {
    toy::write_toy_world(toy::make_toy_world(), f.toy_dir);
    c.triples_path = (fs::path(f.toy_dir) / "triples.tsv").string();
    c.names_path = (fs::path(f.toy_dir) / "names.tsv").string();
  }
  const auto kb = open_kb(c);
  std::set<RelationId> relations;
  for (const auto& t : kb.triples()) relations.insert(t.predicate);
  std::cout << "triples=" << kb.size() << "\n"
            << "entities=" << kb.entities().size() << "\n"
            << "relations=" << relations.size() << "\n"
            << "named_entities=" << kb.alias_index().size() << "\n";
  return 0;
}

int cmd_train(const Flags& f) {
  RunConfig c = effective_config(f);
  const std::string dataset = f.dataset.empty() ? c.train_dataset : f.dataset;
  require_file(dataset, "train_dataset");
  const auto kb = open_kb(c);
  auto provider = open_embeddings(c);
  c.dims.validate();
  auto data = load_dataset(dataset);
  std::vector<QAPair> train_set, validation_set;
  if (!c.validation_dataset.empty()) {
    require_file(c.validation_dataset, "validation_dataset");
    train_set = std::move(data);
    validation_set = load_dataset(c.validation_dataset);
  } else {
    std::tie(train_set, validation_set) = split_train_validation(std::move(data), c.training.seed);
  }
  const auto start = std::chrono::steady_clock::now();
  auto result = train(init_weights<double>(c.dims, c.training.seed), provider, kb, train_set, validation_set,
                      c.training, [&](const EpochRecord& r) {
                        std::cout << "epoch=" << r.epoch << " loss=" << format_score(r.loss)
                                  << " val_f1=" << format_score(r.val_f1) << " lr=" << r.lr << "\n";
                        const double secs =
                            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                        std::cerr << "elapsed_s=" << secs << "\n";
                      });
  if (!c.checkpoint.empty()) {
    write_checkpoint(result.weights, c.checkpoint);
    std::cerr << "wrote " << c.checkpoint << "\n";
  }
  return 0;
}

int cmd_eval(const Flags& f) {
  RunConfig c = effective_config(f);
  const std::string dataset = f.dataset.empty() ? c.test_dataset : f.dataset;
  require_file(dataset, "dataset");
  const auto kb = open_kb(c);
  auto provider = open_embeddings(c);
  const auto weights = open_weights(c);
  const auto report = evaluate(weights, provider, kb, load_dataset(dataset), answer_options(c));
  for (const auto& q : report.questions) {
    std::cout << q.id << '\t' << format_score(q.score.f1) << '\t';
    for (std::size_t i = 0; i < q.predicted.size(); ++i) std::cout << (i ? "|" : "") << q.predicted[i];
    if (!q.error.empty()) std::cout << "\terror: " << q.error;
    std::cout << '\n';
  }
  std::cout << "macro_f1=" << format_score(report.macro_f1) << "\n";
  return 0;
}

int cmd_answer(const Flags& f) {
  RunConfig c = effective_config(f);
  const auto kb = open_kb(c);
  auto provider = open_embeddings(c);
  const auto weights = open_weights(c);
  const auto result = answer_question(weights, provider, kb, f.question, answer_options(c));
  for (const auto& e : result.selected) std::cout << kb.display_name(e) << "\n";
  return 0;
}

int cmd_gradcheck(const Flags& f) {
  const std::uint64_t seed = f.seed.value_or(effective_config(f).training.seed);
  const auto gc = random_grad_check_case(seed);
  const auto report = grad_check(gc.weights, gc.provider, gc.instances, TrainingConfig{}.margin);
  for (const auto& t : report.tensors) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", t.max_rel_error);
    std::cout << t.name << '\t' << buf << '\t' << (t.passed ? "ok" : "FAIL") << "\n";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", report.max_rel_error());
  std::cout << "max_rel_error=" << buf << "\n";
  return report.passed ? 0 : 2;
}

// Stub vectors for every candidate sequence of every dataset question, so a
// file-mode run can be compared against stub mode.
int cmd_export_stub(const Flags& f) {
  RunConfig c = effective_config(f);
  const std::string dataset = f.dataset.empty() ? c.train_dataset : f.dataset;
  require_file(dataset, "dataset");
  if (f.output.empty()) throw Error("--output is required");
  const auto kb = open_kb(c);
  const auto provider = EmbeddingProvider::stub(c.embedding_dim, c.embedding_seed);
  EmbeddingStore store;
  store.dim = c.embedding_dim;
  std::ofstream manifest;
  if (!f.manifest.empty()) {
    manifest.open(f.manifest);
    if (!manifest) throw Error("cannot write " + f.manifest);
  }
  std::size_t skipped = 0;
  for (const auto& pair : load_dataset(dataset)) {
    PreparedQuestion q;
    try {
      q = prepare_question(kb, pair.question, c.candidate_cap);
    } catch (const NoTopicEntity&) {
      ++skipped;
      continue;
    } catch (const EmptyQuestion&) {
      ++skipped;
      continue;
    }
    for (const auto& cand : q.candidates) {
      const std::string key = cand.sequence.key();
      if (store.entries.count(key)) continue;
      store.entries.emplace(key, provider.embed(cand.sequence).cast<float>());
      if (manifest.is_open()) manifest << json{{"key", key}, {"tokens", cand.sequence.tokens}}.dump() << "\n";
    }
  }
  write_embedding_file(store, f.output);
  std::cout << "entries=" << store.entries.size() << "\n";
  if (skipped) std::cerr << "skipped " << skipped << " unanswerable questions\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-base question answering with contextual embeddings"};
  app.require_subcommand(1);
  Flags f;
  auto common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON run configuration");
    sub->add_option("--seed", f.seed, "Overrides the configured seed");
    sub->add_option("--threads", f.threads, "Worker threads for candidate scoring");
    sub->add_option("--checkpoint", f.checkpoint, "Weights file");
  };
  auto* build = app.add_subcommand("build-kb", "Load and summarize the knowledge base");
  common(build);
  build->add_option("--toy", f.toy_dir, "Write the built-in toy world into this directory first");
  auto* train_cmd = app.add_subcommand("train", "Train the scorer and write a checkpoint");
  common(train_cmd);
  train_cmd->add_option("--dataset", f.dataset, "Training questions (JSON Lines)");
  auto* eval_cmd = app.add_subcommand("eval", "Macro F1 over a dataset");
  common(eval_cmd);
  eval_cmd->add_option("--dataset", f.dataset, "Questions (JSON Lines)");
  auto* answer_cmd = app.add_subcommand("answer", "Answer one question");
  common(answer_cmd);
  answer_cmd->add_option("--question", f.question, "Question text")->required();
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients on a random tiny model");
  common(grad_cmd);
  auto* export_cmd = app.add_subcommand("export-stub-embeddings", "Write stub vectors in the embedding file format");
  common(export_cmd);
  export_cmd->add_option("--dataset", f.dataset, "Questions whose candidate sequences are exported");
  export_cmd->add_option("--output", f.output, "Embedding file to write")->required();
  export_cmd->add_option("--manifest", f.manifest, "Also write a JSON Lines manifest of keys and tokens");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*build) return cmd_build_kb(f);
    if (*train_cmd) return cmd_train(f);
    if (*eval_cmd) return cmd_eval(f);
    if (*answer_cmd) return cmd_answer(f);
    if (*grad_cmd) return cmd_gradcheck(f);
    if (*export_cmd) return cmd_export_stub(f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
