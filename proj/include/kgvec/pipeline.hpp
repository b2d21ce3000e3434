#pragma once

// Stage drivers shared by the command line tool: ingest -> walk -> train.

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "kgvec/graph.hpp"
#include "kgvec/ntriples.hpp"
#include "kgvec/sgns.hpp"
#include "kgvec/walker.hpp"

namespace kgvec {

struct IngestResult {
  rdf::ParseStats parse;
  GraphStats graph;
};

inline IngestResult run_ingest(const std::string& input, rdf::Strictness strictness, const std::string& output) {
  GraphBuilder builder;
  IngestResult r;
  r.parse = rdf::parse_ntriples_file(input, strictness, builder);
  const Graph g = std::move(builder).build();
  r.graph = g.stats();
  g.save(output);
  return r;
}

inline CorpusStats run_walk(const std::string& graph_path, const WalkConfig& config, const std::string& output) {
  const Graph g = Graph::load(graph_path);
  std::ofstream out(output, std::ios::binary);
  if (!out) throw IoError("cannot write " + output);
  return generate_corpus(g, config, out);
}

inline TrainingReport run_train(const std::string& corpus, const TrainingConfig& config, const std::string& output) {
  TrainingReport report;
  const EmbeddingModel m = train(corpus, config, &report);
  m.save(output);
  return report;
}

/// Declarative pipeline file (JSON). Every key is optional except
/// ingest.input; relative output paths resolve against "workdir".
///
/// {
///   "seed": 1, "workdir": "out",
///   "ingest": {"input": "kg.nt.gz", "strict": false, "output": "graph.kgg"},
///   "walk":   {"depth": 8, "walks": 100, "threads": 1, "output": "corpus.txt"},
///   "train":  {"dim": 200, "window": 5, "epochs": 5, "negative": 25, "mode": "skip-gram",
///              "alpha": 0.025, "min_alpha": 0.0001, "min_count": 1, "sample": 0,
///              "threads": 1, "output": "model.txt"}
/// }
struct PipelineConfig {
  std::string input;
  bool strict = false;
  std::filesystem::path workdir = ".";
  std::string graph_file = "graph.kgg";
  std::string corpus_file = "corpus.txt";
  std::string model_file = "model.txt";
  WalkConfig walk;
  TrainingConfig train;

  std::filesystem::path graph_path() const { return workdir / graph_file; }
  std::filesystem::path corpus_path() const { return workdir / corpus_file; }
  std::filesystem::path model_path() const { return workdir / model_file; }

  void set_seed(std::uint64_t seed) {
    walk.seed = seed;
    train.seed = seed;
  }
};

inline TrainingMode parse_training_mode(const std::string& s) {
  if (s == "skip-gram" || s == "sg") return TrainingMode::kSkipGram;
  if (s == "cbow") return TrainingMode::kCbow;
  throw Error("unknown training mode '" + s + "' (expected skip-gram or cbow)");
}

inline PipelineConfig parse_pipeline_config(const nlohmann::json& j) {
  PipelineConfig c;
  c.workdir = j.value("workdir", std::string("."));
  c.set_seed(j.value("seed", std::uint64_t{1}));
  if (j.contains("ingest")) {
    const auto& s = j["ingest"];
    c.input = s.value("input", c.input);
    c.strict = s.value("strict", c.strict);
    c.graph_file = s.value("output", c.graph_file);
  }
  if (j.contains("walk")) {
    const auto& s = j["walk"];
    c.walk.depth = s.value("depth", c.walk.depth);
    c.walk.walks_per_entity = s.value("walks", c.walk.walks_per_entity);
    c.walk.threads = s.value("threads", c.walk.threads);
    c.corpus_file = s.value("output", c.corpus_file);
  }
  if (j.contains("train")) {
    const auto& s = j["train"];
    auto& t = c.train;
    t.dim = s.value("dim", t.dim);
    t.window = s.value("window", t.window);
    t.epochs = s.value("epochs", t.epochs);
    t.negatives = s.value("negative", t.negatives);
    t.mode = parse_training_mode(s.value("mode", to_string(t.mode)));
    t.alpha = s.value("alpha", t.alpha);
    t.min_alpha = s.value("min_alpha", t.min_alpha);
    t.min_count = s.value("min_count", t.min_count);
    t.sample = s.value("sample", t.sample);
    t.threads = s.value("threads", t.threads);
    c.model_file = s.value("output", c.model_file);
  }
  return c;
}

struct PipelineResult {
  IngestResult ingest;
  CorpusStats corpus;
  TrainingReport training;
};

inline PipelineResult run_pipeline(const PipelineConfig& c) {
  if (c.input.empty()) throw Error("pipeline: no input file");
  std::filesystem::create_directories(c.workdir);
  PipelineResult r;
  r.ingest = run_ingest(c.input, c.strict ? rdf::Strictness::kStrict : rdf::Strictness::kLenient, c.graph_path());
  r.corpus = run_walk(c.graph_path(), c.walk, c.corpus_path());
  r.training = run_train(c.corpus_path(), c.train, c.model_path());
  return r;
}

}  // namespace kgvec
