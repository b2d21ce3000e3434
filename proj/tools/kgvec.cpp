// kgvec: ingest -> walk -> train -> serve / eval / query.

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgvec/eval.hpp"
#include "kgvec/pipeline.hpp"
#include "kgvec/server.hpp"
#include "kgvec/store.hpp"

namespace {

using namespace kgvec;

void log(const std::string& msg) { std::cerr << "[kgvec] " << msg << '\n'; }

// --- shared option blocks ---------------------------------------------------

void add_walk_options(CLI::App* cmd, WalkConfig& c) {
  cmd->add_option("--depth", c.depth, "Tokens after the start vertex, edges included (even)")->capture_default_str();
  cmd->add_option("--walks", c.walks_per_entity, "Walk attempts per entity")
      ->capture_default_str();
  cmd->add_option("--threads", c.threads, "Walker threads; >1 may reorder entities in the corpus")
      ->capture_default_str();
}

void add_train_options(CLI::App* cmd, TrainingConfig& c, std::string& mode) {
  cmd->add_option("--dim", c.dim, "Vector dimensionality")->capture_default_str();
  cmd->add_option("--window", c.window, "Maximum context window radius")->capture_default_str();
  cmd->add_option("--epochs", c.epochs, "Passes over the corpus")->capture_default_str();
  cmd->add_option("--negative", c.negatives, "Negative samples per pair")->capture_default_str();
  cmd->add_option("--alpha", c.alpha, "Initial learning rate")->capture_default_str();
  cmd->add_option("--min-alpha", c.min_alpha, "Final learning rate")->capture_default_str();
  cmd->add_option("--min-count", c.min_count, "Drop tokens rarer than this")->capture_default_str();
  cmd->add_option("--sample", c.sample, "Subsampling threshold (0 = off)")->capture_default_str();
  cmd->add_option("--mode", mode, "skip-gram or cbow")->capture_default_str();
  cmd->add_option("--train-threads", c.threads, "Trainer threads; >1 is not reproducible")->capture_default_str();
}

/// "name=path" pairs from --model, plus optional "name=rule[:path]" from --labels.
std::vector<api::DatasetSpec> dataset_specs(const std::vector<std::string>& models,
                                            const std::vector<std::string>& labels) {
  std::vector<api::DatasetSpec> specs;
  for (const auto& m : models) {
    const auto eq = m.find('=');
    if (eq == std::string::npos || eq == 0) throw Error("--model expects name=path, got '" + m + "'");
    specs.push_back({m.substr(0, eq), m.substr(eq + 1), LabelRule::kExact, {}});
  }
  for (const auto& l : labels) {
    const auto eq = l.find('=');
    if (eq == std::string::npos) throw Error("--labels expects name=rule[:path], got '" + l + "'");
    const std::string name = l.substr(0, eq);
    std::string rule = l.substr(eq + 1), path;
    if (const auto colon = rule.find(':'); colon != std::string::npos) {
      path = rule.substr(colon + 1);
      rule = rule.substr(0, colon);
    }
    auto it = std::find_if(specs.begin(), specs.end(), [&](const auto& s) { return s.name == name; });
    if (it == specs.end()) throw Error("--labels refers to unknown dataset '" + name + "'");
    it->rule = parse_label_rule(rule);
    it->labels = path;
    if (it->rule == LabelRule::kSidecar && path.empty()) throw Error("sidecar labels need a path: name=sidecar:file.tsv");
  }
  return specs;
}

api::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

std::string fmt_score(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", s);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge graph embeddings: RDF random walks, skip-gram training and a similarity API"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "Global random seed")->capture_default_str();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse N-Triples (.nt or .nt.gz) into a graph snapshot");
  std::string ingest_in, ingest_out;
  bool strict = false;
  ingest->add_option("--input", ingest_in, "N-Triples file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--output", ingest_out, "Graph snapshot to write")->required();
  ingest->add_flag("--strict", strict, "Abort on the first malformed line");

  // walk
  auto* walk = app.add_subcommand("walk", "Generate the random walk corpus");
  WalkConfig walk_cfg;
  std::string walk_graph, walk_out;
  walk->add_option("--graph", walk_graph, "Graph snapshot")->required()->check(CLI::ExistingFile);
  walk->add_option("--output", walk_out, "Corpus file to write")->required();
  walk->add_option("--seed", seed, "Random seed");
  add_walk_options(walk, walk_cfg);

  // train
  auto* trainc = app.add_subcommand("train", "Train skip-gram embeddings on a corpus");
  TrainingConfig train_cfg;
  std::string train_mode = "skip-gram", corpus, model_out;
  trainc->add_option("--corpus", corpus, "Walk corpus")->required()->check(CLI::ExistingFile);
  trainc->add_option("--output", model_out, "Model file (.bin for binary, text otherwise)")->required();
  trainc->add_option("--seed", seed, "Random seed");
  add_train_options(trainc, train_cfg, train_mode);

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Run ingest, walk and train end to end");
  std::string pipe_config;
  PipelineConfig pcfg;
  std::string pipe_mode = "skip-gram";
  std::string workdir = ".";
  pipe->add_option("--config", pipe_config, "Declarative pipeline file (JSON)")->check(CLI::ExistingFile);
  pipe->add_option("--input", pcfg.input, "N-Triples file");
  pipe->add_option("--workdir", workdir, "Directory for graph, corpus and model files")->capture_default_str();
  pipe->add_flag("--strict", pcfg.strict, "Abort on the first malformed line");
  pipe->add_option("--seed", seed, "Random seed");
  add_walk_options(pipe, pcfg.walk);
  add_train_options(pipe, pcfg.train, pipe_mode);

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the REST API");
  std::string serve_config;
  int port_override = -1;
  serve->add_option("--config", serve_config, "Server config (JSON)")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", port_override, "Override the configured port");

  // eval
  auto* evalc = app.add_subcommand("eval", "Spearman evaluation against a word-similarity gold standard");
  std::vector<std::string> eval_gold, eval_models, eval_labels;
  std::string eval_format = "ws353", eval_out;
  bool eval_combined = false;
  evalc->add_option("--gold", eval_gold, "Gold standard file(s)")->required()->check(CLI::ExistingFile);
  evalc->add_option("--format", eval_format, "ws353 | simlex | men | men-lemma")->capture_default_str();
  evalc->add_option("--model", eval_models, "name=path, repeatable")->required();
  evalc->add_option("--labels", eval_labels, "name=rule[:sidecar.tsv], rule in exact|iri-suffix|sidecar");
  evalc->add_flag("--combined", eval_combined, "Also evaluate the summed similarity of all models");
  evalc->add_option("--out", eval_out, "Report prefix; writes <out>.txt and <out>.csv");

  // query
  auto* query = app.add_subcommand("query", "Offline queries against local models");
  query->require_subcommand(1);
  std::vector<std::string> q_models, q_labels;
  std::string q_config, q_dataset, qa, qb, qc;
  std::size_t q_n = 10;
  auto add_query_common = [&](CLI::App* c) {
    c->add_option("--model", q_models, "name=path, repeatable");
    c->add_option("--labels", q_labels, "name=rule[:sidecar.tsv]");
    c->add_option("--config", q_config, "Server config to take datasets from")->check(CLI::ExistingFile);
  };
  auto* q_vec = query->add_subcommand("vector", "Vectors of a concept");
  auto* q_sim = query->add_subcommand("similarity", "Similarity of two concepts");
  auto* q_close = query->add_subcommand("closest", "Closest concepts");
  auto* q_comb = query->add_subcommand("combined", "Summed similarity over all datasets");
  auto* q_ana = query->add_subcommand("analogy", "a is to b as c is to ?");
  for (auto* c : {q_vec, q_sim, q_close, q_comb, q_ana}) add_query_common(c);
  for (auto* c : {q_vec, q_sim, q_close, q_ana}) c->add_option("--dataset", q_dataset, "Dataset name");
  q_vec->add_option("--concept,--a", qa, "Concept")->required();
  q_close->add_option("--concept,--a", qa, "Concept")->required();
  q_close->add_option("-n,--top-n", q_n, "Number of results")->capture_default_str();
  for (auto* c : {q_sim, q_comb}) {
    c->add_option("--a", qa, "First concept")->required();
    c->add_option("--b", qb, "Second concept")->required();
  }
  q_ana->add_option("--a", qa, "a")->required();
  q_ana->add_option("--b", qb, "b")->required();
  q_ana->add_option("--c", qc, "c")->required();
  q_ana->add_option("-n,--top-n", q_n, "Number of results")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      const auto r = run_ingest(ingest_in, strict ? rdf::Strictness::kStrict : rdf::Strictness::kLenient, ingest_out);
      log("parsed " + std::to_string(r.parse.statements) + " statements, skipped " + std::to_string(r.parse.skipped) +
          " malformed lines");
      log("graph: " + std::to_string(r.graph.vertices) + " vertices, " + std::to_string(r.graph.predicates) +
          " predicates, " + std::to_string(r.graph.adjacency_entries) + " edges, " +
          std::to_string(r.graph.dropped_literals) + " literal statements dropped");
      return 0;
    }
    if (walk->parsed()) {
      walk_cfg.seed = seed;
      const auto s = run_walk(walk_graph, walk_cfg, walk_out);
      log("corpus: " + std::to_string(s.entities) + " entities, " + std::to_string(s.walks) + " walks, " +
          std::to_string(s.tokens) + " tokens");
      return 0;
    }
    if (trainc->parsed()) {
      train_cfg.seed = seed;
      train_cfg.mode = parse_training_mode(train_mode);
      const auto rep = run_train(corpus, train_cfg, model_out);
      for (std::size_t e = 0; e < rep.epoch_mean_loss.size(); ++e) {
        log("epoch " + std::to_string(e + 1) + " mean loss " + fmt_score(rep.epoch_mean_loss[e]));
      }
      log("wrote " + model_out);
      return 0;
    }
    if (pipe->parsed()) {
      if (!pipe_config.empty()) {
        std::ifstream in(pipe_config);
        pcfg = parse_pipeline_config(nlohmann::json::parse(in));
        if (pipe->count("--seed") > 0 || app.count("--seed") > 0) pcfg.set_seed(seed);
      } else {
        pcfg.workdir = workdir;
        pcfg.train.mode = parse_training_mode(pipe_mode);
        pcfg.set_seed(seed);
      }
      const auto r = run_pipeline(pcfg);
      log("graph " + pcfg.graph_path().string() + ": " + std::to_string(r.ingest.graph.vertices) + " vertices");
      log("corpus " + pcfg.corpus_path().string() + ": " + std::to_string(r.corpus.walks) + " walks");
      log("model " + pcfg.model_path().string() + ": " + std::to_string(r.training.pairs) + " training pairs");
      return 0;
    }
    if (serve->parsed()) {
      auto cfg = api::load_server_config(serve_config);
      if (port_override >= 0) cfg.port = port_override;
      api::Api api(cfg.max_top_n);
      api::HttpServer server(api, cfg.cors_origin, cfg.threads);
      if (!server.bind(cfg.host, cfg.port)) throw Error("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      // /health answers 503 until the models are in.
      std::jthread loader([&] {
        try {
          api.set_store(api::load_store(cfg.datasets));
          log("models loaded; serving on " + cfg.host + ":" + std::to_string(cfg.port));
        } catch (const std::exception& e) {
          log(std::string("model loading failed: ") + e.what());
          server.stop();
        }
      });
      server.listen_after_bind();
      g_server = nullptr;
      return api.store() ? 0 : 1;
    }
    if (evalc->parsed()) {
      const auto specs = dataset_specs(eval_models, eval_labels);
      const auto store = api::load_store(specs);
      const auto format = eval::parse_gold_format(eval_format);
      std::vector<eval::EvalResult> results;
      for (const auto& path : eval_gold) {
        const auto gold = eval::load_gold(path, format);
        for (const auto& name : store->names()) {
          results.push_back(eval::evaluate_or_undefined(*store, {name}, false, gold));
        }
        if (eval_combined) results.push_back(eval::evaluate_or_undefined(*store, store->names(), true, gold));
      }
      const auto rep = eval::report(results);
      std::cout << rep.text;
      if (!eval_out.empty()) {
        std::ofstream(eval_out + ".txt") << rep.text;
        std::ofstream(eval_out + ".csv") << rep.csv;
      }
      return 0;
    }
    if (query->parsed()) {
      std::vector<api::DatasetSpec> specs =
          q_config.empty() ? dataset_specs(q_models, q_labels) : api::load_server_config(q_config).datasets;
      if (specs.empty()) throw Error("no models given (use --model name=path or --config)");
      const auto store = api::load_store(specs);
      if (q_dataset.empty()) q_dataset = specs.front().name;

      if (q_vec->parsed()) {
        nlohmann::json results = nlohmann::json::array();
        for (const auto& x : store->resolve(q_dataset, qa)) {
          results.push_back({{"token", x.token}, {"pos", api::optional_json(x.pos)}, {"vector", api::vector_json(x.vector)}});
        }
        std::cout << nlohmann::json{{"dataset", q_dataset}, {"label", qa}, {"results", results}}.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
      } else if (q_sim->parsed()) {
        const auto s = store->similarity(q_dataset, qa, qb);
        std::cout << fmt_score(s.score) << '\n';
        if (s.oov) log("out of vocabulary");
      } else if (q_close->parsed()) {
        for (const auto& nb : store->closest_concepts(q_dataset, qa, q_n)) {
          std::cout << nb.label.value_or(nb.token) << '\t' << fmt_score(nb.score) << '\n';
        }
      } else if (q_comb->parsed()) {
        const auto c = store->combined_similarity(qa, qb);
        std::cout << fmt_score(c.combined) << '\n';
        for (const auto& [name, s] : c.per_dataset) log(name + ": " + fmt_score(s));
      } else if (q_ana->parsed()) {
        const auto r = store->analogy(q_dataset, qa, qb, qc, q_n);
        if (r.oov) {
          std::string missing;
          for (const auto& m : r.missing) missing += (missing.empty() ? "" : ", ") + m;
          log("out of vocabulary: " + missing);
        }
        for (const auto& nb : r.ranking) std::cout << nb.label.value_or(nb.token) << '\t' << fmt_score(nb.score) << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return 1;
  }
  return 0;
}
