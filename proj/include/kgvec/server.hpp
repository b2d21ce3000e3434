#pragma once

// REST API over a ModelStore.
//
//   GET /rest/get-vector/{data_set}/{concept_name}
//   GET /rest/get-similarity/{data_set}/{concept_name_1}/{concept_name_2}
//   GET /rest/closest-concepts/{data_set}/{top_n}/{concept_name}
//   GET /rest/get-similarity-combined/{concept_1}/{concept_2}
//   GET /health
//
// Routing and JSON rendering live in Api, which has no transport dependency;
// HttpServer binds it to cpp-httplib.

#include <algorithm>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "kgvec/error.hpp"
#include "kgvec/model.hpp"
#include "kgvec/store.hpp"

namespace kgvec::api {

using nlohmann::json;

inline constexpr std::string_view kApiVersion = "1";

struct DatasetSpec {
  std::string name;
  std::string model;
  LabelRule rule = LabelRule::kExact;
  std::string labels;  // sidecar path, required for LabelRule::kSidecar
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t max_top_n = 100;
  std::string cors_origin = "*";
  std::size_t threads = 8;
  std::vector<DatasetSpec> datasets;

  void validate() const {
    if (datasets.empty()) throw Error("server config: at least one dataset is required");
    std::set<std::string> seen;
    for (const auto& d : datasets) {
      if (d.name.empty()) throw Error("server config: dataset name must not be empty");
      if (!seen.insert(d.name).second) throw Error("server config: duplicate dataset name '" + d.name + "'");
      if (d.rule == LabelRule::kSidecar && d.labels.empty()) {
        throw Error("server config: dataset '" + d.name + "' uses sidecar labels but has no labels path");
      }
    }
    if (max_top_n < 1) throw Error("server config: max_top_n must be >= 1");
  }
};

/// Config file (JSON):
/// {
///   "host": "127.0.0.1", "port": 8080, "max_top_n": 100, "cors_origin": "*",
///   "datasets": [
///     {"name": "wordnet", "model": "wn.bin", "labels": "wn.tsv", "label_rule": "sidecar"},
///     {"name": "dbpedia", "model": "dbp.txt", "label_rule": "iri-suffix"}
///   ]
/// }
/// label_rule defaults to "sidecar" when "labels" is given and "exact" otherwise.
inline ServerConfig parse_server_config(const json& j) {
  ServerConfig c;
  c.host = j.value("host", c.host);
  c.port = j.value("port", c.port);
  c.max_top_n = j.value("max_top_n", c.max_top_n);
  c.cors_origin = j.value("cors_origin", c.cors_origin);
  c.threads = j.value("threads", c.threads);
  for (const auto& d : j.at("datasets")) {
    DatasetSpec s;
    s.name = d.at("name").get<std::string>();
    s.model = d.at("model").get<std::string>();
    s.labels = d.value("labels", std::string{});
    s.rule = parse_label_rule(d.value("label_rule", s.labels.empty() ? std::string("exact") : std::string("sidecar")));
    c.datasets.push_back(std::move(s));
  }
  c.validate();
  return c;
}

inline ServerConfig load_server_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("server config " + path + ": " + e.what());
  }
  return parse_server_config(j);
}

inline std::shared_ptr<const Dataset> load_dataset(const DatasetSpec& spec) {
  EmbeddingModel model = EmbeddingModel::load(spec.model);
  LabelIndex labels;
  switch (spec.rule) {
    case LabelRule::kExact: labels = LabelIndex::exact(); break;
    case LabelRule::kIriSuffix: labels = LabelIndex::iri_suffix(model); break;
    case LabelRule::kSidecar: labels = LabelIndex::sidecar(spec.labels, model); break;
  }
  return std::make_shared<const Dataset>(spec.name, std::move(model), std::move(labels));
}

inline std::shared_ptr<const ModelStore> load_store(const std::vector<DatasetSpec>& specs) {
  auto store = std::make_shared<ModelStore>();
  for (const auto& s : specs) store->add(load_dataset(s));
  return store;
}

struct ApiResponse {
  int status = 200;
  json body;
};

inline int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

/// Percent-decodes one path segment. '+' is kept literally.
inline std::optional<std::string> url_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '%') {
      out.push_back(s[i]);
      continue;
    }
    if (i + 2 >= s.size()) return std::nullopt;
    const int hi = hex_digit(s[i + 1]);
    const int lo = hex_digit(s[i + 2]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<char>(hi * 16 + lo));
    i += 2;
  }
  return out;
}

inline json vector_json(std::span<const float> v) {
  json arr = json::array();
  for (float x : v) arr.push_back(x);
  return arr;
}

inline json optional_json(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

class Api {
 public:
  explicit Api(std::size_t max_top_n = 100) : max_top_n_(max_top_n) {}

  void set_store(std::shared_ptr<const ModelStore> store) {
    std::lock_guard lock(mu_);
    store_ = std::move(store);
  }

  std::shared_ptr<const ModelStore> store() const {
    std::lock_guard lock(mu_);
    return store_;
  }

  std::size_t max_top_n() const { return max_top_n_; }

  /// `target` is the raw request path (query string is ignored).
  ApiResponse handle(std::string_view target) const {
    target = target.substr(0, target.find('?'));
    std::vector<std::string> seg;
    if (target.empty() || target[0] != '/') return error(400, "malformed path");
    std::string_view rest = target.substr(1);
    while (true) {
      const auto slash = rest.find('/');
      auto decoded = url_decode(rest.substr(0, slash));
      if (!decoded) return error(400, "malformed percent-encoding in path");
      seg.push_back(std::move(*decoded));
      if (slash == std::string_view::npos) break;
      rest.remove_prefix(slash + 1);
    }

    if (seg.size() == 1 && seg[0] == "health") return health();
    if (seg.size() < 2 || seg[0] != "rest") return error(404, "not found");

    const std::string& route = seg[1];
    const std::vector<std::string> args(seg.begin() + 2, seg.end());
    std::size_t arity = 0;
    if (route == "get-vector") {
      arity = 2;
    } else if (route == "get-similarity") {
      arity = 3;
    } else if (route == "closest-concepts") {
      arity = 3;
    } else if (route == "get-similarity-combined") {
      arity = 2;
    } else {
      return error(404, "not found");
    }
    if (args.size() != arity) return error(400, "malformed path");
    for (const auto& a : args) {
      if (a.empty()) return error(400, "malformed path");
    }

    const auto store = this->store();
    if (!store) return error(503, "models are still loading");

    try {
      if (route == "get-vector") return get_vector(*store, args[0], args[1]);
      if (route == "get-similarity") return get_similarity(*store, args[0], args[1], args[2]);
      if (route == "closest-concepts") return closest_concepts(*store, args[0], args[1], args[2]);
      return combined(*store, args[0], args[1]);
    } catch (const DatasetNotFound&) {
      return error(404, "unknown dataset");
    }
  }

  static ApiResponse error(int status, std::string message) { return {status, json{{"error", std::move(message)}}}; }

 private:
  ApiResponse health() const {
    const auto store = this->store();
    if (!store) return {503, json{{"status", "loading"}, {"datasets", json::array()}, {"vocab_sizes", json::object()}}};
    json sizes = json::object();
    for (const auto& name : store->names()) sizes[name] = store->get(name).model().size();
    return {200, json{{"status", "ok"}, {"datasets", store->names()}, {"vocab_sizes", sizes}}};
  }

  static ApiResponse get_vector(const ModelStore& store, const std::string& dataset, const std::string& label) {
    json results = json::array();
    for (const auto& r : store.resolve(dataset, label)) {
      results.push_back({{"token", r.token}, {"pos", optional_json(r.pos)}, {"vector", vector_json(r.vector)}});
    }
    return {200, json{{"dataset", dataset}, {"label", label}, {"results", results}}};
  }

  static ApiResponse get_similarity(const ModelStore& store, const std::string& dataset, const std::string& a,
                                    const std::string& b) {
    const Similarity s = store.similarity(dataset, a, b);
    return {200, json{{"dataset", dataset}, {"concept_1", a}, {"concept_2", b}, {"similarity", s.score}, {"oov", s.oov}}};
  }

  ApiResponse closest_concepts(const ModelStore& store, const std::string& dataset, const std::string& top_n,
                               const std::string& label) const {
    std::size_t n = 0;
    const bool digits = !top_n.empty() && top_n.size() <= 9 &&
                        std::all_of(top_n.begin(), top_n.end(), [](char c) { return c >= '0' && c <= '9'; });
    if (digits) n = std::stoul(top_n);
    if (!digits || n < 1 || n > max_top_n_) {
      return error(400, "top_n must be an integer in [1, " + std::to_string(max_top_n_) + "]");
    }
    json result = json::array();
    for (const auto& nb : store.closest_concepts(dataset, label, n)) {
      result.push_back({{"concept", nb.label.value_or(nb.token)}, {"token", nb.token}, {"score", nb.score}});
    }
    return {200, json{{"dataset", dataset}, {"concept", label}, {"result", result}}};
  }

  static ApiResponse combined(const ModelStore& store, const std::string& a, const std::string& b) {
    const CombinedSimilarity c = store.combined_similarity(a, b);
    json per = json::object();
    for (const auto& [name, s] : c.per_dataset) per[name] = s;
    return {200, json{{"concept_1", a}, {"concept_2", b}, {"combined", c.combined}, {"per_dataset", per}}};
  }

  std::size_t max_top_n_;
  mutable std::mutex mu_;
  std::shared_ptr<const ModelStore> store_;
};

/// HTTP/1.1 front end. GET only; every response is JSON.
class HttpServer {
 public:
  HttpServer(Api& api, std::string cors_origin = "*", std::size_t threads = 8)
      : api_(api), cors_origin_(std::move(cors_origin)) {
    server_.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    server_.Get(".*", [this](const httplib::Request& req, httplib::Response& res) {
      const ApiResponse r = api_.handle(req.target);
      write(res, r);
    });
    server_.Options(".*", [this](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
      add_headers(res);
      res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
    auto not_allowed = [this](const httplib::Request&, httplib::Response& res) {
      write(res, Api::error(405, "method not allowed"));
    };
    server_.Post(".*", not_allowed);
    server_.Put(".*", not_allowed);
    server_.Delete(".*", not_allowed);
    server_.Patch(".*", not_allowed);
  }

  bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
  int bind_any_port(const std::string& host) { return server_.bind_to_any_port(host); }
  /// Blocks until stop() is called.
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }
  bool is_running() const { return server_.is_running(); }

 private:
  void add_headers(httplib::Response& res) const {
    res.set_header("X-API-Version", std::string(kApiVersion));
    res.set_header("Access-Control-Allow-Origin", cors_origin_);
  }

  void write(httplib::Response& res, const ApiResponse& r) const {
    res.status = r.status;
    add_headers(res);
    res.set_content(r.body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
  }

  Api& api_;
  std::string cors_origin_;
  httplib::Server server_;
};

}  // namespace kgvec::api
