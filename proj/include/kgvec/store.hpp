#pragma once

// Loaded models with natural-language label resolution and the cosine-based
// queries served over HTTP: similarity, closest concepts, combined
// similarity, and analogies.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgvec/error.hpp"
#include "kgvec/io.hpp"
#include "kgvec/model.hpp"

namespace kgvec {

/// u.v / (|u||v|), or 0 when either norm is zero.
inline double cosine(std::span<const float> u, std::span<const float> v) {
  if (u.size() != v.size()) {
    throw Error("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
  }
  double uv = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += static_cast<double>(u[i]) * v[i];
    uu += static_cast<double>(u[i]) * u[i];
    vv += static_cast<double>(v[i]) * v[i];
  }
  if (uu == 0 || vv == 0) return 0.0;
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

// ---------------------------------------------------------------------------
// Label resolution

enum class LabelRule {
  kExact,      // label must equal a token
  kIriSuffix,  // case-folded local name of the IRI, '_' read as ' '
  kSidecar,    // explicit TSV: label<TAB>token[<TAB>pos]
};

inline LabelRule parse_label_rule(std::string_view s) {
  if (s == "exact") return LabelRule::kExact;
  if (s == "iri-suffix" || s == "suffix") return LabelRule::kIriSuffix;
  if (s == "sidecar") return LabelRule::kSidecar;
  throw Error("unknown label rule '" + std::string(s) + "' (expected exact, iri-suffix or sidecar)");
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// ASCII case-fold, '_' to ' ', collapse surrounding whitespace.
inline std::string fold_label(std::string_view s) {
  std::string out;
  for (char c : trim(s)) {
    if (c == '_') c = ' ';
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  return out;
}

/// The part of an IRI after its last '/' or '#'; angle brackets are ignored.
inline std::string_view local_name(std::string_view token) {
  if (token.size() >= 2 && token.front() == '<' && token.back() == '>') token = token.substr(1, token.size() - 2);
  const auto cut = token.find_last_of("/#");
  return cut == std::string_view::npos ? token : token.substr(cut + 1);
}

struct LabelEntry {
  std::string token;
  std::optional<std::string> pos;
};

class LabelIndex {
 public:
  LabelIndex() = default;

  static LabelIndex exact() { return LabelIndex(LabelRule::kExact); }

  static LabelIndex iri_suffix(const EmbeddingModel& model) {
    LabelIndex idx(LabelRule::kIriSuffix);
    for (const auto& tok : model.tokens()) {
      const std::string key = fold_label(local_name(tok));
      if (!key.empty()) idx.entries_[key].push_back({tok, std::nullopt});
    }
    return idx;
  }

  /// Entries whose token is not in `model` are skipped and counted.
  static LabelIndex sidecar(const std::string& path, const EmbeddingModel& model) {
    LabelIndex idx(LabelRule::kSidecar);
    LineReader reader(path);
    std::string line;
    std::size_t line_no = 0;
    while (reader.next(line)) {
      ++line_no;
      if (trim(line).empty() || line[0] == '#') continue;
      std::vector<std::string_view> cols;
      std::string_view rest(line);
      while (true) {
        const auto tab = rest.find('\t');
        cols.push_back(trim(rest.substr(0, tab)));
        if (tab == std::string_view::npos) break;
        rest.remove_prefix(tab + 1);
      }
      if (cols.size() < 2 || cols.size() > 3 || cols[0].empty() || cols[1].empty()) {
        throw ParseError("bad label sidecar row (expected label<TAB>token[<TAB>pos])", line_no);
      }
      std::string token(cols[1]);
      if (!model.contains(token)) {
        ++idx.skipped_;
        continue;
      }
      std::optional<std::string> pos;
      if (cols.size() == 3 && !cols[2].empty()) pos = std::string(cols[2]);
      idx.reverse_.try_emplace(token, std::string(cols[0]));
      auto& list = idx.entries_[std::string(cols[0])];
      const bool dup = std::any_of(list.begin(), list.end(), [&](const LabelEntry& e) { return e.token == token; });
      if (!dup) list.push_back({std::move(token), std::move(pos)});
    }
    return idx;
  }

  LabelRule rule() const { return rule_; }
  std::size_t skipped() const { return skipped_; }

  std::string normalize(std::string_view label) const {
    return rule_ == LabelRule::kIriSuffix ? fold_label(label) : std::string(trim(label));
  }

  std::vector<LabelEntry> lookup(std::string_view label, const EmbeddingModel& model) const {
    const std::string key = normalize(label);
    if (rule_ == LabelRule::kExact) {
      if (model.contains(key)) return {{key, std::nullopt}};
      return {};
    }
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    return {};
  }

  /// Display label of a token when the index defines one.
  std::optional<std::string> label_of(const std::string& token) const {
    if (auto it = reverse_.find(token); it != reverse_.end()) return it->second;
    return std::nullopt;
  }

 private:
  explicit LabelIndex(LabelRule rule) : rule_(rule) {}

  LabelRule rule_ = LabelRule::kExact;
  std::unordered_map<std::string, std::vector<LabelEntry>> entries_;
  std::unordered_map<std::string, std::string> reverse_;
  std::size_t skipped_ = 0;
};

// ---------------------------------------------------------------------------
// Queries

struct Resolved {
  std::string token;
  std::optional<std::string> pos;
  std::size_t row;
  std::span<const float> vector;
};

struct Neighbor {
  std::string token;
  std::optional<std::string> label;
  double score;
};

struct Similarity {
  double score = 0;
  bool oov = false;
};

struct AnalogyResult {
  bool oov = false;
  std::vector<std::string> missing;  // input labels that did not resolve
  std::vector<Neighbor> ranking;
};

/// One immutable model plus its label index and cached row norms.
class Dataset {
 public:
  Dataset(std::string name, EmbeddingModel model, LabelIndex labels)
      : name_(std::move(name)), model_(std::move(model)), labels_(std::move(labels)) {
    norms_.reserve(model_.size());
    for (std::size_t r = 0; r < model_.size(); ++r) {
      double s = 0;
      for (float x : model_.row(r)) s += static_cast<double>(x) * x;
      norms_.push_back(std::sqrt(s));
    }
  }

  const std::string& name() const { return name_; }
  const EmbeddingModel& model() const { return model_; }
  const LabelIndex& labels() const { return labels_; }

  std::vector<Resolved> resolve(std::string_view label) const {
    std::vector<Resolved> out;
    for (auto& e : labels_.lookup(label, model_)) {
      const auto row = model_.find(e.token);
      if (!row) continue;
      out.push_back({e.token, e.pos, *row, model_.row(*row)});
    }
    return out;
  }

  /// Max cosine over the cross product of resolved vectors; 0 (and oov) when
  /// either label is unknown.
  Similarity similarity(std::string_view a, std::string_view b) const {
    const auto ra = resolve(a);
    const auto rb = resolve(b);
    if (ra.empty() || rb.empty()) return {0.0, true};
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& x : ra) {
      for (const auto& y : rb) best = std::max(best, cosine(x.vector, y.vector));
    }
    return {best, false};
  }

  /// Scores every token against each resolved vector of `label`, keeps the
  /// per-token maximum across POS variants, drops the query's own tokens and
  /// returns the top n by (score desc, token asc).
  std::vector<Neighbor> closest(std::string_view label, std::size_t n) const {
    const auto query = resolve(label);
    if (query.empty() || n == 0) return {};
    std::vector<std::span<const float>> qs;
    std::set<std::size_t> exclude;
    for (const auto& q : query) {
      qs.push_back(q.vector);
      exclude.insert(q.row);
    }
    return rank(qs, exclude, n);
  }

  /// 3CosAdd: cosine to b - a + c using the first resolved vector of each
  /// label; tokens resolved from a, b or c are excluded.
  AnalogyResult analogy(std::string_view a, std::string_view b, std::string_view c, std::size_t n) const {
    AnalogyResult result;
    const auto ra = resolve(a);
    const auto rb = resolve(b);
    const auto rc = resolve(c);
    if (ra.empty()) result.missing.emplace_back(a);
    if (rb.empty()) result.missing.emplace_back(b);
    if (rc.empty()) result.missing.emplace_back(c);
    if (!result.missing.empty()) {
      result.oov = true;
      return result;
    }
    std::vector<float> target(model_.dim());
    for (std::size_t i = 0; i < target.size(); ++i) {
      target[i] = rb[0].vector[i] - ra[0].vector[i] + rc[0].vector[i];
    }
    std::set<std::size_t> exclude;
    for (const auto* r : {&ra, &rb, &rc}) {
      for (const auto& x : *r) exclude.insert(x.row);
    }
    const std::vector<std::span<const float>> qs{target};
    result.ranking = rank(qs, exclude, n);
    return result;
  }

 private:
  std::vector<Neighbor> rank(const std::vector<std::span<const float>>& queries, const std::set<std::size_t>& exclude,
                             std::size_t n) const {
    const std::size_t rows = model_.size();
    std::vector<double> best(rows, -std::numeric_limits<double>::infinity());
    for (const auto& q : queries) {
      double qn = 0;
      for (float x : q) qn += static_cast<double>(x) * x;
      qn = std::sqrt(qn);
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0;
        if (qn > 0 && norms_[r] > 0) {
          const auto v = model_.row(r);
          for (std::size_t i = 0; i < v.size(); ++i) s += static_cast<double>(q[i]) * v[i];
          s /= qn * norms_[r];
        }
        best[r] = std::max(best[r], s);
      }
    }
    std::vector<std::size_t> order;
    order.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!exclude.contains(r)) order.push_back(r);
    }
    const std::size_t k = std::min(n, order.size());
    auto before = [&](std::size_t x, std::size_t y) {
      if (best[x] != best[y]) return best[x] > best[y];
      return model_.token(x) < model_.token(y);
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), before);
    std::vector<Neighbor> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      const auto& tok = model_.token(order[i]);
      out.push_back({tok, labels_.label_of(tok), best[order[i]]});
    }
    return out;
  }

  std::string name_;
  EmbeddingModel model_;
  LabelIndex labels_;
  std::vector<double> norms_;
};

struct CombinedSimilarity {
  double combined = 0;
  std::map<std::string, double> per_dataset;
};

/// A named set of datasets. Immutable once built; share it through
/// shared_ptr<const ModelStore> and replace the whole object to hot-swap.
class ModelStore {
 public:
  void add(std::shared_ptr<const Dataset> ds) {
    const std::string name = ds->name();
    if (!datasets_.emplace(name, std::move(ds)).second) throw Error("duplicate dataset name: " + name);
  }

  void add(std::string name, EmbeddingModel model, LabelIndex labels) {
    add(std::make_shared<const Dataset>(std::move(name), std::move(model), std::move(labels)));
  }

  const Dataset& get(std::string_view name) const {
    auto it = datasets_.find(std::string(name));
    if (it == datasets_.end()) throw DatasetNotFound(std::string(name));
    return *it->second;
  }

  bool contains(std::string_view name) const { return datasets_.contains(std::string(name)); }
  std::size_t size() const { return datasets_.size(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : datasets_) out.push_back(name);
    return out;
  }

  std::vector<Resolved> resolve(std::string_view dataset, std::string_view label) const {
    return get(dataset).resolve(label);
  }
  Similarity similarity(std::string_view dataset, std::string_view a, std::string_view b) const {
    return get(dataset).similarity(a, b);
  }
  std::vector<Neighbor> closest_concepts(std::string_view dataset, std::string_view label, std::size_t n) const {
    return get(dataset).closest(label, n);
  }
  AnalogyResult analogy(std::string_view dataset, std::string_view a, std::string_view b, std::string_view c,
                        std::size_t n) const {
    return get(dataset).analogy(a, b, c, n);
  }

  /// Unnormalized sum of per-dataset similarities, added in name order; OOV
  /// datasets add 0.
  CombinedSimilarity combined_similarity(const std::vector<std::string>& datasets, std::string_view a,
                                         std::string_view b) const {
    CombinedSimilarity out;
    for (const auto& d : datasets) out.per_dataset[d] = get(d).similarity(a, b).score;
    for (const auto& [_, s] : out.per_dataset) out.combined += s;
    return out;
  }

  CombinedSimilarity combined_similarity(std::string_view a, std::string_view b) const {
    return combined_similarity(names(), a, b);
  }

 private:
  std::map<std::string, std::shared_ptr<const Dataset>> datasets_;
};

}  // namespace kgvec
