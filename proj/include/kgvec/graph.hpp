#pragma once

// Interned, walk-ready directed multigraph built from RDF statements.

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "kgvec/error.hpp"
#include "kgvec/ntriples.hpp"

namespace kgvec {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

/// Bijection between strings and dense ids, assigned in first-seen order.
class Interner {
 public:
  std::uint32_t intern(std::string_view s) {
    if (auto it = ids_.find(std::string(s)); it != ids_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(s);
    ids_.emplace(names_.back(), id);
    return id;
  }

  std::optional<std::uint32_t> find(std::string_view s) const {
    if (auto it = ids_.find(std::string(s)); it != ids_.end()) return it->second;
    return std::nullopt;
  }

  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

struct Hop {
  EdgeId edge;
  NodeId target;
  friend bool operator==(const Hop&, const Hop&) = default;
};

struct GraphStats {
  std::size_t vertices = 0;
  std::size_t predicates = 0;
  std::size_t adjacency_entries = 0;
  std::size_t dropped_literals = 0;
  friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

/// Node tokens are bare IRIs, or "_:label" for blank nodes.
inline std::string node_token(const rdf::Subject& s) {
  if (const auto* iri = std::get_if<rdf::Iri>(&s)) return iri->value;
  return "_:" + std::get<rdf::BlankNode>(s).label;
}

class Graph {
 public:
  std::size_t vertex_count() const { return nodes_.size(); }
  std::size_t predicate_count() const { return edges_.size(); }

  const std::vector<Hop>& out(NodeId v) const { return adjacency_.at(v); }

  const std::string& node_name(NodeId v) const { return nodes_.name(v); }
  const std::string& edge_name(EdgeId e) const { return edges_.name(e); }
  std::optional<NodeId> node_id(std::string_view name) const { return nodes_.find(name); }
  std::optional<EdgeId> edge_id(std::string_view name) const { return edges_.find(name); }

  GraphStats stats() const {
    GraphStats s;
    s.vertices = vertex_count();
    s.predicates = predicate_count();
    for (const auto& hops : adjacency_) s.adjacency_entries += hops.size();
    s.dropped_literals = dropped_literals_;
    return s;
  }

  void save(const std::string& path) const;
  static Graph load(const std::string& path);

 private:
  friend class GraphBuilder;

  Interner nodes_;
  Interner edges_;
  std::vector<std::vector<Hop>> adjacency_;
  std::size_t dropped_literals_ = 0;
};

inline GraphStats graph_stats(const Graph& g) { return g.stats(); }

/// Accumulates triples. Literal-object statements are counted and dropped;
/// identical (subject, predicate, object) statements collapse to one entry.
class GraphBuilder {
 public:
  void add(const rdf::Triple& t) {
    if (rdf::is_literal(t.object)) {
      ++g_.dropped_literals_;
      return;
    }
    const NodeId s = add_node(node_token(t.subject));
    const EdgeId p = g_.edges_.intern(t.predicate.value);
    const NodeId o = std::holds_alternative<rdf::Iri>(t.object)
                         ? add_node(std::get<rdf::Iri>(t.object).value)
                         : add_node("_:" + std::get<rdf::BlankNode>(t.object).label);
    const std::uint64_t key = (static_cast<std::uint64_t>(p) << 32) | o;
    if (seen_[s].insert(key).second) g_.adjacency_[s].push_back(Hop{p, o});
  }

  void operator()(const rdf::Triple& t) { add(t); }

  Graph build() && {
    seen_.clear();
    return std::move(g_);
  }

 private:
  NodeId add_node(const std::string& name) {
    const NodeId id = g_.nodes_.intern(name);
    if (id == g_.adjacency_.size()) {
      g_.adjacency_.emplace_back();
      seen_.emplace_back();
    }
    return id;
  }

  Graph g_;
  std::vector<std::unordered_set<std::uint64_t>> seen_;
};

template <typename Range>
Graph build_graph(const Range& triples) {
  GraphBuilder b;
  for (const auto& t : triples) b.add(t);
  return std::move(b).build();
}

// ---------------------------------------------------------------------------
// Snapshot format (text, one record per line):
//
//   kgvec-graph 1
//   nodes <N>            followed by N node tokens, id order
//   edges <E>            followed by E predicate IRIs, id order
//   dropped <K>
//   adjacency <M>        followed by M lines "<src> <edge> <dst>"

inline constexpr std::string_view kGraphMagic = "kgvec-graph";
inline constexpr int kGraphVersion = 1;

inline void Graph::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << kGraphMagic << ' ' << kGraphVersion << '\n';
  out << "nodes " << nodes_.size() << '\n';
  for (const auto& n : nodes_.names()) out << n << '\n';
  out << "edges " << edges_.size() << '\n';
  for (const auto& e : edges_.names()) out << e << '\n';
  out << "dropped " << dropped_literals_ << '\n';
  const GraphStats s = stats();
  out << "adjacency " << s.adjacency_entries << '\n';
  for (NodeId v = 0; v < adjacency_.size(); ++v) {
    for (const Hop& h : adjacency_[v]) out << v << ' ' << h.edge << ' ' << h.target << '\n';
  }
  if (!out.flush()) throw IoError("write failed: " + path);
}

inline Graph Graph::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::size_t line_no = 0;
  std::string line;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError("unexpected end of graph snapshot", line_no + 1);
    ++line_no;
    return line;
  };
  auto header = [&](std::string_view key) -> std::size_t {
    const std::string& l = next();
    const std::string prefix = std::string(key) + ' ';
    if (l.rfind(prefix, 0) != 0) throw ParseError("expected '" + std::string(key) + "'", line_no);
    try {
      return std::stoull(l.substr(prefix.size()));
    } catch (const std::exception&) {
      throw ParseError("bad count", line_no);
    }
  };

  if (next() != std::string(kGraphMagic) + ' ' + std::to_string(kGraphVersion)) {
    throw ParseError("not a kgvec graph snapshot (version " + std::to_string(kGraphVersion) + ")", 1);
  }
  Graph g;
  const std::size_t n = header("nodes");
  for (std::size_t i = 0; i < n; ++i) {
    if (g.nodes_.intern(next()) != i) throw ParseError("duplicate node", line_no);
  }
  g.adjacency_.resize(n);
  const std::size_t e = header("edges");
  for (std::size_t i = 0; i < e; ++i) {
    if (g.edges_.intern(next()) != i) throw ParseError("duplicate edge", line_no);
  }
  g.dropped_literals_ = header("dropped");
  const std::size_t m = header("adjacency");
  for (std::size_t i = 0; i < m; ++i) {
    unsigned long long src = 0, edge = 0, dst = 0;
    if (std::sscanf(next().c_str(), "%llu %llu %llu", &src, &edge, &dst) != 3 || src >= n ||
        dst >= n || edge >= e) {
      throw ParseError("bad adjacency entry", line_no);
    }
    g.adjacency_[src].push_back(Hop{static_cast<EdgeId>(edge), static_cast<NodeId>(dst)});
  }
  return g;
}

}  // namespace kgvec
