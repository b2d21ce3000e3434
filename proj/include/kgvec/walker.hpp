#pragma once

// Duplicate-free random walks over a Graph, and corpus generation.
//
// A walk is a token sequence v0 e1 v1 e2 v2 ... where every (v_i, e_i+1, v_i+1)
// is an adjacency entry. Depth counts the tokens after the start vertex, edges
// included, so depth 8 means four hops and at most nine tokens.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "kgvec/error.hpp"
#include "kgvec/graph.hpp"
#include "kgvec/rng.hpp"

namespace kgvec {

struct WalkConfig {
  std::size_t depth = 8;
  std::size_t walks_per_entity = 100;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const {
    if (depth % 2 != 0) throw std::invalid_argument("walk depth must be even");
    if (walks_per_entity < 1) throw std::invalid_argument("walks per entity must be >= 1");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  }
};

/// Even positions hold NodeIds, odd positions EdgeIds.
using Walk = std::vector<std::uint32_t>;

/// Performs one random walk of at most `depth` tokens after `start`.
inline Walk random_walk(const Graph& g, NodeId start, std::size_t depth, Engine& rng) {
  Walk w;
  w.reserve(depth + 1);
  w.push_back(start);
  NodeId at = start;
  for (std::size_t hop = 0; hop < depth / 2; ++hop) {
    const auto& out = g.out(at);
    if (out.empty()) break;
    const Hop& h = out[uniform_index(rng, out.size())];
    w.push_back(h.edge);
    w.push_back(h.target);
    at = h.target;
  }
  return w;
}

/// Makes `walks_per_entity` sampling attempts from `start` and keeps the
/// distinct walks, in order of first appearance. The RNG stream depends only
/// on (seed, start), so results do not depend on the order entities are
/// processed in.
inline std::vector<Walk> generate_walks(const Graph& g, NodeId start, const WalkConfig& config) {
  config.validate();
  if (start >= g.vertex_count()) throw std::out_of_range("start vertex out of range");
  Engine rng(derive_seed(config.seed, start));
  std::vector<Walk> walks;
  std::set<Walk> seen;
  for (std::size_t i = 0; i < config.walks_per_entity; ++i) {
    Walk w = random_walk(g, start, config.depth, rng);
    if (seen.insert(w).second) walks.push_back(std::move(w));
    // A vertex without out-edges can only ever produce [start].
    if (g.out(start).empty()) break;
  }
  return walks;
}

inline std::string render_walk(const Graph& g, const Walk& w) {
  std::string line;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i > 0) line.push_back(' ');
    line += (i % 2 == 0) ? g.node_name(w[i]) : g.edge_name(w[i]);
  }
  return line;
}

struct CorpusStats {
  std::size_t entities = 0;
  std::size_t walks = 0;
  std::size_t tokens = 0;
  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

class CorpusWriteError : public IoError {
 public:
  CorpusWriteError(const std::string& what, CorpusStats partial)
      : IoError(what + " (entities=" + std::to_string(partial.entities) +
                ", walks=" + std::to_string(partial.walks) + ", tokens=" + std::to_string(partial.tokens) + ")"),
        partial_(partial) {}

  const CorpusStats& partial() const noexcept { return partial_; }

 private:
  CorpusStats partial_;
};

/// Writes one line per walk for every vertex of `g`. With threads == 1 the
/// output is in vertex-id order and byte-reproducible; with more threads the
/// per-entity blocks stay contiguous but may interleave in any order.
inline CorpusStats generate_corpus(const Graph& g, const WalkConfig& config, std::ostream& sink) {
  config.validate();
  CorpusStats total;
  std::mutex sink_mu;
  std::atomic<std::size_t> next_vertex{0};
  bool failed = false;

  auto worker = [&] {
    while (true) {
      const std::size_t v = next_vertex.fetch_add(1);
      if (v >= g.vertex_count()) return;
      const auto walks = generate_walks(g, static_cast<NodeId>(v), config);
      std::string block;
      std::size_t tokens = 0;
      for (const auto& w : walks) {
        block += render_walk(g, w);
        block.push_back('\n');
        tokens += w.size();
      }
      std::lock_guard lock(sink_mu);
      if (failed) return;
      sink.write(block.data(), static_cast<std::streamsize>(block.size()));
      if (!sink) {
        failed = true;
        return;
      }
      ++total.entities;
      total.walks += walks.size();
      total.tokens += tokens;
    }
  };

  if (config.threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < config.threads; ++t) pool.emplace_back(worker);
  }
  if (failed) throw CorpusWriteError("corpus sink write failed", total);
  sink.flush();
  if (!sink) throw CorpusWriteError("corpus sink flush failed", total);
  return total;
}

}  // namespace kgvec
