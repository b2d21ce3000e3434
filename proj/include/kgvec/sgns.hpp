#pragma once

// Skip-gram with negative sampling over a walk corpus.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "kgvec/error.hpp"
#include "kgvec/io.hpp"
#include "kgvec/model.hpp"
#include "kgvec/rng.hpp"

namespace kgvec {

enum class TrainingMode { kSkipGram, kCbow };

inline std::string to_string(TrainingMode m) { return m == TrainingMode::kSkipGram ? "skip-gram" : "cbow"; }

struct TrainingConfig {
  std::size_t dim = 200;
  std::size_t window = 5;
  std::size_t epochs = 5;
  std::size_t negatives = 25;
  TrainingMode mode = TrainingMode::kSkipGram;
  double alpha = 0.025;
  double min_alpha = 1e-4;
  std::size_t min_count = 1;
  double sample = 0.0;  // frequent-token subsampling threshold; 0 disables
  double ns_power = 0.75;
  std::uint64_t seed = 1;
  std::size_t threads = 1;  // >1 trains lock-free and is not reproducible

  void validate() const {
    if (dim < 1) throw std::invalid_argument("dim must be >= 1");
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(alpha > min_alpha) || min_alpha < 0) throw std::invalid_argument("require alpha > min_alpha >= 0");
    if (sample < 0) throw std::invalid_argument("sample must be >= 0");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  }

  nlohmann::json to_json() const {
    return {{"dim", dim},       {"window", window},       {"epochs", epochs},
            {"negative", negatives}, {"mode", to_string(mode)}, {"alpha", alpha},
            {"min_alpha", min_alpha}, {"min_count", min_count}, {"sample", sample},
            {"ns_power", ns_power}, {"seed", seed},           {"threads", threads}};
  }
};

// ---------------------------------------------------------------------------
// Vocabulary

struct Vocabulary {
  std::vector<std::string> tokens;
  std::vector<std::uint64_t> counts;
  std::unordered_map<std::string, std::uint32_t> index;
  std::uint64_t total = 0;  // occurrences of retained tokens

  std::size_t size() const { return tokens.size(); }

  std::optional<std::uint32_t> find(const std::string& token) const {
    if (auto it = index.find(token); it != index.end()) return it->second;
    return std::nullopt;
  }
};

namespace detail {

template <typename F>
void for_each_token(std::string_view line, F&& f) {
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) f(line.substr(start, i - start));
  }
}

}  // namespace detail

/// Counts tokens of a line-oriented corpus. Indices are assigned by
/// descending frequency, ties broken by first occurrence.
inline Vocabulary build_vocab(std::istream& corpus, std::size_t min_count) {
  std::unordered_map<std::string, std::size_t> first_seen;
  std::vector<std::string> order;
  std::vector<std::uint64_t> freq;
  std::string line;
  while (std::getline(corpus, line)) {
    detail::for_each_token(line, [&](std::string_view tok) {
      auto [it, inserted] = first_seen.try_emplace(std::string(tok), order.size());
      if (inserted) {
        order.emplace_back(tok);
        freq.push_back(0);
      }
      ++freq[it->second];
    });
  }
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (freq[i] >= min_count) ids.push_back(i);
  }
  if (ids.empty()) throw Error("no trainable tokens");
  std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) { return freq[a] > freq[b]; });
  Vocabulary v;
  for (std::size_t id : ids) {
    v.index.emplace(order[id], static_cast<std::uint32_t>(v.tokens.size()));
    v.tokens.push_back(order[id]);
    v.counts.push_back(freq[id]);
    v.total += freq[id];
  }
  return v;
}

// ---------------------------------------------------------------------------
// Negative sampling distribution

/// Draws index i with probability count(i)^power / sum_j count(j)^power via
/// inverse-CDF lookup.
class NegativeSampler {
 public:
  NegativeSampler(std::span<const std::uint64_t> counts, double power = 0.75) {
    if (counts.empty()) throw std::invalid_argument("negative sampler needs a non-empty vocabulary");
    cdf_.reserve(counts.size());
    double acc = 0;
    for (auto c : counts) {
      acc += std::pow(static_cast<double>(c), power);
      cdf_.push_back(acc);
    }
    for (double& x : cdf_) x /= acc;
    cdf_.back() = 1.0;
  }

  std::size_t size() const { return cdf_.size(); }

  double probability(std::size_t i) const { return i == 0 ? cdf_[0] : cdf_[i] - cdf_[i - 1]; }

  std::uint32_t sample(Engine& rng) const {
    const double u = uniform_unit(rng);
    return static_cast<std::uint32_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

inline NegativeSampler negative_table(const Vocabulary& v, double power = 0.75) {
  return NegativeSampler(v.counts, power);
}

// ---------------------------------------------------------------------------
// Loss and gradient

/// Input ("published") and output (context) matrices, row-major.
template <typename T>
struct EmbeddingMatrices {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<T> input;
  std::vector<T> output;

  EmbeddingMatrices() = default;
  EmbeddingMatrices(std::size_t r, std::size_t d) : rows(r), dim(d), input(r * d), output(r * d) {}

  std::span<T> in(std::size_t r) { return {input.data() + r * dim, dim}; }
  std::span<const T> in(std::size_t r) const { return {input.data() + r * dim, dim}; }
  std::span<T> out(std::size_t r) { return {output.data() + r * dim, dim}; }
  std::span<const T> out(std::size_t r) const { return {output.data() + r * dim, dim}; }
};

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// -log(sigmoid(x)) without overflow.
inline double neg_log_sigmoid(double x) { return x >= 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename T>
struct PairGradient {
  T loss = 0;
  std::vector<T> center;                         // d loss / d input[center]
  std::map<std::size_t, std::vector<T>> output;  // d loss / d output[row], duplicates accumulated
};

/// L = -log s(u_o . v_c) - sum_n log s(-u_n . v_c), with v_c the input row of
/// `center`, u_o the output row of `context` and u_n the output rows of the
/// negatives. Gradients are exact and evaluated at the given parameters.
template <typename T>
PairGradient<T> sgns_pair_loss(std::size_t center, std::size_t context, std::span<const std::size_t> negatives,
                               const EmbeddingMatrices<T>& m) {
  PairGradient<T> g;
  g.center.assign(m.dim, T(0));
  const auto v_c = m.in(center);

  auto term = [&](std::size_t row, bool positive) {
    const auto u = m.out(row);
    const double score = static_cast<double>(dot<T>(u, v_c));
    g.loss += static_cast<T>(positive ? neg_log_sigmoid(score) : neg_log_sigmoid(-score));
    // d/dscore of the term: sigmoid(score) - label
    const T coeff = static_cast<T>(sigmoid(score) - (positive ? 1.0 : 0.0));
    auto& gu = g.output[row];
    if (gu.empty()) gu.assign(m.dim, T(0));
    for (std::size_t i = 0; i < m.dim; ++i) {
      g.center[i] += coeff * u[i];
      gu[i] += coeff * v_c[i];
    }
  };
  term(context, true);
  for (std::size_t n : negatives) term(n, false);
  return g;
}

// ---------------------------------------------------------------------------
// Training

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Sentences stored as one flat index array plus offsets; tokens dropped by
/// min_count are removed before training.
struct EncodedCorpus {
  std::vector<std::uint32_t> tokens;
  std::vector<std::size_t> offsets{0};
  std::uint64_t hash = 0;  // FNV-1a over the raw corpus bytes

  std::size_t sentences() const { return offsets.size() - 1; }
  std::span<const std::uint32_t> sentence(std::size_t i) const {
    return {tokens.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
};

inline EncodedCorpus encode_corpus(std::istream& corpus, const Vocabulary& vocab) {
  EncodedCorpus enc;
  Fnv1a h;
  std::string line;
  while (std::getline(corpus, line)) {
    h.update(line);
    h.update("\n");
    detail::for_each_token(line, [&](std::string_view tok) {
      if (auto it = vocab.index.find(std::string(tok)); it != vocab.index.end()) enc.tokens.push_back(it->second);
    });
    if (enc.tokens.size() > enc.offsets.back()) enc.offsets.push_back(enc.tokens.size());
  }
  enc.hash = h.digest();
  return enc;
}

struct TrainingReport {
  std::vector<double> epoch_mean_loss;
  std::uint64_t pairs = 0;
};

class SgnsTrainer {
 public:
  SgnsTrainer(Vocabulary vocab, TrainingConfig config)
      : vocab_(std::move(vocab)), config_(config), sampler_(vocab_.counts, config.ns_power) {
    config_.validate();
    if (vocab_.size() == 0) throw Error("no trainable tokens");
    weights_ = EmbeddingMatrices<float>(vocab_.size(), config_.dim);
    Engine init(derive_seed(config_.seed, 0xC0FFEE));
    const double scale = 0.5 / static_cast<double>(config_.dim);
    for (float& w : weights_.input) w = static_cast<float>((uniform_unit(init) * 2.0 - 1.0) * scale);
    if (config_.sample > 0) {
      const double threshold = config_.sample * static_cast<double>(vocab_.total);
      keep_prob_.resize(vocab_.size());
      for (std::size_t i = 0; i < vocab_.size(); ++i) {
        const double f = static_cast<double>(vocab_.counts[i]);
        keep_prob_[i] = std::min(1.0, (std::sqrt(f / threshold) + 1.0) * threshold / f);
      }
    }
  }

  const Vocabulary& vocab() const { return vocab_; }
  const TrainingConfig& config() const { return config_; }
  const EmbeddingMatrices<float>& weights() const { return weights_; }
  EmbeddingMatrices<float>& weights() { return weights_; }

  /// One SGD step on a (center, context) pair with the given negatives.
  /// Returns the pair loss evaluated before the update.
  double step(std::size_t center, std::size_t context, std::span<const std::uint32_t> negatives, float lr) {
    return step(center, context, negatives, lr, neu1e_);
  }

  double step(std::size_t center, std::size_t context, std::span<const std::uint32_t> negatives, float lr,
              std::vector<float>& neu1e) {
    auto v_c = weights_.in(center);
    neu1e.assign(config_.dim, 0.0f);
    double loss = 0;
    auto apply = [&](std::size_t row, bool positive) {
      auto u = weights_.out(row);
      const double score = dot<float>(u, v_c);
      loss += positive ? neg_log_sigmoid(score) : neg_log_sigmoid(-score);
      const float g = static_cast<float>(((positive ? 1.0 : 0.0) - sigmoid(score)) * lr);
      for (std::size_t i = 0; i < config_.dim; ++i) neu1e[i] += g * u[i];
      for (std::size_t i = 0; i < config_.dim; ++i) u[i] += g * v_c[i];
    };
    apply(context, true);
    for (auto n : negatives) apply(n, false);
    for (std::size_t i = 0; i < config_.dim; ++i) v_c[i] += neu1e[i];
    return loss;
  }

  TrainingReport train(const EncodedCorpus& corpus) {
    TrainingReport report;
    const double scheduled = static_cast<double>(config_.epochs) * static_cast<double>(corpus.tokens.size());
    std::uint64_t processed = 0;
    for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
      double loss_sum = 0;
      std::uint64_t pairs = 0;
      if (config_.threads == 1) {
        Engine rng(derive_seed(config_.seed, epoch + 1));
        run_range(corpus, 0, corpus.sentences(), rng, processed, scheduled, loss_sum, pairs, epoch);
      } else {
        std::vector<double> losses(config_.threads, 0);
        std::vector<std::uint64_t> counts(config_.threads, 0);
        std::vector<std::uint64_t> progress(config_.threads, 0);
        {
          std::vector<std::jthread> pool;
          for (std::size_t t = 0; t < config_.threads; ++t) {
            pool.emplace_back([&, t] {
              Engine rng(derive_seed(config_.seed, (epoch + 1) * 1000003ULL + t));
              const std::size_t n = corpus.sentences();
              std::uint64_t local = processed;
              run_range(corpus, n * t / config_.threads, n * (t + 1) / config_.threads, rng, local, scheduled,
                        losses[t], counts[t], epoch);
              progress[t] = local - processed;
            });
          }
        }
        for (std::size_t t = 0; t < config_.threads; ++t) {
          loss_sum += losses[t];
          pairs += counts[t];
          processed += progress[t];
        }
      }
      report.pairs += pairs;
      report.epoch_mean_loss.push_back(pairs > 0 ? loss_sum / static_cast<double>(pairs) : 0.0);
    }
    return report;
  }

  EmbeddingModel to_model(const TrainingReport& report, std::uint64_t corpus_hash) const {
    EmbeddingModel m(config_.dim);
    for (std::size_t r = 0; r < vocab_.size(); ++r) m.add(vocab_.tokens[r], weights_.in(r));
    nlohmann::json meta = config_.to_json();
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(corpus_hash));
    meta["corpus_hash"] = hex;
    meta["vocab_size"] = vocab_.size();
    meta["corpus_tokens"] = vocab_.total;
    meta["pairs"] = report.pairs;
    meta["epoch_mean_loss"] = report.epoch_mean_loss;
    m.set_metadata(std::move(meta));
    return m;
  }

 private:
  void run_range(const EncodedCorpus& corpus, std::size_t begin, std::size_t end, Engine& rng,
                 std::uint64_t& processed, double scheduled, double& loss_sum, std::uint64_t& pairs,
                 std::size_t epoch) {
    std::vector<std::uint32_t> sentence;
    std::vector<std::uint32_t> negs(config_.negatives);
    std::vector<float> hidden, neu1e;
    for (std::size_t s = begin; s < end; ++s) {
      const auto raw = corpus.sentence(s);
      sentence.clear();
      for (auto tok : raw) {
        if (keep_prob_.empty() || uniform_unit(rng) < keep_prob_[tok]) sentence.push_back(tok);
      }
      const double progress = static_cast<double>(processed) / scheduled;
      const float lr = static_cast<float>(std::max(config_.min_alpha, config_.alpha - (config_.alpha - config_.min_alpha) * progress));
      processed += raw.size();

      for (std::size_t pos = 0; pos < sentence.size(); ++pos) {
        const std::size_t radius = 1 + uniform_index(rng, config_.window);
        const std::size_t lo = pos >= radius ? pos - radius : 0;
        const std::size_t hi = std::min(sentence.size() - 1, pos + radius);
        if (config_.mode == TrainingMode::kSkipGram) {
          for (std::size_t j = lo; j <= hi; ++j) {
            if (j == pos) continue;
            draw_negatives(rng, sentence[j], negs);
            const double loss = step(sentence[pos], sentence[j], negs, lr, neu1e);
            check_finite(loss, epoch, s, pos);
            loss_sum += loss;
            ++pairs;
          }
        } else {
          if (hi == lo) continue;
          draw_negatives(rng, sentence[pos], negs);
          const double loss = cbow_step(sentence, lo, hi, pos, negs, lr, hidden, neu1e);
          check_finite(loss, epoch, s, pos);
          loss_sum += loss;
          ++pairs;
        }
      }
    }
  }

  void draw_negatives(Engine& rng, std::uint32_t positive, std::vector<std::uint32_t>& negs) const {
    for (auto& n : negs) {
      n = sampler_.sample(rng);
      if (n == positive) n = sampler_.sample(rng);  // one retry, then accept
    }
  }

  double cbow_step(const std::vector<std::uint32_t>& sentence, std::size_t lo, std::size_t hi, std::size_t pos,
                   std::span<const std::uint32_t> negatives, float lr, std::vector<float>& hidden,
                   std::vector<float>& neu1e) {
    const std::size_t dim = config_.dim;
    hidden.assign(dim, 0.0f);
    neu1e.assign(dim, 0.0f);
    const float inv = 1.0f / static_cast<float>(hi - lo);
    for (std::size_t j = lo; j <= hi; ++j) {
      if (j == pos) continue;
      const auto v = weights_.in(sentence[j]);
      for (std::size_t i = 0; i < dim; ++i) hidden[i] += v[i] * inv;
    }
    double loss = 0;
    auto apply = [&](std::size_t row, bool positive) {
      auto u = weights_.out(row);
      const double score = dot<float>(u, hidden);
      loss += positive ? neg_log_sigmoid(score) : neg_log_sigmoid(-score);
      const float g = static_cast<float>(((positive ? 1.0 : 0.0) - sigmoid(score)) * lr);
      for (std::size_t i = 0; i < dim; ++i) neu1e[i] += g * u[i];
      for (std::size_t i = 0; i < dim; ++i) u[i] += g * hidden[i];
    };
    apply(sentence[pos], true);
    for (auto n : negatives) apply(n, false);
    for (std::size_t j = lo; j <= hi; ++j) {
      if (j == pos) continue;
      auto v = weights_.in(sentence[j]);
      for (std::size_t i = 0; i < dim; ++i) v[i] += neu1e[i] * inv;
    }
    return loss;
  }

  static void check_finite(double loss, std::size_t epoch, std::size_t sentence, std::size_t pos) {
    if (!std::isfinite(loss)) {
      throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", sentence " +
                          std::to_string(sentence) + ", position " + std::to_string(pos) +
                          "; try a smaller learning rate");
    }
  }

  Vocabulary vocab_;
  TrainingConfig config_;
  NegativeSampler sampler_;
  EmbeddingMatrices<float> weights_;
  std::vector<double> keep_prob_;
  std::vector<float> neu1e_;
};

/// Builds the vocabulary, trains, and returns the input matrix as a model.
inline EmbeddingModel train(const std::string& corpus_path, const TrainingConfig& config,
                            TrainingReport* report_out = nullptr) {
  config.validate();
  Vocabulary vocab;
  {
    std::ifstream in(corpus_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + corpus_path);
    vocab = build_vocab(in, config.min_count);
  }
  EncodedCorpus corpus;
  {
    std::ifstream in(corpus_path, std::ios::binary);
    corpus = encode_corpus(in, vocab);
  }
  SgnsTrainer trainer(std::move(vocab), config);
  TrainingReport report = trainer.train(corpus);
  if (report_out != nullptr) *report_out = report;
  return trainer.to_model(report, corpus.hash);
}

}  // namespace kgvec
