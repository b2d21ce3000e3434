#pragma once

// Word-similarity evaluation: gold standard loading, Spearman's rho, and a
// rho matrix over datasets x gold standards.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kgvec/error.hpp"
#include "kgvec/io.hpp"
#include "kgvec/store.hpp"

namespace kgvec::eval {

enum class GoldFormat { kWs353, kSimLex, kMen, kMenLemma };

inline GoldFormat parse_gold_format(std::string_view s) {
  if (s == "ws353") return GoldFormat::kWs353;
  if (s == "simlex") return GoldFormat::kSimLex;
  if (s == "men") return GoldFormat::kMen;
  if (s == "men-lemma") return GoldFormat::kMenLemma;
  throw Error("unknown gold standard format '" + std::string(s) + "' (expected ws353, simlex, men or men-lemma)");
}

struct GoldPair {
  std::string word1;
  std::string word2;
  double score;
};

struct GoldStandard {
  std::string name;
  std::vector<GoldPair> pairs;
  double scale_min = 0;
  double scale_max = 10;
};

namespace detail {

inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  while (true) {
    const auto p = line.find(sep);
    out.emplace_back(trim(line.substr(0, p)));
    if (p == std::string_view::npos) break;
    line.remove_prefix(p + 1);
  }
  return out;
}

inline std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

/// Header key comparison: case-insensitive, spaces ignored.
inline std::string header_key(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == ' ') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

inline double parse_score(const std::string& s, std::size_t row) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("non-numeric score '" + s + "'", row);
  }
  if (used != s.size() || std::isnan(v)) throw ParseError("non-numeric score '" + s + "'", row);
  return v;
}

inline std::string strip_pos_suffix(const std::string& w) {
  if (w.size() > 2 && w[w.size() - 2] == '-') return w.substr(0, w.size() - 2);
  return w;
}

}  // namespace detail

/// Reads a gold standard in one of the published layouts:
///   ws353      CSV with header Word1,Word2,Human(mean)
///   simlex     TSV with header containing word1, word2, SimLex999
///   men        "w1 w2 score" rows, scores 0..50, no header
///   men-lemma  as men, with "-n"/"-v"/"-j" suffixes stripped from words
inline GoldStandard load_gold(const std::string& path, GoldFormat format, std::string name = {}) {
  GoldStandard gold;
  gold.name = name.empty() ? std::string(local_name(path)) : std::move(name);
  LineReader reader(path);
  std::string line;
  std::size_t row = 0;

  if (format == GoldFormat::kMen || format == GoldFormat::kMenLemma) {
    gold.scale_max = 50;
    while (reader.next(line)) {
      ++row;
      if (trim(line).empty()) continue;
      auto cols = detail::split_ws(line);
      if (cols.size() != 3) throw ParseError("expected 'word1 word2 score'", row);
      if (format == GoldFormat::kMenLemma) {
        cols[0] = detail::strip_pos_suffix(cols[0]);
        cols[1] = detail::strip_pos_suffix(cols[1]);
      }
      gold.pairs.push_back({cols[0], cols[1], detail::parse_score(cols[2], row)});
    }
  } else {
    const char sep = format == GoldFormat::kWs353 ? ',' : '\t';
    const std::vector<std::string> wanted =
        format == GoldFormat::kWs353 ? std::vector<std::string>{"word1", "word2", "human(mean)"}
                                     : std::vector<std::string>{"word1", "word2", "simlex999"};
    if (!reader.next(line)) throw ParseError("missing header", 1);
    ++row;
    const auto header = detail::split(line, sep);
    std::vector<std::size_t> idx;
    for (const auto& w : wanted) {
      auto it = std::find_if(header.begin(), header.end(), [&](const std::string& h) { return detail::header_key(h) == w; });
      if (it == header.end()) throw ParseError("header lacks column '" + w + "'", 1);
      idx.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    const std::size_t need = *std::max_element(idx.begin(), idx.end()) + 1;
    while (reader.next(line)) {
      ++row;
      if (trim(line).empty()) continue;
      const auto cols = detail::split(line, sep);
      if (cols.size() < need) throw ParseError("too few columns", row);
      gold.pairs.push_back({cols[idx[0]], cols[idx[1]], detail::parse_score(cols[idx[2]], row)});
    }
  }
  if (gold.pairs.size() < 2) throw Error("gold standard " + path + " has fewer than 2 pairs");
  return gold;
}

// ---------------------------------------------------------------------------
// Spearman's rho

class UndefinedCorrelation : public Error {
 public:
  using Error::Error;
};

/// Fractional ranks (1-based); tied values share the mean of their ranks.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw UndefinedCorrelation("undefined correlation: zero rank variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error("spearman: length mismatch");
  if (x.size() < 2) throw Error("spearman: need at least 2 observations");
  return pearson(average_ranks(x), average_ranks(y));
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalResult {
  std::string gold;
  std::string dataset;  // or "combined"
  std::optional<double> rho;  // empty when the correlation is undefined
  std::size_t pairs = 0;
  std::size_t oov_word1_only = 0;
  std::size_t oov_word2_only = 0;
  std::size_t oov_both = 0;
  std::vector<double> scores;  // system score per gold pair

  std::size_t oov_pairs() const { return oov_word1_only + oov_word2_only + oov_both; }
};

inline constexpr std::string_view kCombined = "combined";

namespace detail {

inline EvalResult score_pairs(const ModelStore& store, const std::vector<std::string>& datasets, bool combined,
                              const GoldStandard& gold) {
  EvalResult r;
  r.gold = gold.name;
  r.dataset = combined ? std::string(kCombined) : datasets.at(0);
  r.pairs = gold.pairs.size();
  auto known = [&](const std::string& w) {
    return std::any_of(datasets.begin(), datasets.end(),
                       [&](const std::string& d) { return !store.get(d).resolve(w).empty(); });
  };
  for (const auto& p : gold.pairs) {
    const bool k1 = known(p.word1);
    const bool k2 = known(p.word2);
    if (!k1 && !k2) {
      ++r.oov_both;
    } else if (!k1) {
      ++r.oov_word1_only;
    } else if (!k2) {
      ++r.oov_word2_only;
    }
    r.scores.push_back(combined ? store.combined_similarity(datasets, p.word1, p.word2).combined
                                : store.similarity(datasets[0], p.word1, p.word2).score);
  }
  return r;
}

}  // namespace detail

/// Scores every gold pair with the model's similarity (OOV pairs score 0 and
/// stay in the correlation). Throws UndefinedCorrelation when the system
/// scores have no variance, e.g. when every pair is OOV.
inline EvalResult evaluate(const ModelStore& store, const std::string& dataset, const GoldStandard& gold) {
  EvalResult r = detail::score_pairs(store, {dataset}, false, gold);
  std::vector<double> human;
  for (const auto& p : gold.pairs) human.push_back(p.score);
  r.rho = spearman(r.scores, human);
  return r;
}

/// Combined mode: each pair scores the sum of per-dataset similarities.
inline EvalResult evaluate_combined(const ModelStore& store, const std::vector<std::string>& datasets,
                                    const GoldStandard& gold) {
  EvalResult r = detail::score_pairs(store, datasets, true, gold);
  std::vector<double> human;
  for (const auto& p : gold.pairs) human.push_back(p.score);
  r.rho = spearman(r.scores, human);
  return r;
}

/// Like evaluate/evaluate_combined but records an undefined correlation as
/// an empty rho instead of throwing, so a report can still be produced.
inline EvalResult evaluate_or_undefined(const ModelStore& store, const std::vector<std::string>& datasets,
                                        bool combined, const GoldStandard& gold) {
  try {
    return combined ? evaluate_combined(store, datasets, gold) : evaluate(store, datasets.at(0), gold);
  } catch (const UndefinedCorrelation&) {
    return detail::score_pairs(store, datasets, combined, gold);
  }
}

// ---------------------------------------------------------------------------
// Report

struct Report {
  std::string text;
  std::string csv;
};

namespace detail {

inline std::string fmt_rho(const std::optional<double>& rho) {
  if (!rho) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *rho);
  return buf;
}

inline std::string pad(std::string s, std::size_t width, bool right) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return right ? fill + s : s + fill;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace detail

/// Dataset x gold-standard matrix of rho values. Rows keep first-appearance
/// order with "combined" last; columns keep first-appearance order. The text
/// form adds an OOV table; undefined correlations print as "n/a".
inline Report report(const std::vector<EvalResult>& results) {
  std::vector<std::string> rows, cols;
  std::map<std::pair<std::string, std::string>, const EvalResult*> cell;
  bool has_combined = false;
  for (const auto& r : results) {
    if (r.dataset == kCombined) {
      has_combined = true;
    } else if (std::find(rows.begin(), rows.end(), r.dataset) == rows.end()) {
      rows.push_back(r.dataset);
    }
    if (std::find(cols.begin(), cols.end(), r.gold) == cols.end()) cols.push_back(r.gold);
    cell[{r.dataset, r.gold}] = &r;
  }
  if (has_combined) rows.emplace_back(kCombined);

  std::size_t w0 = std::string_view("dataset").size();
  for (const auto& r : rows) w0 = std::max(w0, r.size());
  std::vector<std::size_t> widths;
  for (const auto& c : cols) widths.push_back(std::max<std::size_t>(c.size(), 7));

  auto lookup = [&](const std::string& row, const std::string& col) -> const EvalResult* {
    auto it = cell.find({row, col});
    return it == cell.end() ? nullptr : it->second;
  };

  Report rep;
  std::string& t = rep.text;
  t += "Spearman rank correlation\n\n";
  t += detail::pad("dataset", w0, false);
  for (std::size_t j = 0; j < cols.size(); ++j) t += " | " + detail::pad(cols[j], widths[j], true);
  t += '\n' + std::string(w0, '-');
  for (std::size_t j = 0; j < cols.size(); ++j) t += "-+-" + std::string(widths[j], '-');
  t += '\n';
  for (const auto& row : rows) {
    t += detail::pad(row, w0, false);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto* r = lookup(row, cols[j]);
      t += " | " + detail::pad(r ? detail::fmt_rho(r->rho) : "", widths[j], true);
    }
    t += '\n';
  }
  t += "\nOOV pairs (word1 only / word2 only / both / total pairs)\n\n";
  for (const auto& row : rows) {
    for (const auto& col : cols) {
      const auto* r = lookup(row, col);
      if (r == nullptr) continue;
      t += detail::pad(row, w0, false) + " | " + col + ": " + std::to_string(r->oov_word1_only) + " / " +
           std::to_string(r->oov_word2_only) + " / " + std::to_string(r->oov_both) + " / " + std::to_string(r->pairs) +
           '\n';
    }
  }

  std::string& c = rep.csv;
  c += "dataset";
  for (const auto& col : cols) c += ',' + detail::csv_field(col);
  c += '\n';
  for (const auto& row : rows) {
    c += detail::csv_field(row);
    for (const auto& col : cols) {
      const auto* r = lookup(row, col);
      c += ',';
      if (r) c += detail::fmt_rho(r->rho);
    }
    c += '\n';
  }
  return rep;
}

}  // namespace kgvec::eval
