#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the code paths being checked.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgvec/graph.hpp"
#include "kgvec/sgns.hpp"

namespace kgvec::oracle {

/// Every walk a uniform random walker could produce from `start`: paths of
/// depth/2 hops, cut short only at vertices without out-edges.
inline std::set<std::vector<std::uint32_t>> enumerate_walks(const Graph& g, NodeId start, std::size_t depth) {
  std::set<std::vector<std::uint32_t>> out;
  std::vector<std::uint32_t> path{start};
  auto rec = [&](auto&& self, NodeId at, std::size_t hops_left) -> void {
    if (hops_left == 0 || g.out(at).empty()) {
      out.insert(path);
      return;
    }
    for (const Hop& h : g.out(at)) {
      path.push_back(h.edge);
      path.push_back(h.target);
      self(self, h.target, hops_left - 1);
      path.pop_back();
      path.pop_back();
    }
  };
  rec(rec, start, depth / 2);
  return out;
}

/// Ranks by brute force: for every element, count how many are smaller and
/// how many are equal, rank = smaller + (equal + 1) / 2.
inline std::vector<double> naive_average_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double smaller = 0, equal = 0;
    for (double y : x) {
      if (y < x[i]) smaller += 1;
      if (y == x[i]) equal += 1;
    }
    r[i] = smaller + (equal + 1) / 2.0;
  }
  return r;
}

/// Spearman via the textbook covariance formula on naive ranks.
inline double naive_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = naive_average_ranks(x);
  const auto ry = naive_average_ranks(y);
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += rx[i];
    sy += ry[i];
    sxx += rx[i] * rx[i];
    syy += ry[i] * ry[i];
    sxy += rx[i] * ry[i];
  }
  const double cov = sxy - sx * sy / n;
  return cov / std::sqrt((sxx - sx * sx / n) * (syy - sy * sy / n));
}

/// 1 - 6 sum d^2 / (n (n^2 - 1)); only valid without ties.
inline double closed_form_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto rank = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      r[i] = 1 + static_cast<double>(std::count_if(v.begin(), v.end(), [&](double t) { return t < v[i]; }));
    }
    return r;
  };
  const auto rx = rank(x), ry = rank(y);
  double d2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  const double n = static_cast<double>(x.size());
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

/// Plain cosine in long double.
inline double cos_ld(const std::vector<float>& a, const std::vector<float>& b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  if (aa == 0 || bb == 0) return 0.0;
  return static_cast<double>(ab / (std::sqrt(aa) * std::sqrt(bb)));
}

struct Scored {
  std::string token;
  double score;
};

/// Full sort of every candidate by (score desc, token asc), then truncate.
inline std::vector<Scored> brute_rank(std::map<std::string, double> scores, std::size_t n) {
  std::vector<Scored> all;
  for (auto& [t, s] : scores) all.push_back({t, s});
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
    return a.score != b.score ? a.score > b.score : a.token < b.token;
  });
  if (all.size() > n) all.resize(n);
  return all;
}


/// SGNS pair loss written out directly, for finite differencing.
inline double sgns_loss(std::size_t center, std::size_t context, std::span<const std::size_t> negatives,
                        const EmbeddingMatrices<double>& m) {
  auto d = [&](std::size_t out_row) {
    double s = 0;
    for (std::size_t i = 0; i < m.dim; ++i) s += m.input[center * m.dim + i] * m.output[out_row * m.dim + i];
    return s;
  };
  double loss = std::log1p(std::exp(-d(context)));
  for (std::size_t n : negatives) loss += std::log1p(std::exp(d(n)));
  return loss;
}

struct GradCheck {
  double max_rel_error = 0;        // row-wise: |a - n| / max(|a|, |n|) over each touched row
  double max_coord_rel_error = 0;  // per coordinate, denominator floored at 1e-6
  double max_abs_error = 0;
  std::size_t coordinates = 0;
};

/// Central differences (step h) on every coordinate of the center input row
/// and of every touched output row, compared with the analytic gradient.
inline GradCheck check_gradient(std::size_t center, std::size_t context, const std::vector<std::size_t>& negatives,
                                EmbeddingMatrices<double> m, double h = 1e-5) {
  const auto g = sgns_pair_loss<double>(center, context, negatives, m);
  GradCheck out;
  auto check_row = [&](std::vector<double>& params, std::size_t offset, const std::vector<double>& analytic) {
    double diff2 = 0, a2 = 0, n2 = 0;
    for (std::size_t i = 0; i < m.dim; ++i) {
      double& p = params[offset + i];
      const double saved = p;
      p = saved + h;
      const double up = sgns_loss(center, context, negatives, m);
      p = saved - h;
      const double down = sgns_loss(center, context, negatives, m);
      p = saved;
      const double numeric = (up - down) / (2 * h);
      const double err = std::abs(numeric - analytic[i]);
      diff2 += err * err;
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
      out.max_abs_error = std::max(out.max_abs_error, err);
      out.max_coord_rel_error =
          std::max(out.max_coord_rel_error, err / std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6}));
      ++out.coordinates;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    out.max_rel_error = std::max(out.max_rel_error, std::sqrt(diff2) / denom);
  };
  check_row(m.input, center * m.dim, g.center);
  for (const auto& [row, grad] : g.output) check_row(m.output, row * m.dim, grad);
  return out;
}

}  // namespace kgvec::oracle
