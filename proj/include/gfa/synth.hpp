#pragma once

// Stochastic block model graphs with Gaussian class-mean features.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "gfa/errors.hpp"
#include "gfa/graph.hpp"

namespace gfa {

/// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct SbmSpec {
  std::size_t n = 100;
  std::size_t classes = 2;
  std::vector<double> proportions;  // empty: equal classes
  double p_in = 0.1;
  double p_out = 0.01;
  std::uint64_t seed = 0;
  std::size_t feat_dim = 0;  // 0: no features
  double feat_sep = 1.0;     // std of class means
  double feat_noise = 1.0;   // std of per-node noise
};

struct SbmSample {
  LabeledGraph graph;
  Matrix features;  // n x feat_dim
};

namespace detail {

// Largest-remainder split of n into class sizes, each at least 1.
inline std::vector<std::size_t> class_counts(const SbmSpec& s) {
  std::vector<double> w = s.proportions;
  if (w.empty()) w.assign(s.classes, 1.0);
  if (w.size() != s.classes) throw InvalidInput("proportions length must equal class count");
  double total = 0.0;
  for (double x : w) {
    if (!(x > 0.0)) throw InvalidInput("class proportions must be positive");
    total += x;
  }
  std::vector<std::size_t> counts(s.classes, 1);
  std::size_t rest = s.n - s.classes;
  std::vector<double> frac(s.classes);
  std::size_t used = 0;
  for (std::size_t k = 0; k < s.classes; ++k) {
    double exact = rest * w[k] / total;
    auto whole = static_cast<std::size_t>(std::floor(exact));
    counts[k] += whole;
    used += whole;
    frac[k] = exact - static_cast<double>(whole);
  }
  std::vector<std::size_t> order(s.classes);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; used < rest; ++i, ++used) ++counts[order[i % s.classes]];
  return counts;
}

}  // namespace detail

inline SbmSample generate_sbm(const SbmSpec& s) {
  if (s.classes < 1) throw InvalidInput("need at least one class");
  if (s.n < s.classes) throw InvalidInput("need at least one node per class");
  if (s.p_in < 0 || s.p_in > 1 || s.p_out < 0 || s.p_out > 1)
    throw InvalidInput("edge probabilities must lie in [0,1]");

  std::mt19937_64 rng(mix_seed(s.seed, 0));
  auto counts = detail::class_counts(s);
  std::vector<int> labels;
  labels.reserve(s.n);
  for (std::size_t k = 0; k < counts.size(); ++k) labels.insert(labels.end(), counts[k], static_cast<int>(k));
  std::shuffle(labels.begin(), labels.end(), rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t u = 0; u < s.n; ++u)
    for (std::size_t v = u + 1; v < s.n; ++v) {
      double p = labels[u] == labels[v] ? s.p_in : s.p_out;
      if (unit(rng) < p) edges.emplace_back(u, v);
    }

  Matrix feats(static_cast<Eigen::Index>(s.n), static_cast<Eigen::Index>(s.feat_dim));
  if (s.feat_dim > 0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix means(static_cast<Eigen::Index>(s.classes), static_cast<Eigen::Index>(s.feat_dim));
    for (Eigen::Index k = 0; k < means.rows(); ++k)
      for (Eigen::Index j = 0; j < means.cols(); ++j) means(k, j) = s.feat_sep * normal(rng);
    for (Eigen::Index i = 0; i < feats.rows(); ++i)
      for (Eigen::Index j = 0; j < feats.cols(); ++j)
        feats(i, j) = means(labels[static_cast<std::size_t>(i)], j) + s.feat_noise * normal(rng);
  }
  return SbmSample{build_graph(edges, labels), std::move(feats)};
}

}  // namespace gfa
