#pragma once

#include "ussl/graph/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <unordered_set>
#include <vector>

namespace ussl {

struct LabeledPair {
  NodeId u;
  NodeId v;
  int label;  // 1 similar, 0 dissimilar
  bool operator==(const LabeledPair&) const = default;
};

struct PairLabelSet {
  std::vector<LabeledPair> pairs;  // positives first, then negatives
  int n_pos = 0;
  int n_neg = 0;
  std::uint64_t seed = 0;
};

/// Pool size above which candidate pairs are sampled instead of enumerated.
inline constexpr NodeId kExhaustivePairLimit = 1024;

inline std::int64_t pair_count(NodeId n) { return static_cast<std::int64_t>(n) * (n - 1) / 2; }

inline int default_pair_budget(NodeId n) {
  return static_cast<int>(std::min<std::int64_t>({4LL * n, 20000LL, pair_count(n)}));
}

/// Row norms in double, shared by the sampler and its tests.
inline std::vector<double> feature_norms(const MatF& x) {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) out[r] = x.row(r).cast<double>().norm();
  return out;
}

/// Cosine similarity; zero when either row is the zero vector.
inline double cosine(const MatF& x, const std::vector<double>& norms, NodeId u, NodeId v) {
  if (norms[u] == 0.0 || norms[v] == 0.0) return 0.0;
  return x.row(u).cast<double>().dot(x.row(v).cast<double>()) / (norms[u] * norms[v]);
}

/// Balanced PairSim labels: the budget/2 most cosine-similar pairs of the candidate pool are
/// positives, the least similar of the remaining pool are negatives. Ties resolve by (u, v).
inline PairLabelSet sample_pairsim(const GraphDataset& g, int budget, std::uint64_t seed) {
  const NodeId n = g.num_nodes;
  if (budget < 2) throw ValidationError("sample_pairsim: budget must be at least 2");
  if (n < 4) throw ValidationError("sample_pairsim: graph '" + g.graph_id + "' needs at least 4 nodes");
  const std::int64_t total = pair_count(n);
  if (budget > total)
    throw ValidationError("sample_pairsim: budget " + std::to_string(budget) + " exceeds the " +
                          std::to_string(total) + " distinct pairs of graph '" + g.graph_id + "'");

  struct Candidate {
    double cos;
    NodeId u, v;
  };
  const auto norms = feature_norms(g.features);
  std::vector<Candidate> pool;
  const std::int64_t wanted = 64LL * budget;
  if (n <= kExhaustivePairLimit || wanted >= total) {
    pool.reserve(static_cast<std::size_t>(total));
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v = u + 1; v < n; ++v) pool.push_back({cosine(g.features, norms, u, v), u, v});
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<NodeId> pick(0, n - 1);
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(static_cast<std::size_t>(wanted) * 2);
    while (static_cast<std::int64_t>(pool.size()) < wanted) {
      NodeId a = pick(rng), b = pick(rng);
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      const std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
      if (seen.insert(key).second) pool.push_back({cosine(g.features, norms, a, b), a, b});
    }
  }

  const int n_pos = budget / 2;
  const int n_neg = budget - n_pos;
  auto lex = [](const Candidate& a, const Candidate& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; };
  auto most_similar = [&](const Candidate& a, const Candidate& b) { return a.cos != b.cos ? a.cos > b.cos : lex(a, b); };
  auto least_similar = [&](const Candidate& a, const Candidate& b) { return a.cos != b.cos ? a.cos < b.cos : lex(a, b); };

  std::partial_sort(pool.begin(), pool.begin() + n_pos, pool.end(), most_similar);
  std::partial_sort(pool.begin() + n_pos, pool.begin() + n_pos + n_neg, pool.end(), least_similar);

  PairLabelSet out;
  out.seed = seed;
  out.n_pos = n_pos;
  out.n_neg = n_neg;
  out.pairs.reserve(static_cast<std::size_t>(budget));
  for (int i = 0; i < n_pos; ++i) out.pairs.push_back({pool[i].u, pool[i].v, 1});
  for (int i = n_pos; i < n_pos + n_neg; ++i) out.pairs.push_back({pool[i].u, pool[i].v, 0});
  return out;
}

/// True when the sampler enumerates every pair (output independent of seed).
inline bool pairsim_is_exhaustive(NodeId n, int budget) {
  return n <= kExhaustivePairLimit || 64LL * budget >= pair_count(n);
}

}  // namespace ussl
