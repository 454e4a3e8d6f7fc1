#pragma once

#include "ussl/graph/dataset.hpp"

#include <cmath>
#include <vector>

namespace ussl {

/// Symmetric propagation operator D~^{-1/2} (A + I) D~^{-1/2}, stored in double.
struct NormalizedAdjacency {
  SpMat<double> matrix;
  std::vector<double> degrees;  // self-loop augmented

  NodeId size() const { return static_cast<NodeId>(matrix.rows()); }
};

inline NormalizedAdjacency normalize_adjacency(const GraphDataset& g) {
  const NodeId n = g.num_nodes;
  NormalizedAdjacency out;
  out.degrees.assign(static_cast<std::size_t>(n), 1.0);
  for (auto [u, v] : g.edges) {
    out.degrees[u] += 1.0;
    out.degrees[v] += 1.0;
  }
  std::vector<double> inv_sqrt(out.degrees.size());
  for (std::size_t i = 0; i < inv_sqrt.size(); ++i) inv_sqrt[i] = 1.0 / std::sqrt(out.degrees[i]);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(g.edges.size() * 2 + static_cast<std::size_t>(n));
  for (NodeId v = 0; v < n; ++v) trips.emplace_back(v, v, inv_sqrt[v] * inv_sqrt[v]);
  for (auto [u, v] : g.edges) {
    const double w = inv_sqrt[u] * inv_sqrt[v];
    trips.emplace_back(u, v, w);
    trips.emplace_back(v, u, w);
  }
  out.matrix.resize(n, n);
  out.matrix.setFromTriplets(trips.begin(), trips.end());
  out.matrix.makeCompressed();
  return out;
}

/// Row-stochastic neighbor-mean operator (self excluded); isolated nodes get a zero row.
inline SpMat<double> neighbor_mean_operator(const GraphDataset& g) {
  const Csr csr = build_csr(g.num_nodes, g.edges);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(csr.targets.size());
  for (NodeId v = 0; v < g.num_nodes; ++v) {
    const NodeId d = csr.degree(v);
    for (NodeId k = csr.offsets[v]; k < csr.offsets[v + 1]; ++k)
      trips.emplace_back(v, csr.targets[k], 1.0 / static_cast<double>(d));
  }
  SpMat<double> m(g.num_nodes, g.num_nodes);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

}  // namespace ussl
