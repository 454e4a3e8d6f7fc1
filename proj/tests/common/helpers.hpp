#pragma once

#include "ussl/ussl.hpp"

#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

namespace ussl::testing {

/// Erdos-Renyi graph with gaussian features and round-robin labels; every node gets a split.
inline GraphDataset random_graph(NodeId n, int dim, double p, std::uint64_t seed, int classes = 3,
                                 const std::string& id = "g") {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution edge(p);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  GraphDataset g;
  g.graph_id = id;
  g.num_nodes = n;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (edge(rng)) g.edges.emplace_back(u, v);
  g.features.resize(n, dim);
  for (Eigen::Index i = 0; i < g.features.size(); ++i) g.features.data()[i] = normal(rng);
  g.num_classes = classes;
  for (NodeId v = 0; v < n; ++v) {
    g.labels.push_back(v % classes);
    (v % 5 < 3 ? g.splits.train : v % 5 == 3 ? g.splits.val : g.splits.test).push_back(v);
  }
  return g;
}

/// Path 0-1-...-(n-1) plus random chords, so the graph is connected.
inline GraphDataset connected_graph(NodeId n, int dim, double p, std::uint64_t seed) {
  auto g = random_graph(n, dim, p, seed);
  for (NodeId v = 0; v + 1 < n; ++v) g.edges.emplace_back(v, v + 1);
  g.edges = canonicalize_edges(g.edges);
  return g;
}

inline Eigen::MatrixXd dense_adjacency(const GraphDataset& g) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(g.num_nodes, g.num_nodes);
  for (auto [u, v] : g.edges) a(u, v) = a(v, u) = 1.0;
  return a;
}

/// D~^{-1/2} (A + I) D~^{-1/2} computed densely.
inline Eigen::MatrixXd dense_normalized(const GraphDataset& g) {
  Eigen::MatrixXd a = dense_adjacency(g) + Eigen::MatrixXd::Identity(g.num_nodes, g.num_nodes);
  Eigen::VectorXd d = a.rowwise().sum().cwiseSqrt().cwiseInverse();
  return d.asDiagonal() * a * d.asDiagonal();
}

inline PreparedGraph prepare_small(const GraphDataset& g, int pe_dim, int hop_k) {
  PrepareOptions opt;
  opt.pe_dim = pe_dim;
  opt.hop_k = hop_k;
  return prepare_graph(g, opt);
}

inline ModelConfig tiny_model(UrlVariant v = UrlVariant::transformer) {
  ModelConfig c;
  c.embed_dim = 8;
  c.num_layers = 1;
  c.num_heads = 2;
  c.hop_k = 2;
  c.pe_dim = 2;
  c.url_variant = v;
  c.gnn_layers = 3;
  return c;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("ussl_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline TrainConfig quick_pretrain(int epochs, std::uint64_t seed) {
  auto c = default_train_config(Regime::ussl_pretrain);
  c.epochs = epochs;
  c.seed = seed;
  return c;
}

}  // namespace ussl::testing
