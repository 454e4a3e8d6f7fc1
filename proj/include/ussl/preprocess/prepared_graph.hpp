#pragma once

#include "ussl/core/log.hpp"
#include "ussl/preprocess/adjacency.hpp"
#include "ussl/preprocess/laplacian_pe.hpp"
#include "ussl/preprocess/pairsim.hpp"
#include "ussl/preprocess/tokens.hpp"

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <type_traits>

namespace ussl {

/// Everything the model needs about one graph, computed once before training.
struct PreparedGraph {
  std::shared_ptr<const GraphDataset> data;
  NormalizedAdjacency adj;
  SpMat<double> mean_op;  // neighbor mean, for the GraphSAGE variant
  TokenizedGraph tokens;

  SpMat<float> adj_f, mean_op_f, mean_op_t_f;
  SpMat<double> mean_op_t;

  const std::string& id() const { return data->graph_id; }
  NodeId num_nodes() const { return data->num_nodes; }
  int input_dim() const { return tokens.dim(); }

  template <typename S>
  const SpMat<S>& adjacency() const {
    if constexpr (std::is_same_v<S, float>) return adj_f;
    else return adj.matrix;
  }
  template <typename S>
  const SpMat<S>& neighbor_mean() const {
    if constexpr (std::is_same_v<S, float>) return mean_op_f;
    else return mean_op;
  }
  template <typename S>
  const SpMat<S>& neighbor_mean_t() const {
    if constexpr (std::is_same_v<S, float>) return mean_op_t_f;
    else return mean_op_t;
  }
};

struct PrepareOptions {
  int pe_dim = 15;
  int hop_k = 3;
  std::optional<std::filesystem::path> cache_root;  // token cache directory, if any
  PeOptions pe;
};

/// Cache directory from USSL_CACHE_DIR, if set.
inline std::optional<std::filesystem::path> cache_root_from_env() {
  if (const char* v = std::getenv("USSL_CACHE_DIR"); v && *v) return std::filesystem::path(v);
  return std::nullopt;
}

inline PreparedGraph prepare_graph(std::shared_ptr<const GraphDataset> g, const PrepareOptions& opt) {
  PreparedGraph p;
  p.data = std::move(g);
  const GraphDataset& ds = *p.data;
  p.adj = normalize_adjacency(ds);
  p.mean_op = neighbor_mean_operator(ds);
  p.mean_op_t = SpMat<double>(p.mean_op.transpose());
  p.adj_f = p.adj.matrix.cast<float>();
  p.mean_op_f = p.mean_op.cast<float>();
  p.mean_op_t_f = p.mean_op_t.cast<float>();

  std::optional<std::filesystem::path> cache_file;
  if (opt.cache_root) {
    cache_file = token_cache_path(*opt.cache_root, ds.graph_id, dataset_hash(ds), opt.pe_dim, opt.hop_k);
    if (std::filesystem::exists(*cache_file)) {
      try {
        p.tokens = read_token_cache(*cache_file);
        if (p.tokens.num_nodes() == ds.num_nodes && p.tokens.dim() == ds.feature_dim() + opt.pe_dim &&
            p.tokens.hop_k == opt.hop_k)
          return p;
      } catch (const Error& e) {
        log_warning(std::string("ignoring unreadable token cache: ") + e.what());
      }
    }
  }
  const LaplacianPE pe = laplacian_pe(ds, p.adj, opt.pe_dim, opt.pe);
  const MatF x_aug = augment_features(ds.features, pe.vectors);
  p.tokens = hop2token(ds.graph_id, x_aug, p.adj, opt.hop_k, opt.pe_dim);
  if (cache_file) write_token_cache(*cache_file, p.tokens, dataset_hash(ds));
  return p;
}

inline PreparedGraph prepare_graph(const GraphDataset& g, const PrepareOptions& opt) {
  return prepare_graph(std::make_shared<const GraphDataset>(g), opt);
}

inline std::vector<PreparedGraph> prepare_family(const GraphFamily& family, const PrepareOptions& opt) {
  std::vector<PreparedGraph> out;
  out.reserve(family.size());
  for (const auto& g : family.graphs) out.push_back(prepare_graph(g, opt));
  return out;
}

}  // namespace ussl
