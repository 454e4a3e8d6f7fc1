#pragma once

#include "ussl/graph/io.hpp"
#include "ussl/preprocess/adjacency.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace ussl {

/// [X | PE], column-wise.
inline MatF augment_features(const MatF& features, const MatD& pe) {
  if (pe.rows() != features.rows())
    throw ValidationError("augment_features: PE has " + std::to_string(pe.rows()) + " rows, features have " +
                          std::to_string(features.rows()));
  MatF out(features.rows(), features.cols() + pe.cols());
  out.leftCols(features.cols()) = features;
  out.rightCols(pe.cols()) = pe.cast<float>();
  return out;
}

/// Hop tokens for every node: row (v * (hop_k + 1) + k) holds (Â^k X~)[v].
struct TokenizedGraph {
  std::string graph_id;
  int hop_k = 0;
  int pe_dim = 0;
  MatF tokens;

  NodeId num_nodes() const { return static_cast<NodeId>(tokens.rows() / (hop_k + 1)); }
  int dim() const { return static_cast<int>(tokens.cols()); }
  int seq_len() const { return hop_k + 1; }

  auto token(NodeId v, int k) const { return tokens.row(static_cast<Eigen::Index>(v) * (hop_k + 1) + k); }
  /// Hop-0 rows, i.e. the augmented feature matrix.
  MatF hop0() const {
    MatF out(num_nodes(), dim());
    for (NodeId v = 0; v < num_nodes(); ++v) out.row(v) = token(v, 0);
    return out;
  }
};

/// Propagate by repeated sparse products (float accumulation); Â^k is never formed.
inline TokenizedGraph hop2token(const std::string& graph_id, const MatF& x_aug, const NormalizedAdjacency& adj,
                                int hop_k, int pe_dim = 0) {
  if (hop_k < 0) throw ValidationError("hop2token: hop_k must be non-negative");
  if (adj.size() != x_aug.rows()) throw ValidationError("hop2token: adjacency/feature size mismatch");
  TokenizedGraph out;
  out.graph_id = graph_id;
  out.hop_k = hop_k;
  out.pe_dim = pe_dim;
  const NodeId n = static_cast<NodeId>(x_aug.rows());
  const int seq = hop_k + 1;
  out.tokens.resize(static_cast<Eigen::Index>(n) * seq, x_aug.cols());
  const SpMat<float> prop = adj.matrix.cast<float>();
  MatF cur = x_aug;
  for (int k = 0; k <= hop_k; ++k) {
    if (k > 0) {
      MatF next = prop * cur;
      cur.swap(next);
    }
    for (NodeId v = 0; v < n; ++v) out.tokens.row(static_cast<Eigen::Index>(v) * seq + k) = cur.row(v);
  }
  if (!out.tokens.allFinite()) throw NumericalError("hop2token: non-finite token values for '" + graph_id + "'");
  return out;
}

// Cache file: u32 little-endian header length, JSON header
// {graph_id, num_nodes, hop_k, dim, pe_dim, dataset_hash}, then row-major little-endian f32
// tokens in node-major, hop-minor order.

inline std::filesystem::path token_cache_path(const std::filesystem::path& root, const std::string& graph_id,
                                              std::uint64_t dataset_hash, int pe_dim, int hop_k) {
  return root / (graph_id + "-" + hex64(dataset_hash) + "-pe" + std::to_string(pe_dim) + "-k" +
                 std::to_string(hop_k) + ".tok");
}

inline void write_token_cache(const std::filesystem::path& path, const TokenizedGraph& t, std::uint64_t dataset_hash) {
  std::filesystem::create_directories(path.parent_path());
  const nlohmann::json header = {{"graph_id", t.graph_id}, {"num_nodes", t.num_nodes()},
                                 {"hop_k", t.hop_k},       {"dim", t.dim()},
                                 {"pe_dim", t.pe_dim},     {"dataset_hash", hex64(dataset_hash)}};
  const std::string text = header.dump();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DatasetError(tmp, 0, "cannot write token cache");
    io_detail::write_u32_le(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_f32_blob(out, t.tokens.data(), static_cast<std::size_t>(t.tokens.size()));
  }
  std::filesystem::rename(tmp, path);
}

inline TokenizedGraph read_token_cache(const std::filesystem::path& path) {
  auto in = io_detail::open_in(path, std::ios::binary);
  const std::uint32_t len = io_detail::read_u32_le(in);
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) throw DatasetError(path.string(), 0, "truncated token cache header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(path.string(), 0, std::string("bad token cache header: ") + e.what());
  }
  TokenizedGraph t;
  t.graph_id = header.at("graph_id").get<std::string>();
  t.hop_k = header.at("hop_k").get<int>();
  t.pe_dim = header.value("pe_dim", 0);
  const auto n = header.at("num_nodes").get<Eigen::Index>();
  const auto dim = header.at("dim").get<Eigen::Index>();
  const auto rows = n * (t.hop_k + 1);
  auto values = read_f32_blob(in, static_cast<std::size_t>(rows * dim), path.string());
  t.tokens.resize(rows, dim);
  if (!values.empty()) std::memcpy(t.tokens.data(), values.data(), values.size() * sizeof(float));
  return t;
}

}  // namespace ussl
