#pragma once

#include "ussl/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace ussl {

using Edge = std::pair<NodeId, NodeId>;

enum class Split { train, val, test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

struct Splits {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;

  const std::vector<NodeId>& get(Split s) const {
    return s == Split::train ? train : s == Split::val ? val : test;
  }
  std::vector<NodeId>& get(Split s) { return s == Split::train ? train : s == Split::val ? val : test; }
  bool operator==(const Splits&) const = default;
};

/// One graph: undirected edges (u < v, sorted, unique, no self-loops), dense features,
/// labels and train/val/test splits.
struct GraphDataset {
  std::string graph_id;
  NodeId num_nodes = 0;
  std::vector<Edge> edges;
  MatF features;
  std::vector<int> labels;
  int num_classes = 0;
  Splits splits;

  int feature_dim() const { return static_cast<int>(features.cols()); }

  bool operator==(const GraphDataset& o) const {
    return graph_id == o.graph_id && num_nodes == o.num_nodes && edges == o.edges &&
           features.rows() == o.features.rows() && features.cols() == o.features.cols() &&
           features == o.features && labels == o.labels && num_classes == o.num_classes &&
           splits == o.splits;
  }
};

/// Turn an arbitrary edge list into canonical form: (min,max) pairs, self-loops dropped,
/// sorted and deduplicated. Endpoints must already be in range.
inline std::vector<Edge> canonicalize_edges(std::vector<Edge> edges) {
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u == v) continue;
    out.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Throws ValidationError naming the first broken invariant.
inline void validate(const GraphDataset& g) {
  const std::string who = "graph '" + g.graph_id + "': ";
  if (g.graph_id.empty()) throw ValidationError("graph_id must be non-empty");
  if (g.num_nodes <= 0) throw ValidationError(who + "num_nodes must be positive");
  if (g.num_classes <= 0) throw ValidationError(who + "num_classes must be positive");
  if (g.features.rows() != g.num_nodes)
    throw ValidationError(who + "feature rows " + std::to_string(g.features.rows()) +
                          " != num_nodes " + std::to_string(g.num_nodes));
  if (!g.features.allFinite()) throw ValidationError(who + "features contain NaN/Inf");
  if (static_cast<NodeId>(g.labels.size()) != g.num_nodes)
    throw ValidationError(who + "label count differs from num_nodes");
  for (int y : g.labels)
    if (y < 0 || y >= g.num_classes)
      throw ValidationError(who + "label " + std::to_string(y) + " outside [0, num_classes)");
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    auto [u, v] = g.edges[i];
    if (u < 0 || v < 0 || u >= g.num_nodes || v >= g.num_nodes)
      throw ValidationError(who + "node index " + std::to_string(std::max(u, v)) + " out of range");
    if (u >= v) throw ValidationError(who + "edges must be stored as (u, v) with u < v");
    if (i > 0 && !(g.edges[i - 1] < g.edges[i]))
      throw ValidationError(who + "edge list not sorted/unique");
  }
  std::vector<char> seen(static_cast<std::size_t>(g.num_nodes), 0);
  for (Split s : {Split::train, Split::val, Split::test}) {
    for (NodeId v : g.splits.get(s)) {
      if (v < 0 || v >= g.num_nodes)
        throw ValidationError(who + "split node index " + std::to_string(v) + " out of range");
      if (seen[static_cast<std::size_t>(v)])
        throw ValidationError(who + "node " + std::to_string(v) + " appears in more than one split");
      seen[static_cast<std::size_t>(v)] = 1;
    }
  }
}

/// Undirected neighbor lists (CSR) built from the canonical edge list.
struct Csr {
  std::vector<NodeId> offsets;
  std::vector<NodeId> targets;

  NodeId degree(NodeId v) const { return offsets[v + 1] - offsets[v]; }
};

inline Csr build_csr(NodeId num_nodes, const std::vector<Edge>& edges) {
  Csr csr;
  csr.offsets.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
  for (auto [u, v] : edges) {
    ++csr.offsets[u + 1];
    ++csr.offsets[v + 1];
  }
  for (NodeId i = 0; i < num_nodes; ++i) csr.offsets[i + 1] += csr.offsets[i];
  csr.targets.resize(static_cast<std::size_t>(csr.offsets.back()));
  std::vector<NodeId> fill(csr.offsets.begin(), csr.offsets.end() - 1);
  for (auto [u, v] : edges) {
    csr.targets[fill[u]++] = v;
    csr.targets[fill[v]++] = u;
  }
  for (NodeId i = 0; i < num_nodes; ++i)
    std::sort(csr.targets.begin() + csr.offsets[i], csr.targets.begin() + csr.offsets[i + 1]);
  return csr;
}

/// Component index per node, numbered in order of lowest member.
inline std::vector<int> connected_components(NodeId num_nodes, const std::vector<Edge>& edges,
                                             int* count = nullptr) {
  std::vector<NodeId> parent(static_cast<std::size_t>(num_nodes));
  for (NodeId i = 0; i < num_nodes; ++i) parent[i] = i;
  auto find = [&](NodeId x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (auto [u, v] : edges) {
    NodeId a = find(u), b = find(v);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<int> comp(static_cast<std::size_t>(num_nodes), -1);
  std::vector<int> root_to_comp(static_cast<std::size_t>(num_nodes), -1);
  int next = 0;
  for (NodeId i = 0; i < num_nodes; ++i) {
    NodeId r = find(i);
    if (root_to_comp[r] < 0) root_to_comp[r] = next++;
    comp[i] = root_to_comp[r];
  }
  if (count) *count = next;
  return comp;
}

/// Content hash of the structural and feature data; keys the token cache.
inline std::uint64_t dataset_hash(const GraphDataset& g) {
  std::uint64_t h = fnv1a(g.graph_id);
  h = fnv1a(&g.num_nodes, sizeof(g.num_nodes), h);
  for (auto [u, v] : g.edges) {
    h = fnv1a(&u, sizeof(u), h);
    h = fnv1a(&v, sizeof(v), h);
  }
  const auto rows = g.features.rows(), cols = g.features.cols();
  h = fnv1a(&rows, sizeof(rows), h);
  h = fnv1a(&cols, sizeof(cols), h);
  h = fnv1a(g.features.data(), sizeof(float) * static_cast<std::size_t>(g.features.size()), h);
  return h;
}

/// Where a family came from.
struct FamilyProvenance {
  std::string source;  // "synthetic" or "loaded"
  std::string parameters;  // generator parameters or manifest list, as JSON text
  std::vector<std::string> warnings;
};

/// Ordered collection of graphs; position defines the graph index everywhere else.
struct GraphFamily {
  std::string name;
  std::vector<GraphDataset> graphs;
  std::uint64_t seed = 0;
  FamilyProvenance provenance;

  std::size_t size() const { return graphs.size(); }

  const GraphDataset& at(const std::string& id) const {
    for (const auto& g : graphs)
      if (g.graph_id == id) return g;
    throw ValidationError("graph '" + id + "' is not part of family '" + name + "'");
  }
};

inline void validate(const GraphFamily& f) {
  std::set<std::string> ids;
  for (const auto& g : f.graphs) {
    validate(g);
    if (!ids.insert(g.graph_id).second)
      throw ValidationError("duplicate graph_id '" + g.graph_id + "' in family");
  }
}

}  // namespace ussl
