#pragma once

#include "ussl/core/log.hpp"
#include "ussl/graph/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace ussl {

/// Stochastic-block-model family whose members share class prototypes in a latent space
/// but observe them through different random linear feature maps (so D_i differ).
struct SyntheticFamilySpec {
  std::string name = "synthetic";
  std::vector<NodeId> node_counts = {500, 500, 500};
  std::vector<int> feature_dims = {32, 48, 64};
  int num_classes = 5;
  double p_intra = 0.08;
  double p_inter = 0.002;
  int latent_dim = 32;
  double prototype_scale = 1.0;
  double latent_noise = 3.0;    // per-node spread around its class prototype
  double feature_noise = 0.5;   // observation noise after the graph-specific map
  double train_fraction = 0.6;
  double val_fraction = 0.2;

  nlohmann::json to_json() const {
    return {{"name", name},
            {"node_counts", node_counts},
            {"feature_dims", feature_dims},
            {"num_classes", num_classes},
            {"p_intra", p_intra},
            {"p_inter", p_inter},
            {"latent_dim", latent_dim},
            {"prototype_scale", prototype_scale},
            {"latent_noise", latent_noise},
            {"feature_noise", feature_noise},
            {"train_fraction", train_fraction},
            {"val_fraction", val_fraction}};
  }
};

inline void validate(const SyntheticFamilySpec& s) {
  if (s.node_counts.empty()) throw ValidationError("synthetic spec: no graphs requested");
  if (s.node_counts.size() != s.feature_dims.size())
    throw ValidationError("synthetic spec: node_counts and feature_dims differ in length");
  for (NodeId n : s.node_counts)
    if (n <= 0) throw ValidationError("synthetic spec: node count must be positive");
  for (int d : s.feature_dims)
    if (d <= 0) throw ValidationError("synthetic spec: feature dim must be positive");
  if (s.num_classes <= 0) throw ValidationError("synthetic spec: empty class set");
  if (s.latent_dim <= 0) throw ValidationError("synthetic spec: latent_dim must be positive");
  for (double p : {s.p_intra, s.p_inter})
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError("synthetic spec: edge probability outside [0,1]");
  if (s.train_fraction < 0 || s.val_fraction < 0 || s.train_fraction + s.val_fraction > 1.0)
    throw ValidationError("synthetic spec: split fractions must be non-negative and sum to <= 1");
  if (s.latent_noise < 0 || s.feature_noise < 0)
    throw ValidationError("synthetic spec: noise levels must be non-negative");
}

/// Class-stratified split: per class, shuffle then cut at train/val fractions.
inline Splits stratified_splits(const std::vector<int>& labels, int num_classes, double train_fraction,
                                double val_fraction, std::mt19937_64& rng) {
  std::vector<std::vector<NodeId>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t v = 0; v < labels.size(); ++v) by_class[labels[v]].push_back(static_cast<NodeId>(v));
  Splits s;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = members.size();
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    const auto n_val = std::min(n - n_train,
                                static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n))));
    s.train.insert(s.train.end(), members.begin(), members.begin() + n_train);
    s.val.insert(s.val.end(), members.begin() + n_train, members.begin() + n_train + n_val);
    s.test.insert(s.test.end(), members.begin() + n_train + n_val, members.end());
  }
  for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

/// Pure function of (spec, seed).
inline GraphFamily generate_family(const SyntheticFamilySpec& spec, std::uint64_t seed) {
  validate(spec);
  GraphFamily family;
  family.name = spec.name;
  family.seed = seed;
  family.provenance.source = "synthetic";
  family.provenance.parameters = nlohmann::json{{"spec", spec.to_json()}, {"seed", seed}}.dump();

  std::normal_distribution<double> normal(0.0, 1.0);

  // Family-level class prototypes in the shared latent space.
  std::mt19937_64 proto_rng(derive_seed(seed, "prototypes"));
  MatD prototypes(spec.num_classes, spec.latent_dim);
  for (Eigen::Index i = 0; i < prototypes.size(); ++i)
    prototypes.data()[i] = spec.prototype_scale * normal(proto_rng);

  if (spec.p_intra == 0.0 && spec.p_inter == 0.0) {
    const std::string w = "synthetic family '" + spec.name + "': edge probabilities are zero, graphs have no edges";
    family.provenance.warnings.push_back(w);
    log_warning(w);
  }

  for (std::size_t gi = 0; gi < spec.node_counts.size(); ++gi) {
    const NodeId n = spec.node_counts[gi];
    const int dim = spec.feature_dims[gi];
    std::mt19937_64 rng(derive_seed(seed, "graph", gi));

    GraphDataset g;
    g.graph_id = spec.name + "_g" + std::to_string(gi);
    g.num_nodes = n;
    g.num_classes = spec.num_classes;

    // Balanced labels in random order.
    g.labels.resize(static_cast<std::size_t>(n));
    for (NodeId v = 0; v < n; ++v) g.labels[v] = v % spec.num_classes;
    std::shuffle(g.labels.begin(), g.labels.end(), rng);

    // Graph-specific observation map latent -> R^dim.
    MatD feature_map(spec.latent_dim, dim);
    const double map_scale = 1.0 / std::sqrt(static_cast<double>(spec.latent_dim));
    for (Eigen::Index i = 0; i < feature_map.size(); ++i) feature_map.data()[i] = map_scale * normal(rng);

    MatD latent(n, spec.latent_dim);
    for (NodeId v = 0; v < n; ++v)
      for (int k = 0; k < spec.latent_dim; ++k)
        latent(v, k) = prototypes(g.labels[v], k) + spec.latent_noise * normal(rng);
    MatD feats = latent * feature_map;
    for (Eigen::Index i = 0; i < feats.size(); ++i) feats.data()[i] += spec.feature_noise * normal(rng);
    g.features = feats.cast<float>();

    // SBM edges over unordered pairs.
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (NodeId u = 0; u < n; ++u)
      for (NodeId v = u + 1; v < n; ++v) {
        const double p = g.labels[u] == g.labels[v] ? spec.p_intra : spec.p_inter;
        if (unif(rng) < p) g.edges.emplace_back(u, v);
      }

    g.splits = stratified_splits(g.labels, spec.num_classes, spec.train_fraction, spec.val_fraction, rng);
    validate(g);
    family.graphs.push_back(std::move(g));
  }
  return family;
}

}  // namespace ussl
