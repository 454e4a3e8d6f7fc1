#pragma once

#include "ussl/core/types.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace ussl {

enum class UrlVariant { transformer, gcn, sage };

inline std::string to_string(UrlVariant v) {
  switch (v) {
    case UrlVariant::transformer: return "transformer";
    case UrlVariant::gcn: return "gcn";
    case UrlVariant::sage: return "sage";
  }
  return "?";
}

inline UrlVariant parse_url_variant(const std::string& s) {
  if (s == "transformer") return UrlVariant::transformer;
  if (s == "gcn") return UrlVariant::gcn;
  if (s == "sage") return UrlVariant::sage;
  throw ValidationError("unknown url_variant '" + s + "' (expected transformer, gcn or sage)");
}

struct ModelConfig {
  int embed_dim = 256;
  int num_layers = 4;
  int num_heads = 8;
  int hop_k = 3;
  int pe_dim = 15;
  UrlVariant url_variant = UrlVariant::transformer;
  int ffn_multiplier = 2;
  double dropout_rate = 0.1;
  int gnn_layers = 3;

  bool operator==(const ModelConfig&) const = default;
};

inline void validate(const ModelConfig& c) {
  if (c.embed_dim <= 0) throw ValidationError("embed_dim must be positive");
  if (c.num_heads <= 0 || c.embed_dim % c.num_heads != 0)
    throw ValidationError("embed_dim " + std::to_string(c.embed_dim) + " is not divisible by num_heads " +
                          std::to_string(c.num_heads));
  if (c.num_layers < 1) throw ValidationError("num_layers must be at least 1");
  if (c.hop_k < 0) throw ValidationError("hop_k must be non-negative");
  if (c.pe_dim < 0) throw ValidationError("pe_dim must be non-negative");
  if (c.ffn_multiplier < 1) throw ValidationError("ffn_multiplier must be at least 1");
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) throw ValidationError("dropout_rate must be in [0, 1)");
  if (c.gnn_layers < 1) throw ValidationError("gnn_layers must be at least 1");
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"embed_dim", c.embed_dim},       {"num_layers", c.num_layers},
       {"num_heads", c.num_heads},       {"hop_k", c.hop_k},
       {"pe_dim", c.pe_dim},             {"url_variant", to_string(c.url_variant)},
       {"ffn_multiplier", c.ffn_multiplier}, {"dropout_rate", c.dropout_rate},
       {"gnn_layers", c.gnn_layers}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "embed_dim") c.embed_dim = it->get<int>();
    else if (k == "num_layers") c.num_layers = it->get<int>();
    else if (k == "num_heads") c.num_heads = it->get<int>();
    else if (k == "hop_k") c.hop_k = it->get<int>();
    else if (k == "pe_dim") c.pe_dim = it->get<int>();
    else if (k == "url_variant") c.url_variant = parse_url_variant(it->get<std::string>());
    else if (k == "ffn_multiplier") c.ffn_multiplier = it->get<int>();
    else if (k == "dropout_rate") c.dropout_rate = it->get<double>();
    else if (k == "gnn_layers") c.gnn_layers = it->get<int>();
    else throw ValidationError("unknown model config key '" + k + "'");
  }
}

/// Per-graph shapes the model needs when registering a graph.
struct GraphSpec {
  std::string graph_id;
  int input_dim = 0;    // augmented feature width D~_i
  int num_classes = 0;  // 0: no downstream head yet
  bool operator==(const GraphSpec&) const = default;
};

}  // namespace ussl
