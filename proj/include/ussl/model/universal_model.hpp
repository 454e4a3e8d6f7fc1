#pragma once

#include "ussl/model/config.hpp"
#include "ussl/nn/gnn.hpp"
#include "ussl/nn/heads.hpp"
#include "ussl/nn/transformer.hpp"
#include "ussl/preprocess/prepared_graph.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ussl {

enum class RepresentationKind { ssl, ussl };

/// Node representations from one forward pass. `kind` records whether the backbone was
/// pre-trained on a single graph or jointly on several.
template <typename S>
struct Representation {
  Mat<S> rows;
  RepresentationKind kind = RepresentationKind::ussl;
};

/// Graph-specific encoders {Θ_i}, one shared backbone Φ, PairSim heads {Γ_i} and
/// downstream heads {Ψ_i}.
///
/// Parameter names: "theta/<graph>/weight", "phi/<module path>", "gamma/<graph>/...",
/// "psi/<graph>/...". Every tensor is initialized from derive_seed(init_seed, name), so a
/// tensor's initial value does not depend on which other graphs are registered.
///
/// Forward passes cache activations inside the layers: one model serves one training
/// context at a time.
template <typename S>
class UniversalModel {
 public:
  UniversalModel(ModelConfig config, std::uint64_t init_seed) : config_(config), init_seed_(init_seed) {
    validate(config_);
    if (config_.url_variant == UrlVariant::transformer) {
      transformer_.emplace(config_.embed_dim, config_.num_layers, config_.num_heads, config_.ffn_multiplier,
                           config_.dropout_rate);
    } else {
      const auto kind = config_.url_variant == UrlVariant::gcn ? nn::GnnKind::gcn : nn::GnnKind::sage;
      gnn_.emplace(kind, config_.embed_dim, config_.gnn_layers, config_.dropout_rate);
    }
    reset_matching("phi/");
  }

  const ModelConfig& config() const { return config_; }
  std::uint64_t init_seed() const { return init_seed_; }
  const std::vector<GraphSpec>& graphs() const { return graphs_; }

  bool has_graph(const std::string& id) const { return theta_.count(id) > 0; }

  const GraphSpec& graph_spec(const std::string& id) const {
    for (const auto& g : graphs_)
      if (g.graph_id == id) return g;
    throw ValidationError("graph '" + id + "' is not registered in the model");
  }

  /// Adds Θ and Γ (and Ψ when num_classes > 0) for a new graph, freshly initialized.
  void add_graph(const GraphSpec& spec) {
    if (spec.graph_id.empty()) throw ValidationError("graph_id must be non-empty");
    if (has_graph(spec.graph_id)) throw ValidationError("graph '" + spec.graph_id + "' is already registered");
    if (spec.input_dim <= 0) throw ValidationError("graph '" + spec.graph_id + "': input_dim must be positive");
    graphs_.push_back(spec);
    theta_.emplace(spec.graph_id, nn::Linear<S>::affine(spec.input_dim, config_.embed_dim));
    gamma_.emplace(spec.graph_id, nn::PairHead<S>(config_.embed_dim));
    reset_matching("theta/" + spec.graph_id + "/");
    reset_matching("gamma/" + spec.graph_id + "/");
    if (spec.num_classes > 0) set_classifier(spec.graph_id, spec.num_classes, init_seed_);
  }

  /// (Re)creates Ψ for a graph, initialized from `seed`.
  void set_classifier(const std::string& id, int num_classes, std::uint64_t seed) {
    if (!has_graph(id)) throw ValidationError("graph '" + id + "' is not registered in the model");
    if (num_classes <= 0) throw ValidationError("num_classes must be positive");
    psi_.insert_or_assign(id, nn::ClassifierHead<S>(config_.embed_dim, num_classes));
    for (auto& g : graphs_)
      if (g.graph_id == id) g.num_classes = num_classes;
    const std::string prefix = "psi/" + id + "/";
    psi_.at(id).visit(prefix, [&](const std::string& name, nn::Param<S>& p) { p.reset(derive_seed(seed, name)); });
  }

  nn::Linear<S>& theta(const std::string& id) { return lookup(theta_, id, "encoder"); }
  nn::PairHead<S>& gamma(const std::string& id) { return lookup(gamma_, id, "pretext head"); }
  nn::ClassifierHead<S>& psi(const std::string& id) { return lookup(psi_, id, "downstream head"); }
  bool has_classifier(const std::string& id) const { return psi_.count(id) > 0; }

  /// Graphs the backbone was pre-trained on (recorded by the training routines).
  const std::vector<std::string>& pretrained_on() const { return pretrained_on_; }
  void set_pretrained_on(std::vector<std::string> ids) { pretrained_on_ = std::move(ids); }
  RepresentationKind representation_kind() const {
    return pretrained_on_.size() > 1 ? RepresentationKind::ussl : RepresentationKind::ssl;
  }

  /// Visit every parameter in a stable order: Θ (registration order), Φ, Γ, Ψ.
  template <class F>
  void visit_params(F&& f) {
    for (const auto& g : graphs_) theta_.at(g.graph_id).visit("theta/" + g.graph_id + "/", f);
    if (transformer_) transformer_->visit("phi/", f);
    if (gnn_) gnn_->visit("phi/", f);
    for (const auto& g : graphs_) gamma_.at(g.graph_id).visit("gamma/" + g.graph_id + "/", f);
    for (const auto& g : graphs_)
      if (auto it = psi_.find(g.graph_id); it != psi_.end()) it->second.visit("psi/" + g.graph_id + "/", f);
  }

  std::size_t param_count(const std::string& prefix = "") {
    std::size_t n = 0;
    visit_params([&](const std::string& name, nn::Param<S>& p) {
      if (name.rfind(prefix, 0) == 0) n += static_cast<std::size_t>(p.size());
    });
    return n;
  }

  void zero_grad() {
    visit_params([](const std::string&, nn::Param<S>& p) { p.zero_grad(); });
  }

  /// Re-initialize every parameter whose name starts with `prefix`.
  void reset_matching(const std::string& prefix) {
    visit_params([&](const std::string& name, nn::Param<S>& p) {
      if (name.rfind(prefix, 0) == 0) p.reset(derive_seed(init_seed_, name));
    });
  }

  /// Graph-specific homogenization: the same affine map applied to every hop token.
  Mat<S> encode(const std::string& id, const Mat<S>& tokens) {
    auto& enc = theta(id);
    if (tokens.cols() != enc.in_dim())
      throw ValidationError("graph '" + id + "': token width " + std::to_string(tokens.cols()) +
                            " does not match encoder input " + std::to_string(enc.in_dim()));
    return enc.forward(tokens);
  }

  /// Representations of `nodes` of graph `g`; one row per node.
  Mat<S> represent(const PreparedGraph& g, std::span<const NodeId> nodes, const nn::ForwardContext& ctx) {
    last_graph_ = &g;
    last_nodes_.assign(nodes.begin(), nodes.end());
    const int seq = g.tokens.seq_len();
    if (transformer_) {
      if (seq != config_.hop_k + 1)
        throw ValidationError("graph '" + g.id() + "' was tokenized with hop_k " + std::to_string(g.tokens.hop_k) +
                              ", model expects " + std::to_string(config_.hop_k));
      Mat<S> x(static_cast<Eigen::Index>(nodes.size()) * seq, g.input_dim());
      for (std::size_t i = 0; i < nodes.size(); ++i)
        x.middleRows(static_cast<Eigen::Index>(i) * seq, seq) =
            g.tokens.tokens.middleRows(static_cast<Eigen::Index>(nodes[i]) * seq, seq).template cast<S>();
      return transformer_->forward(encode(g.id(), x), seq, ctx);
    }
    Mat<S> x(g.num_nodes(), g.input_dim());
    for (NodeId v = 0; v < g.num_nodes(); ++v) x.row(v) = g.tokens.token(v, 0).template cast<S>();
    const Mat<S> all = gnn_->forward(encode(g.id(), x), operators(g), ctx);
    Mat<S> out(static_cast<Eigen::Index>(nodes.size()), all.cols());
    for (std::size_t i = 0; i < nodes.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = all.row(nodes[i]);
    return out;
  }

  /// Backpropagate d(loss)/d(representations) of the last `represent` call into Θ and Φ.
  void backward(const Mat<S>& d_rep) {
    if (!last_graph_) throw Error("backward called before represent");
    const PreparedGraph& g = *last_graph_;
    Mat<S> dz;
    if (transformer_) {
      dz = transformer_->backward(d_rep);
    } else {
      Mat<S> d_all = Mat<S>::Zero(g.num_nodes(), d_rep.cols());
      for (std::size_t i = 0; i < last_nodes_.size(); ++i) d_all.row(last_nodes_[i]) += d_rep.row(static_cast<Eigen::Index>(i));
      dz = gnn_->backward(d_all, operators(g));
    }
    theta(g.id()).backward(dz, false);
  }

  nn::TransformerBackbone<S>* transformer() { return transformer_ ? &*transformer_ : nullptr; }

 private:
  template <class Map>
  static auto& lookup(Map& m, const std::string& id, const char* what) {
    auto it = m.find(id);
    if (it == m.end()) throw ValidationError(std::string("no ") + what + " registered for graph '" + id + "'");
    return it->second;
  }

  static nn::GraphOperators<S> operators(const PreparedGraph& g) {
    return {&g.adjacency<S>(), &g.neighbor_mean<S>(), &g.neighbor_mean_t<S>()};
  }

  ModelConfig config_;
  std::uint64_t init_seed_;
  std::vector<GraphSpec> graphs_;
  std::map<std::string, nn::Linear<S>> theta_;
  std::optional<nn::TransformerBackbone<S>> transformer_;
  std::optional<nn::GnnBackbone<S>> gnn_;
  std::map<std::string, nn::PairHead<S>> gamma_;
  std::map<std::string, nn::ClassifierHead<S>> psi_;
  std::vector<std::string> pretrained_on_;

  const PreparedGraph* last_graph_ = nullptr;
  std::vector<NodeId> last_nodes_;
};

/// Composition of encode + backbone for one graph, tagged with the backbone's provenance.
template <typename S>
Representation<S> forward_ussl(UniversalModel<S>& model, const PreparedGraph& g, std::span<const NodeId> nodes,
                               const nn::ForwardContext& ctx = {}) {
  return {model.represent(g, nodes, ctx), model.representation_kind()};
}

inline GraphSpec graph_spec_of(const PreparedGraph& g) {
  return {g.id(), g.input_dim(), g.data->num_classes};
}

/// Digest over the raw bytes of every parameter whose name starts with one of `prefixes`.
template <typename S>
std::uint64_t parameter_digest(UniversalModel<S>& model, const std::vector<std::string>& prefixes) {
  std::uint64_t h = fnv1a("params");
  model.visit_params([&](const std::string& name, nn::Param<S>& p) {
    for (const auto& pre : prefixes)
      if (name.rfind(pre, 0) == 0) {
        h = fnv1a(name, h);
        h = fnv1a(p.value.data(), sizeof(S) * static_cast<std::size_t>(p.value.size()), h);
        break;
      }
  });
  return h;
}

}  // namespace ussl
