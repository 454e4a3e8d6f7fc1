#pragma once

#include "ussl/nn/layers.hpp"

#include <string>
#include <vector>

namespace ussl::nn {

/// Sparse operators a message-passing layer needs for one graph.
template <typename S>
struct GraphOperators {
  const SpMat<S>* adjacency = nullptr;       // symmetric normalized, self-loops included
  const SpMat<S>* neighbor_mean = nullptr;   // row-stochastic over neighbors, self excluded
  const SpMat<S>* neighbor_mean_t = nullptr;
};

enum class GnnKind { gcn, sage };

/// gcn:  H' = act(Â H W + b)
/// sage: H' = act(H W_self + mean_nb(H) W_nb + b)
template <typename S>
class MessagePassingLayer {
 public:
  MessagePassingLayer() = default;
  MessagePassingLayer(GnnKind kind, int dim, bool activation)
      : kind_(kind),
        self_(dim, dim, fan_in_uniform(dim), fan_in_uniform(dim), false),
        bias_(1, dim, fan_in_uniform(dim)),
        activation_(activation) {
    if (kind == GnnKind::sage) neighbor_ = Linear<S>(dim, dim, fan_in_uniform(dim), fan_in_uniform(dim), false);
  }

  Mat<S> forward(const Mat<S>& h, const GraphOperators<S>& ops) {
    Mat<S> pre;
    if (kind_ == GnnKind::gcn) {
      if (!ops.adjacency) throw ValidationError("gcn layer needs the normalized adjacency");
      pre = (*ops.adjacency) * self_.forward(h);
    } else {
      if (!ops.neighbor_mean) throw ValidationError("sage layer needs the neighbor-mean operator");
      pre = self_.forward(h);
      const Mat<S> agg = (*ops.neighbor_mean) * h;
      pre += neighbor_.forward(agg);
    }
    pre.rowwise() += bias_.value.row(0);
    return activation_ ? relu_.forward(pre) : pre;
  }

  Mat<S> backward(const Mat<S>& dout, const GraphOperators<S>& ops) {
    const Mat<S> dpre = activation_ ? relu_.backward(dout) : dout;
    bias_.grad += dpre.colwise().sum();
    if (kind_ == GnnKind::gcn) {
      // Â is symmetric, so Âᵀ dpre = Â dpre
      const Mat<S> dlin = (*ops.adjacency) * dpre;
      return self_.backward(dlin);
    }
    Mat<S> dh = self_.backward(dpre);
    const Mat<S> dagg = neighbor_.backward(dpre);
    dh += (*ops.neighbor_mean_t) * dagg;
    return dh;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    self_.visit(prefix + (kind_ == GnnKind::gcn ? "lin." : "self."), f);
    if (kind_ == GnnKind::sage) neighbor_.visit(prefix + "neighbor.", f);
    f(prefix + "bias", bias_);
  }

 private:
  GnnKind kind_ = GnnKind::gcn;
  Linear<S> self_;
  Linear<S> neighbor_;
  Param<S> bias_;
  bool activation_ = true;
  Relu<S> relu_;
};

/// Stack of message-passing layers; the last one has no nonlinearity.
template <typename S>
class GnnBackbone {
 public:
  GnnBackbone() = default;
  GnnBackbone(GnnKind kind, int dim, int layers, double dropout) {
    for (int i = 0; i < layers; ++i) {
      layers_.emplace_back(kind, dim, i + 1 < layers);
      drops_.emplace_back(dropout);
    }
  }

  Mat<S> forward(const Mat<S>& z, const GraphOperators<S>& ops, const ForwardContext& ctx) {
    Mat<S> h = z;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i].forward(h, ops);
      if (i + 1 < layers_.size()) h = drops_[i].forward(h, ctx);
      if (!h.allFinite()) throw NumericalError("non-finite activations after message-passing layer " + std::to_string(i));
    }
    return h;
  }

  Mat<S> backward(const Mat<S>& dh, const GraphOperators<S>& ops) {
    Mat<S> d = dh;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      if (i + 1 < layers_.size()) d = drops_[i].backward(d);
      d = layers_[i].backward(d, ops);
    }
    return d;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].visit(prefix + "layer" + std::to_string(i) + ".", f);
  }

 private:
  std::vector<MessagePassingLayer<S>> layers_;
  std::vector<Dropout<S>> drops_;
};

}  // namespace ussl::nn
