#pragma once

#include "ussl/nn/attention.hpp"

#include <string>
#include <vector>

namespace ussl::nn {

inline constexpr double kTransformerInitStd = 0.02;

/// Pre-norm encoder block: x + Drop(MHA(LN(x))), then y + Drop(FFN(LN(y))) with a GELU FFN.
template <typename S>
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(int dim, int heads, int ffn_multiplier, double dropout)
      : ln1_(dim),
        attn_(dim, heads, kTransformerInitStd),
        ln2_(dim),
        ffn_in_(dim, ffn_multiplier * dim, normal_init(kTransformerInitStd), constant_init(0.0)),
        ffn_out_(ffn_multiplier * dim, dim, normal_init(kTransformerInitStd), constant_init(0.0)),
        drop_attn_(dropout),
        drop_hidden_(dropout),
        drop_ffn_(dropout) {}

  Mat<S> forward(const Mat<S>& x, int seq, const ForwardContext& ctx) {
    Mat<S> y = x + drop_attn_.forward(attn_.forward(ln1_.forward(x), seq), ctx);
    Mat<S> hidden = drop_hidden_.forward(gelu_.forward(ffn_in_.forward(ln2_.forward(y))), ctx);
    return y + drop_ffn_.forward(ffn_out_.forward(hidden), ctx);
  }

  Mat<S> backward(const Mat<S>& dz) {
    Mat<S> dhidden = drop_hidden_.backward(ffn_out_.backward(drop_ffn_.backward(dz)));
    Mat<S> dy = dz + ln2_.backward(ffn_in_.backward(gelu_.backward(dhidden)));
    return dy + ln1_.backward(attn_.backward(drop_attn_.backward(dy)));
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    ln1_.visit(prefix + "ln1.", f);
    attn_.visit(prefix + "attn.", f);
    ln2_.visit(prefix + "ln2.", f);
    ffn_in_.visit(prefix + "ffn_in.", f);
    ffn_out_.visit(prefix + "ffn_out.", f);
  }

 private:
  LayerNorm<S> ln1_;
  MultiHeadSelfAttention<S> attn_;
  LayerNorm<S> ln2_;
  Linear<S> ffn_in_;
  Gelu<S> gelu_;
  Linear<S> ffn_out_;
  Dropout<S> drop_attn_, drop_hidden_, drop_ffn_;
};

/// Attention readout over hop tokens t_0..t_K of each node:
/// score_k = w . [t_0 | t_k], alpha = softmax_k(score), out = t_0 + sum_k alpha_k t_k.
/// With K = 0 the output is t_0.
template <typename S>
class AttentionReadout {
 public:
  AttentionReadout() = default;
  explicit AttentionReadout(int dim) : w_(1, 2 * dim, fan_in_uniform(2L * dim)), dim_(dim) {}

  Mat<S> forward(const Mat<S>& tokens, int seq) {
    tokens_ = tokens;
    seq_ = seq;
    const Eigen::Index batch = tokens.rows() / seq;
    const int hops = seq - 1;
    alpha_.resize(batch, std::max(hops, 0));
    Mat<S> out(batch, dim_);
    const auto w_self = w_.value.row(0).head(dim_);
    const auto w_hop = w_.value.row(0).tail(dim_);
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto t0 = tokens.row(b * seq);
      out.row(b) = t0;
      if (hops == 0) continue;
      const S base = t0.dot(w_self);
      S mx = -std::numeric_limits<S>::infinity();
      for (int k = 0; k < hops; ++k) {
        alpha_(b, k) = base + tokens.row(b * seq + 1 + k).dot(w_hop);
        mx = std::max(mx, alpha_(b, k));
      }
      S total = 0;
      for (int k = 0; k < hops; ++k) total += (alpha_(b, k) = std::exp(alpha_(b, k) - mx));
      for (int k = 0; k < hops; ++k) {
        alpha_(b, k) /= total;
        out.row(b) += alpha_(b, k) * tokens.row(b * seq + 1 + k);
      }
    }
    return out;
  }

  Mat<S> backward(const Mat<S>& dout) {
    const int seq = seq_, hops = seq - 1;
    const Eigen::Index batch = dout.rows();
    Mat<S> dtokens = Mat<S>::Zero(tokens_.rows(), dim_);
    const auto w_self = w_.value.row(0).head(dim_);
    const auto w_hop = w_.value.row(0).tail(dim_);
    std::vector<S> dalpha(static_cast<std::size_t>(std::max(hops, 0)));
    for (Eigen::Index b = 0; b < batch; ++b) {
      dtokens.row(b * seq) += dout.row(b);
      if (hops == 0) continue;
      S weighted = 0;
      for (int k = 0; k < hops; ++k) {
        dalpha[k] = dout.row(b).dot(tokens_.row(b * seq + 1 + k));
        weighted += alpha_(b, k) * dalpha[k];
        dtokens.row(b * seq + 1 + k) += alpha_(b, k) * dout.row(b);
      }
      for (int k = 0; k < hops; ++k) {
        const S ds = alpha_(b, k) * (dalpha[k] - weighted);
        w_.grad.row(0).head(dim_) += ds * tokens_.row(b * seq);
        w_.grad.row(0).tail(dim_) += ds * tokens_.row(b * seq + 1 + k);
        dtokens.row(b * seq) += ds * w_self;
        dtokens.row(b * seq + 1 + k) += ds * w_hop;
      }
    }
    return dtokens;
  }

  const Mat<S>& last_weights() const { return alpha_; }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "weight", w_);
  }

 private:
  Param<S> w_;
  int dim_ = 0;
  int seq_ = 1;
  Mat<S> tokens_;
  Mat<S> alpha_;
};

/// Encoder stack + final LayerNorm + attention readout.
template <typename S>
class TransformerBackbone {
 public:
  TransformerBackbone() = default;
  TransformerBackbone(int dim, int layers, int heads, int ffn_multiplier, double dropout)
      : final_ln_(dim), readout_(dim) {
    if (layers < 1) throw ValidationError("num_layers must be at least 1");
    for (int i = 0; i < layers; ++i) layers_.emplace_back(dim, heads, ffn_multiplier, dropout);
  }

  Mat<S> forward(const Mat<S>& z, int seq, const ForwardContext& ctx) {
    Mat<S> x = z;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = layers_[i].forward(x, seq, ctx);
      if (!x.allFinite()) throw NumericalError("non-finite activations after encoder layer " + std::to_string(i));
    }
    return readout_.forward(final_ln_.forward(x), seq);
  }

  Mat<S> backward(const Mat<S>& dh) {
    Mat<S> dx = final_ln_.backward(readout_.backward(dh));
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) dx = it->backward(dx);
    return dx;
  }

  const AttentionReadout<S>& readout() const { return readout_; }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].visit(prefix + "layer" + std::to_string(i) + ".", f);
    final_ln_.visit(prefix + "final_ln.", f);
    readout_.visit(prefix + "readout.", f);
  }

 private:
  std::vector<EncoderLayer<S>> layers_;
  LayerNorm<S> final_ln_;
  AttentionReadout<S> readout_;
};

}  // namespace ussl::nn
