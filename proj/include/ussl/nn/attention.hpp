#pragma once

#include "ussl/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ussl::nn {

/// Multi-head self-attention over fixed-length sequences packed as (batch * seq) x dim rows.
template <typename S>
class MultiHeadSelfAttention {
 public:
  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(int dim, int heads, double init_std)
      : qkv_(dim, 3 * dim, normal_init(init_std), constant_init(0.0)),
        out_(dim, dim, normal_init(init_std), constant_init(0.0)),
        dim_(dim),
        heads_(heads) {
    if (heads <= 0 || dim % heads != 0) throw ValidationError("embed_dim must be divisible by num_heads");
  }

  Mat<S> forward(const Mat<S>& x, int seq) {
    seq_ = seq;
    const Eigen::Index batch = x.rows() / seq;
    const int dh = dim_ / heads_;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    qkv_out_ = qkv_.forward(x);
    probs_.resize(batch * heads_ * seq, seq);
    Mat<S> context = Mat<S>::Zero(x.rows(), dim_);
    const Eigen::Index stride = 3 * dim_;
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Eigen::Index r0 = b * seq;
      for (int h = 0; h < heads_; ++h) {
        const S* base = qkv_out_.data() + r0 * stride + h * dh;
        const Eigen::Index p0 = (b * heads_ + h) * seq;
        for (int i = 0; i < seq; ++i) {
          const S* q = base + i * stride;
          S* prob = probs_.data() + (p0 + i) * seq;
          S mx = -std::numeric_limits<S>::infinity();
          for (int j = 0; j < seq; ++j) {
            const S* k = base + j * stride + dim_;
            S s = 0;
            for (int c = 0; c < dh; ++c) s += q[c] * k[c];
            prob[j] = s * scale;
            mx = std::max(mx, prob[j]);
          }
          S total = 0;
          for (int j = 0; j < seq; ++j) {
            prob[j] = std::exp(prob[j] - mx);
            total += prob[j];
          }
          S* ctx = context.data() + (r0 + i) * dim_ + h * dh;
          for (int j = 0; j < seq; ++j) {
            prob[j] /= total;
            const S* v = base + j * stride + 2 * dim_;
            for (int c = 0; c < dh; ++c) ctx[c] += prob[j] * v[c];
          }
        }
      }
    }
    return out_.forward(context);
  }

  Mat<S> backward(const Mat<S>& dy) {
    const int seq = seq_;
    const Eigen::Index batch = dy.rows() / seq;
    const int dh = dim_ / heads_;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    const Mat<S> dcontext = out_.backward(dy);
    Mat<S> dqkv = Mat<S>::Zero(dy.rows(), 3 * dim_);
    const Eigen::Index stride = 3 * dim_;
    std::vector<S> dp(static_cast<std::size_t>(seq));
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Eigen::Index r0 = b * seq;
      for (int h = 0; h < heads_; ++h) {
        const S* base = qkv_out_.data() + r0 * stride + h * dh;
        S* dbase = dqkv.data() + r0 * stride + h * dh;
        const Eigen::Index p0 = (b * heads_ + h) * seq;
        for (int i = 0; i < seq; ++i) {
          const S* prob = probs_.data() + (p0 + i) * seq;
          const S* dctx = dcontext.data() + (r0 + i) * dim_ + h * dh;
          S weighted = 0;
          for (int j = 0; j < seq; ++j) {
            const S* v = base + j * stride + 2 * dim_;
            S* dv = dbase + j * stride + 2 * dim_;
            S d = 0;
            for (int c = 0; c < dh; ++c) {
              d += dctx[c] * v[c];
              dv[c] += prob[j] * dctx[c];
            }
            dp[j] = d;
            weighted += prob[j] * d;
          }
          const S* q = base + i * stride;
          S* dq = dbase + i * stride;
          for (int j = 0; j < seq; ++j) {
            const S ds = prob[j] * (dp[j] - weighted) * scale;
            const S* k = base + j * stride + dim_;
            S* dk = dbase + j * stride + dim_;
            for (int c = 0; c < dh; ++c) {
              dq[c] += ds * k[c];
              dk[c] += ds * q[c];
            }
          }
        }
      }
    }
    return qkv_.backward(dqkv);
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    qkv_.visit(prefix + "qkv.", f);
    out_.visit(prefix + "out.", f);
  }

 private:
  Linear<S> qkv_;
  Linear<S> out_;
  int dim_ = 0;
  int heads_ = 1;
  int seq_ = 1;
  Mat<S> qkv_out_;
  Mat<S> probs_;
};

}  // namespace ussl::nn
