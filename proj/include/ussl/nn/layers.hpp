#pragma once

#include "ussl/nn/param.hpp"

#include <cmath>
#include <random>
#include <string>

namespace ussl::nn {

/// y = x W + b, with W stored in x out layout.
template <typename S>
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, InitRule weight_init, InitRule bias_init, bool bias = true)
      : weight_(in, out, weight_init), has_bias_(bias) {
    if (bias) bias_ = Param<S>(1, out, bias_init);
  }
  /// Affine map with uniform fan-in init on both weight and bias.
  static Linear affine(int in, int out, bool bias = true) {
    return Linear(in, out, fan_in_uniform(in), fan_in_uniform(in), bias);
  }

  int in_dim() const { return static_cast<int>(weight_.value.rows()); }
  int out_dim() const { return static_cast<int>(weight_.value.cols()); }

  Mat<S> forward(const Mat<S>& x) {
    input_ = x;
    return apply(x);
  }

  /// Forward without caching the input.
  Mat<S> apply(const Mat<S>& x) const {
    Mat<S> y(x.rows(), out_dim());
    y.noalias() = x * weight_.value;
    if (has_bias_) y.rowwise() += bias_.value.row(0);
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, bool need_input_grad = true) {
    weight_.grad.noalias() += input_.transpose() * dy;
    if (has_bias_) bias_.grad += dy.colwise().sum();
    if (!need_input_grad) return {};
    Mat<S> dx(dy.rows(), in_dim());
    dx.noalias() = dy * weight_.value.transpose();
    return dx;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "weight", weight_);
    if (has_bias_) f(prefix + "bias", bias_);
  }

  Param<S>& weight() { return weight_; }
  Param<S>& bias() { return bias_; }
  const Param<S>& weight() const { return weight_; }
  const Param<S>& bias() const { return bias_; }

 private:
  Param<S> weight_;
  Param<S> bias_;
  bool has_bias_ = true;
  Mat<S> input_;
};

template <typename S>
class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(int dim, double eps = 1e-5)
      : gamma_(1, dim, constant_init(1.0)), beta_(1, dim, constant_init(0.0)), eps_(eps) {}

  Mat<S> forward(const Mat<S>& x) {
    const Eigen::Index n = x.rows(), d = x.cols();
    xhat_.resize(n, d);
    rstd_.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const S mean = x.row(r).mean();
      const S var = (x.row(r).array() - mean).square().mean();
      const S rstd = S(1) / std::sqrt(var + static_cast<S>(eps_));
      rstd_[r] = rstd;
      xhat_.row(r) = (x.row(r).array() - mean) * rstd;
    }
    Mat<S> y = xhat_.array().rowwise() * gamma_.value.row(0).array();
    y.rowwise() += beta_.value.row(0);
    return y;
  }

  Mat<S> backward(const Mat<S>& dy) {
    gamma_.grad += (dy.array() * xhat_.array()).colwise().sum().matrix();
    beta_.grad += dy.colwise().sum();
    Mat<S> dxhat = dy.array().rowwise() * gamma_.value.row(0).array();
    Mat<S> dx(dy.rows(), dy.cols());
    const S inv_d = S(1) / static_cast<S>(dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      const S m1 = dxhat.row(r).sum() * inv_d;
      const S m2 = dxhat.row(r).dot(xhat_.row(r)) * inv_d;
      dx.row(r) = rstd_[r] * (dxhat.row(r).array() - m1 - xhat_.row(r).array() * m2);
    }
    return dx;
  }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + "gamma", gamma_);
    f(prefix + "beta", beta_);
  }

 private:
  Param<S> gamma_, beta_;
  double eps_ = 1e-5;
  Mat<S> xhat_;
  Eigen::Matrix<S, Eigen::Dynamic, 1> rstd_;
};

/// Exact (erf) GELU.
template <typename S>
class Gelu {
 public:
  Mat<S> forward(const Mat<S>& x) {
    input_ = x;
    return x.unaryExpr([](S v) { return static_cast<S>(0.5) * v * (S(1) + std::erf(v * static_cast<S>(M_SQRT1_2))); });
  }
  Mat<S> backward(const Mat<S>& dy) const {
    const S inv_sqrt_2pi = static_cast<S>(0.3989422804014327);
    Mat<S> d = input_.unaryExpr([&](S v) {
      const S cdf = static_cast<S>(0.5) * (S(1) + std::erf(v * static_cast<S>(M_SQRT1_2)));
      return cdf + v * inv_sqrt_2pi * std::exp(static_cast<S>(-0.5) * v * v);
    });
    return dy.cwiseProduct(d);
  }

 private:
  Mat<S> input_;
};

/// When set, piecewise-linear ops (ReLU, |x|) fold their branch pattern into this digest; finite
/// difference checks use it to spot stencils that straddle a kink.
inline thread_local std::uint64_t* kink_pattern_digest = nullptr;

template <typename S>
class Relu {
 public:
  Mat<S> forward(const Mat<S>& x) {
    mask_ = (x.array() > S(0)).template cast<S>();
    if (kink_pattern_digest) *kink_pattern_digest = fnv1a(mask_.data(), sizeof(S) * mask_.size(), *kink_pattern_digest);
    return x.cwiseMax(S(0));
  }
  Mat<S> backward(const Mat<S>& dy) const { return dy.cwiseProduct(mask_); }

 private:
  Mat<S> mask_;
};

/// Inverted dropout; identity outside training.
template <typename S>
class Dropout {
 public:
  Dropout() = default;
  explicit Dropout(double rate) : rate_(rate) {}

  Mat<S> forward(const Mat<S>& x, const ForwardContext& ctx) {
    active_ = ctx.training && rate_ > 0.0;
    if (!active_) return x;
    if (!ctx.rng) throw Error("dropout in training mode needs an RNG");
    const S keep_scale = static_cast<S>(1.0 / (1.0 - rate_));
    // four 16-bit uniforms per 64-bit draw
    const auto threshold = static_cast<std::uint64_t>(rate_ * 65536.0);
    mask_.resize(x.rows(), x.cols());
    std::uint64_t bits = 0;
    for (Eigen::Index i = 0; i < mask_.size(); ++i) {
      if (i % 4 == 0) bits = (*ctx.rng)();
      mask_.data()[i] = (bits & 0xffff) < threshold ? S(0) : keep_scale;
      bits >>= 16;
    }
    return x.cwiseProduct(mask_);
  }
  Mat<S> backward(const Mat<S>& dy) const { return active_ ? Mat<S>(dy.cwiseProduct(mask_)) : dy; }

 private:
  double rate_ = 0.0;
  bool active_ = false;
  Mat<S> mask_;
};

}  // namespace ussl::nn
