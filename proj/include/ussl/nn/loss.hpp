#pragma once

#include "ussl/core/types.hpp"

#include <cmath>
#include <span>

namespace ussl::nn {

template <typename S>
struct LossResult {
  double loss = 0.0;  // mean over rows
  Mat<S> grad;        // d loss / d logits
};

/// Mean softmax cross-entropy over the rows of `logits`.
template <typename S>
LossResult<S> softmax_cross_entropy(const Mat<S>& logits, std::span<const int> labels) {
  const Eigen::Index n = logits.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw ValidationError("cross-entropy: label count mismatch");
  LossResult<S> out;
  out.grad.resize(n, logits.cols());
  if (n == 0) return out;
  double total = 0.0;
  const S inv_n = S(1) / static_cast<S>(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const int y = labels[r];
    if (y < 0 || y >= logits.cols()) throw ValidationError("cross-entropy: label outside logit range");
    const S mx = logits.row(r).maxCoeff();
    auto e = (logits.row(r).array() - mx).exp();
    const S z = e.sum();
    total += static_cast<double>(std::log(z) - (logits(r, y) - mx));
    out.grad.row(r) = e / z;
    out.grad(r, y) -= S(1);
    out.grad.row(r) *= inv_n;
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

}  // namespace ussl::nn
