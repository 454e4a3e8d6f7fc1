#pragma once

#include "ussl/nn/layers.hpp"

#include <span>
#include <string>
#include <vector>

namespace ussl::nn {

inline constexpr double kHeadInitStd = 0.01;

/// Row indices (into a representation batch) of the two members of each pair.
struct PairIndex {
  std::vector<Eigen::Index> first;
  std::vector<Eigen::Index> second;
  std::size_t size() const { return first.size(); }
};

/// PairSim head: logits = |h_u - h_v| W + b, two classes.
template <typename S>
class PairHead {
 public:
  PairHead() = default;
  explicit PairHead(int dim) : fc_(dim, 2, normal_init(kHeadInitStd), constant_init(0.0)) {}

  Mat<S> forward(const Mat<S>& h, const PairIndex& pairs) {
    const auto n = static_cast<Eigen::Index>(pairs.size());
    Mat<S> diff(n, h.cols());
    for (Eigen::Index p = 0; p < n; ++p) diff.row(p) = h.row(pairs.first[p]) - h.row(pairs.second[p]);
    sign_ = diff.unaryExpr([](S v) { return v > S(0) ? S(1) : (v < S(0) ? S(-1) : S(0)); });
    if (kink_pattern_digest) *kink_pattern_digest = fnv1a(sign_.data(), sizeof(S) * sign_.size(), *kink_pattern_digest);
    pairs_ = pairs;
    rows_ = h.rows();
    return fc_.forward(diff.cwiseAbs());
  }

  /// Gradient w.r.t. the representation batch passed to forward.
  Mat<S> backward(const Mat<S>& dlogits) {
    const Mat<S> ddiff = fc_.backward(dlogits).cwiseProduct(sign_);
    Mat<S> dh = Mat<S>::Zero(rows_, ddiff.cols());
    for (Eigen::Index p = 0; p < ddiff.rows(); ++p) {
      dh.row(pairs_.first[p]) += ddiff.row(p);
      dh.row(pairs_.second[p]) -= ddiff.row(p);
    }
    return dh;
  }

  Linear<S>& fc() { return fc_; }
  const Linear<S>& fc() const { return fc_; }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    fc_.visit(prefix, f);
  }

 private:
  Linear<S> fc_;
  Mat<S> sign_;
  PairIndex pairs_;
  Eigen::Index rows_ = 0;
};

/// Node classification head: one affine map to class logits.
template <typename S>
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(int dim, int classes) : fc_(dim, classes, normal_init(kHeadInitStd), constant_init(0.0)) {}

  int num_classes() const { return fc_.out_dim(); }
  Mat<S> forward(const Mat<S>& h) { return fc_.forward(h); }
  Mat<S> apply(const Mat<S>& h) const { return fc_.apply(h); }
  Mat<S> backward(const Mat<S>& dlogits, bool need_input_grad = true) { return fc_.backward(dlogits, need_input_grad); }

  Linear<S>& fc() { return fc_; }
  const Linear<S>& fc() const { return fc_; }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    fc_.visit(prefix, f);
  }

 private:
  Linear<S> fc_;
};

}  // namespace ussl::nn
