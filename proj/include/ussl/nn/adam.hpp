#pragma once

#include "ussl/nn/param.hpp"

#include <cmath>
#include <map>
#include <string>

namespace ussl::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with per-parameter moment buffers keyed by parameter name.
template <typename S>
class Adam {
 public:
  explicit Adam(AdamOptions opt = {}) : opt_(opt) {}

  void step(const std::string& name, Param<S>& p, double lr) {
    auto& st = state_[name];
    if (st.m.size() == 0) {
      st.m = Mat<S>::Zero(p.value.rows(), p.value.cols());
      st.v = Mat<S>::Zero(p.value.rows(), p.value.cols());
    }
    ++st.t;
    const S b1 = static_cast<S>(opt_.beta1), b2 = static_cast<S>(opt_.beta2);
    st.m = b1 * st.m + (S(1) - b1) * p.grad;
    st.v = b2 * st.v + (S(1) - b2) * p.grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(st.t));
    const S step_size = static_cast<S>(lr / c1);
    const S root_c2 = static_cast<S>(std::sqrt(c2));
    const S eps = static_cast<S>(opt_.eps);
    p.value.array() -= step_size * st.m.array() / (st.v.array().sqrt() / root_c2 + eps);
  }

  void clear() { state_.clear(); }
  std::size_t tracked() const { return state_.size(); }

 private:
  struct State {
    Mat<S> m, v;
    long t = 0;
  };
  AdamOptions opt_;
  std::map<std::string, State> state_;
};

}  // namespace ussl::nn
