#pragma once

#include "ussl/core/types.hpp"

#include <cmath>
#include <random>
#include <string>

namespace ussl::nn {

/// How a tensor is (re)initialized from its named seed.
struct InitRule {
  enum class Kind { fan_in_uniform, normal, constant } kind = Kind::constant;
  double scale = 0.0;  // fan-in for fan_in_uniform, std for normal, value for constant
};

inline InitRule fan_in_uniform(long fan_in) { return {InitRule::Kind::fan_in_uniform, static_cast<double>(fan_in)}; }
inline InitRule normal_init(double stddev) { return {InitRule::Kind::normal, stddev}; }
inline InitRule constant_init(double value) { return {InitRule::Kind::constant, value}; }

template <typename S>
struct Param {
  Mat<S> value;
  Mat<S> grad;
  InitRule init;

  Param() = default;
  Param(Eigen::Index rows, Eigen::Index cols, InitRule rule)
      : value(Mat<S>::Zero(rows, cols)), grad(Mat<S>::Zero(rows, cols)), init(rule) {}

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }

  void reset(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    switch (init.kind) {
      case InitRule::Kind::fan_in_uniform: {
        const double bound = 1.0 / std::sqrt(init.scale);
        std::uniform_real_distribution<double> d(-bound, bound);
        for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = static_cast<S>(d(rng));
        break;
      }
      case InitRule::Kind::normal: {
        std::normal_distribution<double> d(0.0, init.scale);
        for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = static_cast<S>(d(rng));
        break;
      }
      case InitRule::Kind::constant:
        value.setConstant(static_cast<S>(init.scale));
        break;
    }
    zero_grad();
  }
};

/// Dropout and train/eval switch for one forward pass.
struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;
};

}  // namespace ussl::nn
