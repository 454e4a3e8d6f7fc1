#pragma once

#include "ussl/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace ussl {

/// Index of the largest entry; the lowest index wins ties.
template <typename Row>
Eigen::Index argmax_row(const Row& row) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < row.size(); ++c)
    if (row[c] > row[best]) best = c;
  return best;
}

/// Fraction of `mask` nodes whose argmax logit equals their label. `logits` has one row per
/// node of the graph.
template <typename S>
double accuracy(const Mat<S>& logits, std::span<const int> labels, std::span<const NodeId> mask) {
  if (mask.empty()) throw ValidationError("accuracy: empty mask");
  std::size_t correct = 0;
  for (NodeId v : mask) {
    if (v < 0 || v >= logits.rows() || static_cast<std::size_t>(v) >= labels.size())
      throw ValidationError("accuracy: mask index " + std::to_string(v) + " out of range");
    if (argmax_row(logits.row(v)) == labels[v]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(mask.size());
}

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
inline double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Median over the middle 80% of epochs (first and last 10% in run order dropped).
inline double trimmed_median(const std::vector<double>& per_epoch) {
  if (per_epoch.empty()) return 0.0;
  const std::size_t cut = per_epoch.size() / 10;
  std::vector<double> xs(per_epoch.begin() + static_cast<std::ptrdiff_t>(cut),
                         per_epoch.end() - static_cast<std::ptrdiff_t>(cut));
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size(), mid = n / 2;
  return n % 2 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
}

}  // namespace ussl
