#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "vflsim/error.hpp"

namespace vflsim::protocol {

/// Rank-based ROC AUC (Mann-Whitney U), tied scores share their mean rank.
/// Labels are positive when > 0, so both {0,1} and {-1,+1} work.
inline double auc(std::span<const double> scores, std::span<const double> labels) {
  detail::require_shape(scores.size() == labels.size(), "auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] > 0.0) {
        positive_rank_sum += mean_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw Error("auc: needs at least one positive and one negative label");
  }
  const double p = static_cast<double>(positives);
  const double n = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

}  // namespace vflsim::protocol
