#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace ngnn {

/// Fraction of matching predictions. Undefined (throws) on empty input.
inline double accuracy(std::span<const std::int32_t> preds, std::span<const std::int32_t> labels) {
  if (preds.size() != labels.size()) throw std::invalid_argument("accuracy: size mismatch");
  if (preds.empty()) throw std::invalid_argument("accuracy: undefined on empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

/// Probability that a random positive outranks a random negative, ties
/// counted half. Rank-based: AUC = (R_pos - P(P+1)/2) / (P*N) with average
/// ranks on ties. Requires both classes present.
inline double roc_auc(std::span<const double> scores, std::span<const std::int32_t> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: size mismatch");
  std::size_t pos = 0;
  for (std::int32_t l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("roc_auc: labels must be 0/1");
    pos += static_cast<std::size_t>(l);
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc_auc: both classes required");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

/// Fraction of positives scoring strictly above the K-th largest negative.
inline double hits_at_k(std::span<const double> pos_scores, std::span<const double> neg_scores,
                        std::size_t k) {
  if (k == 0) throw std::invalid_argument("hits_at_k: k must be positive");
  if (k > neg_scores.size()) throw std::invalid_argument("hits_at_k: k exceeds negative count");
  if (pos_scores.empty()) throw std::invalid_argument("hits_at_k: no positives");
  std::vector<double> neg(neg_scores.begin(), neg_scores.end());
  std::nth_element(neg.begin(), neg.begin() + (k - 1), neg.end(), std::greater<double>());
  const double threshold = neg[k - 1];
  std::size_t hit = 0;
  for (double s : pos_scores)
    if (s > threshold) ++hit;
  return static_cast<double>(hit) / static_cast<double>(pos_scores.size());
}

}  // namespace ngnn
