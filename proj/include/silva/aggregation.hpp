#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "silva/core.hpp"

namespace silva {

class DegenerateAttentionError : public Error {
 public:
  using Error::Error;
};

// Relative contribution of nucleus vs satellite children. Satellites must
// not outweigh nuclei.
struct AggregationConfig {
  double w_nucleus = 1.0;
  double w_satellite = 0.5;

  bool valid() const {
    return w_satellite > 0.0 && w_satellite <= w_nucleus;
  }
};

// (lambda_left, lambda_right) for a nuclearity label.
inline std::pair<double, double> nuclearity_weights(
    Nuclearity label, const AggregationConfig& cfg) {
  switch (label) {
    case Nuclearity::NN: return {cfg.w_nucleus, cfg.w_nucleus};
    case Nuclearity::NS: return {cfg.w_nucleus, cfg.w_satellite};
    case Nuclearity::SN: return {cfg.w_satellite, cfg.w_nucleus};
  }
  return {cfg.w_nucleus, cfg.w_nucleus};
}

// Parent signal from two child signals under a nuclearity label:
//   sentiment = weighted mean of child sentiments, weights lambda * attention
//   attention = weighted sum of child attentions
// The sentiment is a convex combination of the child sentiments (clamped to
// guard the invariant against rounding); the attention stays positive.
inline NodeSignal combine_node(const NodeSignal& left, const NodeSignal& right,
                               Nuclearity label, const AggregationConfig& cfg) {
  const auto [lambda_l, lambda_r] = nuclearity_weights(label, cfg);
  const double wl = lambda_l * left.attention;
  const double wr = lambda_r * right.attention;
  const double attention = wl + wr;
  if (!(attention > 0.0)) {
    throw DegenerateAttentionError("combine_node: weighted attention sum is zero");
  }
  double sentiment = (wl * left.sentiment + wr * right.sentiment) / attention;
  const double lo = std::min(left.sentiment, right.sentiment);
  const double hi = std::max(left.sentiment, right.sentiment);
  sentiment = std::clamp(sentiment, lo, hi);
  return {sentiment, attention};
}

// |gold - aggregated sentiment|; the quantity the tree search minimizes.
inline double root_distance(double gold_polarity, const NodeSignal& signal) {
  return std::abs(gold_polarity - signal.sentiment);
}

enum class DistanceKind { absolute, squared };

inline const char* to_string(DistanceKind kind) {
  return kind == DistanceKind::absolute ? "absolute" : "squared";
}

inline double distance_value(double gold_polarity, double sentiment,
                             DistanceKind kind) {
  const double diff = std::abs(gold_polarity - sentiment);
  return kind == DistanceKind::absolute ? diff : diff * diff;
}

}  // namespace silva
