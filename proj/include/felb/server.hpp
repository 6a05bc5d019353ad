#pragma once

// Server-side proximal aggregation of client V payloads: average, then apply
// the binary-inducing prox. The average is computed by a fixed pairwise-tree
// reduction over the client index so the result is bit-identical regardless
// of payload arrival order or thread count.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "felb/matrix.hpp"
#include "felb/proximal.hpp"

namespace felb {

/// Aggregate state broadcast back to clients.
struct AggregateState {
  FactorMatrix v_hat;
  std::uint64_t round = 0;
  std::size_t client_count = 0;
};

namespace detail {

inline FactorMatrix tree_sum(const std::vector<FactorMatrix>& payloads, std::size_t lo,
                             std::size_t hi) {
  if (hi - lo == 1) return payloads[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  FactorMatrix left = tree_sum(payloads, lo, mid);
  const FactorMatrix right = tree_sum(payloads, mid, hi);
  for (std::size_t i = 0; i < left.size(); ++i) left.data()[i] += right.data()[i];
  return left;
}

}  // namespace detail

/// Mean of equally shaped matrices via pairwise-tree summation.
inline FactorMatrix tree_mean(const std::vector<FactorMatrix>& payloads) {
  if (payloads.empty()) throw std::invalid_argument("tree_mean: no payloads");
  for (const FactorMatrix& p : payloads)
    if (p.rows() != payloads.front().rows() || p.cols() != payloads.front().cols())
      throw std::invalid_argument("tree_mean: payload shape mismatch");
  FactorMatrix sum = detail::tree_sum(payloads, 0, payloads.size());
  const double inv = 1.0 / static_cast<double>(payloads.size());
  for (std::size_t i = 0; i < sum.size(); ++i) sum.data()[i] *= inv;
  return sum;
}

/// Weighted mean with the same pairwise-tree reduction; weights are
/// normalized to sum to one before the payloads are scaled.
inline FactorMatrix tree_mean_weighted(const std::vector<FactorMatrix>& payloads,
                                       const std::vector<double>& weights) {
  if (payloads.size() != weights.size())
    throw std::invalid_argument("tree_mean_weighted: weight count mismatch");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("tree_mean_weighted: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("tree_mean_weighted: zero total weight");
  std::vector<FactorMatrix> scaled = payloads;
  for (std::size_t c = 0; c < scaled.size(); ++c) {
    const double w = weights[c] / total;
    for (std::size_t i = 0; i < scaled[c].size(); ++i) scaled[c].data()[i] *= w;
  }
  FactorMatrix sum = detail::tree_sum(scaled, 0, scaled.size());
  return sum;
}

/// Proximal-averaging aggregation: V_hat = prox of the payload mean under the
/// binary-inducing regularizer with step `eta` (default 1). `reg.lambda` must
/// already be the effective lambda_t of the current round. Pass `weights`
/// (client block sizes) to enable the weighted-mean extension.
inline FactorMatrix proximal_aggregate(const std::vector<FactorMatrix>& payloads,
                                       const RegularizationParams& reg, double eta = 1.0,
                                       const std::vector<double>* weights = nullptr) {
  reg.validate();
  if (!(eta > 0.0) || !std::isfinite(eta))
    throw std::invalid_argument("proximal_aggregate: eta must be > 0");
  const FactorMatrix mean = weights ? tree_mean_weighted(payloads, *weights) : tree_mean(payloads);
  return prox_elb(mean, {eta * reg.kappa, eta * reg.lambda, reg.growth});
}

}  // namespace felb
