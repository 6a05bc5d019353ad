#pragma once

// Post-hoc federation baselines: each client factorizes its block with an
// arbitrary local Boolean factorizer, then the server merges the Boolean V
// factors with one of three structure-preserving aggregation rules (rounded
// average, majority vote, logical OR). Also provides the threshold grid
// search that rounds relaxed factors by minimizing reconstruction error.

#include <bit>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "felb/federation.hpp"
#include "felb/matrix.hpp"

namespace felb {

/// Pluggable local Boolean factorization: (block, rank, seed) -> (U, V).
struct LocalFactorizer {
  std::string name;
  std::function<std::pair<BinaryMatrix, BinaryMatrix>(const BinaryMatrix&, std::size_t,
                                                      std::uint64_t)>
      factorize;
};

enum class BaselineAggregator { kRoundedAverage, kMajorityVote, kLogicalOr };

namespace detail {

inline std::vector<std::uint32_t> vote_counts(const std::vector<BinaryMatrix>& vs) {
  if (vs.empty()) throw std::invalid_argument("aggregate: no client factors");
  const std::size_t rows = vs.front().rows(), cols = vs.front().cols();
  std::vector<std::uint32_t> counts(rows * cols, 0);
  for (const BinaryMatrix& v : vs) {
    if (v.rows() != rows || v.cols() != cols)
      throw std::invalid_argument("aggregate: factor shape mismatch");
    for (const auto& [r, c] : v.entries()) ++counts[static_cast<std::size_t>(r) * cols + c];
  }
  return counts;
}

inline BinaryMatrix from_counts(const std::vector<std::uint32_t>& counts, std::size_t rows,
                                std::size_t cols, std::size_t threshold_double_count) {
  std::vector<BinaryMatrix::Entry> entries;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (2 * static_cast<std::size_t>(counts[r * cols + c]) >= threshold_double_count)
        entries.emplace_back(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c));
  return BinaryMatrix::from_entries(rows, cols, std::move(entries));
}

}  // namespace detail

/// Element-wise nearest-integer rounding of the mean factor; an exact mean of
/// 1/2 rounds up to 1.
inline BinaryMatrix agg_rounded_average(const std::vector<BinaryMatrix>& vs) {
  const auto counts = detail::vote_counts(vs);
  // round(count/C) == 1  <=>  count/C >= 1/2  <=>  2*count >= C (half-up).
  return detail::from_counts(counts, vs.front().rows(), vs.front().cols(), vs.size());
}

/// Majority vote: 1 where at least C/2 clients set the entry (ties pass).
inline BinaryMatrix agg_majority_vote(const std::vector<BinaryMatrix>& vs) {
  const auto counts = detail::vote_counts(vs);
  return detail::from_counts(counts, vs.front().rows(), vs.front().cols(), vs.size());
}

/// Element-wise disjunction of all client factors.
inline BinaryMatrix agg_logical_or(const std::vector<BinaryMatrix>& vs) {
  const auto counts = detail::vote_counts(vs);
  return detail::from_counts(counts, vs.front().rows(), vs.front().cols(), 2);
}

inline BinaryMatrix aggregate_boolean(const std::vector<BinaryMatrix>& vs,
                                      BaselineAggregator agg) {
  switch (agg) {
    case BaselineAggregator::kRoundedAverage:
      return agg_rounded_average(vs);
    case BaselineAggregator::kMajorityVote:
      return agg_majority_vote(vs);
    case BaselineAggregator::kLogicalOr:
      return agg_logical_or(vs);
  }
  throw std::invalid_argument("aggregate_boolean: unknown aggregator");
}

/// One-shot aggregated factorization: run the local solver per client,
/// merge the V factors with the chosen rule, and return the per-client row
/// factors together with the consensus V.
inline std::pair<std::vector<BinaryMatrix>, BinaryMatrix> run_aggregated_bmf(
    const std::vector<BinaryMatrix>& parts, const LocalFactorizer& algo, BaselineAggregator agg,
    std::size_t rank, std::uint64_t seed) {
  if (parts.empty()) throw std::invalid_argument("run_aggregated_bmf: no client blocks");
  if (!algo.factorize) throw std::invalid_argument("run_aggregated_bmf: empty factorizer");
  const std::size_t m = parts.front().cols();
  std::vector<BinaryMatrix> us, vs;
  us.reserve(parts.size());
  vs.reserve(parts.size());
  for (std::size_t c = 0; c < parts.size(); ++c) {
    if (parts[c].cols() != m)
      throw std::invalid_argument("run_aggregated_bmf: column count mismatch");
    std::pair<BinaryMatrix, BinaryMatrix> uv;
    try {
      // Every client factorizes under the same seed: identical blocks then
      // yield identical factors, so any aggregation rule is consensus-stable,
      // and component rows stay aligned across clients.
      uv = algo.factorize(parts[c], rank, seed);
    } catch (const numerical_error& e) {
      throw numerical_error("run_aggregated_bmf: local solver '" + algo.name +
                            "' failed on client " + std::to_string(c) + ": " + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error("run_aggregated_bmf: local solver '" + algo.name +
                               "' failed on client " + std::to_string(c) + ": " + e.what());
    }
    if (uv.first.rows() != parts[c].rows() || uv.first.cols() != rank ||
        uv.second.rows() != rank || uv.second.cols() != m)
      throw std::runtime_error("run_aggregated_bmf: local solver '" + algo.name +
                               "' returned wrong shapes on client " + std::to_string(c));
    us.push_back(std::move(uv.first));
    vs.push_back(std::move(uv.second));
  }
  BinaryMatrix v_hat = aggregate_boolean(vs, agg);
  return {std::move(us), std::move(v_hat)};
}

/// Result of the rounding-threshold grid search.
struct ThresholdRounding {
  double alpha = 0.5;  // row-factor threshold
  double beta = 0.5;   // column-factor threshold
  BinaryMatrix u;      // [U >= alpha], stacked across clients
  BinaryMatrix v;      // [V >= beta]
};

/// Exhaustive search over a 100x100 equi-distant grid of thresholds
/// (alpha, beta) in [1e-12, 1], minimizing the total Hamming reconstruction
/// error sum_c |A_c xor ([U_c >= alpha] o [V >= beta])|. U is the stacked row
/// factor whose blocks correspond to `parts` in order. Ties go to the
/// lexicographically smaller (alpha, beta).
///
/// Rows with equal Boolean U patterns share a reconstruction row, so each
/// grid cell costs O(distinct-patterns * k + rows) word operations on
/// bit-packed rows rather than a full Boolean product.
inline ThresholdRounding threshold_round_search(const FactorMatrix& u, const FactorMatrix& v,
                                                const std::vector<BinaryMatrix>& parts) {
  if (parts.empty()) throw std::invalid_argument("threshold_round_search: no data blocks");
  const std::size_t k = u.cols();
  const std::size_t m = v.cols();
  if (v.rows() != k) throw std::invalid_argument("threshold_round_search: U/V rank mismatch");
  std::size_t total_rows = 0;
  for (const BinaryMatrix& p : parts) {
    if (p.cols() != m)
      throw std::invalid_argument("threshold_round_search: column count mismatch");
    total_rows += p.rows();
  }
  if (u.rows() != total_rows)
    throw std::invalid_argument("threshold_round_search: U rows do not cover all blocks");
  if (k > 63) throw std::invalid_argument("threshold_round_search: rank above 63 unsupported");

  constexpr int kGridPoints = 100;
  constexpr double kGridLo = 1e-12;
  constexpr double kGridHi = 1.0;
  const auto grid_value = [](int i) {
    return kGridLo + (kGridHi - kGridLo) * static_cast<double>(i) /
                         static_cast<double>(kGridPoints - 1);
  };

  // Bit-pack all data rows (stacked in client order).
  const std::size_t words = (m + 63) / 64;
  std::vector<std::uint64_t> data_bits(total_rows * words, 0);
  {
    std::size_t row_base = 0;
    for (const BinaryMatrix& p : parts) {
      for (const auto& [r, c] : p.entries())
        data_bits[(row_base + r) * words + c / 64] |= 1ULL << (c % 64);
      row_base += p.rows();
    }
  }

  // Bit-packed rows of [V >= beta] for every beta candidate.
  std::vector<std::uint64_t> v_bits(static_cast<std::size_t>(kGridPoints) * k * words, 0);
  for (int bi = 0; bi < kGridPoints; ++bi) {
    const double beta = grid_value(bi);
    std::uint64_t* rows = v_bits.data() + static_cast<std::size_t>(bi) * k * words;
    for (std::size_t l = 0; l < k; ++l)
      for (std::size_t j = 0; j < m; ++j)
        if (v(l, j) >= beta) rows[l * words + j / 64] |= 1ULL << (j % 64);
  }

  std::size_t best_loss = static_cast<std::size_t>(-1);
  int best_ai = 0, best_bi = 0;
  std::vector<std::uint64_t> patterns(total_rows);
  std::vector<std::uint64_t> distinct;
  std::vector<std::uint32_t> pattern_index(total_rows);
  std::vector<std::uint64_t> recon;
  for (int ai = 0; ai < kGridPoints; ++ai) {
    const double alpha = grid_value(ai);
    distinct.clear();
    for (std::size_t i = 0; i < total_rows; ++i) {
      std::uint64_t p = 0;
      const double* ui = u.row(i);
      for (std::size_t l = 0; l < k; ++l)
        if (ui[l] >= alpha) p |= 1ULL << l;
      patterns[i] = p;
      std::size_t d = 0;
      while (d < distinct.size() && distinct[d] != p) ++d;
      if (d == distinct.size()) distinct.push_back(p);
      pattern_index[i] = static_cast<std::uint32_t>(d);
    }
    recon.assign(distinct.size() * words, 0);
    for (int bi = 0; bi < kGridPoints; ++bi) {
      const std::uint64_t* vrows = v_bits.data() + static_cast<std::size_t>(bi) * k * words;
      for (std::size_t d = 0; d < distinct.size(); ++d) {
        std::uint64_t* out = recon.data() + d * words;
        for (std::size_t w = 0; w < words; ++w) out[w] = 0;
        for (std::size_t l = 0; l < k; ++l)
          if (distinct[d] & (1ULL << l))
            for (std::size_t w = 0; w < words; ++w) out[w] |= vrows[l * words + w];
      }
      std::size_t loss = 0;
      for (std::size_t i = 0; i < total_rows; ++i) {
        const std::uint64_t* a = data_bits.data() + i * words;
        const std::uint64_t* r = recon.data() + pattern_index[i] * words;
        for (std::size_t w = 0; w < words; ++w)
          loss += static_cast<std::size_t>(std::popcount(a[w] ^ r[w]));
      }
      if (loss < best_loss) {
        best_loss = loss;
        best_ai = ai;
        best_bi = bi;
      }
    }
  }

  ThresholdRounding result;
  result.alpha = grid_value(best_ai);
  result.beta = grid_value(best_bi);
  result.u = binarize(u, result.alpha);
  result.v = binarize(v, result.beta);
  return result;
}

/// The shipped local factorizer: a centralized run of the relaxed proximal
/// algorithm (single client, no anchor pull, no privacy) under the default
/// schedule, rounded at 1/2.
inline std::pair<BinaryMatrix, BinaryMatrix> reference_local_factorizer(const BinaryMatrix& a,
                                                                        std::size_t rank,
                                                                        std::uint64_t seed) {
  if (rank > a.rows() || rank > a.cols())
    throw std::invalid_argument("reference_local_factorizer: rank exceeds matrix dimensions");
  FederationConfig cfg;
  cfg.clients = 1;
  cfg.rank = rank;
  cfg.prox.gamma = 0.0;
  cfg.global_seed = seed;
  const RunHistory history = run_centralized(a, cfg);
  return round_factors(history.client_u.front(), history.client_v.front());
}

inline LocalFactorizer make_reference_factorizer() {
  return LocalFactorizer{"relaxed-proximal-reference",
                         [](const BinaryMatrix& a, std::size_t rank, std::uint64_t seed) {
                           return reference_local_factorizer(a, rank, seed);
                         }};
}

}  // namespace felb
