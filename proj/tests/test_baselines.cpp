#include <catch2/catch_amalgamated.hpp>

#include <cstddef>
#include <utility>
#include <vector>

#include "felb/baselines.hpp"
#include "felb/federation.hpp"
#include "felb/matrix.hpp"
#include "felb/metrics.hpp"
#include "felb/rng.hpp"
#include "felb/synthdata.hpp"
#include "support/oracles.hpp"

using felb::BaselineAggregator;
using felb::BinaryMatrix;
using felb::FactorMatrix;
using felb::LocalFactorizer;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

/// One-cell matrices carrying a single vote each.
std::vector<BinaryMatrix> votes(std::initializer_list<int> bits) {
  std::vector<BinaryMatrix> vs;
  for (int b : bits) vs.push_back(BinaryMatrix::from_dense(1, 1, {b != 0}));
  return vs;
}

BinaryMatrix random_binary(std::size_t rows, std::size_t cols, double density,
                           std::uint64_t key) {
  felb::rng::Stream s(key);
  std::vector<std::uint8_t> bits(rows * cols, 0);
  for (auto& b : bits) b = s.unit() < density ? 1 : 0;
  return BinaryMatrix::from_dense(rows, cols, bits);
}

/// Micro-averaged F1 of each client's reconstruction against its own block.
double reconstruction_f1(const std::vector<BinaryMatrix>& parts,
                         const std::vector<BinaryMatrix>& us, const BinaryMatrix& v_hat) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t c = 0; c < parts.size(); ++c) {
    const felb::ConfusionCounts counts =
        felb::confusion(parts[c], felb::boolean_product(us[c], v_hat));
    tp += counts.tp;
    fp += counts.fp;
    fn += counts.fn;
  }
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

TEST_CASE("aggregation rules on hand votes") {
  // Rounded average: half-up tie rule.
  REQUIRE(felb::agg_rounded_average(votes({1, 1, 0})).at(0, 0));
  REQUIRE_FALSE(felb::agg_rounded_average(votes({1, 0, 0})).at(0, 0));
  REQUIRE(felb::agg_rounded_average(votes({1, 0})).at(0, 0));  // mean 0.5 rounds up

  // Majority vote with the >= C/2 tie rule.
  REQUIRE(felb::agg_majority_vote(votes({1, 1, 0})).at(0, 0));
  REQUIRE_FALSE(felb::agg_majority_vote(votes({0, 0, 1})).at(0, 0));
  REQUIRE(felb::agg_majority_vote(votes({1, 0})).at(0, 0));
  REQUIRE(felb::agg_majority_vote(votes({0, 0, 0})).nnz() == 0);

  // Logical or.
  REQUIRE(felb::agg_logical_or(votes({1, 0})).at(0, 0));
  REQUIRE(felb::agg_logical_or(votes({0, 0, 0})).nnz() == 0);
  const BinaryMatrix identical = random_binary(4, 5, 0.4, 1);
  for (auto agg : {BaselineAggregator::kRoundedAverage, BaselineAggregator::kMajorityVote,
                   BaselineAggregator::kLogicalOr})
    REQUIRE(felb::aggregate_boolean({identical, identical, identical}, agg).entries() ==
            identical.entries());
}

TEST_CASE("aggregation input validation") {
  REQUIRE_THROWS_AS(felb::agg_majority_vote({}), std::invalid_argument);
  REQUIRE_THROWS_WITH(
      felb::agg_logical_or({BinaryMatrix(2, 2), BinaryMatrix(2, 3)}),
      ContainsSubstring("shape"));
}

TEST_CASE("rounded average and majority vote coincide; or dominates vote") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t clients = 2 + seed % 5;  // covers odd and even C
    std::vector<BinaryMatrix> vs;
    for (std::size_t c = 0; c < clients; ++c)
      vs.push_back(random_binary(6, 8, 0.4, felb::rng::derive(201, seed, c)));

    const BinaryMatrix avg = felb::agg_rounded_average(vs);
    const BinaryMatrix vote = felb::agg_majority_vote(vs);
    const BinaryMatrix either = felb::agg_logical_or(vs);
    REQUIRE(avg.entries() == vote.entries());

    // Every vote-selected cell is also set under logical or.
    for (const auto& [r, c] : vote.entries()) REQUIRE(either.at(r, c));
  }
}

TEST_CASE("run_aggregated_bmf with one client passes the local result through") {
  const BinaryMatrix a = felb::generate_planted({30, 20, 1, 12, 8, 0.95, 0.0, 5}).data;
  const LocalFactorizer algo = felb::make_reference_factorizer();
  const auto [us, v_hat] =
      felb::run_aggregated_bmf({a}, algo, BaselineAggregator::kMajorityVote, 2, 9);

  const auto [u_direct, v_direct] = felb::reference_local_factorizer(a, 2, 9);
  REQUIRE(us.size() == 1);
  REQUIRE(us[0].entries() == u_direct.entries());
  REQUIRE(v_hat.entries() == v_direct.entries());
}

TEST_CASE("identical client data reaches consensus under every rule") {
  const BinaryMatrix block = felb::generate_planted({25, 15, 1, 10, 6, 0.95, 0.0, 6}).data;
  const std::vector<BinaryMatrix> parts = {block, block, block};
  const LocalFactorizer algo = felb::make_reference_factorizer();
  const auto [u_direct, v_direct] = felb::reference_local_factorizer(block, 2, 11);

  for (auto agg : {BaselineAggregator::kRoundedAverage, BaselineAggregator::kMajorityVote,
                   BaselineAggregator::kLogicalOr}) {
    const auto [us, v_hat] = felb::run_aggregated_bmf(parts, algo, agg, 2, 11);
    REQUIRE(v_hat.entries() == v_direct.entries());
    for (const BinaryMatrix& u : us) REQUIRE(u.entries() == u_direct.entries());
  }
}

TEST_CASE("majority vote beats logical or on average over planted data") {
  const LocalFactorizer algo = felb::make_reference_factorizer();
  double vote_sum = 0.0, or_sum = 0.0;
  const int seeds = 10;
  for (std::uint64_t j = 0; j < seeds; ++j) {
    const felb::PlantedSpec spec = felb::abundance_preset(4, felb::rng::derive(70, j));
    const BinaryMatrix a = felb::generate_planted(spec).data;
    const auto parts = felb::partition(a, 4, j);

    const auto [vote_us, vote_v] =
        felb::run_aggregated_bmf(parts, algo, BaselineAggregator::kMajorityVote, 8, j);
    const auto [or_us, or_v] =
        felb::run_aggregated_bmf(parts, algo, BaselineAggregator::kLogicalOr, 8, j);
    vote_sum += reconstruction_f1(parts, vote_us, vote_v);
    or_sum += reconstruction_f1(parts, or_us, or_v);
  }
  REQUIRE(vote_sum / seeds >= or_sum / seeds);
}

TEST_CASE("local solver failures carry the client index") {
  const std::vector<BinaryMatrix> parts = {random_binary(4, 6, 0.5, 7),
                                           random_binary(4, 6, 0.5, 8)};
  int calls = 0;
  const LocalFactorizer flaky{
      "flaky", [&calls](const BinaryMatrix& a, std::size_t rank, std::uint64_t) {
        if (calls++ == 1) throw felb::numerical_error("diverged");
        return std::pair(BinaryMatrix(a.rows(), rank), BinaryMatrix(rank, a.cols()));
      }};
  REQUIRE_THROWS_MATCHES(
      felb::run_aggregated_bmf(parts, flaky, BaselineAggregator::kLogicalOr, 2, 0),
      felb::numerical_error,
      Catch::Matchers::MessageMatches(ContainsSubstring("client 1") &&
                                      ContainsSubstring("diverged")));

  const LocalFactorizer misshapen{
      "misshapen", [](const BinaryMatrix& a, std::size_t rank, std::uint64_t) {
        return std::pair(BinaryMatrix(rank, a.rows()), BinaryMatrix(rank, a.cols()));
      }};
  REQUIRE_THROWS_WITH(
      felb::run_aggregated_bmf(parts, misshapen, BaselineAggregator::kLogicalOr, 2, 0),
      ContainsSubstring("wrong shapes on client 0"));
}

TEST_CASE("threshold search on already-Boolean factors") {
  const BinaryMatrix part = random_binary(10, 12, 0.35, 13);
  const FactorMatrix u = felb::to_factor(random_binary(10, 3, 0.4, 14));
  const FactorMatrix v = felb::to_factor(random_binary(3, 12, 0.4, 15));

  const felb::ThresholdRounding result = felb::threshold_round_search(u, v, {part});
  // Boolean entries make every grid threshold equivalent, so the search
  // reproduces plain rounding and the tie rule picks the smallest pair.
  REQUIRE(result.u.entries() == felb::binarize(u).entries());
  REQUIRE(result.v.entries() == felb::binarize(v).entries());
  REQUIRE_THAT(result.alpha, WithinAbs(1e-12, 1e-18));
  REQUIRE_THAT(result.beta, WithinAbs(1e-12, 1e-18));
}

TEST_CASE("threshold search finds a zero-loss pair when one exists") {
  const BinaryMatrix a = BinaryMatrix::from_dense(1, 1, {1});
  const FactorMatrix u = FactorMatrix::from_values(1, 1, {0.6});
  const FactorMatrix v = FactorMatrix::from_values(1, 1, {0.7});
  const felb::ThresholdRounding result = felb::threshold_round_search(u, v, {a});
  REQUIRE(result.u.at(0, 0));
  REQUIRE(result.v.at(0, 0));
  REQUIRE(felb::hamming_distance(felb::boolean_product(result.u, result.v), a) == 0);
  // Many thresholds reach loss 0; the lexicographically smallest pair wins.
  REQUIRE_THAT(result.alpha, WithinAbs(1e-12, 1e-18));
  REQUIRE_THAT(result.beta, WithinAbs(1e-12, 1e-18));
}

TEST_CASE("threshold search matches the naive grid enumeration") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    felb::rng::Stream s(felb::rng::derive(401, seed));
    FactorMatrix u(20, 4, 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) u.data()[i] = s.unit();
    FactorMatrix v(4, 15, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = s.unit();
    // Two client blocks of 12 and 8 rows exercise the stacked-U layout.
    const std::vector<BinaryMatrix> parts = {
        random_binary(12, 15, 0.35, felb::rng::derive(402, seed)),
        random_binary(8, 15, 0.35, felb::rng::derive(403, seed))};

    const felb::ThresholdRounding fast = felb::threshold_round_search(u, v, parts);
    const felb::oracle::NaiveThresholdResult naive =
        felb::oracle::naive_threshold_search(u, v, parts);
    REQUIRE(fast.alpha == naive.alpha);
    REQUIRE(fast.beta == naive.beta);
    std::size_t fast_loss = 0;
    std::size_t row_base = 0;
    for (const BinaryMatrix& part : parts) {
      std::vector<BinaryMatrix::Entry> entries;
      for (const auto& [r, c] : fast.u.entries())
        if (r >= row_base && r < row_base + part.rows())
          entries.emplace_back(r - static_cast<std::uint32_t>(row_base), c);
      const BinaryMatrix block_u = BinaryMatrix::from_entries(part.rows(), 4, std::move(entries));
      fast_loss += felb::hamming_distance(part, felb::boolean_product(block_u, fast.v));
      row_base += part.rows();
    }
    REQUIRE(fast_loss == naive.loss);
  }
}

TEST_CASE("threshold search input validation") {
  REQUIRE_THROWS_AS(felb::threshold_round_search(FactorMatrix(1, 1, 0.5),
                                                 FactorMatrix(1, 2, 0.5), {}),
                    std::invalid_argument);
  REQUIRE_THROWS_WITH(felb::threshold_round_search(FactorMatrix(1, 64, 0.5),
                                                   FactorMatrix(64, 2, 0.5),
                                                   {BinaryMatrix(1, 2)}),
                      ContainsSubstring("63"));
  REQUIRE_THROWS_WITH(felb::threshold_round_search(FactorMatrix(3, 2, 0.5),
                                                   FactorMatrix(2, 4, 0.5),
                                                   {BinaryMatrix(2, 4)}),
                      ContainsSubstring("rows"));
}

TEST_CASE("reference factorizer nails a rank-one all-ones matrix") {
  const BinaryMatrix ones =
      BinaryMatrix::from_dense(20, 20, std::vector<std::uint8_t>(400, 1));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto [u, v] = felb::reference_local_factorizer(ones, 1, seed);
    REQUIRE(felb::f1(ones, felb::boolean_product(u, v)) == 1.0);
  }
}

TEST_CASE("reference factorizer on all-zero data leaves nothing covered") {
  const auto [u, v] = felb::reference_local_factorizer(BinaryMatrix(8, 6), 2, 3);
  REQUIRE(u.nnz() == 0);
  REQUIRE(felb::boolean_product(u, v).nnz() == 0);
}

TEST_CASE("reference factorizer recovers planted tiles") {
  double f1_sum = 0.0;
  const int seeds = 10;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    const felb::PlantedSpec spec{60, 60, 2, 20, 20, 0.9, 0.0, felb::rng::derive(555, s)};
    const felb::PlantedData planted = felb::generate_planted(spec);
    const auto [u, v] = felb::reference_local_factorizer(planted.data, 2, s);
    f1_sum += felb::f1_star(planted.mask, felb::boolean_product(u, v));
  }
  REQUIRE(f1_sum / seeds >= 0.95);
}

TEST_CASE("reference factorizer rejects a rank above the matrix size") {
  REQUIRE_THROWS_AS(felb::reference_local_factorizer(BinaryMatrix(3, 5), 4, 1),
                    std::invalid_argument);
}
