#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>

#include "felb/matrix.hpp"
#include "felb/rng.hpp"
#include "felb/synthdata.hpp"

using felb::BinaryMatrix;
using felb::NoiseLevel;
using felb::PlantedData;
using felb::PlantedSpec;

TEST_CASE("generate_planted is deterministic and shape-consistent") {
  const PlantedSpec spec{40, 25, 3, 8, 5, 0.9, 0.05, 1234};
  const PlantedData a = felb::generate_planted(spec);
  const PlantedData b = felb::generate_planted(spec);
  REQUIRE(a.data.rows() == 40);
  REQUIRE(a.data.cols() == 25);
  REQUIRE(a.mask.rows() == 40);
  REQUIRE(a.mask.cols() == 25);
  REQUIRE(a.data.entries() == b.data.entries());
  REQUIRE(a.mask.entries() == b.mask.entries());

  PlantedSpec other = spec;
  other.seed = 1235;
  REQUIRE(felb::generate_planted(other).data.entries() != a.data.entries());
}

TEST_CASE("a full-density tile on an empty background equals its mask") {
  const PlantedSpec spec{30, 20, 1, 10, 6, 1.0, 0.0, 7};
  const PlantedData planted = felb::generate_planted(spec);
  REQUIRE(planted.mask.nnz() == 60);  // one contiguous 10x6 block
  REQUIRE(planted.data.entries() == planted.mask.entries());
}

TEST_CASE("tile cells hit their density within binomial bounds") {
  std::size_t ones = 0, cells = 0;
  for (std::uint64_t j = 0; j < 10; ++j) {
    const PlantedSpec spec{80, 40, 1, 50, 30, 0.9, 0.0, felb::rng::derive(900, j)};
    const PlantedData planted = felb::generate_planted(spec);
    // Empty background, so every 1 lies inside the mask.
    ones += planted.data.nnz();
    cells += planted.mask.nnz();
  }
  const double rate = static_cast<double>(ones) / static_cast<double>(cells);
  const double bound = 3.0 * std::sqrt(0.9 * 0.1 / static_cast<double>(cells));
  REQUIRE(std::abs(rate - 0.9) <= bound);
}

TEST_CASE("zero tiles produce pure background data and an empty mask") {
  const PlantedSpec spec{50, 40, 0, 0, 0, 0.9, 0.3, 11};
  const PlantedData planted = felb::generate_planted(spec);
  REQUIRE(planted.mask.nnz() == 0);
  const double density =
      static_cast<double>(planted.data.nnz()) / static_cast<double>(50 * 40);
  REQUIRE(std::abs(density - 0.3) <= 3.0 * std::sqrt(0.3 * 0.7 / (50.0 * 40.0)));
}

TEST_CASE("planted spec validation") {
  REQUIRE_THROWS_AS(felb::generate_planted({0, 10, 1, 2, 2, 0.9, 0.0, 1}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(felb::generate_planted({10, 10, 1, 11, 2, 0.9, 0.0, 1}),
                    std::invalid_argument);  // tile taller than the matrix
  REQUIRE_THROWS_AS(felb::generate_planted({10, 10, 1, 2, 2, 1.5, 0.0, 1}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(felb::generate_planted({10, 10, 1, 2, 2, 0.9, -0.1, 1}),
                    std::invalid_argument);
}

TEST_CASE("xor noise flips the expected number of cells") {
  const PlantedSpec spec{100, 100, 2, 25, 25, 0.9, 0.1, 21};
  const BinaryMatrix a = felb::generate_planted(spec).data;

  // p = 0 is the identity.
  REQUIRE(felb::apply_xor_noise(a, {0.0}, 5).entries() == a.entries());

  // Deterministic per seed.
  REQUIRE(felb::apply_xor_noise(a, {0.2}, 5).entries() ==
          felb::apply_xor_noise(a, {0.2}, 5).entries());
  REQUIRE(felb::apply_xor_noise(a, {0.2}, 5).entries() !=
          felb::apply_xor_noise(a, {0.2}, 6).entries());

  // Hamming distance concentrates at p * cells.
  std::size_t flips = 0;
  const std::size_t cells = 100 * 100;
  for (std::uint64_t j = 0; j < 10; ++j)
    flips += felb::hamming_distance(a, felb::apply_xor_noise(a, {0.2}, felb::rng::derive(30, j)));
  const double rate = static_cast<double>(flips) / static_cast<double>(10 * cells);
  REQUIRE(std::abs(rate - 0.2) <= 3.0 * std::sqrt(0.2 * 0.8 / static_cast<double>(10 * cells)));

  // Fully random noise leaves density 1/2 regardless of the input.
  const BinaryMatrix coin = felb::apply_xor_noise(BinaryMatrix(100, 100), {0.5}, 77);
  const double density = static_cast<double>(coin.nnz()) / static_cast<double>(cells);
  REQUIRE(std::abs(density - 0.5) <= 3.0 * std::sqrt(0.25 / static_cast<double>(cells)));

  REQUIRE_THROWS_AS(felb::apply_xor_noise(a, {0.6}, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(felb::apply_xor_noise(a, {-0.1}, 1), std::invalid_argument);
}

TEST_CASE("preset geometries") {
  const PlantedSpec abundance = felb::abundance_preset(4, 99);
  REQUIRE(abundance.rows == 2000);  // 500 rows per client
  REQUIRE(abundance.cols == 100);
  REQUIRE(abundance.tiles == 5);
  REQUIRE(abundance.seed == 99);
  REQUIRE_NOTHROW(abundance.validate());

  const PlantedSpec scarcity = felb::scarcity_preset(7);
  REQUIRE(scarcity.rows == 65536);  // fixed corpus split across clients
  REQUIRE(scarcity.cols == 100);
  REQUIRE(scarcity.tiles == 5);
  REQUIRE_NOTHROW(scarcity.validate());

  // Default tile extents are rows/(2*tiles) x cols/(2*tiles).
  REQUIRE(abundance.effective_tile_rows() == 200);
  REQUIRE(abundance.effective_tile_cols() == 10);
}
