#pragma once

// Synthetic Boolean data with planted low-rank structure: k random
// rectangular tiles filled at high density over a (near-)empty background,
// optionally corrupted by independent XOR bit flips. The clean tile support
// is returned alongside the data so recovery can be scored against the
// planted structure rather than the observed matrix.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "felb/matrix.hpp"
#include "felb/rng.hpp"

namespace felb {

struct PlantedSpec {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t tiles = 0;      // number of planted blocks (the target rank)
  std::size_t tile_rows = 0;  // 0 -> default rows / (2 * tiles)
  std::size_t tile_cols = 0;  // 0 -> default cols / (2 * tiles)
  double tile_density = 0.9;
  double background_density = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (rows == 0 || cols == 0) throw std::invalid_argument("PlantedSpec: empty shape");
    if (tiles > 0) {  // tiles = 0 is allowed: background-only data, empty mask
      if (effective_tile_rows() == 0 || effective_tile_rows() > rows)
        throw std::invalid_argument("PlantedSpec: tile_rows out of range");
      if (effective_tile_cols() == 0 || effective_tile_cols() > cols)
        throw std::invalid_argument("PlantedSpec: tile_cols out of range");
    }
    if (!(tile_density >= 0.0) || !(tile_density <= 1.0))
      throw std::invalid_argument("PlantedSpec: tile_density must be in [0, 1]");
    if (!(background_density >= 0.0) || !(background_density <= 1.0))
      throw std::invalid_argument("PlantedSpec: background_density must be in [0, 1]");
  }

  std::size_t effective_tile_rows() const {
    return tile_rows ? tile_rows : (tiles ? rows / (2 * tiles) : 0);
  }
  std::size_t effective_tile_cols() const {
    return tile_cols ? tile_cols : (tiles ? cols / (2 * tiles) : 0);
  }
};

/// XOR corruption level: each cell flips independently with probability p.
struct NoiseLevel {
  double p = 0.0;

  void validate() const {
    if (!(p >= 0.0) || !(p <= 0.5))
      throw std::invalid_argument("NoiseLevel: p must be in [0, 0.5]");
  }
};

struct PlantedData {
  BinaryMatrix data;  // sampled observations
  BinaryMatrix mask;  // union of planted tile supports (the clean structure)
};

/// Samples a planted-tile matrix. Tile corners are uniform over the valid
/// range; cells inside the tile union are Bernoulli(tile_density), cells
/// outside Bernoulli(background_density). All draws are counter-based on the
/// spec seed, so the same spec always produces the same data.
inline PlantedData generate_planted(const PlantedSpec& spec) {
  spec.validate();
  const std::size_t tr = spec.effective_tile_rows();
  const std::size_t tc = spec.effective_tile_cols();

  std::vector<std::uint8_t> in_tile(spec.rows * spec.cols, 0);
  if (spec.tiles > 0) {
    rng::Stream corners(rng::derive(spec.seed, 3));
    for (std::size_t t = 0; t < spec.tiles; ++t) {
      const std::size_t r0 = static_cast<std::size_t>(corners.index(spec.rows - tr + 1));
      const std::size_t c0 = static_cast<std::size_t>(corners.index(spec.cols - tc + 1));
      for (std::size_t r = r0; r < r0 + tr; ++r)
        for (std::size_t c = c0; c < c0 + tc; ++c) in_tile[r * spec.cols + c] = 1;
    }
  }

  const std::uint64_t cell_key = rng::derive(spec.seed, 4);
  std::vector<BinaryMatrix::Entry> data_entries;
  std::vector<BinaryMatrix::Entry> mask_entries;
  for (std::size_t r = 0; r < spec.rows; ++r) {
    for (std::size_t c = 0; c < spec.cols; ++c) {
      const std::size_t cell = r * spec.cols + c;
      const double density = in_tile[cell] ? spec.tile_density : spec.background_density;
      if (in_tile[cell])
        mask_entries.emplace_back(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c));
      if (density > 0.0 && rng::to_unit(rng::at(cell_key, cell)) < density)
        data_entries.emplace_back(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c));
    }
  }
  PlantedData out;
  out.data = BinaryMatrix::from_entries(spec.rows, spec.cols, std::move(data_entries));
  out.mask = BinaryMatrix::from_entries(spec.rows, spec.cols, std::move(mask_entries));
  return out;
}

/// Flips each cell of A independently with probability `level.p`.
inline BinaryMatrix apply_xor_noise(const BinaryMatrix& a, const NoiseLevel& level,
                                    std::uint64_t seed) {
  level.validate();
  if (level.p == 0.0) return a;
  const std::uint64_t key = rng::derive(seed, 5);
  const std::vector<std::uint8_t> dense = a.to_dense();
  std::vector<BinaryMatrix::Entry> entries;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      const std::size_t cell = r * a.cols() + c;
      const bool flip = rng::to_unit(rng::at(key, cell)) < level.p;
      if (static_cast<bool>(dense[cell]) != flip)
        entries.emplace_back(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c));
    }
  }
  return BinaryMatrix::from_entries(a.rows(), a.cols(), std::move(entries));
}

/// Data-abundant regime: every client holds 500 rows of a shared 5-tile
/// structure over 100 columns.
inline PlantedSpec abundance_preset(std::size_t clients, std::uint64_t seed) {
  PlantedSpec spec;
  spec.rows = 500 * clients;
  spec.cols = 100;
  spec.tiles = 5;
  spec.seed = seed;
  return spec;
}

/// Data-scarce regime: a fixed 2^16-row corpus split across however many
/// clients participate, so more clients means less data per client.
inline PlantedSpec scarcity_preset(std::uint64_t seed) {
  PlantedSpec spec;
  spec.rows = 1ULL << 16;
  spec.cols = 100;
  spec.tiles = 5;
  spec.seed = seed;
  return spec;
}

}  // namespace felb
