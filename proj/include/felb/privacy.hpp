#pragma once

// Differential-privacy mechanisms applied to client payloads before
// transmission: calibrated Gaussian or Laplace additive noise on real-valued
// payloads, or randomized-response bit flips on Boolean payloads. Noise is
// drawn from counter-based streams keyed by (run seed, client, round), so a
// run replays identically at any thread count.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

#include "felb/matrix.hpp"
#include "felb/rng.hpp"

namespace felb {

enum class NoiseMechanism {
  kNone,
  kGaussian,
  kLaplace,
  kBernoulliXor,  // randomized response on {0,1} payload entries
};

struct PrivacyConfig {
  NoiseMechanism mechanism = NoiseMechanism::kNone;
  double epsilon = 1.0;
  double delta = 0.05;
  double theta = 1.5;        // Frobenius clipping bound
  double sensitivity = 1.0;  // L2 sensitivity Delta of the payload
  bool clipped = false;      // clip payloads to Frobenius norm theta first

  void validate() const {
    if (mechanism == NoiseMechanism::kNone) return;
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw std::invalid_argument("PrivacyConfig: epsilon must be > 0");
    if (mechanism == NoiseMechanism::kGaussian &&
        (!(delta > 0.0) || !(delta < 1.0) || !std::isfinite(delta)))
      throw std::invalid_argument("PrivacyConfig: delta must be in (0, 1)");
    if (!(sensitivity > 0.0) || !std::isfinite(sensitivity))
      throw std::invalid_argument("PrivacyConfig: sensitivity must be > 0");
    if (clipped && (!(theta > 1.0) || !std::isfinite(theta)))
      throw std::invalid_argument("PrivacyConfig: theta must be > 1 when clipping");
  }
};

/// Gaussian mechanism calibration:
/// sigma = Delta * eps^-1 * sqrt(2 * log(5 / (4 * delta))).
inline double gaussian_sigma(double sensitivity, double epsilon, double delta) {
  if (!(sensitivity > 0.0) || !(epsilon > 0.0) || !(delta > 0.0) || !(delta < 1.25))
    throw std::invalid_argument("gaussian_sigma: need sensitivity > 0, epsilon > 0, delta in (0, 1.25)");
  return sensitivity / epsilon * std::sqrt(2.0 * std::log(5.0 / (4.0 * delta)));
}

/// Laplace mechanism calibration: scale b = Delta / eps.
inline double laplace_scale(double sensitivity, double epsilon) {
  if (!(sensitivity > 0.0) || !(epsilon > 0.0))
    throw std::invalid_argument("laplace_scale: need sensitivity > 0, epsilon > 0");
  return sensitivity / epsilon;
}

/// Randomized-response flip probability p = 1 / (1 + e^eps); p -> 1/2 as the
/// budget vanishes and p -> 0 as eps grows.
inline double bernoulli_flip_prob(double epsilon) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("bernoulli_flip_prob: epsilon must be >= 0");
  return 1.0 / (1.0 + std::exp(epsilon));
}

/// Scales X down to Frobenius norm `theta` when it exceeds it; otherwise
/// returns X unchanged.
inline FactorMatrix clip_frobenius(const FactorMatrix& x, double theta) {
  if (!(theta > 1.0) || !std::isfinite(theta))
    throw std::invalid_argument("clip_frobenius: theta must be > 1");
  const double norm = std::sqrt(frobenius_sq(x));
  if (norm <= theta) return x;
  FactorMatrix out = x;
  const double scale = theta / norm;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= scale;
  return out;
}

/// Concrete noise parameters for one payload transmission.
struct NoiseDraw {
  std::uint64_t seed = 0;  // stream key for this (client, round) payload
  double scale = 0.0;      // sigma (Gaussian), b (Laplace), or p (BernoulliXor)
};

/// Resolves mechanism parameters for the payload of `client` at `round`.
/// The effective sensitivity doubles when clipping rescales payloads into the
/// Frobenius ball of radius theta > 1.
inline NoiseDraw make_noise_draw(const PrivacyConfig& cfg, std::uint64_t run_seed,
                                 std::uint64_t client, std::uint64_t round) {
  cfg.validate();
  NoiseDraw draw;
  draw.seed = rng::derive(rng::derive(run_seed, 0x6470ULL), client, round);
  const double delta_s = cfg.clipped ? 2.0 * cfg.theta : cfg.sensitivity;
  switch (cfg.mechanism) {
    case NoiseMechanism::kNone:
      break;
    case NoiseMechanism::kGaussian:
      draw.scale = gaussian_sigma(delta_s, cfg.epsilon, cfg.delta);
      break;
    case NoiseMechanism::kLaplace:
      draw.scale = laplace_scale(delta_s, cfg.epsilon);
      break;
    case NoiseMechanism::kBernoulliXor:
      draw.scale = bernoulli_flip_prob(cfg.epsilon);
      break;
  }
  return draw;
}

/// Applies the configured mechanism to a payload copy. Additive mechanisms
/// clip first when requested; randomized response requires an exactly Boolean
/// payload (round it beforehand) and ignores clipping, since its per-entry
/// sensitivity is already bounded.
inline FactorMatrix apply_noise(const FactorMatrix& payload, const PrivacyConfig& cfg,
                                const NoiseDraw& draw) {
  cfg.validate();
  if (!payload.all_finite()) throw std::invalid_argument("apply_noise: non-finite payload");
  if (cfg.mechanism == NoiseMechanism::kNone) return payload;

  if (cfg.mechanism == NoiseMechanism::kBernoulliXor) {
    FactorMatrix out = payload;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double v = out.data()[i];
      if (v != 0.0 && v != 1.0)
        throw std::invalid_argument("apply_noise: randomized response needs a Boolean payload");
      if (rng::to_unit(rng::at(draw.seed, i)) < draw.scale) out.data()[i] = 1.0 - v;
    }
    return out;
  }

  FactorMatrix out = cfg.clipped ? clip_frobenius(payload, cfg.theta) : payload;
  if (cfg.mechanism == NoiseMechanism::kGaussian) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      // Two counter slots per entry: Box-Muller needs two uniforms.
      const double u1 = rng::to_unit_open(rng::at(draw.seed, 2 * i));
      const double u2 = rng::to_unit(rng::at(draw.seed, 2 * i + 1));
      const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
      out.data()[i] += draw.scale * z;
    }
  } else {  // Laplace
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double u = rng::to_unit_open(rng::at(draw.seed, i)) - 0.5;
      const double s = u < 0.0 ? -1.0 : 1.0;
      out.data()[i] += -draw.scale * s * std::log(1.0 - 2.0 * std::abs(u));
    }
  }
  return out;
}

}  // namespace felb
