#pragma once

// Binary-inducing elastic-net regularizer and its proximal operator, plus the
// proximity prox that pulls client factors toward the federation anchor.
//
// The regularizer on each entry x is
//   r(x) = min{ kappa*|x| + lambda*x^2,  kappa*|x-1| + lambda*(x-1)^2 },
// an elastic net centered at whichever of {0, 1} is nearer. Its prox has a
// closed form per entry: pick the branch by x <= 1/2, then apply the shifted
// elastic-net prox (soft-threshold toward the branch center, then shrink by
// 1/(1+eta*lambda)). Inside the soft-threshold dead zone |x - center| <= kappa
// the minimizer is the center itself.

#include <cmath>
#include <stdexcept>

#include "felb/matrix.hpp"

namespace felb {

/// Parameters of the binary-inducing regularizer. `lambda` is the base
/// quadratic weight; the effective weight at global round t is
/// lambda * growth^t (see resolve_lambda).
struct RegularizationParams {
  double kappa = 0.001;
  double lambda = 0.1;
  double growth = 1.05;

  void validate() const {
    if (!(kappa >= 0.0) || !std::isfinite(kappa))
      throw std::invalid_argument("RegularizationParams: kappa must be >= 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw std::invalid_argument("RegularizationParams: lambda must be >= 0");
    if (!(growth >= 1.0) || !std::isfinite(growth))
      throw std::invalid_argument("RegularizationParams: growth must be >= 1");
  }
};

/// Weight of the anchor-proximity term gamma * ||V - anchor||_F^2.
struct ProximityParams {
  double gamma = 0.1;

  void validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
      throw std::invalid_argument("ProximityParams: gamma must be >= 0");
  }
};

/// Effective quadratic weight lambda_t = lambda * growth^t at global round t.
inline double resolve_lambda(const RegularizationParams& reg, std::uint64_t round) {
  return reg.lambda * std::pow(reg.growth, static_cast<double>(round));
}

/// Regularizer value at a single entry.
inline double elb_penalty(double x, double kappa, double lambda) {
  const double a = kappa * std::abs(x) + lambda * x * x;
  const double b = kappa * std::abs(x - 1.0) + lambda * (x - 1.0) * (x - 1.0);
  return a < b ? a : b;
}

/// Sum of elb_penalty over all entries of X.
inline double elb_value(const FactorMatrix& x, const RegularizationParams& p) {
  p.validate();
  if (!x.all_finite()) throw std::invalid_argument("elb_value: non-finite entries");
  double sum = 0.0;
  for (double v : x.values()) sum += elb_penalty(v, p.kappa, p.lambda);
  return sum;
}

namespace detail {

inline double soft_threshold(double x, double kappa) {
  if (x > kappa) return x - kappa;
  if (x < -kappa) return x + kappa;
  return 0.0;
}

/// Entry-wise prox of the binary-inducing regularizer with pre-scaled
/// parameters (kappa, lambda already multiplied by the step size). Branch tie
/// at x = 1/2 resolves to the 0-centered branch.
inline double prox_elb_scalar(double x, double kappa, double lambda) {
  if (x <= 0.5) return soft_threshold(x, kappa) / (1.0 + lambda);
  return 1.0 + soft_threshold(x - 1.0, kappa) / (1.0 + lambda);
}

}  // namespace detail

/// Entry-wise prox of the binary-inducing regularizer. `p.kappa` and
/// `p.lambda` must already be scaled by the step size; `p.growth` is unused
/// here (resolve lambda_t before scaling).
inline FactorMatrix prox_elb(const FactorMatrix& x, const RegularizationParams& p) {
  p.validate();
  if (!x.all_finite()) throw std::invalid_argument("prox_elb: non-finite entries");
  FactorMatrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = detail::prox_elb_scalar(out.data()[i], p.kappa, p.lambda);
  return out;
}

/// prox_elb with a per-entry step-size matrix (multiplicative-update variant):
/// entry (i,j) uses parameters (eta(i,j)*kappa, eta(i,j)*lambda).
inline FactorMatrix prox_elb_scaled(const FactorMatrix& x, const FactorMatrix& eta, double kappa,
                                    double lambda) {
  if (x.rows() != eta.rows() || x.cols() != eta.cols())
    throw std::invalid_argument("prox_elb_scaled: step-size shape mismatch");
  if (!x.all_finite() || !eta.all_finite())
    throw std::invalid_argument("prox_elb_scaled: non-finite entries");
  FactorMatrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double e = eta.data()[i];
    out.data()[i] = detail::prox_elb_scalar(out.data()[i], e * kappa, e * lambda);
  }
  return out;
}

/// Prox of gamma * ||X - anchor||_F^2 (gamma pre-scaled by the step size):
/// (X + gamma * anchor) / (1 + gamma), entry-wise.
inline FactorMatrix prox_proximity(const FactorMatrix& x, double gamma,
                                   const FactorMatrix& anchor) {
  if (x.rows() != anchor.rows() || x.cols() != anchor.cols())
    throw std::invalid_argument("prox_proximity: anchor shape mismatch");
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("prox_proximity: gamma must be >= 0");
  if (!x.all_finite() || !anchor.all_finite())
    throw std::invalid_argument("prox_proximity: non-finite entries");
  FactorMatrix out = x;
  const double inv = 1.0 / (1.0 + gamma);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = (out.data()[i] + gamma * anchor.data()[i]) * inv;
  return out;
}

/// prox_proximity with a per-entry step-size matrix: entry (i,j) uses weight
/// eta(i,j) * gamma.
inline FactorMatrix prox_proximity_scaled(const FactorMatrix& x, const FactorMatrix& eta,
                                          double gamma, const FactorMatrix& anchor) {
  if (x.rows() != anchor.rows() || x.cols() != anchor.cols() || x.rows() != eta.rows() ||
      x.cols() != eta.cols())
    throw std::invalid_argument("prox_proximity_scaled: shape mismatch");
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("prox_proximity_scaled: gamma must be >= 0");
  if (!x.all_finite() || !eta.all_finite() || !anchor.all_finite())
    throw std::invalid_argument("prox_proximity_scaled: non-finite entries");
  FactorMatrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double g = eta.data()[i] * gamma;
    out.data()[i] = (out.data()[i] + g * anchor.data()[i]) / (1.0 + g);
  }
  return out;
}

}  // namespace felb
