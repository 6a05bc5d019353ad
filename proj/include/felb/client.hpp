#pragma once

// Client-side optimization: one inertial proximal alternating round over the
// local factors (U, V) against the local Boolean data block. Two step-size
// rules are supported: a global Lipschitz step from the spectral norm of the
// fixed factor, and a per-entry multiplicative-update step that reproduces
// the classical multiplicative rule before the prox is applied.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "felb/matrix.hpp"
#include "felb/proximal.hpp"
#include "felb/rng.hpp"

namespace felb {

/// Thrown when an optimization stage produces non-finite values; the message
/// names the stage that failed.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class StepVariant {
  kLipschitz,             // eta = 1 / (2 * sigma_max^2), capped
  kMultiplicativeUpdate,  // per-entry eta = X / (denominator + eps), halved gradient
};

struct StepRule {
  StepVariant variant = StepVariant::kLipschitz;
  double inertia_beta = 0.001;
  double mu_epsilon = 1e-12;

  void validate() const {
    if (!(inertia_beta >= 0.0 && inertia_beta < 1.0))
      throw std::invalid_argument("StepRule: inertia_beta must be in [0, 1)");
    if (!(mu_epsilon > 0.0 && mu_epsilon <= 1e-8))
      throw std::invalid_argument("StepRule: mu_epsilon must be in (0, 1e-8]");
  }
};

/// Guard added to the squared spectral norm in the Lipschitz step.
inline constexpr double kLipschitzEpsilon = 1e-12;
/// Upper cap applied to scalar step sizes inside local_round.
inline constexpr double kMaxEta = 1e6;

/// Per-client optimization state. `u_prev`/`v_prev` hold the factors of the
/// previous round for the inertial extrapolation.
struct ClientState {
  BinaryMatrix data;
  FactorMatrix u, v, u_prev, v_prev;
  std::uint64_t iteration = 0;
  std::uint64_t rng_seed = 0;
  std::vector<double> dense_data;  // real-valued copy of `data`, cached once

  std::size_t rank() const { return u.cols(); }
};

/// Fresh client state with factors drawn uniformly from [0, 1).
inline ClientState init_client_state(BinaryMatrix data, std::size_t rank, std::uint64_t seed) {
  if (rank == 0) throw std::invalid_argument("init_client_state: rank must be positive");
  if (data.rows() == 0 || data.cols() == 0)
    throw std::invalid_argument("init_client_state: empty data block");
  ClientState state;
  state.dense_data = data.to_real_dense();
  state.u = FactorMatrix(data.rows(), rank);
  state.v = FactorMatrix(rank, data.cols());
  rng::Stream u_stream(rng::derive(seed, 1));
  for (std::size_t i = 0; i < state.u.size(); ++i) state.u.data()[i] = u_stream.unit();
  rng::Stream v_stream(rng::derive(seed, 2));
  for (std::size_t i = 0; i < state.v.size(); ++i) state.v.data()[i] = v_stream.unit();
  state.u_prev = state.u;
  state.v_prev = state.v;
  state.rng_seed = seed;
  state.data = std::move(data);
  return state;
}

namespace detail {

/// Dense residual U*V - A, row-major rows(A) x cols(A).
inline std::vector<double> residual(const std::vector<double>& a_dense, const FactorMatrix& u,
                                    const FactorMatrix& v) {
  const std::size_t n = u.rows(), k = u.cols(), m = v.cols();
  std::vector<double> r(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ui = u.row(i);
    double* ri = r.data() + i * m;
    for (std::size_t l = 0; l < k; ++l) {
      const double w = ui[l];
      if (w == 0.0) continue;
      const double* vl = v.row(l);
      for (std::size_t j = 0; j < m; ++j) ri[j] += w * vl[j];
    }
  }
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= a_dense[i];
  return r;
}

inline FactorMatrix grad_u_core(const std::vector<double>& a_dense, const FactorMatrix& u,
                                const FactorMatrix& v) {
  const std::vector<double> r = residual(a_dense, u, v);
  const std::size_t n = u.rows(), k = u.cols(), m = v.cols();
  FactorMatrix g(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ri = r.data() + i * m;
    double* gi = g.row(i);
    for (std::size_t l = 0; l < k; ++l) {
      const double* vl = v.row(l);
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += ri[j] * vl[j];
      gi[l] = 2.0 * dot;
    }
  }
  return g;
}

inline FactorMatrix grad_v_core(const std::vector<double>& a_dense, const FactorMatrix& u,
                                const FactorMatrix& v) {
  const std::vector<double> r = residual(a_dense, u, v);
  const std::size_t n = u.rows(), k = u.cols(), m = v.cols();
  FactorMatrix g(k, m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* ui = u.row(i);
    const double* ri = r.data() + i * m;
    for (std::size_t l = 0; l < k; ++l) {
      const double w = 2.0 * ui[l];
      if (w == 0.0) continue;
      double* gl = g.row(l);
      for (std::size_t j = 0; j < m; ++j) gl[j] += w * ri[j];
    }
  }
  return g;
}

inline void check_shapes(const BinaryMatrix& a, const FactorMatrix& u, const FactorMatrix& v) {
  if (u.rows() != a.rows() || v.cols() != a.cols() || u.cols() != v.rows())
    throw std::invalid_argument("factor shapes do not match data block");
}

}  // namespace detail

/// Gradient of ||A - UV||_F^2 in U: 2 (UV - A) V^T.
inline FactorMatrix grad_u(const BinaryMatrix& a, const FactorMatrix& u, const FactorMatrix& v) {
  detail::check_shapes(a, u, v);
  return detail::grad_u_core(a.to_real_dense(), u, v);
}

/// Gradient of ||A - UV||_F^2 in V: 2 U^T (UV - A).
inline FactorMatrix grad_v(const BinaryMatrix& a, const FactorMatrix& u, const FactorMatrix& v) {
  detail::check_shapes(a, u, v);
  return detail::grad_v_core(a.to_real_dense(), u, v);
}

/// Lipschitz step size for the U block: 1 / (2 * sigma_max(V)^2 + eps).
/// Degenerate inputs (V near zero) yield a very large value; local_round caps
/// the step it actually takes at kMaxEta.
inline double lipschitz_eta_u(const FactorMatrix& v, double eps = kLipschitzEpsilon) {
  const double sigma = spectral_norm(v);
  return 1.0 / (2.0 * sigma * sigma + eps);
}

/// Lipschitz step size for the V block: 1 / (2 * sigma_max(U)^2 + eps).
inline double lipschitz_eta_v(const FactorMatrix& u, double eps = kLipschitzEpsilon) {
  const double sigma = spectral_norm(u);
  return 1.0 / (2.0 * sigma * sigma + eps);
}

/// Per-entry multiplicative step for the U block: U ./ (U (V V^T) + eps).
/// Requires entry-wise nonnegative U.
inline FactorMatrix mu_eta_u(const FactorMatrix& u, const FactorMatrix& v,
                             double eps = 1e-12) {
  if (u.cols() != v.rows()) throw std::invalid_argument("mu_eta_u: shape mismatch");
  const FactorMatrix denom = real_product(u, gram_rows(v));
  FactorMatrix eta(u.rows(), u.cols());
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u.data()[i] < 0.0)
      throw std::invalid_argument("mu_eta_u: negative entry in U");
    eta.data()[i] = u.data()[i] / (denom.data()[i] + eps);
  }
  return eta;
}

/// Per-entry multiplicative step for the V block: V ./ ((U^T U) V + eps).
/// Requires entry-wise nonnegative V.
inline FactorMatrix mu_eta_v(const FactorMatrix& u, const FactorMatrix& v,
                             double eps = 1e-12) {
  if (u.cols() != v.rows()) throw std::invalid_argument("mu_eta_v: shape mismatch");
  const FactorMatrix denom = real_product(gram_columns(u), v);
  FactorMatrix eta(v.rows(), v.cols());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v.data()[i] < 0.0)
      throw std::invalid_argument("mu_eta_v: negative entry in V");
    eta.data()[i] = v.data()[i] / (denom.data()[i] + eps);
  }
  return eta;
}

namespace detail {

inline void require_finite(const FactorMatrix& x, const char* stage) {
  if (!x.all_finite())
    throw numerical_error(std::string("local_round: non-finite values after ") + stage);
}

inline FactorMatrix extrapolate(const FactorMatrix& current, const FactorMatrix& previous,
                                double beta, bool clamp_nonnegative) {
  FactorMatrix out = current;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double v = current.data()[i] + beta * (current.data()[i] - previous.data()[i]);
    if (clamp_nonnegative && v < 0.0) v = 0.0;
    out.data()[i] = v;
  }
  return out;
}

}  // namespace detail

/// One inertial proximal alternating round on a client.
///
/// Updates U first, then V against the freshly committed U (Gauss-Seidel
/// order), finishing the V block with the anchor-proximity prox. `reg.lambda`
/// must already be the effective lambda_t for the current global round; the
/// growth schedule is resolved by the caller. The multiplicative variant uses
/// per-entry steps with the gradient halved and clamps the extrapolated point
/// at zero so the multiplicative form stays well defined.
inline void local_round(ClientState& state, const RegularizationParams& reg,
                        const ProximityParams& prox, const StepRule& rule,
                        const FactorMatrix& anchor) {
  reg.validate();
  prox.validate();
  rule.validate();
  detail::check_shapes(state.data, state.u, state.v);
  if (anchor.rows() != state.v.rows() || anchor.cols() != state.v.cols())
    throw std::invalid_argument("local_round: anchor shape mismatch");
  const bool mu = rule.variant == StepVariant::kMultiplicativeUpdate;

  // --- U block ---
  FactorMatrix u_tilde = detail::extrapolate(state.u, state.u_prev, rule.inertia_beta, mu);
  detail::require_finite(u_tilde, "u-extrapolation");
  FactorMatrix u_next;
  if (mu) {
    const FactorMatrix eta = mu_eta_u(u_tilde, state.v, rule.mu_epsilon);
    FactorMatrix g = detail::grad_u_core(state.dense_data, u_tilde, state.v);
    detail::require_finite(g, "u-gradient");
    for (std::size_t i = 0; i < u_tilde.size(); ++i)
      u_tilde.data()[i] -= eta.data()[i] * (0.5 * g.data()[i]);
    detail::require_finite(u_tilde, "u-step");
    u_next = prox_elb_scaled(u_tilde, eta, reg.kappa, reg.lambda);
  } else {
    const double eta = std::min(lipschitz_eta_u(state.v), kMaxEta);
    FactorMatrix g = detail::grad_u_core(state.dense_data, u_tilde, state.v);
    detail::require_finite(g, "u-gradient");
    for (std::size_t i = 0; i < u_tilde.size(); ++i) u_tilde.data()[i] -= eta * g.data()[i];
    detail::require_finite(u_tilde, "u-step");
    u_next = prox_elb(u_tilde, {eta * reg.kappa, eta * reg.lambda, reg.growth});
  }
  detail::require_finite(u_next, "u-prox");
  state.u_prev = std::move(state.u);
  state.u = std::move(u_next);

  // --- V block, against the committed U ---
  FactorMatrix v_tilde = detail::extrapolate(state.v, state.v_prev, rule.inertia_beta, mu);
  detail::require_finite(v_tilde, "v-extrapolation");
  FactorMatrix v_next;
  if (mu) {
    const FactorMatrix eta = mu_eta_v(state.u, v_tilde, rule.mu_epsilon);
    FactorMatrix g = detail::grad_v_core(state.dense_data, state.u, v_tilde);
    detail::require_finite(g, "v-gradient");
    for (std::size_t i = 0; i < v_tilde.size(); ++i)
      v_tilde.data()[i] -= eta.data()[i] * (0.5 * g.data()[i]);
    detail::require_finite(v_tilde, "v-step");
    v_next = prox_elb_scaled(v_tilde, eta, reg.kappa, reg.lambda);
    detail::require_finite(v_next, "v-prox");
    v_next = prox_proximity_scaled(v_next, eta, prox.gamma, anchor);
  } else {
    const double eta = std::min(lipschitz_eta_v(state.u), kMaxEta);
    FactorMatrix g = detail::grad_v_core(state.dense_data, state.u, v_tilde);
    detail::require_finite(g, "v-gradient");
    for (std::size_t i = 0; i < v_tilde.size(); ++i) v_tilde.data()[i] -= eta * g.data()[i];
    detail::require_finite(v_tilde, "v-step");
    v_next = prox_elb(v_tilde, {eta * reg.kappa, eta * reg.lambda, reg.growth});
    detail::require_finite(v_next, "v-prox");
    v_next = prox_proximity(v_next, eta * prox.gamma, anchor);
  }
  detail::require_finite(v_next, "v-proximity");
  state.v_prev = std::move(state.v);
  state.v = std::move(v_next);
  ++state.iteration;
}

/// Local composite objective:
/// ||A - UV||_F^2 + R(U) + R(V) + gamma * ||V - anchor||_F^2,
/// with `reg.lambda` already resolved to the current lambda_t.
inline double local_objective(const ClientState& state, const RegularizationParams& reg,
                              const ProximityParams& prox, const FactorMatrix& anchor) {
  reg.validate();
  prox.validate();
  const std::vector<double> r = detail::residual(state.dense_data, state.u, state.v);
  double loss = 0.0;
  for (double v : r) loss += v * v;
  double anchor_term = 0.0;
  for (std::size_t i = 0; i < state.v.size(); ++i) {
    const double d = state.v.data()[i] - anchor.data()[i];
    anchor_term += d * d;
  }
  return loss + elb_value(state.u, reg) + elb_value(state.v, reg) + prox.gamma * anchor_term;
}

}  // namespace felb
