#pragma once

// Multi-client federation simulator. Clients hold disjoint row blocks of a
// Boolean matrix and run inertial proximal rounds locally; every
// sync_interval rounds they transmit their V factor (optionally noised for
// differential privacy), the server aggregates with the proximal-averaging
// rule, and the aggregate is broadcast back as both the new V and the anchor
// of the proximity term. Everything is deterministic in the run seed.

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "felb/client.hpp"
#include "felb/matrix.hpp"
#include "felb/metrics.hpp"
#include "felb/parallel.hpp"
#include "felb/privacy.hpp"
#include "felb/proximal.hpp"
#include "felb/rng.hpp"
#include "felb/server.hpp"

namespace felb {

struct FederationConfig {
  std::size_t clients = 10;
  std::size_t rank = 5;
  std::uint64_t sync_interval = 10;    // local rounds between aggregations
  std::uint64_t max_iterations = 100;  // total local rounds per client
  RegularizationParams reg;
  ProximityParams prox;
  StepRule rule;
  PrivacyConfig privacy;
  std::uint64_t global_seed = 0;
  bool weighted_mean = false;        // weight the payload mean by client rows
  double time_budget_seconds = 0.0;  // 0 = unlimited
  unsigned threads = 0;              // 0 = FELB_THREADS env or 1

  void validate() const {
    if (clients == 0) throw std::invalid_argument("FederationConfig: need at least one client");
    if (rank == 0) throw std::invalid_argument("FederationConfig: rank must be positive");
    if (sync_interval == 0)
      throw std::invalid_argument("FederationConfig: sync_interval must be positive");
    if (!(time_budget_seconds >= 0.0))
      throw std::invalid_argument("FederationConfig: time budget must be >= 0");
    reg.validate();
    prox.validate();
    rule.validate();
    privacy.validate();
  }
};

struct RunHistory {
  std::vector<RoundLog> rounds;         // one record per completed global round
  std::vector<FactorMatrix> client_u;   // final local row factors
  std::vector<FactorMatrix> client_v;   // final local column factors
  FactorMatrix v_hat;                   // final aggregate column factor
  std::vector<BinaryMatrix> rounded_u;  // final Boolean rounding of each U_i
  BinaryMatrix rounded_v_hat;           // final Boolean rounding of V_hat
  bool truncated = false;               // stopped early on the time budget
  double total_seconds = 0.0;
};

/// Row indices each client receives: a seed-determined shuffle of [0, rows)
/// cut into `clients` near-equal blocks, larger blocks first. Depends only on
/// (rows, clients, seed), so data and mask can be partitioned consistently.
inline std::vector<std::vector<std::uint32_t>> partition_rows(std::size_t rows,
                                                              std::size_t clients,
                                                              std::uint64_t seed) {
  if (clients == 0) throw std::invalid_argument("partition_rows: need at least one client");
  if (rows < clients) throw std::invalid_argument("partition_rows: fewer rows than clients");
  std::vector<std::uint32_t> order(rows);
  for (std::size_t i = 0; i < rows; ++i) order[i] = static_cast<std::uint32_t>(i);
  rng::Stream stream(rng::derive(seed, 6));
  rng::shuffle(order, stream);
  const std::size_t base = rows / clients;
  const std::size_t extra = rows % clients;
  std::vector<std::vector<std::uint32_t>> blocks(clients);
  std::size_t begin = 0;
  for (std::size_t c = 0; c < clients; ++c) {
    const std::size_t size = base + (c < extra ? 1 : 0);
    blocks[c].assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                     order.begin() + static_cast<std::ptrdiff_t>(begin + size));
    begin += size;
  }
  return blocks;
}

/// Extracts the sub-matrix of the given rows (in the given order).
inline BinaryMatrix take_rows(const BinaryMatrix& a, const std::vector<std::uint32_t>& rows) {
  std::vector<BinaryMatrix::Entry> entries;
  for (std::size_t local = 0; local < rows.size(); ++local) {
    const auto [first, last] = a.row_range(rows[local]);
    for (std::size_t e = first; e < last; ++e)
      entries.emplace_back(static_cast<std::uint32_t>(local), a.entries()[e].second);
  }
  return BinaryMatrix::from_entries(rows.size(), a.cols(), std::move(entries));
}

/// Splits A row-wise into per-client blocks (shuffled by seed).
inline std::vector<BinaryMatrix> partition(const BinaryMatrix& a, std::size_t clients,
                                           std::uint64_t seed) {
  const auto blocks = partition_rows(a.rows(), clients, seed);
  std::vector<BinaryMatrix> parts;
  parts.reserve(clients);
  for (const auto& rows : blocks) parts.push_back(take_rows(a, rows));
  return parts;
}

/// Thresholds a real factor to Boolean: entry >= threshold maps to 1, so an
/// exact 0.5 rounds up under the default.
inline BinaryMatrix binarize(const FactorMatrix& x, double threshold = 0.5) {
  std::vector<BinaryMatrix::Entry> entries;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c)
      if (x(r, c) >= threshold)
        entries.emplace_back(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c));
  return BinaryMatrix::from_entries(x.rows(), x.cols(), std::move(entries));
}

/// Rounds both factors of a relaxed factorization to Boolean at 1/2.
inline std::pair<BinaryMatrix, BinaryMatrix> round_factors(const FactorMatrix& u,
                                                           const FactorMatrix& v) {
  return {binarize(u), binarize(v)};
}

namespace detail {

/// Per-client, per-round reconstruction statistics; filled in parallel (one
/// slot per client) and combined serially in client order.
struct ClientRoundStats {
  double objective = 0.0;
  std::size_t hamming = 0;
  std::size_t cells = 0;
  ConfusionCounts vs_data;
  ConfusionCounts vs_mask;
};

/// Real-valued payload with entries rounded to exact {0,1} for the
/// randomized-response mechanism.
inline FactorMatrix round_payload(const FactorMatrix& v) {
  FactorMatrix out = v;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = out.data()[i] >= 0.5 ? 1.0 : 0.0;
  return out;
}

inline FactorMatrix make_payload(const FactorMatrix& v, const PrivacyConfig& privacy,
                                 std::uint64_t run_seed, std::uint64_t client,
                                 std::uint64_t round) {
  if (privacy.mechanism == NoiseMechanism::kNone) return v;
  const NoiseDraw draw = make_noise_draw(privacy, run_seed, client, round);
  if (privacy.mechanism == NoiseMechanism::kBernoulliXor)
    return apply_noise(round_payload(v), privacy, draw);
  return apply_noise(v, privacy, draw);
}

inline RoundLog combine_round_stats(std::uint64_t round,
                                    const std::vector<ClientRoundStats>& stats, bool have_masks,
                                    double gap_vhat, double elapsed_seconds) {
  double objective_sum = 0.0;
  std::size_t hamming = 0, cells = 0;
  ConfusionCounts data_counts, mask_counts;
  for (const ClientRoundStats& s : stats) {
    objective_sum += s.objective;
    hamming += s.hamming;
    cells += s.cells;
    data_counts.tp += s.vs_data.tp;
    data_counts.fp += s.vs_data.fp;
    data_counts.fn += s.vs_data.fn;
    mask_counts.tp += s.vs_mask.tp;
    mask_counts.fp += s.vs_mask.fp;
    mask_counts.fn += s.vs_mask.fn;
  }
  const auto f1_of = [](const ConfusionCounts& c) {
    const std::size_t denom = 2 * c.tp + c.fp + c.fn;
    return denom == 0 ? 1.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
  };
  RoundLog log;
  log.round = round;
  log.mean_local_loss = objective_sum / static_cast<double>(stats.size());
  log.global_rmsd = std::sqrt(static_cast<double>(hamming) / static_cast<double>(cells));
  log.f1 = f1_of(data_counts);
  if (have_masks) log.f1_star = f1_of(mask_counts);
  log.integrality_gap_vhat = gap_vhat;
  log.elapsed_seconds = elapsed_seconds;
  return log;
}

inline ClientRoundStats client_round_stats(const ClientState& state,
                                           const RegularizationParams& reg_t,
                                           const ProximityParams& prox_t,
                                           const FactorMatrix& anchor, const BinaryMatrix* mask) {
  ClientRoundStats s;
  s.objective = local_objective(state, reg_t, prox_t, anchor);
  const BinaryMatrix recon = boolean_product(binarize(state.u), binarize(state.v));
  s.hamming = hamming_distance(state.data, recon);
  s.cells = state.data.rows() * state.data.cols();
  s.vs_data = confusion(state.data, recon);
  if (mask) s.vs_mask = confusion(*mask, recon);
  return s;
}

}  // namespace detail

/// Simulates a federated run over pre-partitioned client blocks. `mask_parts`
/// (optional) must be partitioned identically to `parts`; when present the
/// per-round F1* against the clean structure is recorded.
inline RunHistory run_federated(const std::vector<BinaryMatrix>& parts,
                                const FederationConfig& cfg,
                                const std::vector<BinaryMatrix>* mask_parts = nullptr) {
  cfg.validate();
  if (parts.empty()) throw std::invalid_argument("run_federated: no client blocks");
  if (parts.size() != cfg.clients)
    throw std::invalid_argument("run_federated: block count does not match cfg.clients");
  const std::size_t m = parts.front().cols();
  for (const BinaryMatrix& p : parts)
    if (p.cols() != m) throw std::invalid_argument("run_federated: column count mismatch");
  if (mask_parts) {
    if (mask_parts->size() != parts.size())
      throw std::invalid_argument("run_federated: mask block count mismatch");
    for (std::size_t c = 0; c < parts.size(); ++c)
      if ((*mask_parts)[c].rows() != parts[c].rows() || (*mask_parts)[c].cols() != m)
        throw std::invalid_argument("run_federated: mask block shape mismatch");
  }

  const unsigned threads = resolve_threads(cfg.threads);
  const std::size_t num_clients = parts.size();
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  std::vector<ClientState> states(num_clients);
  parallel_for(num_clients, threads, [&](std::size_t c) {
    states[c] = init_client_state(parts[c], cfg.rank, rng::derive(cfg.global_seed, 7, c));
  });

  RunHistory history;
  FactorMatrix v_hat;  // empty until the first aggregation
  bool have_anchor = false;

  std::vector<FactorMatrix> payloads(num_clients);
  std::vector<detail::ClientRoundStats> stats(num_clients);
  std::vector<double> weights(num_clients);
  for (std::size_t c = 0; c < num_clients; ++c)
    weights[c] = static_cast<double>(parts[c].rows());

  for (std::uint64_t t = 1; t <= cfg.max_iterations; ++t) {
    RegularizationParams reg_t = cfg.reg;
    reg_t.lambda = resolve_lambda(cfg.reg, t);
    // The proximity term engages once an aggregate exists to anchor to.
    const ProximityParams prox_t{have_anchor ? cfg.prox.gamma : 0.0};

    parallel_for(num_clients, threads, [&](std::size_t c) {
      const FactorMatrix& anchor = have_anchor ? v_hat : states[c].v;
      try {
        local_round(states[c], reg_t, prox_t, cfg.rule, anchor);
      } catch (const numerical_error& e) {
        throw numerical_error(std::string(e.what()) + " (client " + std::to_string(c) +
                              ", round " + std::to_string(t) + ")");
      }
    });

    if (t % cfg.sync_interval == 0) {
      parallel_for(num_clients, threads, [&](std::size_t c) {
        payloads[c] = detail::make_payload(states[c].v, cfg.privacy, cfg.global_seed, c, t);
      });
      v_hat = proximal_aggregate(payloads, reg_t, 1.0, cfg.weighted_mean ? &weights : nullptr);
      have_anchor = true;
      parallel_for(num_clients, threads, [&](std::size_t c) { states[c].v = v_hat; });
    }

    parallel_for(num_clients, threads, [&](std::size_t c) {
      const FactorMatrix& anchor = have_anchor ? v_hat : states[c].v;
      stats[c] = detail::client_round_stats(states[c], reg_t, prox_t, anchor,
                                            mask_parts ? &(*mask_parts)[c] : nullptr);
    });
    double gap_vhat;
    if (have_anchor) {
      gap_vhat = integrality_gap(v_hat);
    } else {
      // No aggregate yet; report the gap of the server-side payload mean.
      for (std::size_t c = 0; c < num_clients; ++c) payloads[c] = states[c].v;
      gap_vhat = integrality_gap(tree_mean(payloads));
    }
    history.rounds.push_back(
        detail::combine_round_stats(t, stats, mask_parts != nullptr, gap_vhat, elapsed()));

    if (cfg.time_budget_seconds > 0.0 && elapsed() > cfg.time_budget_seconds &&
        t < cfg.max_iterations) {
      history.truncated = true;
      break;
    }
  }

  if (!have_anchor) {
    // No synchronization ever happened; aggregate once for reporting.
    for (std::size_t c = 0; c < num_clients; ++c) payloads[c] = states[c].v;
    RegularizationParams reg_t = cfg.reg;
    reg_t.lambda = resolve_lambda(cfg.reg, cfg.max_iterations);
    v_hat = proximal_aggregate(payloads, reg_t, 1.0, cfg.weighted_mean ? &weights : nullptr);
  }

  history.client_u.reserve(num_clients);
  history.client_v.reserve(num_clients);
  for (ClientState& s : states) {
    history.rounded_u.push_back(binarize(s.u));
    history.client_u.push_back(std::move(s.u));
    history.client_v.push_back(std::move(s.v));
  }
  history.rounded_v_hat = binarize(v_hat);
  history.v_hat = std::move(v_hat);
  history.total_seconds = elapsed();
  return history;
}

/// Centralized reference run: one optimizer over the whole matrix, written as
/// a plain loop (independent of the federation machinery) so the two paths
/// can be checked against each other. With a single client, sync_interval 1
/// and gamma 0 the federated simulator must match this bit for bit.
inline RunHistory run_centralized(const BinaryMatrix& a, const FederationConfig& cfg,
                                  const BinaryMatrix* mask = nullptr) {
  FederationConfig local = cfg;
  local.clients = 1;
  local.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  ClientState state = init_client_state(a, local.rank, rng::derive(local.global_seed, 7, 0));
  RunHistory history;
  FactorMatrix v_hat;
  bool have_anchor = false;

  for (std::uint64_t t = 1; t <= local.max_iterations; ++t) {
    RegularizationParams reg_t = local.reg;
    reg_t.lambda = resolve_lambda(local.reg, t);
    const ProximityParams prox_t{have_anchor ? local.prox.gamma : 0.0};
    {
      const FactorMatrix& anchor = have_anchor ? v_hat : state.v;
      local_round(state, reg_t, prox_t, local.rule, anchor);
    }

    if (t % local.sync_interval == 0) {
      const FactorMatrix payload =
          detail::make_payload(state.v, local.privacy, local.global_seed, 0, t);
      v_hat = proximal_aggregate({payload}, reg_t);
      have_anchor = true;
      state.v = v_hat;
    }

    const FactorMatrix& anchor = have_anchor ? v_hat : state.v;
    const detail::ClientRoundStats s =
        detail::client_round_stats(state, reg_t, prox_t, anchor, mask);
    const double gap_vhat =
        have_anchor ? integrality_gap(v_hat) : integrality_gap(tree_mean({state.v}));
    history.rounds.push_back(
        detail::combine_round_stats(t, {s}, mask != nullptr, gap_vhat, elapsed()));

    if (local.time_budget_seconds > 0.0 && elapsed() > local.time_budget_seconds &&
        t < local.max_iterations) {
      history.truncated = true;
      break;
    }
  }

  if (!have_anchor) {
    RegularizationParams reg_t = local.reg;
    reg_t.lambda = resolve_lambda(local.reg, local.max_iterations);
    v_hat = proximal_aggregate({state.v}, reg_t);
  }
  history.rounded_u.push_back(binarize(state.u));
  history.client_u.push_back(std::move(state.u));
  history.client_v.push_back(std::move(state.v));
  history.rounded_v_hat = binarize(v_hat);
  history.v_hat = std::move(v_hat);
  history.total_seconds = elapsed();
  return history;
}

}  // namespace felb
