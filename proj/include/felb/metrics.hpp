#pragma once

// Reconstruction-quality metrics on Boolean matrices and the per-round
// history record written by the simulator.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "felb/matrix.hpp"

namespace felb {

/// Root mean squared deviation between two Boolean matrices:
/// sqrt(hamming / (rows * cols)).
inline double rmsd(const BinaryMatrix& a, const BinaryMatrix& b) {
  const std::size_t cells = a.rows() * a.cols();
  if (cells == 0) throw std::invalid_argument("rmsd: empty matrix");
  return std::sqrt(static_cast<double>(hamming_distance(a, b)) / static_cast<double>(cells));
}

/// F1 score of prediction `pred` against reference `truth`:
/// 2*TP / (2*TP + FP + FN). Both matrices all-zero counts as a perfect 1.
inline double f1(const BinaryMatrix& truth, const BinaryMatrix& pred) {
  const ConfusionCounts c = confusion(truth, pred);
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

/// F1 against the clean (pre-noise) planted structure rather than the
/// observed data; measures recovery instead of memorization.
inline double f1_star(const BinaryMatrix& clean_mask, const BinaryMatrix& pred) {
  return f1(clean_mask, pred);
}

/// Mean distance of entries to the nearest Boolean value:
/// mean over entries of min(|x|, |x - 1|). Zero iff X is exactly Boolean.
inline double integrality_gap(const FactorMatrix& x) {
  if (x.size() == 0) throw std::invalid_argument("integrality_gap: empty matrix");
  if (!x.all_finite()) throw std::invalid_argument("integrality_gap: non-finite entries");
  double sum = 0.0;
  for (double v : x.values()) sum += std::min(std::abs(v), std::abs(v - 1.0));
  return sum / static_cast<double>(x.size());
}

/// One synchronization-round record of a federated (or centralized) run.
struct RoundLog {
  std::uint64_t round = 0;
  double mean_local_loss = 0.0;
  double global_rmsd = 0.0;
  double f1 = 0.0;
  std::optional<double> f1_star;  // only when a clean mask is available
  double integrality_gap_vhat = 0.0;
  double elapsed_seconds = 0.0;
};

/// Shortest decimal form with up to 9 significant digits (printf %.9g).
inline std::string format_metric(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline const char* history_csv_header() {
  return "round,mean_local_loss,global_rmsd,f1,f1_star,integrality_gap_vhat,elapsed_seconds";
}

/// Writes the run history as CSV. With `deterministic_timing` the
/// elapsed_seconds column is forced to 0 so repeated runs produce
/// byte-identical files.
inline void write_history_csv(std::ostream& os, const std::vector<RoundLog>& rounds,
                              bool deterministic_timing = true) {
  os << history_csv_header() << '\n';
  for (const RoundLog& r : rounds) {
    os << r.round << ',' << format_metric(r.mean_local_loss) << ','
       << format_metric(r.global_rmsd) << ',' << format_metric(r.f1) << ',';
    if (r.f1_star) os << format_metric(*r.f1_star);
    os << ',' << format_metric(r.integrality_gap_vhat) << ','
       << format_metric(deterministic_timing ? 0.0 : r.elapsed_seconds) << '\n';
  }
}

}  // namespace felb
