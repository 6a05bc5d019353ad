#pragma once

// Core matrix types: a sparse Boolean matrix (sorted coordinate list) and a
// dense row-major real factor matrix, plus the handful of products and norms
// the factorization algorithms need. Boolean data in this domain is extremely
// sparse (typically a few percent dense), so Boolean matrices never
// materialize as dense arrays internally.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace felb {

/// Dense real matrix, row-major. Used for the relaxed factors U, V.
class FactorMatrix {
 public:
  FactorMatrix() = default;

  FactorMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  static FactorMatrix from_values(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (values.size() != rows * cols)
      throw std::invalid_argument("FactorMatrix: value count does not match shape");
    FactorMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.values_ = std::move(values);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double* row(std::size_t r) { return values_.data() + r * cols_; }
  const double* row(std::size_t r) const { return values_.data() + r * cols_; }

  const std::vector<double>& values() const { return values_; }

  bool all_finite() const {
    for (double v : values_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const FactorMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && values_ == other.values_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

/// Sparse Boolean matrix stored as a sorted, duplicate-free list of
/// (row, col) coordinates of the 1-entries.
class BinaryMatrix {
 public:
  using Entry = std::pair<std::uint32_t, std::uint32_t>;

  BinaryMatrix() = default;
  BinaryMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

  static BinaryMatrix from_entries(std::size_t rows, std::size_t cols, std::vector<Entry> entries) {
    BinaryMatrix m(rows, cols);
    std::sort(entries.begin(), entries.end());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto [r, c] = entries[i];
      if (r >= rows || c >= cols)
        throw std::invalid_argument("BinaryMatrix: entry (" + std::to_string(r) + ", " +
                                    std::to_string(c) + ") out of bounds for " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
      if (i > 0 && entries[i] == entries[i - 1])
        throw std::invalid_argument("BinaryMatrix: duplicate entry (" + std::to_string(r) + ", " +
                                    std::to_string(c) + ")");
    }
    m.entries_ = std::move(entries);
    return m;
  }

  static BinaryMatrix from_dense(std::size_t rows, std::size_t cols,
                                 const std::vector<std::uint8_t>& dense) {
    if (dense.size() != rows * cols)
      throw std::invalid_argument("BinaryMatrix: dense size does not match shape");
    BinaryMatrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        if (dense[r * cols + c])
          m.entries_.emplace_back(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c));
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  bool at(std::size_t r, std::size_t c) const {
    const Entry key{static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)};
    return std::binary_search(entries_.begin(), entries_.end(), key);
  }

  std::vector<std::uint8_t> to_dense() const {
    std::vector<std::uint8_t> dense(rows_ * cols_, 0);
    for (const auto& [r, c] : entries_) dense[static_cast<std::size_t>(r) * cols_ + c] = 1;
    return dense;
  }

  std::vector<double> to_real_dense() const {
    std::vector<double> dense(rows_ * cols_, 0.0);
    for (const auto& [r, c] : entries_) dense[static_cast<std::size_t>(r) * cols_ + c] = 1.0;
    return dense;
  }

  /// Half-open entry index range [first, last) of row r; valid because the
  /// entry list is sorted row-major.
  std::pair<std::size_t, std::size_t> row_range(std::size_t r) const {
    const Entry lo{static_cast<std::uint32_t>(r), 0};
    const Entry hi{static_cast<std::uint32_t>(r + 1), 0};
    const auto first = std::lower_bound(entries_.begin(), entries_.end(), lo);
    const auto last = std::lower_bound(first, entries_.end(), hi);
    return {static_cast<std::size_t>(first - entries_.begin()),
            static_cast<std::size_t>(last - entries_.begin())};
  }

  bool operator==(const BinaryMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && entries_ == other.entries_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Entry> entries_;
};

inline FactorMatrix to_factor(const BinaryMatrix& a) {
  return FactorMatrix::from_values(a.rows(), a.cols(), a.to_real_dense());
}

/// Boolean matrix product (OR of ANDs): out[i,j] = OR_l (U[i,l] AND V[l,j]).
inline std::string shape_string(std::size_t rows, std::size_t cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

inline BinaryMatrix boolean_product(const BinaryMatrix& u, const BinaryMatrix& v) {
  if (u.cols() != v.rows())
    throw std::invalid_argument("boolean_product: inner dimensions disagree: " +
                                shape_string(u.rows(), u.cols()) + " times " +
                                shape_string(v.rows(), v.cols()));
  // Row l of V as a sorted column list, so each output row is a union of rows.
  std::vector<std::vector<std::uint32_t>> v_rows(v.rows());
  for (const auto& [r, c] : v.entries()) v_rows[r].push_back(c);

  std::vector<BinaryMatrix::Entry> out;
  std::vector<std::uint8_t> seen(v.cols(), 0);
  std::vector<std::uint32_t> touched;
  for (std::size_t i = 0; i < u.rows(); ++i) {
    const auto [first, last] = u.row_range(i);
    touched.clear();
    for (std::size_t e = first; e < last; ++e) {
      for (std::uint32_t c : v_rows[u.entries()[e].second]) {
        if (!seen[c]) {
          seen[c] = 1;
          touched.push_back(c);
        }
      }
    }
    std::sort(touched.begin(), touched.end());
    for (std::uint32_t c : touched) {
      out.emplace_back(static_cast<std::uint32_t>(i), c);
      seen[c] = 0;
    }
  }
  return BinaryMatrix::from_entries(u.rows(), v.cols(), std::move(out));
}

inline FactorMatrix real_product(const FactorMatrix& x, const FactorMatrix& y) {
  if (x.cols() != y.rows())
    throw std::invalid_argument("real_product: inner dimensions disagree: " +
                                shape_string(x.rows(), x.cols()) + " times " +
                                shape_string(y.rows(), y.cols()));
  FactorMatrix out(x.rows(), y.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* xi = x.row(i);
    double* oi = out.row(i);
    for (std::size_t l = 0; l < x.cols(); ++l) {
      const double xv = xi[l];
      if (xv == 0.0) continue;
      const double* yl = y.row(l);
      for (std::size_t j = 0; j < y.cols(); ++j) oi[j] += xv * yl[j];
    }
  }
  return out;
}

inline double frobenius_sq(const FactorMatrix& x) {
  double sum = 0.0;
  for (double v : x.values()) sum += v * v;
  return sum;
}

/// Gram matrix X^T X (cols x cols), accumulated from row outer products.
inline FactorMatrix gram_columns(const FactorMatrix& x) {
  const std::size_t k = x.cols();
  FactorMatrix g(k, k, 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double* xi = x.row(i);
    for (std::size_t a = 0; a < k; ++a) {
      const double va = xi[a];
      if (va == 0.0) continue;
      double* ga = g.row(a);
      for (std::size_t b = 0; b < k; ++b) ga[b] += va * xi[b];
    }
  }
  return g;
}

/// Gram matrix X X^T (rows x rows), from row dot products.
inline FactorMatrix gram_rows(const FactorMatrix& x) {
  const std::size_t n = x.rows();
  FactorMatrix g(n, n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      double dot = 0.0;
      const double* xa = x.row(a);
      const double* xb = x.row(b);
      for (std::size_t j = 0; j < x.cols(); ++j) dot += xa[j] * xb[j];
      g(a, b) = dot;
      g(b, a) = dot;
    }
  }
  return g;
}

/// Largest singular value via power iteration on the smaller Gram matrix.
///
/// Starts from the normalized all-ones vector and iterates until the Rayleigh
/// quotient is stable to relative `tol` or `max_iter` is hit. Power iteration
/// stalls if the start vector is orthogonal to the leading eigenspace; when a
/// nonzero matrix produces a (near-)zero iterate the start is restarted once
/// with a deterministic index ramp, which cannot be orthogonal to it as well.
inline double spectral_norm(const FactorMatrix& x, double tol = 1e-9, int max_iter = 1000) {
  if (x.rows() == 0 || x.cols() == 0)
    throw std::invalid_argument("spectral_norm: empty matrix");
  if (!x.all_finite()) throw std::invalid_argument("spectral_norm: non-finite entries");

  const FactorMatrix g = x.rows() <= x.cols() ? gram_rows(x) : gram_columns(x);
  const std::size_t n = g.rows();
  if (frobenius_sq(g) == 0.0) return 0.0;

  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::vector<double> gv(n, 0.0);
  double lambda = 0.0;
  bool restarted = false;
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t a = 0; a < n; ++a) {
      double s = 0.0;
      const double* ga = g.row(a);
      for (std::size_t b = 0; b < n; ++b) s += ga[b] * v[b];
      gv[a] = s;
    }
    double norm_sq = 0.0;
    for (double w : gv) norm_sq += w * w;
    if (norm_sq <= 1e-300) {
      if (restarted) return 0.0;
      restarted = true;
      double ramp_norm = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        v[a] = static_cast<double>(a + 1);
        ramp_norm += v[a] * v[a];
      }
      ramp_norm = std::sqrt(ramp_norm);
      for (double& w : v) w /= ramp_norm;
      continue;
    }
    // Rayleigh quotient v^T G v of the (normalized) current iterate.
    double rayleigh = 0.0;
    for (std::size_t a = 0; a < n; ++a) rayleigh += v[a] * gv[a];
    const double norm = std::sqrt(norm_sq);
    for (std::size_t a = 0; a < n; ++a) v[a] = gv[a] / norm;
    if (it > 0 && std::abs(rayleigh - lambda) <= tol * std::max(std::abs(rayleigh), 1e-300)) {
      lambda = rayleigh;
      break;
    }
    lambda = rayleigh;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

/// Symmetric-difference count between two Boolean matrices of equal shape.
inline std::size_t hamming_distance(const BinaryMatrix& a, const BinaryMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("hamming_distance: shape mismatch");
  const auto& ea = a.entries();
  const auto& eb = b.entries();
  std::size_t i = 0, j = 0, dist = 0;
  while (i < ea.size() && j < eb.size()) {
    if (ea[i] == eb[j]) {
      ++i;
      ++j;
    } else if (ea[i] < eb[j]) {
      ++i;
      ++dist;
    } else {
      ++j;
      ++dist;
    }
  }
  return dist + (ea.size() - i) + (eb.size() - j);
}

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Counts of predicted-vs-reference ones: reference `truth`, prediction `pred`.
inline ConfusionCounts confusion(const BinaryMatrix& truth, const BinaryMatrix& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
    throw std::invalid_argument("confusion: shape mismatch");
  std::size_t tp = 0;
  const auto& et = truth.entries();
  const auto& ep = pred.entries();
  std::size_t i = 0, j = 0;
  while (i < et.size() && j < ep.size()) {
    if (et[i] == ep[j]) {
      ++tp;
      ++i;
      ++j;
    } else if (et[i] < ep[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return ConfusionCounts{tp, ep.size() - tp, et.size() - tp};
}

}  // namespace felb
