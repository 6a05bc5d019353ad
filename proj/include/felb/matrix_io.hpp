#pragma once

// File formats: MatrixMarket coordinate files for Boolean matrices, a small
// binary dump for real factor matrices, and an atomic write helper so
// interrupted runs never leave half-written outputs.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "felb/matrix.hpp"

namespace felb {

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Writes `text` to `path` atomically: the content lands in a sibling
/// temporary file first and is renamed into place only when fully flushed.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& text) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open for writing: " + tmp.string());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    os.flush();
    if (!os) throw io_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

/// Serializes a Boolean matrix as a MatrixMarket coordinate-pattern file
/// (1-based indices, entries in row-major order).
inline std::string to_matrix_market(const BinaryMatrix& m) {
  std::ostringstream os;
  os << "%%MatrixMarket matrix coordinate pattern general\n";
  os << m.rows() << ' ' << m.cols() << ' ' << m.nnz() << '\n';
  for (const auto& [r, c] : m.entries()) os << (r + 1) << ' ' << (c + 1) << '\n';
  return os.str();
}

inline void write_matrix_market(const std::filesystem::path& path, const BinaryMatrix& m) {
  atomic_write_file(path, to_matrix_market(m));
}

/// Parses a MatrixMarket coordinate file into a Boolean matrix. Pattern files
/// are the native format; coordinate real/integer files are accepted too,
/// with any nonzero value treated as 1 and explicit zeros dropped.
inline BinaryMatrix read_matrix_market(std::istream& is, const std::string& origin = "<stream>") {
  std::string line;
  if (!std::getline(is, line)) throw io_error(origin + ": empty file");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket" || object != "matrix")
    throw io_error(origin + ": not a MatrixMarket matrix file");
  if (format != "coordinate")
    throw io_error(origin + ": only coordinate format is supported");
  const bool has_values = field == "real" || field == "integer";
  if (field != "pattern" && !has_values)
    throw io_error(origin + ": unsupported field type '" + field + "'");
  if (symmetry != "general")
    throw io_error(origin + ": only general symmetry is supported");

  // Skip comment and blank lines up to the size line.
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream size_line(line);
  long long rows = -1, cols = -1, nnz = -1;
  size_line >> rows >> cols >> nnz;
  if (rows < 0 || cols < 0 || nnz < 0)
    throw io_error(origin + ": malformed size line '" + line + "'");

  std::vector<BinaryMatrix::Entry> entries;
  entries.reserve(static_cast<std::size_t>(nnz));
  for (long long i = 0; i < nnz; ++i) {
    if (!std::getline(is, line))
      throw io_error(origin + ": expected " + std::to_string(nnz) + " entries, got " +
                     std::to_string(i));
    std::istringstream entry(line);
    long long r = 0, c = 0;
    double value = 1.0;
    entry >> r >> c;
    if (has_values) entry >> value;
    if (entry.fail())
      throw io_error(origin + ": malformed entry line '" + line + "'");
    if (r < 1 || r > rows || c < 1 || c > cols)
      throw io_error(origin + ": entry (" + std::to_string(r) + ", " + std::to_string(c) +
                     ") outside declared " + std::to_string(rows) + "x" + std::to_string(cols));
    if (value == 0.0) continue;
    entries.emplace_back(static_cast<std::uint32_t>(r - 1), static_cast<std::uint32_t>(c - 1));
  }
  try {
    return BinaryMatrix::from_entries(static_cast<std::size_t>(rows),
                                      static_cast<std::size_t>(cols), std::move(entries));
  } catch (const std::invalid_argument& e) {
    throw io_error(origin + ": " + e.what());
  }
}

inline BinaryMatrix read_matrix_market_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open: " + path.string());
  return read_matrix_market(is, path.string());
}

namespace detail {
inline constexpr char kFactorMagic[8] = {'F', 'E', 'L', 'B', 'M', 'A', 'T', '1'};

template <typename T>
void append_raw(std::string& out, const T& value) {
  const char* p = reinterpret_cast<const char*>(&value);
  out.append(p, sizeof(T));
}

template <typename T>
T read_raw(std::istream& is, const std::string& origin) {
  T value;
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw io_error(origin + ": truncated factor file");
  return value;
}
}  // namespace detail

/// Binary dump of a real factor matrix: 8-byte magic, u64 rows, u64 cols,
/// then rows*cols float64 values row-major (native little-endian layout).
inline std::string to_factor_bytes(const FactorMatrix& m) {
  std::string out;
  out.reserve(8 + 16 + m.size() * 8);
  out.append(detail::kFactorMagic, sizeof(detail::kFactorMagic));
  detail::append_raw(out, static_cast<std::uint64_t>(m.rows()));
  detail::append_raw(out, static_cast<std::uint64_t>(m.cols()));
  for (double v : m.values()) detail::append_raw(out, v);
  return out;
}

inline void write_factor_file(const std::filesystem::path& path, const FactorMatrix& m) {
  atomic_write_file(path, to_factor_bytes(m));
}

inline FactorMatrix read_factor_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open: " + path.string());
  const std::string origin = path.string();
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, detail::kFactorMagic, 8) != 0)
    throw io_error(origin + ": not a factor matrix file");
  const auto rows = detail::read_raw<std::uint64_t>(is, origin);
  const auto cols = detail::read_raw<std::uint64_t>(is, origin);
  if (rows > (1ULL << 32) || cols > (1ULL << 32) || rows * cols > (1ULL << 34))
    throw io_error(origin + ": implausible factor shape");
  std::vector<double> values(static_cast<std::size_t>(rows * cols));
  for (double& v : values) v = detail::read_raw<double>(is, origin);
  return FactorMatrix::from_values(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols),
                                   std::move(values));
}

}  // namespace felb
