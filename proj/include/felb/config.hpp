#pragma once

// Plain-text experiment configuration: key = value lines under [section]
// headers, every default baked in so a minimal file only names the data
// source and method. Parsing and validation collect *all* problems instead
// of stopping at the first, and serialize/parse round-trips exactly.

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "felb/client.hpp"
#include "felb/federation.hpp"
#include "felb/privacy.hpp"
#include "felb/synthdata.hpp"

namespace felb {

struct ExperimentConfig {
  // [run]
  std::string method = "felb";  // felb | felb-mu | agg-baseline
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  unsigned threads = 0;               // 0 = FELB_THREADS env or 1
  double time_budget_seconds = 0.0;   // 0 = unlimited
  bool deterministic_timing = true;   // write elapsed_seconds as 0 in CSV
  bool write_factors = true;          // dump real-valued factors as well

  // [data]
  std::string source = "generate";  // generate | files
  std::string data_path;
  std::string mask_path;
  std::size_t rows = 5000;
  std::size_t cols = 100;
  std::size_t tiles = 5;
  std::size_t tile_rows = 0;  // 0 = rows / (2 * tiles)
  std::size_t tile_cols = 0;  // 0 = cols / (2 * tiles)
  double tile_density = 0.9;
  double background_density = 0.0;
  double xor_noise = 0.0;

  // [model]
  std::size_t rank = 5;
  std::size_t clients = 10;
  std::uint64_t sync_interval = 10;
  std::uint64_t max_iterations = 100;
  double kappa = 0.001;
  double lambda = 0.1;
  double growth = 1.05;
  double gamma = 0.1;
  double beta = 0.001;
  double mu_epsilon = 1e-12;
  bool weighted_mean = false;

  // [privacy]
  std::string mechanism = "none";  // none | gauss | laplace | bernoulli
  double epsilon = 1.0;
  double delta = 0.05;
  double theta = 1.5;
  double sensitivity = 1.0;
  bool clipped = false;

  // [baseline]
  std::string aggregator = "vote";  // avg | vote | or

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool parse_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0" || v == "no" || v == "off") {
    out = false;
    return true;
  }
  return false;
}

inline bool parse_u64(const std::string& v, std::uint64_t& out) {
  if (v.empty()) return false;
  std::uint64_t acc = 0;
  for (char ch : v) {
    if (ch < '0' || ch > '9') return false;
    const std::uint64_t digit = static_cast<std::uint64_t>(ch - '0');
    if (acc > (UINT64_MAX - digit) / 10) return false;
    acc = acc * 10 + digit;
  }
  out = acc;
  return true;
}

inline bool parse_real(const std::string& v, double& out) {
  if (v.empty()) return false;
  char* end = nullptr;
  const double parsed = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size()) return false;
  out = parsed;
  return true;
}

/// Shortest decimal that parses back to exactly the same double.
inline std::string format_real_exact(double v) {
  char buf[40];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

}  // namespace detail

struct ConfigParseResult {
  ExperimentConfig config;
  std::vector<std::string> errors;  // empty on success

  bool ok() const { return errors.empty(); }
};

/// Parses key = value configuration text. Section headers group keys for
/// readability; keys are unique across sections, so a key is accepted under
/// any (or no) header. Unknown keys and malformed values are all reported.
inline ConfigParseResult parse_config(const std::string& text) {
  ConfigParseResult result;
  ExperimentConfig& cfg = result.config;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string stripped = detail::trim(line);
    if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
    if (stripped.front() == '[') {
      if (stripped.back() != ']')
        result.errors.push_back("line " + std::to_string(line_no) + ": unterminated section header");
      continue;
    }
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      result.errors.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    const auto bad_value = [&] {
      result.errors.push_back("line " + std::to_string(line_no) + ": invalid value '" + value +
                              "' for key '" + key + "'");
    };
    const auto set_u64 = [&](std::uint64_t& field) {
      std::uint64_t parsed;
      if (detail::parse_u64(value, parsed))
        field = parsed;
      else
        bad_value();
    };
    const auto set_count = [&](std::size_t& field) {
      std::uint64_t parsed;
      if (detail::parse_u64(value, parsed))
        field = static_cast<std::size_t>(parsed);
      else
        bad_value();
    };
    const auto set_real = [&](double& field) {
      double parsed;
      if (detail::parse_real(value, parsed))
        field = parsed;
      else
        bad_value();
    };
    const auto set_bool = [&](bool& field) {
      bool parsed;
      if (detail::parse_bool(value, parsed))
        field = parsed;
      else
        bad_value();
    };

    if (key == "method") cfg.method = value;
    else if (key == "seed") set_u64(cfg.seed);
    else if (key == "trials") set_count(cfg.trials);
    else if (key == "threads") {
      std::uint64_t parsed;
      if (detail::parse_u64(value, parsed)) cfg.threads = static_cast<unsigned>(parsed);
      else bad_value();
    }
    else if (key == "time_budget_seconds") set_real(cfg.time_budget_seconds);
    else if (key == "deterministic_timing") set_bool(cfg.deterministic_timing);
    else if (key == "write_factors") set_bool(cfg.write_factors);
    else if (key == "source") cfg.source = value;
    else if (key == "data") cfg.data_path = value;
    else if (key == "mask") cfg.mask_path = value;
    else if (key == "rows") set_count(cfg.rows);
    else if (key == "cols") set_count(cfg.cols);
    else if (key == "tiles") set_count(cfg.tiles);
    else if (key == "tile_rows") set_count(cfg.tile_rows);
    else if (key == "tile_cols") set_count(cfg.tile_cols);
    else if (key == "tile_density") set_real(cfg.tile_density);
    else if (key == "background_density") set_real(cfg.background_density);
    else if (key == "xor_noise") set_real(cfg.xor_noise);
    else if (key == "rank") set_count(cfg.rank);
    else if (key == "clients") set_count(cfg.clients);
    else if (key == "sync_interval") set_u64(cfg.sync_interval);
    else if (key == "max_iterations") set_u64(cfg.max_iterations);
    else if (key == "kappa") set_real(cfg.kappa);
    else if (key == "lambda") set_real(cfg.lambda);
    else if (key == "growth") set_real(cfg.growth);
    else if (key == "gamma") set_real(cfg.gamma);
    else if (key == "beta") set_real(cfg.beta);
    else if (key == "mu_epsilon") set_real(cfg.mu_epsilon);
    else if (key == "weighted_mean") set_bool(cfg.weighted_mean);
    else if (key == "mechanism") cfg.mechanism = value;
    else if (key == "epsilon") set_real(cfg.epsilon);
    else if (key == "delta") set_real(cfg.delta);
    else if (key == "theta") set_real(cfg.theta);
    else if (key == "sensitivity") set_real(cfg.sensitivity);
    else if (key == "clipped") set_bool(cfg.clipped);
    else if (key == "aggregator") cfg.aggregator = value;
    else
      result.errors.push_back("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  return result;
}

/// Canonical serialization; parse(serialize(cfg)) == cfg for any valid cfg.
inline std::string serialize_config(const ExperimentConfig& c) {
  using detail::format_real_exact;
  std::ostringstream os;
  const auto b = [](bool v) { return v ? "true" : "false"; };
  os << "[run]\n";
  os << "method = " << c.method << '\n';
  os << "seed = " << c.seed << '\n';
  os << "trials = " << c.trials << '\n';
  os << "threads = " << c.threads << '\n';
  os << "time_budget_seconds = " << format_real_exact(c.time_budget_seconds) << '\n';
  os << "deterministic_timing = " << b(c.deterministic_timing) << '\n';
  os << "write_factors = " << b(c.write_factors) << '\n';
  os << "\n[data]\n";
  os << "source = " << c.source << '\n';
  if (!c.data_path.empty()) os << "data = " << c.data_path << '\n';
  if (!c.mask_path.empty()) os << "mask = " << c.mask_path << '\n';
  os << "rows = " << c.rows << '\n';
  os << "cols = " << c.cols << '\n';
  os << "tiles = " << c.tiles << '\n';
  os << "tile_rows = " << c.tile_rows << '\n';
  os << "tile_cols = " << c.tile_cols << '\n';
  os << "tile_density = " << format_real_exact(c.tile_density) << '\n';
  os << "background_density = " << format_real_exact(c.background_density) << '\n';
  os << "xor_noise = " << format_real_exact(c.xor_noise) << '\n';
  os << "\n[model]\n";
  os << "rank = " << c.rank << '\n';
  os << "clients = " << c.clients << '\n';
  os << "sync_interval = " << c.sync_interval << '\n';
  os << "max_iterations = " << c.max_iterations << '\n';
  os << "kappa = " << format_real_exact(c.kappa) << '\n';
  os << "lambda = " << format_real_exact(c.lambda) << '\n';
  os << "growth = " << format_real_exact(c.growth) << '\n';
  os << "gamma = " << format_real_exact(c.gamma) << '\n';
  os << "beta = " << format_real_exact(c.beta) << '\n';
  os << "mu_epsilon = " << format_real_exact(c.mu_epsilon) << '\n';
  os << "weighted_mean = " << b(c.weighted_mean) << '\n';
  os << "\n[privacy]\n";
  os << "mechanism = " << c.mechanism << '\n';
  os << "epsilon = " << format_real_exact(c.epsilon) << '\n';
  os << "delta = " << format_real_exact(c.delta) << '\n';
  os << "theta = " << format_real_exact(c.theta) << '\n';
  os << "sensitivity = " << format_real_exact(c.sensitivity) << '\n';
  os << "clipped = " << b(c.clipped) << '\n';
  os << "\n[baseline]\n";
  os << "aggregator = " << c.aggregator << '\n';
  return os.str();
}

/// Checks semantic constraints; returns one message per violation (empty
/// means the config is runnable).
inline std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  const auto check = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  check(c.method == "felb" || c.method == "felb-mu" || c.method == "felb_mu" ||
            c.method == "agg-baseline",
        "method must be one of felb, felb-mu, agg-baseline (got '" + c.method + "')");
  check(c.trials >= 1, "trials must be >= 1");
  check(c.time_budget_seconds >= 0.0, "time_budget_seconds must be >= 0");
  check(c.source == "generate" || c.source == "files",
        "source must be 'generate' or 'files' (got '" + c.source + "')");
  if (c.source == "files") {
    check(!c.data_path.empty(), "source = files requires a data path");
  } else {
    check(c.rows >= 1 && c.cols >= 1, "generated data needs rows >= 1 and cols >= 1");
    check(c.tile_density >= 0.0 && c.tile_density <= 1.0, "tile_density must be in [0, 1]");
    check(c.background_density >= 0.0 && c.background_density <= 1.0,
          "background_density must be in [0, 1]");
    check(c.xor_noise >= 0.0 && c.xor_noise <= 0.5, "xor_noise must be in [0, 0.5]");
    check(c.rows >= c.clients, "generated data needs rows >= clients");
  }
  check(c.rank >= 1, "rank must be >= 1");
  check(c.clients >= 1, "clients must be >= 1");
  check(c.sync_interval >= 1, "sync_interval must be >= 1");
  check(c.kappa >= 0.0, "kappa must be >= 0");
  check(c.lambda >= 0.0, "lambda must be >= 0");
  check(c.growth >= 1.0, "growth must be >= 1");
  check(c.gamma >= 0.0, "gamma must be >= 0");
  check(c.beta >= 0.0 && c.beta < 1.0, "beta must be in [0, 1)");
  check(c.mu_epsilon > 0.0 && c.mu_epsilon <= 1e-8, "mu_epsilon must be in (0, 1e-8]");
  const bool known_mechanism = c.mechanism == "none" || c.mechanism == "gauss" ||
                               c.mechanism == "laplace" || c.mechanism == "bernoulli";
  check(known_mechanism,
        "mechanism must be one of none, gauss, laplace, bernoulli (got '" + c.mechanism + "')");
  if (known_mechanism && c.mechanism != "none") {
    check(c.epsilon > 0.0, "epsilon must be > 0");
    check(c.sensitivity > 0.0, "sensitivity must be > 0");
    if (c.mechanism == "gauss") check(c.delta > 0.0 && c.delta < 1.0, "delta must be in (0, 1)");
    if (c.clipped) check(c.theta > 1.0, "theta must be > 1 when clipping");
  }
  if (c.method == "agg-baseline")
    check(c.aggregator == "avg" || c.aggregator == "vote" || c.aggregator == "or",
          "aggregator must be one of avg, vote, or (got '" + c.aggregator + "')");
  return errors;
}

inline StepVariant step_variant_of(const ExperimentConfig& c) {
  return (c.method == "felb-mu" || c.method == "felb_mu") ? StepVariant::kMultiplicativeUpdate
                                                          : StepVariant::kLipschitz;
}

inline NoiseMechanism mechanism_of(const ExperimentConfig& c) {
  if (c.mechanism == "gauss") return NoiseMechanism::kGaussian;
  if (c.mechanism == "laplace") return NoiseMechanism::kLaplace;
  if (c.mechanism == "bernoulli") return NoiseMechanism::kBernoulliXor;
  return NoiseMechanism::kNone;
}

/// FederationConfig for one run with the given seed (per-trial seeds differ).
inline FederationConfig to_federation_config(const ExperimentConfig& c, std::uint64_t run_seed) {
  FederationConfig f;
  f.clients = c.clients;
  f.rank = c.rank;
  f.sync_interval = c.sync_interval;
  f.max_iterations = c.max_iterations;
  f.reg = RegularizationParams{c.kappa, c.lambda, c.growth};
  f.prox = ProximityParams{c.gamma};
  f.rule = StepRule{step_variant_of(c), c.beta, c.mu_epsilon};
  f.privacy.mechanism = mechanism_of(c);
  f.privacy.epsilon = c.epsilon;
  f.privacy.delta = c.delta;
  f.privacy.theta = c.theta;
  f.privacy.sensitivity = c.sensitivity;
  f.privacy.clipped = c.clipped;
  f.global_seed = run_seed;
  f.weighted_mean = c.weighted_mean;
  f.time_budget_seconds = c.time_budget_seconds;
  f.threads = c.threads;
  return f;
}

/// PlantedSpec for generated data under the given seed.
inline PlantedSpec to_planted_spec(const ExperimentConfig& c, std::uint64_t data_seed) {
  PlantedSpec spec;
  spec.rows = c.rows;
  spec.cols = c.cols;
  spec.tiles = c.tiles;
  spec.tile_rows = c.tile_rows;
  spec.tile_cols = c.tile_cols;
  spec.tile_density = c.tile_density;
  spec.background_density = c.background_density;
  spec.seed = data_seed;
  return spec;
}

}  // namespace felb
