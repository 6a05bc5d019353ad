// felb: federated Boolean matrix factorization experiment driver.
//
// Subcommands:
//   generate  -- sample planted-tile Boolean data, write data/mask + sidecar
//   run       -- execute a (federated) factorization per config, emit CSV/JSON
//   evaluate  -- score a reconstruction against reference data
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "felb/baselines.hpp"
#include "felb/client.hpp"
#include "felb/config.hpp"
#include "felb/federation.hpp"
#include "felb/matrix.hpp"
#include "felb/matrix_io.hpp"
#include "felb/metrics.hpp"
#include "felb/privacy.hpp"
#include "felb/synthdata.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

using nlohmann::json;

json config_to_json(const felb::ExperimentConfig& c) {
  json j;
  j["method"] = c.method;
  j["step_variant"] = felb::step_variant_of(c) == felb::StepVariant::kMultiplicativeUpdate
                          ? "multiplicative-update"
                          : "lipschitz";
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  j["threads"] = c.threads;
  j["time_budget_seconds"] = c.time_budget_seconds;
  j["deterministic_timing"] = c.deterministic_timing;
  j["write_factors"] = c.write_factors;
  j["source"] = c.source;
  j["data"] = c.data_path;
  j["mask"] = c.mask_path;
  j["rows"] = c.rows;
  j["cols"] = c.cols;
  j["tiles"] = c.tiles;
  j["tile_rows"] = c.tile_rows;
  j["tile_cols"] = c.tile_cols;
  j["tile_density"] = c.tile_density;
  j["background_density"] = c.background_density;
  j["xor_noise"] = c.xor_noise;
  j["rank"] = c.rank;
  j["clients"] = c.clients;
  j["sync_interval"] = c.sync_interval;
  j["max_iterations"] = c.max_iterations;
  j["kappa"] = c.kappa;
  j["lambda"] = c.lambda;
  j["growth"] = c.growth;
  j["gamma"] = c.gamma;
  j["beta"] = c.beta;
  j["mu_epsilon"] = c.mu_epsilon;
  j["weighted_mean"] = c.weighted_mean;
  j["mechanism"] = c.mechanism;
  j["epsilon"] = c.epsilon;
  j["delta"] = c.delta;
  j["theta"] = c.theta;
  j["sensitivity"] = c.sensitivity;
  j["clipped"] = c.clipped;
  j["aggregator"] = c.aggregator;
  return j;
}

json round_to_json(const felb::RoundLog& r) {
  json j;
  j["round"] = r.round;
  j["mean_local_loss"] = r.mean_local_loss;
  j["global_rmsd"] = r.global_rmsd;
  j["f1"] = r.f1;
  if (r.f1_star)
    j["f1_star"] = *r.f1_star;
  else
    j["f1_star"] = nullptr;
  j["integrality_gap_vhat"] = r.integrality_gap_vhat;
  return j;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string out_dir;
  std::uint64_t seed = 0;
  std::size_t rows = 5000, cols = 100, tiles = 5, tile_rows = 0, tile_cols = 0;
  double density = 0.9, background = 0.0, noise = 0.0;
};

int cmd_generate(const GenerateArgs& args) {
  felb::PlantedSpec spec;
  spec.rows = args.rows;
  spec.cols = args.cols;
  spec.tiles = args.tiles;
  spec.tile_rows = args.tile_rows;
  spec.tile_cols = args.tile_cols;
  spec.tile_density = args.density;
  spec.background_density = args.background;
  spec.seed = args.seed;
  try {
    spec.validate();
    felb::NoiseLevel{args.noise}.validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    std::filesystem::create_directories(args.out_dir);
    const felb::PlantedData planted = felb::generate_planted(spec);
    const felb::BinaryMatrix data =
        felb::apply_xor_noise(planted.data, felb::NoiseLevel{args.noise}, spec.seed);
    const std::filesystem::path out(args.out_dir);
    felb::write_matrix_market(out / "data.mtx", data);
    felb::write_matrix_market(out / "mask.mtx", planted.mask);
    json meta;
    meta["rows"] = spec.rows;
    meta["cols"] = spec.cols;
    meta["tiles"] = spec.tiles;
    meta["tile_rows"] = spec.tile_rows;
    meta["tile_cols"] = spec.tile_cols;
    meta["tile_density"] = spec.tile_density;
    meta["background_density"] = spec.background_density;
    meta["xor_noise"] = args.noise;
    meta["seed"] = spec.seed;
    felb::atomic_write_file(out / "spec.jsonl", meta.dump() + "\n");
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

// --------------------------------------------------------------------- run

struct RunOverrides {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::string> agg;
  std::optional<std::size_t> clients;
  std::optional<std::uint64_t> sync_interval;
  std::optional<std::string> privacy;
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::optional<double> theta;
};

felb::BaselineAggregator aggregator_of(const std::string& name) {
  if (name == "avg") return felb::BaselineAggregator::kRoundedAverage;
  if (name == "or") return felb::BaselineAggregator::kLogicalOr;
  return felb::BaselineAggregator::kMajorityVote;
}

/// Single post-hoc metrics row for the aggregated baseline (which has no
/// optimization rounds of its own).
felb::RoundLog baseline_round_log(const std::vector<felb::BinaryMatrix>& parts,
                                  const std::vector<felb::BinaryMatrix>& us,
                                  const felb::BinaryMatrix& v_hat,
                                  const std::vector<felb::BinaryMatrix>* mask_parts,
                                  double seconds) {
  double loss_sum = 0.0;
  std::size_t hamming = 0, cells = 0;
  felb::ConfusionCounts data_counts, mask_counts;
  for (std::size_t c = 0; c < parts.size(); ++c) {
    const felb::BinaryMatrix recon = felb::boolean_product(us[c], v_hat);
    const std::size_t h = felb::hamming_distance(parts[c], recon);
    loss_sum += static_cast<double>(h);  // squared loss == Hamming on {0,1}
    hamming += h;
    cells += parts[c].rows() * parts[c].cols();
    const felb::ConfusionCounts cf = felb::confusion(parts[c], recon);
    data_counts.tp += cf.tp;
    data_counts.fp += cf.fp;
    data_counts.fn += cf.fn;
    if (mask_parts) {
      const felb::ConfusionCounts cm = felb::confusion((*mask_parts)[c], recon);
      mask_counts.tp += cm.tp;
      mask_counts.fp += cm.fp;
      mask_counts.fn += cm.fn;
    }
  }
  const auto f1_of = [](const felb::ConfusionCounts& c) {
    const std::size_t denom = 2 * c.tp + c.fp + c.fn;
    return denom == 0 ? 1.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
  };
  felb::RoundLog log;
  log.round = 0;
  log.mean_local_loss = loss_sum / static_cast<double>(parts.size());
  log.global_rmsd = std::sqrt(static_cast<double>(hamming) / static_cast<double>(cells));
  log.f1 = f1_of(data_counts);
  if (mask_parts) log.f1_star = f1_of(mask_counts);
  log.integrality_gap_vhat = 0.0;  // aggregate is Boolean by construction
  log.elapsed_seconds = seconds;
  return log;
}

int run_one_trial(const felb::ExperimentConfig& cfg, std::uint64_t run_seed,
                  const std::filesystem::path& out_dir, json& trial_json) {
  namespace fs = std::filesystem;
  // --- data ---
  felb::BinaryMatrix data;
  std::optional<felb::BinaryMatrix> mask;
  try {
    if (cfg.source == "files") {
      data = felb::read_matrix_market_file(cfg.data_path);
      if (!cfg.mask_path.empty()) mask = felb::read_matrix_market_file(cfg.mask_path);
    } else {
      const felb::PlantedSpec spec = felb::to_planted_spec(cfg, felb::rng::derive(run_seed, 9));
      const felb::PlantedData planted = felb::generate_planted(spec);
      data = felb::apply_xor_noise(planted.data, felb::NoiseLevel{cfg.xor_noise}, spec.seed);
      mask = planted.mask;
    }
    if (mask && (mask->rows() != data.rows() || mask->cols() != data.cols()))
      throw felb::io_error("mask shape does not match data");
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }

  // --- run ---
  std::vector<felb::RoundLog> rounds;
  std::vector<felb::BinaryMatrix> rounded_u;
  felb::BinaryMatrix rounded_v_hat;
  std::vector<felb::FactorMatrix> real_u;
  felb::FactorMatrix real_v_hat;
  bool truncated = false;
  double seconds = 0.0;
  try {
    std::vector<felb::BinaryMatrix> parts = felb::partition(data, cfg.clients, run_seed);
    std::optional<std::vector<felb::BinaryMatrix>> mask_parts;
    if (mask) mask_parts = felb::partition(*mask, cfg.clients, run_seed);

    if (cfg.method == "agg-baseline") {
      const auto start = std::chrono::steady_clock::now();
      auto [us, v_hat] =
          felb::run_aggregated_bmf(parts, felb::make_reference_factorizer(),
                                   aggregator_of(cfg.aggregator), cfg.rank, run_seed);
      seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rounds.push_back(baseline_round_log(parts, us, v_hat,
                                          mask_parts ? &*mask_parts : nullptr, seconds));
      rounded_u = std::move(us);
      rounded_v_hat = std::move(v_hat);
    } else {
      felb::FederationConfig fed = felb::to_federation_config(cfg, run_seed);
      felb::RunHistory history =
          felb::run_federated(parts, fed, mask_parts ? &*mask_parts : nullptr);
      rounds = std::move(history.rounds);
      rounded_u = std::move(history.rounded_u);
      rounded_v_hat = std::move(history.rounded_v_hat);
      real_u = std::move(history.client_u);
      real_v_hat = std::move(history.v_hat);
      truncated = history.truncated;
      seconds = history.total_seconds;
    }
  } catch (const felb::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }

  // --- outputs ---
  try {
    fs::create_directories(out_dir);
    std::ostringstream csv;
    felb::write_history_csv(csv, rounds, cfg.deterministic_timing);
    felb::atomic_write_file(out_dir / "history.csv", csv.str());
    felb::write_matrix_market(out_dir / "vhat.mtx", rounded_v_hat);
    for (std::size_t c = 0; c < rounded_u.size(); ++c)
      felb::write_matrix_market(out_dir / ("u_" + std::to_string(c) + ".mtx"), rounded_u[c]);
    if (cfg.write_factors && real_v_hat.size() > 0) {
      felb::write_factor_file(out_dir / "vhat.bin", real_v_hat);
      for (std::size_t c = 0; c < real_u.size(); ++c)
        felb::write_factor_file(out_dir / ("u_" + std::to_string(c) + ".bin"), real_u[c]);
    }
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }

  trial_json["seed"] = run_seed;
  trial_json["rounds"] = rounds.size();
  trial_json["truncated"] = truncated;
  trial_json["seconds"] = seconds;
  trial_json["final"] = rounds.empty() ? json(nullptr) : round_to_json(rounds.back());
  return kExitOk;
}

int cmd_run(const RunOverrides& args) {
  felb::ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    std::ifstream is(args.config_path, std::ios::binary);
    if (!is) {
      std::cerr << "config error: cannot read " << args.config_path << '\n';
      return kExitConfig;
    }
    std::ostringstream buffer;
    buffer << is.rdbuf();
    const felb::ConfigParseResult parsed = felb::parse_config(buffer.str());
    if (!parsed.ok()) {
      for (const std::string& e : parsed.errors)
        std::cerr << "config error: " << args.config_path << ": " << e << '\n';
      return kExitConfig;
    }
    cfg = parsed.config;
  }
  if (args.seed) cfg.seed = *args.seed;
  if (args.method) cfg.method = *args.method;
  if (args.agg) cfg.aggregator = *args.agg;
  if (args.clients) cfg.clients = *args.clients;
  if (args.sync_interval) cfg.sync_interval = *args.sync_interval;
  if (args.privacy) cfg.mechanism = *args.privacy;
  if (args.epsilon) cfg.epsilon = *args.epsilon;
  if (args.delta) cfg.delta = *args.delta;
  if (args.theta) cfg.theta = *args.theta;

  const std::vector<std::string> violations = felb::validate_config(cfg);
  if (!violations.empty()) {
    for (const std::string& v : violations) std::cerr << "config error: " << v << '\n';
    return kExitConfig;
  }

  const std::filesystem::path out(args.out_dir);
  json summary;
  summary["config"] = config_to_json(cfg);
  summary["seed"] = cfg.seed;
  json trials = json::array();
  for (std::size_t j = 0; j < cfg.trials; ++j) {
    const std::uint64_t run_seed = j == 0 ? cfg.seed : felb::rng::derive(cfg.seed, 10, j);
    const std::filesystem::path trial_dir =
        cfg.trials > 1 ? out / ("trial_" + std::to_string(j)) : out;
    json trial_json;
    const int rc = run_one_trial(cfg, run_seed, trial_dir, trial_json);
    if (rc != kExitOk) return rc;
    trials.push_back(std::move(trial_json));
  }
  summary["trials"] = trials;

  // Mean of the final-round metrics across trials.
  json mean_final;
  const char* keys[] = {"mean_local_loss", "global_rmsd", "f1", "integrality_gap_vhat"};
  for (const char* key : keys) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const json& t : trials)
      if (t["final"].is_object()) {
        sum += t["final"][key].get<double>();
        ++n;
      }
    if (n > 0) mean_final[key] = sum / static_cast<double>(n);
  }
  {
    double sum = 0.0;
    std::size_t n = 0;
    for (const json& t : trials)
      if (t["final"].is_object() && t["final"]["f1_star"].is_number()) {
        sum += t["final"]["f1_star"].get<double>();
        ++n;
      }
    if (n > 0) mean_final["f1_star"] = sum / static_cast<double>(n);
  }
  summary["mean_final"] = mean_final;

  try {
    std::filesystem::create_directories(out);
    felb::atomic_write_file(out / "summary.json", summary.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string ref_path;
  std::string pred_path;
  std::string u_path;
  std::string v_path;
  std::string mask_path;
};

int cmd_evaluate(const EvaluateArgs& args) {
  const bool have_pred = !args.pred_path.empty();
  const bool have_factors = !args.u_path.empty() || !args.v_path.empty();
  if (have_pred == have_factors || (have_factors && (args.u_path.empty() || args.v_path.empty()))) {
    std::cerr << "config error: provide either --pred FILE or both --u FILE and --v FILE\n";
    return kExitConfig;
  }
  try {
    const felb::BinaryMatrix ref = felb::read_matrix_market_file(args.ref_path);
    std::optional<felb::BinaryMatrix> mask;
    if (!args.mask_path.empty()) mask = felb::read_matrix_market_file(args.mask_path);

    felb::BinaryMatrix pred;
    std::optional<double> gap_u, gap_v;
    if (have_pred) {
      pred = felb::read_matrix_market_file(args.pred_path);
    } else {
      const felb::FactorMatrix u = felb::read_factor_file(args.u_path);
      const felb::FactorMatrix v = felb::read_factor_file(args.v_path);
      gap_u = felb::integrality_gap(u);
      gap_v = felb::integrality_gap(v);
      const auto [ub, vb] = felb::round_factors(u, v);
      pred = felb::boolean_product(ub, vb);
    }

    if (pred.rows() != ref.rows() || pred.cols() != ref.cols())
      throw felb::io_error("reconstruction shape " + std::to_string(pred.rows()) + "x" +
                           std::to_string(pred.cols()) + " does not match reference " +
                           std::to_string(ref.rows()) + "x" + std::to_string(ref.cols()) + " (" +
                           args.ref_path + ")");
    if (mask && (mask->rows() != ref.rows() || mask->cols() != ref.cols()))
      throw felb::io_error("mask shape does not match reference (" + args.mask_path + ")");

    std::string header = "rmsd,f1";
    std::string row = felb::format_metric(felb::rmsd(ref, pred)) + "," +
                      felb::format_metric(felb::f1(ref, pred));
    if (mask) {
      header += ",f1_star";
      row += "," + felb::format_metric(felb::f1_star(*mask, pred));
    }
    if (gap_u) {
      header += ",integrality_gap_u,integrality_gap_v";
      row += "," + felb::format_metric(*gap_u) + "," + felb::format_metric(*gap_v);
    }
    std::cout << header << '\n' << row << '\n';
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated Boolean matrix factorization toolkit"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "Sample planted-tile Boolean data");
  generate->add_option("--out", gen.out_dir, "Output directory")->required();
  generate->add_option("--seed", gen.seed, "Generation seed");
  generate->add_option("--rows", gen.rows, "Matrix rows");
  generate->add_option("--cols", gen.cols, "Matrix columns");
  generate->add_option("--tiles", gen.tiles, "Number of planted tiles");
  generate->add_option("--tile-rows", gen.tile_rows, "Tile height (0 = rows / (2 * tiles))");
  generate->add_option("--tile-cols", gen.tile_cols, "Tile width (0 = cols / (2 * tiles))");
  generate->add_option("--density", gen.density, "Bernoulli density inside tiles");
  generate->add_option("--background", gen.background, "Bernoulli density outside tiles");
  generate->add_option("--noise", gen.noise, "XOR flip probability in [0, 0.5]");

  RunOverrides run;
  CLI::App* runc = app.add_subcommand("run", "Run a factorization experiment");
  runc->add_option("--config", run.config_path, "Config file (key = value)");
  runc->add_option("--out", run.out_dir, "Output directory");
  runc->add_option("--seed", run.seed, "Override run seed");
  runc->add_option("--method", run.method, "felb | felb-mu | agg-baseline");
  runc->add_option("--agg", run.agg, "Baseline aggregator: avg | vote | or");
  runc->add_option("--clients", run.clients, "Number of clients");
  runc->add_option("--sync-interval", run.sync_interval, "Local rounds between aggregations");
  runc->add_option("--privacy", run.privacy, "none | gauss | laplace | bernoulli");
  runc->add_option("--epsilon", run.epsilon, "Privacy budget epsilon");
  runc->add_option("--delta", run.delta, "Gaussian mechanism delta");
  runc->add_option("--theta", run.theta, "Frobenius clipping bound");

  EvaluateArgs eval;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score a reconstruction");
  evaluate->add_option("--ref", eval.ref_path, "Reference data (MatrixMarket)")->required();
  evaluate->add_option("--pred", eval.pred_path, "Boolean reconstruction (MatrixMarket)");
  evaluate->add_option("--u", eval.u_path, "Row factor dump (binary)");
  evaluate->add_option("--v", eval.v_path, "Column factor dump (binary)");
  evaluate->add_option("--mask", eval.mask_path, "Clean structure mask for F1*");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (generate->parsed()) return cmd_generate(gen);
  if (runc->parsed()) return cmd_run(run);
  if (evaluate->parsed()) return cmd_evaluate(eval);
  return kExitConfig;
}
