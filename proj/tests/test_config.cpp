#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "felb/config.hpp"
#include "felb/matrix.hpp"
#include "felb/metrics.hpp"

using felb::BinaryMatrix;
using felb::ExperimentConfig;
using felb::FactorMatrix;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<std::string> violations(const std::function<void(ExperimentConfig&)>& tweak) {
  ExperimentConfig c;
  tweak(c);
  return felb::validate_config(c);
}

std::string joined(const std::vector<std::string>& messages) {
  std::string all;
  for (const std::string& m : messages) all += m + '\n';
  return all;
}

}  // namespace

TEST_CASE("default config is runnable as-is") {
  const ExperimentConfig c;
  REQUIRE(c.method == "felb");
  REQUIRE(c.source == "generate");
  REQUIRE(c.trials == 1);
  REQUIRE(c.rank == 5);
  REQUIRE(c.clients == 10);
  REQUIRE(c.sync_interval == 10);
  REQUIRE(c.max_iterations == 100);
  REQUIRE(c.kappa == 0.001);
  REQUIRE(c.lambda == 0.1);
  REQUIRE(c.growth == 1.05);
  REQUIRE(c.gamma == 0.1);
  REQUIRE(c.mechanism == "none");
  REQUIRE(c.aggregator == "vote");
  REQUIRE(c.deterministic_timing);
  REQUIRE(felb::validate_config(c).empty());
}

TEST_CASE("serialize and parse round-trip exactly") {
  ExperimentConfig c;
  c.method = "felb-mu";
  c.seed = 987654321;
  c.trials = 3;
  c.threads = 2;
  c.time_budget_seconds = 0.25;
  c.deterministic_timing = false;
  c.write_factors = false;
  c.source = "files";
  c.data_path = "runs/data.mtx";
  c.mask_path = "runs/mask.mtx";
  c.rows = 123;
  c.cols = 45;
  c.tiles = 2;
  c.tile_rows = 7;
  c.tile_cols = 9;
  c.tile_density = 1.0 / 3.0;  // not exactly representable in short decimal
  c.background_density = 0.05;
  c.xor_noise = 0.3;
  c.rank = 4;
  c.clients = 6;
  c.sync_interval = 5;
  c.max_iterations = 250;
  c.kappa = 0.015625;
  c.lambda = 2.5;
  c.growth = 1.0;
  c.gamma = 0.0;
  c.beta = 0.125;
  c.mu_epsilon = 1e-10;
  c.weighted_mean = true;
  c.mechanism = "bernoulli";
  c.epsilon = 0.7;
  c.delta = 0.01;
  c.theta = 2.0;
  c.sensitivity = 3.0;
  c.clipped = true;
  c.aggregator = "or";

  const felb::ConfigParseResult reparsed = felb::parse_config(felb::serialize_config(c));
  REQUIRE(reparsed.ok());
  REQUIRE(reparsed.config == c);

  const felb::ConfigParseResult defaults = felb::parse_config(felb::serialize_config({}));
  REQUIRE(defaults.ok());
  REQUIRE(defaults.config == ExperimentConfig{});
}

TEST_CASE("parser skips comments and accepts keys under any section") {
  const std::string text =
      "# pound comment\n"
      "; semicolon comment\n"
      "\n"
      "  [whatever]  \n"
      "  rank =  7 \n"
      "deterministic_timing = off\n"
      "weighted_mean = yes\n"
      "lambda = -0.5\n";
  const felb::ConfigParseResult result = felb::parse_config(text);
  REQUIRE(result.ok());
  REQUIRE(result.config.rank == 7);
  REQUIRE_FALSE(result.config.deterministic_timing);
  REQUIRE(result.config.weighted_mean);
  REQUIRE(result.config.lambda == -0.5);  // syntax ok; validate rejects it later
}

TEST_CASE("parser reports every problem with its line number") {
  const std::string text =
      "# header\n"              // 1
      "\n"                      // 2
      "[run]\n"                 // 3
      "method = felb-mu\n"      // 4
      "seed = 11\n"             // 5
      "bogus = 3\n"             // 6
      "rank = abc\n"            // 7
      "[data\n"                 // 8
      "just-noise\n"            // 9
      "clients = 4\n";          // 10
  const felb::ConfigParseResult result = felb::parse_config(text);
  REQUIRE(result.errors.size() == 4);
  REQUIRE(result.errors[0] == "line 6: unknown key 'bogus'");
  REQUIRE(result.errors[1] == "line 7: invalid value 'abc' for key 'rank'");
  REQUIRE(result.errors[2] == "line 8: unterminated section header");
  REQUIRE(result.errors[3] == "line 9: expected key = value");
  // Well-formed lines still take effect.
  REQUIRE(result.config.method == "felb-mu");
  REQUIRE(result.config.seed == 11);
  REQUIRE(result.config.clients == 4);
  REQUIRE(result.config.rank == 5);  // bad value leaves the default

  REQUIRE_THAT(joined(felb::parse_config("trials = -1\n").errors),
               ContainsSubstring("invalid value '-1'"));
  REQUIRE_THAT(joined(felb::parse_config("rank =\n").errors),
               ContainsSubstring("invalid value ''"));
}

TEST_CASE("validation flags each semantic violation") {
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.method = "svd"; })),
               ContainsSubstring("method must be one of"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.trials = 0; })),
               ContainsSubstring("trials"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.time_budget_seconds = -1; })),
               ContainsSubstring("time_budget_seconds"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.source = "stream"; })),
               ContainsSubstring("source must be"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.source = "files"; })),
               ContainsSubstring("requires a data path"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.rows = 0; })),
               ContainsSubstring("rows >= 1"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.tile_density = 1.5; })),
               ContainsSubstring("tile_density"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.background_density = -0.1; })),
               ContainsSubstring("background_density"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.xor_noise = 0.6; })),
               ContainsSubstring("xor_noise"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.rows = 5; })),
               ContainsSubstring("rows >= clients"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.rank = 0; })),
               ContainsSubstring("rank"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.clients = 0; })),
               ContainsSubstring("clients"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.sync_interval = 0; })),
               ContainsSubstring("sync_interval"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.kappa = -1; })),
               ContainsSubstring("kappa"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.lambda = -1; })),
               ContainsSubstring("lambda"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.growth = 0.99; })),
               ContainsSubstring("growth"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.gamma = -0.1; })),
               ContainsSubstring("gamma"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.beta = 1.0; })),
               ContainsSubstring("beta"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.mu_epsilon = 0.0; })),
               ContainsSubstring("mu_epsilon"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.mu_epsilon = 1e-7; })),
               ContainsSubstring("mu_epsilon"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) { c.mechanism = "subsample"; })),
               ContainsSubstring("mechanism must be"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) {
                 c.mechanism = "gauss";
                 c.epsilon = 0.0;
               })),
               ContainsSubstring("epsilon"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) {
                 c.mechanism = "laplace";
                 c.sensitivity = 0.0;
               })),
               ContainsSubstring("sensitivity"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) {
                 c.mechanism = "gauss";
                 c.delta = 1.0;
               })),
               ContainsSubstring("delta"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) {
                 c.mechanism = "gauss";
                 c.clipped = true;
                 c.theta = 1.0;
               })),
               ContainsSubstring("theta"));
  REQUIRE_THAT(joined(violations([](ExperimentConfig& c) {
                 c.method = "agg-baseline";
                 c.aggregator = "median";
               })),
               ContainsSubstring("aggregator"));

  // Three violations at once are all reported.
  REQUIRE(violations([](ExperimentConfig& c) {
            c.rank = 0;
            c.growth = 0.5;
            c.beta = -0.1;
          }).size() == 3);
}

TEST_CASE("validation ignores settings that do not apply") {
  // Underscore alias for the multiplicative method.
  REQUIRE(violations([](ExperimentConfig& c) { c.method = "felb_mu"; }).empty());
  // Density knobs are irrelevant when data comes from files.
  REQUIRE(violations([](ExperimentConfig& c) {
            c.source = "files";
            c.data_path = "a.mtx";
            c.tile_density = 5.0;
            c.rows = 1;
          }).empty());
  // Privacy knobs are irrelevant without a mechanism.
  REQUIRE(violations([](ExperimentConfig& c) { c.epsilon = -1.0; }).empty());
  // Laplace needs no delta; theta is unchecked until clipping is on.
  REQUIRE(violations([](ExperimentConfig& c) {
            c.mechanism = "laplace";
            c.delta = 2.0;
            c.theta = 0.5;
          }).empty());
  // The aggregator only matters for the aggregation baseline.
  REQUIRE(violations([](ExperimentConfig& c) { c.aggregator = "median"; }).empty());
}

TEST_CASE("method and mechanism names map to the right variants") {
  ExperimentConfig c;
  REQUIRE(felb::step_variant_of(c) == felb::StepVariant::kLipschitz);
  c.method = "felb-mu";
  REQUIRE(felb::step_variant_of(c) == felb::StepVariant::kMultiplicativeUpdate);
  c.method = "felb_mu";
  REQUIRE(felb::step_variant_of(c) == felb::StepVariant::kMultiplicativeUpdate);
  c.method = "agg-baseline";
  REQUIRE(felb::step_variant_of(c) == felb::StepVariant::kLipschitz);

  REQUIRE(felb::mechanism_of(c) == felb::NoiseMechanism::kNone);
  c.mechanism = "gauss";
  REQUIRE(felb::mechanism_of(c) == felb::NoiseMechanism::kGaussian);
  c.mechanism = "laplace";
  REQUIRE(felb::mechanism_of(c) == felb::NoiseMechanism::kLaplace);
  c.mechanism = "bernoulli";
  REQUIRE(felb::mechanism_of(c) == felb::NoiseMechanism::kBernoulliXor);
}

TEST_CASE("experiment config maps onto the simulator config") {
  ExperimentConfig c;
  c.method = "felb-mu";
  c.seed = 5;  // replaced by the per-trial run seed below
  c.clients = 7;
  c.rank = 3;
  c.sync_interval = 4;
  c.max_iterations = 42;
  c.kappa = 0.2;
  c.lambda = 0.3;
  c.growth = 1.1;
  c.gamma = 0.05;
  c.beta = 0.25;
  c.mu_epsilon = 1e-9;
  c.weighted_mean = true;
  c.mechanism = "gauss";
  c.epsilon = 0.8;
  c.delta = 0.02;
  c.theta = 1.75;
  c.sensitivity = 2.0;
  c.clipped = true;
  c.time_budget_seconds = 9.5;
  c.threads = 3;

  const felb::FederationConfig f = felb::to_federation_config(c, 777);
  REQUIRE(f.clients == 7);
  REQUIRE(f.rank == 3);
  REQUIRE(f.sync_interval == 4);
  REQUIRE(f.max_iterations == 42);
  REQUIRE(f.reg.kappa == 0.2);
  REQUIRE(f.reg.lambda == 0.3);
  REQUIRE(f.reg.growth == 1.1);
  REQUIRE(f.prox.gamma == 0.05);
  REQUIRE(f.rule.variant == felb::StepVariant::kMultiplicativeUpdate);
  REQUIRE(f.rule.inertia_beta == 0.25);
  REQUIRE(f.rule.mu_epsilon == 1e-9);
  REQUIRE(f.privacy.mechanism == felb::NoiseMechanism::kGaussian);
  REQUIRE(f.privacy.epsilon == 0.8);
  REQUIRE(f.privacy.delta == 0.02);
  REQUIRE(f.privacy.theta == 1.75);
  REQUIRE(f.privacy.sensitivity == 2.0);
  REQUIRE(f.privacy.clipped);
  REQUIRE(f.global_seed == 777);
  REQUIRE(f.weighted_mean);
  REQUIRE(f.time_budget_seconds == 9.5);
  REQUIRE(f.threads == 3);

  ExperimentConfig g;
  g.rows = 64;
  g.cols = 32;
  g.tiles = 3;
  g.tile_rows = 10;
  g.tile_cols = 4;
  g.tile_density = 0.8;
  g.background_density = 0.02;
  const felb::PlantedSpec spec = felb::to_planted_spec(g, 321);
  REQUIRE(spec.rows == 64);
  REQUIRE(spec.cols == 32);
  REQUIRE(spec.tiles == 3);
  REQUIRE(spec.tile_rows == 10);
  REQUIRE(spec.tile_cols == 4);
  REQUIRE(spec.tile_density == 0.8);
  REQUIRE(spec.background_density == 0.02);
  REQUIRE(spec.seed == 321);
}

TEST_CASE("reals serialize to the shortest exact decimal") {
  REQUIRE(felb::detail::format_real_exact(0.5) == "0.5");
  REQUIRE(felb::detail::format_real_exact(1.0) == "1");
  REQUIRE(felb::detail::format_real_exact(0.1) == "0.1");
  REQUIRE(felb::detail::format_real_exact(1e-12) == "1e-12");
  for (double v : {0.0, 0.5, 0.1, 1.0 / 3.0, 1.05, 1e-12, 0.30000000000000004, 1e300, -2.5}) {
    const std::string text = felb::detail::format_real_exact(v);
    REQUIRE(std::strtod(text.c_str(), nullptr) == v);
  }
}

TEST_CASE("rmsd counts normalized Hamming disagreement") {
  const BinaryMatrix eye = BinaryMatrix::from_dense(2, 2, {1, 0, 0, 1});
  REQUIRE(felb::rmsd(eye, eye) == 0.0);
  REQUIRE_THAT(felb::rmsd(eye, BinaryMatrix(2, 2)), WithinAbs(std::sqrt(0.5), 1e-15));
  const BinaryMatrix flipped = BinaryMatrix::from_dense(2, 2, {0, 1, 1, 0});
  REQUIRE(felb::rmsd(eye, flipped) == 1.0);
  REQUIRE_THROWS_AS(felb::rmsd(BinaryMatrix(0, 4), BinaryMatrix(0, 4)), std::invalid_argument);

  // rmsd^2 * cells == hamming on arbitrary input.
  const BinaryMatrix a = BinaryMatrix::from_dense(3, 4, {1, 0, 1, 0, 0, 1, 1, 0, 1, 1, 0, 0});
  const BinaryMatrix b = BinaryMatrix::from_dense(3, 4, {1, 1, 0, 0, 0, 1, 0, 0, 1, 0, 0, 1});
  const double r = felb::rmsd(a, b);
  REQUIRE_THAT(r * r * 12.0, WithinAbs(static_cast<double>(felb::hamming_distance(a, b)), 1e-12));
}

TEST_CASE("f1 and f1_star score overlap of 1-cells") {
  const BinaryMatrix truth = BinaryMatrix::from_dense(2, 2, {1, 1, 0, 0});
  const BinaryMatrix pred = BinaryMatrix::from_dense(2, 2, {1, 0, 1, 0});
  REQUIRE(felb::f1(truth, pred) == 0.5);  // tp=1 fp=1 fn=1
  REQUIRE(felb::f1(truth, truth) == 1.0);
  REQUIRE(felb::f1(truth, BinaryMatrix(2, 2)) == 0.0);
  REQUIRE(felb::f1(BinaryMatrix(2, 2), BinaryMatrix(2, 2)) == 1.0);  // nothing to find
  REQUIRE(felb::f1(truth, pred) == felb::f1(pred, truth));

  // Recovering half of the clean tile with no false alarms scores 2/3.
  const BinaryMatrix mask = BinaryMatrix::from_dense(1, 4, {1, 1, 0, 0});
  const BinaryMatrix half = BinaryMatrix::from_dense(1, 4, {1, 0, 0, 0});
  REQUIRE_THAT(felb::f1_star(mask, half), WithinAbs(2.0 / 3.0, 1e-15));
  const BinaryMatrix complement = BinaryMatrix::from_dense(1, 4, {0, 0, 1, 1});
  REQUIRE(felb::f1_star(mask, complement) == 0.0);
}

TEST_CASE("integrality gap measures distance to Boolean entries") {
  REQUIRE(felb::integrality_gap(FactorMatrix::from_values(2, 2, {0, 1, 1, 0})) == 0.0);
  REQUIRE(felb::integrality_gap(FactorMatrix(3, 3, 0.5)) == 0.5);
  REQUIRE_THAT(felb::integrality_gap(FactorMatrix::from_values(1, 2, {0.25, 0.75})),
               WithinAbs(0.25, 1e-15));
  REQUIRE_THROWS_AS(felb::integrality_gap(FactorMatrix()), std::invalid_argument);
  REQUIRE_THROWS_AS(felb::integrality_gap(FactorMatrix::from_values(1, 1, {NAN})),
                    std::invalid_argument);
}

TEST_CASE("history CSV layout and deterministic timing") {
  REQUIRE(std::string(felb::history_csv_header()) ==
          "round,mean_local_loss,global_rmsd,f1,f1_star,integrality_gap_vhat,elapsed_seconds");
  REQUIRE(felb::format_metric(0.5) == "0.5");
  REQUIRE(felb::format_metric(0.0) == "0");
  REQUIRE(felb::format_metric(1.0 / 3.0) == "0.333333333");

  felb::RoundLog first;
  first.round = 1;
  first.mean_local_loss = 0.25;
  first.global_rmsd = 0.5;
  first.f1 = 1.0;
  first.f1_star = 0.75;
  first.integrality_gap_vhat = 0.125;
  first.elapsed_seconds = 3.5;
  felb::RoundLog second;
  second.round = 2;
  second.global_rmsd = 1.0;
  second.integrality_gap_vhat = 0.5;
  second.elapsed_seconds = 2.5;  // second has no f1_star (no clean mask)

  std::ostringstream det;
  felb::write_history_csv(det, {first, second}, true);
  REQUIRE(det.str() ==
          std::string(felb::history_csv_header()) +
              "\n1,0.25,0.5,1,0.75,0.125,0\n2,0,1,0,,0.5,0\n");

  std::ostringstream wall;
  felb::write_history_csv(wall, {first, second}, false);
  REQUIRE_THAT(wall.str(), ContainsSubstring(",3.5\n") && ContainsSubstring(",2.5\n"));
}
