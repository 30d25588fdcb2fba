#include <doctest.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "invgp/errors.hpp"
#include "invgp/harness.hpp"
#include "invgp/operators.hpp"
#include "test_support.hpp"

using namespace invgp;

namespace {

ExperimentConfig small_config(OperatorKind op) {
  ExperimentConfig cfg;
  cfg.op = op;
  cfg.n = 60;
  cfg.m_list = {2, 5};
  cfg.replicates = 2;
  cfg.seed = 11;
  cfg.grid_size = 40;
  cfg.threads = 1;
  return cfg;
}

std::string results_csv(const RunRecord& rec) {
  std::ostringstream out;
  write_results_csv(rec, out);
  return out.str();
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("heat truth recipe at j = 1") {
  const SobolevTruth t = make_truth(TruthRecipe::Heat, 1.0, 40);
  const double c1 = 1.0 + 0.4 * std::sin(std::sqrt(5.0) * std::numbers::pi);
  CHECK(t.series.coeffs()(0) == doctest::Approx(c1));
  CHECK(t.series.coeffs()(1) ==
        doctest::Approx((2.5 + 2.0 * std::sin(2.0 * std::sqrt(2.0) * std::numbers::pi)) / 4.0));
  CHECK(t.tail_mass > 0.0);
  // Brute-force tail check: sum_{j > 40} c_j^2 j^{-4}.
  double brute = 0.0;
  for (Index j = 41; j <= 400000; ++j) {
    const double c = recipe_weight(TruthRecipe::Heat, j);
    brute += c * c * std::pow(static_cast<double>(j), -4.0);
  }
  CHECK(t.tail_mass == doctest::Approx(brute).epsilon(1e-3));
}

TEST_CASE("user truth coefficients are padded or cut") {
  const SobolevTruth padded = make_truth(std::vector<double>{1.0, 2.0}, 1.0, 4);
  CHECK(padded.series.coeffs().size() == 4);
  CHECK(padded.series.coeffs()(3) == 0.0);
  CHECK(padded.tail_mass == 0.0);
  const SobolevTruth cut = make_truth(std::vector<double>{1.0, 2.0, 3.0}, 1.0, 2);
  CHECK(cut.tail_mass == 9.0);
}

TEST_CASE("noiseless data equals the forward map") {
  const auto op = volterra();
  const SobolevTruth t = make_truth(TruthRecipe::Volterra, 1.0, 30);
  const Dataset d = generate_data(*op, t, 50, 0.0, 4);
  CHECK(testing::sup_diff(d.y, forward_values(*op, t, d.x)) == 0.0);
  CHECK_THROWS_AS(generate_data(*op, t, 50, -1.0, 4), ParameterError);
}

TEST_CASE("noise has the requested variance and is seed-deterministic") {
  const auto op = heat(0.01);
  const SobolevTruth t = make_truth(TruthRecipe::Heat, 1.0, 20);
  const Index n = 10000;
  const Dataset d = generate_data(*op, t, n, 0.25, 9);
  const Eigen::VectorXd resid = d.y - forward_values(*op, t, d.x);
  const double var = resid.squaredNorm() / static_cast<double>(n);
  CHECK(std::abs(var - 0.25) < 0.05 * 0.25);
  CHECK(std::abs(resid.mean()) < 4.0 * 0.5 / std::sqrt(static_cast<double>(n)));
  const Dataset again = generate_data(*op, t, n, 0.25, 9);
  CHECK(again.y == d.y);
  CHECK(again.x == d.x);
  CHECK(generate_data(*op, t, n, 0.25, 10).y != d.y);
}

TEST_CASE("config validation and name parsing") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto rejects = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  rejects([](ExperimentConfig& c) { c.n = 0; });
  rejects([](ExperimentConfig& c) { c.replicates = 0; });
  rejects([](ExperimentConfig& c) { c.m_list = {}; });
  rejects([](ExperimentConfig& c) { c.m_list = {3, 0}; });
  rejects([](ExperimentConfig& c) { c.beta = 0.0; });
  rejects([](ExperimentConfig& c) { c.T = -0.1; });
  rejects([](ExperimentConfig& c) { c.sigma2 = 0.0; });
  rejects([](ExperimentConfig& c) { c.level = 1.0; });
  rejects([](ExperimentConfig& c) { c.xi = 0.0; });
  rejects([](ExperimentConfig& c) {
    c.op = OperatorKind::Volterra;
    c.alpha = 0.0;
  });
  rejects([](ExperimentConfig& c) { c.truth = TruthRecipe::Radon; });

  CHECK(parse_operator("radon") == OperatorKind::Radon);
  CHECK(parse_scheme("both") == SchemeChoice::Both);
  CHECK(parse_prior_family("exponential") == PriorFamily::Exponential);
  CHECK(parse_truth("volterra") == TruthRecipe::Volterra);
  CHECK_THROWS_AS(parse_operator("laplace"), ConfigError);
  CHECK_THROWS_AS(parse_scheme("mixed"), ConfigError);
  CHECK(to_string(OperatorKind::Heat) == "heat");
  CHECK(to_string(SchemeKind::EmpiricalSpectral) == "empirical");
}

TEST_CASE("prior defaults follow the operator") {
  ExperimentConfig cfg;
  cfg.op = OperatorKind::Heat;
  const auto e = std::get<ExponentialDecay>(cfg.decay_family());
  CHECK(e.alpha == 0.0);
  CHECK(e.xi == 0.1);
  CHECK(e.p == 2.0);
  cfg.op = OperatorKind::Volterra;
  cfg.beta = 0.7;
  CHECK(std::get<PolynomialDecay>(cfg.decay_family()).alpha == 0.7);
  cfg.alpha = 1.3;
  CHECK(std::get<PolynomialDecay>(cfg.decay_family()).alpha == 1.3);
}

TEST_CASE("auto truncation has a floor") {
  ExperimentConfig cfg;
  cfg.op = OperatorKind::Heat;
  CHECK(resolve_truncation(cfg, *make_operator(cfg)) == kMinAutoTruncation);
  cfg.truncation = 17;
  CHECK(resolve_truncation(cfg, *make_operator(cfg)) == 17);
}

TEST_CASE("evaluation grids lie in the parameter domain") {
  for (const auto& op : {volterra(), radon()}) {
    const auto grid = evaluation_grid(*op, 50);
    CHECK(grid.size() == 50);
    for (const Point& p : grid) CHECK(op->parameter_domain().contains(p));
  }
}

TEST_CASE("parallel_for visits every index and rethrows") {
  std::vector<int> hits(37, 0);
  parallel_for(37, 3, [&](Index i) { hits[static_cast<std::size_t>(i)] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(5, 2,
                               [](Index i) {
                                 if (i == 3) throw NumericalError("boom");
                               }),
                  NumericalError);
}

TEST_CASE("results do not depend on the number of threads") {
  ExperimentConfig cfg = small_config(OperatorKind::Volterra);
  cfg.scheme = SchemeChoice::Both;
  cfg.replicates = 3;
  const std::string one = results_csv(run_experiment(cfg));
  cfg.threads = 3;
  const std::string three = results_csv(run_experiment(cfg));
  CHECK(one == three);
  cfg.seed = 12;
  CHECK(results_csv(run_experiment(cfg)) != one);
}

TEST_CASE("run_experiment layout and fit_replicate agreement") {
  ExperimentConfig cfg = small_config(OperatorKind::Heat);
  cfg.scheme = SchemeChoice::Both;
  const RunRecord rec = run_experiment(cfg);
  // Per replicate: exact, population m = 2, 5, empirical m = 2, 5.
  REQUIRE(rec.cells.size() == 10);
  CHECK(rec.truncation == 40);
  CHECK(rec.cells[0].scheme == "exact");
  CHECK(rec.cells[1].scheme == "population");
  CHECK(rec.cells[3].scheme == "empirical");
  CHECK(rec.cells[5].replicate == 1);
  for (const CellResult& c : rec.cells) {
    CHECK(c.status == "ok");
    CHECK(c.mise.mise > 0.0);
    CHECK(c.coverage >= 0.0);
    CHECK(c.coverage <= 1.0);
    if (c.scheme != "exact") CHECK(c.kl > -1e-8);
  }
  const std::vector<CellResult> r1 = fit_replicate(cfg, 1);
  REQUIRE(r1.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(r1[k].mise.mise == rec.cells[5 + k].mise.mise);
    CHECK(r1[k].seed == rec.cells[5 + k].seed);
  }
}

TEST_CASE("m beyond its limit is clamped with a warning") {
  ExperimentConfig cfg = small_config(OperatorKind::Volterra);
  cfg.replicates = 1;
  cfg.truncation = 10;
  cfg.m_list = {4, 12, 15};
  const RunRecord rec = run_experiment(cfg);
  // exact + population m = 4, 10 (12 and 15 both clamp to J = 10).
  REQUIRE(rec.cells.size() == 3);
  CHECK(rec.cells[2].m == 10);
  CHECK(rec.warnings.size() == 2);
}

TEST_CASE("full-rank empirical scheme matches the exact posterior") {
  ExperimentConfig cfg = small_config(OperatorKind::Volterra);
  cfg.replicates = 1;
  cfg.n = 40;
  cfg.m_list = {40};
  cfg.scheme = SchemeChoice::Empirical;
  const RunRecord rec = run_experiment(cfg);
  REQUIRE(rec.cells.size() == 2);
  CHECK(std::abs(rec.cells[1].mise.mise - rec.cells[0].mise.mise) <
        1e-6 * rec.cells[0].mise.mise);
  CHECK(std::abs(rec.cells[1].kl) < 1e-6);
}

TEST_CASE("exact off leaves KL undefined") {
  ExperimentConfig cfg = small_config(OperatorKind::Radon);
  cfg.replicates = 1;
  cfg.exact = false;
  const RunRecord rec = run_experiment(cfg);
  REQUIRE(rec.cells.size() == 2);
  for (const CellResult& c : rec.cells) {
    CHECK(c.scheme == "population");
    CHECK(std::isnan(c.kl));
  }
  CHECK(results_csv(rec).find(",nan,") != std::string::npos);
}

TEST_CASE("manifest records the configuration") {
  ExperimentConfig cfg = small_config(OperatorKind::Heat);
  cfg.replicates = 1;
  const RunRecord rec = run_experiment(cfg);
  std::ostringstream out;
  write_manifest(rec, out);
  const nlohmann::json j = nlohmann::json::parse(out.str());
  CHECK(j["version"] == kLibraryVersion);
  CHECK(j["config"]["operator"] == "heat");
  CHECK(j["config"]["prior"]["family"] == "exponential");
  CHECK(j["config"]["n"] == 60);
  CHECK(j["truncation_J"] == rec.truncation);
  CHECK(j["recommended_m"] == rec.recommended_m);
  CHECK(j["failed_cells"] == 0);
}

TEST_CASE("phase grid at m = J reproduces the exact MISE") {
  ExperimentConfig cfg = small_config(OperatorKind::Heat);
  cfg.truncation = 12;
  const auto grid = phase_grid(cfg, {50, 100}, {1, 12, 30});
  REQUIRE(grid.size() == 6);
  for (const PhaseCell& c : grid) {
    if (c.m >= 12) CHECK(std::abs(c.log_ratio) < 1e-6);
    if (c.m == 1) CHECK(c.log_ratio < 0.0);
    CHECK(c.threshold_m >= 1);
  }
  std::ostringstream out;
  write_phase_csv(grid, out);
  CHECK(out.str().rfind("n,m,mise_exact", 0) == 0);
  CHECK_THROWS_AS(phase_grid(cfg, {}, {1}), ConfigError);
}

TEST_CASE("band export covers exact and variational methods") {
  ExperimentConfig cfg = small_config(OperatorKind::Volterra);
  cfg.scheme = SchemeChoice::Both;
  const auto bands = band_export(cfg);
  REQUIRE(bands.size() == 5);
  CHECK(bands[0].method == "exact");
  for (const BandSeries& b : bands) {
    CHECK(b.band.grid.size() == 40);
    CHECK(b.truth.size() == 40);
    CHECK((b.band.upper - b.band.lower).minCoeff() >= 0.0);
  }
  std::ostringstream out;
  write_band_csv(bands, out);
  const std::string text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 5 * 40);
}

}  // TEST_SUITE
