// Command-line front end for the experiment harness.
//
// Every option may also be given in a key=value config file passed with
// --config; flags on the command line take precedence over file values.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "invgp/errors.hpp"
#include "invgp/harness.hpp"
#include "invgp/random.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct RawOptions {
  std::string op = "heat";
  std::vector<invgp::Index> n{2000};
  std::vector<invgp::Index> m{3, 6};
  double beta = 1.0;
  std::optional<double> alpha;
  std::optional<double> xi;
  std::optional<double> prior_p;
  double T = 0.01;
  std::string prior = "auto";
  std::string truth;
  invgp::Index reps = 1;
  std::uint64_t seed = 1;
  std::string scheme = "population";
  std::string exact = "on";
  double sigma2 = 1.0;
  invgp::Index grid = 200;
  double level = 0.95;
  invgp::Index truncation = 0;
  std::string severe = "xi+2c";
  unsigned threads = 0;
  std::string out = "results";
};

invgp::ExperimentConfig to_config(const RawOptions& o, bool allow_n_list) {
  invgp::ExperimentConfig cfg;
  cfg.op = invgp::parse_operator(o.op);
  cfg.T = o.T;
  cfg.prior = invgp::parse_prior_family(o.prior);
  cfg.alpha = o.alpha;
  if (o.xi) {
    cfg.xi = *o.xi;
    // Supplying xi without a family selects the exponential prior.
    if (cfg.prior == invgp::PriorFamily::Auto) cfg.prior = invgp::PriorFamily::Exponential;
  }
  cfg.prior_p = o.prior_p;
  cfg.beta = o.beta;
  if (!o.truth.empty()) cfg.truth = invgp::parse_truth(o.truth);
  if (o.n.empty()) throw invgp::ConfigError("--n needs a value");
  if (!allow_n_list && o.n.size() != 1) {
    throw invgp::ConfigError("--n takes a single value for this command");
  }
  cfg.n = o.n.front();
  cfg.m_list = o.m;
  cfg.replicates = o.reps;
  cfg.seed = o.seed;
  cfg.scheme = invgp::parse_scheme(o.scheme);
  if (o.exact != "on" && o.exact != "off") {
    throw invgp::ConfigError("--exact must be 'on' or 'off'");
  }
  cfg.exact = o.exact == "on";
  cfg.sigma2 = o.sigma2;
  cfg.grid_size = o.grid;
  cfg.level = o.level;
  cfg.truncation = o.truncation;
  if (o.severe == "xi+2c") {
    cfg.severe_constant = invgp::SevereConstant::XiPlusTwoC;
  } else if (o.severe == "xi+c") {
    cfg.severe_constant = invgp::SevereConstant::XiPlusC;
  } else {
    throw invgp::ConfigError("--severe-constant must be 'xi+2c' or 'xi+c'");
  }
  cfg.threads = o.threads;
  cfg.output_dir = o.out;
  cfg.validate();
  return cfg;
}

std::ofstream open_output(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream f(path);
  if (!f) throw invgp::ConfigError("cannot write " + path.string());
  std::cout << "writing " << path.string() << '\n';
  return f;
}

void print_cells(const std::vector<invgp::CellResult>& cells) {
  std::printf("%-10s %5s %14s %14s %14s %12s %9s %11s %10s\n", "scheme", "m", "mise",
              "sq_bias", "var_mass", "kl", "coverage", "band_width", "seconds");
  for (const auto& c : cells) {
    std::printf("%-10s %5ld %14.6e %14.6e %14.6e %12.4e %9.3f %11.4e %10.4f %s\n",
                c.scheme.c_str(), static_cast<long>(c.m), c.mise.mise, c.mise.sq_bias,
                c.mise.variance_mass, c.kl, c.coverage, c.band_width, c.seconds,
                c.status == "ok" ? "" : c.status.c_str());
  }
}

int cmd_simulate(const invgp::ExperimentConfig& cfg) {
  const auto op = invgp::make_operator(cfg);
  const invgp::Index J = invgp::resolve_truncation(cfg, *op);
  const auto truth = invgp::make_truth(cfg, J);
  const auto data =
      invgp::generate_data(*op, truth, cfg.n, cfg.sigma2, invgp::replicate_seed(cfg.seed, 0));
  const auto signal = invgp::forward_values(*op, truth, data.x);
  auto f = open_output(cfg.output_dir, "data.csv");
  invgp::write_dataset_csv(data, signal, f);
  std::cout << "simulated n=" << cfg.n << " points for " << invgp::to_string(cfg.op)
            << " (J=" << J << ")\n";
  return kExitOk;
}

int cmd_fit(const invgp::ExperimentConfig& cfg) {
  print_cells(invgp::fit_replicate(cfg, 0));
  return kExitOk;
}

int cmd_experiment(const invgp::ExperimentConfig& cfg) {
  const auto rec = invgp::run_experiment(cfg);
  for (const auto& w : rec.warnings) std::cerr << "warning: " << w << '\n';
  invgp::write_outputs(rec);

  // Median MISE per (scheme, m) as a console summary.
  std::map<std::pair<std::string, invgp::Index>, std::vector<double>> by_cell;
  std::size_t failed = 0;
  for (const auto& c : rec.cells) {
    if (c.status != "ok") {
      ++failed;
      continue;
    }
    by_cell[{c.scheme, c.m}].push_back(c.mise.mise);
  }
  std::cout << "J=" << rec.truncation << " recommended m=" << rec.recommended_m
            << " failed cells=" << failed << '\n';
  for (auto& [key, values] : by_cell) {
    std::nth_element(values.begin(), values.begin() + values.size() / 2, values.end());
    std::printf("%-10s m=%-5ld median MISE %.6e over %zu replicates\n", key.first.c_str(),
                static_cast<long>(key.second), values[values.size() / 2], values.size());
  }
  std::cout << "outputs in " << cfg.output_dir << '\n';
  return kExitOk;
}

int cmd_phase_grid(const invgp::ExperimentConfig& cfg, const std::vector<invgp::Index>& n_list) {
  const auto grid = invgp::phase_grid(cfg, n_list, cfg.m_list);
  auto f = open_output(cfg.output_dir, "phase_grid.csv");
  invgp::write_phase_csv(grid, f);
  invgp::write_phase_csv(grid, std::cout);
  return kExitOk;
}

int cmd_band(const invgp::ExperimentConfig& cfg) {
  const auto bands = invgp::band_export(cfg);
  auto f = open_output(cfg.output_dir, "bands.csv");
  invgp::write_band_csv(bands, f);
  for (const auto& b : bands) {
    std::printf("%-10s m=%-4ld mean band width %.6e\n", b.method.c_str(),
                static_cast<long>(b.m), b.band.mean_width());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact and variational Gaussian-process posteriors for linear inverse problems"};
  app.set_config("--config", "", "key=value configuration file; flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  RawOptions o;
  app.add_option("--operator", o.op, "volterra | heat | radon")->capture_default_str();
  app.add_option("--n", o.n, "sample size (phase-grid: comma-separated list)")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--m", o.m, "inducing counts, comma-separated")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--beta", o.beta, "truth smoothness")->capture_default_str();
  app.add_option("--alpha", o.alpha, "prior regularity (default: beta for polynomial, 0 for exponential)");
  app.add_option("--xi", o.xi, "exponential prior rate; implies --prior exponential");
  app.add_option("--prior-p", o.prior_p, "exponential prior power (default 2 for heat, else 1)");
  app.add_option("--prior", o.prior, "auto | polynomial | exponential")->capture_default_str();
  app.add_option("--T", o.T, "heat diffusion time")->capture_default_str();
  app.add_option("--truth", o.truth, "truth recipe (defaults to the operator's)");
  app.add_option("--reps", o.reps, "replicates")->capture_default_str();
  app.add_option("--seed", o.seed, "master seed")->capture_default_str();
  app.add_option("--scheme", o.scheme, "population | empirical | both")->capture_default_str();
  app.add_option("--exact", o.exact, "on | off")->capture_default_str();
  app.add_option("--sigma2", o.sigma2, "noise variance")->capture_default_str();
  app.add_option("--grid", o.grid, "evaluation grid size")->capture_default_str();
  app.add_option("--level", o.level, "credible level")->capture_default_str();
  app.add_option("--truncation", o.truncation, "series truncation J (0 = automatic)")
      ->capture_default_str();
  app.add_option("--severe-constant", o.severe, "xi+2c | xi+c")->capture_default_str();
  app.add_option("--threads", o.threads, "worker threads (0 = all cores)")->capture_default_str();
  app.add_option("--out", o.out, "output directory")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "generate one dataset");
  auto* fit = app.add_subcommand("fit", "fit one replicate and print MISE/KL");
  auto* experiment = app.add_subcommand("experiment", "replicated experiment with CSV output");
  auto* phase = app.add_subcommand("phase-grid", "log MISE ratios over (n, m)");
  auto* band = app.add_subcommand("band", "export credible bands");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const bool is_phase = phase->parsed();
    const invgp::ExperimentConfig cfg = to_config(o, is_phase);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (fit->parsed()) return cmd_fit(cfg);
    if (experiment->parsed()) return cmd_experiment(cfg);
    if (is_phase) return cmd_phase_grid(cfg, o.n);
    if (band->parsed()) return cmd_band(cfg);
  } catch (const invgp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const invgp::ParameterError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const invgp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
