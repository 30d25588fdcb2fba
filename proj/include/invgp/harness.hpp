#pragma once

// Synthetic experiments: truth recipes, data generation, replicate loops and
// machine-readable outputs.
//
// Reproducibility: replicate r uses seed replicate_seed(master, r); its
// design points come from stream kDesignStream and its noise from
// kNoiseStream of that seed (see random.hpp). Replicates therefore do not
// depend on each other or on the number of worker threads.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "invgp/gp_exact.hpp"
#include "invgp/metrics.hpp"
#include "invgp/spectral_model.hpp"

namespace invgp {

inline constexpr const char* kLibraryVersion = "1.0.0";

enum class OperatorKind { Volterra, Heat, Radon };
enum class PriorFamily { Auto, Polynomial, Exponential };
enum class SchemeChoice { Population, Empirical, Both };
// Listed in the same order as OperatorKind: each recipe lives on that
// operator's e-basis.
enum class TruthRecipe { Volterra, Heat, Radon };

std::string to_string(OperatorKind k);
std::string to_string(PriorFamily f);
std::string to_string(SchemeChoice s);
std::string to_string(TruthRecipe r);
std::string to_string(SchemeKind s);
/// Parsers throw ConfigError on unknown names.
OperatorKind parse_operator(const std::string& s);
PriorFamily parse_prior_family(const std::string& s);
SchemeChoice parse_scheme(const std::string& s);
TruthRecipe parse_truth(const std::string& s);

struct ExperimentConfig {
  OperatorKind op = OperatorKind::Heat;
  double T = 0.01;  // heat diffusion time

  PriorFamily prior = PriorFamily::Auto;  // heat -> exponential, else polynomial
  std::optional<double> alpha;            // default: beta (polynomial), 0 (exponential)
  double xi = 0.1;
  std::optional<double> prior_p;          // default: 2 for heat, 1 otherwise

  double beta = 1.0;
  std::optional<TruthRecipe> truth;  // default: the operator's own recipe
  std::vector<double> truth_coeffs;  // overrides the recipe when nonempty

  Index n = 2000;
  std::vector<Index> m_list{3, 6};
  Index replicates = 1;
  std::uint64_t seed = 1;
  SchemeChoice scheme = SchemeChoice::Population;
  bool exact = true;
  double sigma2 = 1.0;
  Index grid_size = 200;
  double level = 0.95;
  Index truncation = 0;  // 0 selects it automatically
  SevereConstant severe_constant = SevereConstant::XiPlusTwoC;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::string output_dir = "results";

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  DecayFamily decay_family() const;
  TruthRecipe resolved_truth() const;
};

std::shared_ptr<const ForwardSVD> make_operator(const ExperimentConfig& cfg);

/// Truncation used by experiments: the prior-mass rule of
/// default_truncation, raised to at least kMinAutoTruncation so that the
/// truth's own tail stays small for fast-decaying priors.
inline constexpr Index kMinAutoTruncation = 40;
Index resolve_truncation(const ExperimentConfig& cfg, const ForwardSVD& op);

/// f_{0,j} = c_j j^{-(1+beta)} on the operator's e-basis, j <= J, with
/// c_j the recipe's odd/even oscillating weights.
SobolevTruth make_truth(TruthRecipe recipe, double beta, Index J);
/// User coefficients, zero-padded or cut to J (the cut part becomes tail).
SobolevTruth make_truth(const std::vector<double>& coeffs, double beta, Index J);
SobolevTruth make_truth(const ExperimentConfig& cfg, Index J);
double recipe_weight(TruthRecipe recipe, Index j);

/// Y_i = (A f_0)(x_i) + sqrt(sigma2) Z_i. sigma2 = 0 gives noiseless data
/// (such a dataset fails Dataset::validate and is meant for tests).
Dataset generate_data(const ForwardSVD& op, const SobolevTruth& truth, Index n,
                      double sigma2, std::uint64_t seed);

/// Noise-free forward values (A f_0)(x_i).
Eigen::VectorXd forward_values(const ForwardSVD& op, const SobolevTruth& truth,
                               const std::vector<Point>& x);

/// Deterministic evaluation grid on the parameter domain with `size` points.
std::vector<Point> evaluation_grid(const ForwardSVD& op, Index size);

struct CellResult {
  Index replicate = 0;
  std::string scheme;  // "exact", "population" or "empirical"
  Index m = 0;         // 0 for the exact posterior
  MiseReport mise;
  double kl = 0.0;  // NaN when the exact posterior is not computed
  double coverage = 0.0;
  double band_width = 0.0;
  std::uint64_t seed = 0;
  std::string status = "ok";
  double seconds = 0.0;
};

struct RunRecord {
  ExperimentConfig config;
  Index truncation = 0;
  Index recommended_m = 0;
  std::vector<std::string> warnings;
  std::vector<CellResult> cells;  // ordered by replicate, then scheme, then m
};

/// Runs every replicate. Numerical failures are stored per cell and the run
/// continues.
RunRecord run_experiment(const ExperimentConfig& cfg);

/// A single replicate with failures propagated as exceptions.
std::vector<CellResult> fit_replicate(const ExperimentConfig& cfg, Index replicate);

void write_results_csv(const RunRecord& rec, std::ostream& out);
void write_timings_csv(const RunRecord& rec, std::ostream& out);
void write_manifest(const RunRecord& rec, std::ostream& out);
/// results.csv, timings.csv and manifest.json under cfg.output_dir.
void write_outputs(const RunRecord& rec);

struct PhaseCell {
  Index n = 0;
  Index m = 0;
  double mise_exact = 0.0;
  double mise_variational = 0.0;
  double log_ratio = 0.0;  // log(mean exact MISE / mean variational MISE)
  Index threshold_m = 0;
};

/// Grid of mean-MISE log ratios for the population scheme over (n, m).
std::vector<PhaseCell> phase_grid(const ExperimentConfig& cfg,
                                  const std::vector<Index>& n_list,
                                  const std::vector<Index>& m_list);
void write_phase_csv(const std::vector<PhaseCell>& grid, std::ostream& out);

struct BandSeries {
  std::string method;
  Index m = 0;
  CredibleBand band;
  std::vector<double> truth;
};

/// Credible bands of the exact posterior and every requested variational
/// posterior for replicate 0.
std::vector<BandSeries> band_export(const ExperimentConfig& cfg);
void write_band_csv(const std::vector<BandSeries>& bands, std::ostream& out);

/// Replicate-0 dataset as CSV (x1, x2, y, signal).
void write_dataset_csv(const Dataset& data, const Eigen::VectorXd& signal,
                       std::ostream& out);

/// Runs fn(0), ..., fn(count-1) on up to `threads` workers. The first
/// exception thrown by any task is rethrown after all workers stop.
void parallel_for(Index count, unsigned threads, const std::function<void(Index)>& fn);

}  // namespace invgp
