#include "invgp/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "invgp/errors.hpp"
#include "invgp/gp_variational.hpp"
#include "invgp/operators.hpp"
#include "invgp/random.hpp"

namespace invgp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  const double s = std::chrono::duration<double>(Clock::now() - start).count();
  return std::max(s, 1e-9);
}

template <class Enum>
Enum lookup(const std::map<std::string, Enum>& table, const std::string& s,
            const char* what) {
  auto it = table.find(s);
  if (it == table.end()) {
    std::ostringstream msg;
    msg << "unknown " << what << " '" << s << "'; expected one of:";
    for (const auto& [name, value] : table) msg << ' ' << name;
    throw ConfigError(msg.str());
  }
  return it->second;
}

// Shortest decimal form that round-trips, so CSV output is bit-reproducible.
std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Everything shared by the replicates of one configuration.
struct Context {
  ExperimentConfig cfg;
  std::shared_ptr<const ForwardSVD> op;
  Index J = 0;
  PriorSpectrum prior;
  SobolevTruth truth;
  std::vector<Point> grid;
  std::vector<double> truth_on_grid;
  std::vector<SchemeKind> schemes;
  std::map<SchemeKind, std::vector<Index>> m_values;
  std::vector<std::string> warnings;
};

std::vector<Index> clamp_m_list(const std::vector<Index>& requested, Index limit,
                                const std::string& label,
                                std::vector<std::string>& warnings) {
  std::vector<Index> out;
  std::set<Index> seen;
  for (Index m : requested) {
    Index eff = m;
    if (m > limit) {
      std::ostringstream w;
      w << label << ": m=" << m << " exceeds " << limit << ", clamped";
      warnings.push_back(w.str());
      eff = limit;
    }
    if (seen.insert(eff).second) out.push_back(eff);
  }
  return out;
}

Context make_context(const ExperimentConfig& cfg) {
  cfg.validate();
  auto op = make_operator(cfg);
  const Index J = resolve_truncation(cfg, *op);
  PriorSpectrum prior(cfg.decay_family(), J);
  SobolevTruth truth = make_truth(cfg, J);
  Context ctx{cfg, op, J, std::move(prior), std::move(truth), {}, {}, {}, {}, {}};
  ctx.grid = evaluation_grid(*op, cfg.grid_size);
  ctx.truth_on_grid.reserve(ctx.grid.size());
  for (const Point& t : ctx.grid) {
    ctx.truth_on_grid.push_back(eval_series(ctx.truth.series, *op, t));
  }
  if (cfg.scheme != SchemeChoice::Empirical) {
    ctx.schemes.push_back(SchemeKind::PopulationSpectral);
    ctx.m_values[SchemeKind::PopulationSpectral] =
        clamp_m_list(cfg.m_list, J, "population scheme (J)", ctx.warnings);
  }
  if (cfg.scheme != SchemeChoice::Population) {
    ctx.schemes.push_back(SchemeKind::EmpiricalSpectral);
    ctx.m_values[SchemeKind::EmpiricalSpectral] =
        clamp_m_list(cfg.m_list, cfg.n, "empirical scheme (n)", ctx.warnings);
  }
  return ctx;
}

void summarize(const Context& ctx, const GaussianPosterior& post, CellResult& cell) {
  cell.mise = mise(post, ctx.truth);
  const CredibleBand band = credible_band(post, ctx.grid, ctx.cfg.level);
  cell.coverage = coverage(band, ctx.truth_on_grid);
  cell.band_width = band.mean_width();
}

void mark_failed(CellResult& cell, const std::exception& e) {
  cell.status = std::string("error: ") + e.what();
  cell.mise = MiseReport{kNaN, kNaN, kNaN, kNaN};
  cell.kl = kNaN;
  cell.coverage = kNaN;
  cell.band_width = kNaN;
}

// Runs one replicate. With `contain` set, numerical failures are recorded in
// the affected cell; otherwise they propagate.
std::vector<CellResult> run_replicate(const Context& ctx, Index r, bool contain) {
  const ExperimentConfig& cfg = ctx.cfg;
  const std::uint64_t seed = replicate_seed(cfg.seed, static_cast<std::uint64_t>(r));
  const Dataset data = generate_data(*ctx.op, ctx.truth, cfg.n, cfg.sigma2, seed);
  std::vector<CellResult> cells;

  auto guarded = [&](CellResult& cell, const std::function<void()>& body) {
    if (!contain) {
      body();
      return;
    }
    try {
      body();
    } catch (const NumericalError& e) {
      mark_failed(cell, e);
    } catch (const ParameterError& e) {
      mark_failed(cell, e);
    }
  };

  std::optional<GramSet> gram;
  double gram_seconds = 0.0;
  double log_ml = kNaN;
  if (cfg.exact) {
    CellResult cell;
    cell.replicate = r;
    cell.scheme = "exact";
    cell.seed = seed;
    guarded(cell, [&] {
      const auto start = Clock::now();
      gram.emplace(build_gram(*ctx.op, ctx.prior, data));
      gram_seconds = seconds_since(start);
      const GaussianPosterior post = exact_posterior(ctx.op, ctx.prior, data, *gram);
      cell.seconds = seconds_since(start);
      log_ml = log_marginal_likelihood(data, *gram);
      cell.kl = 0.0;
      summarize(ctx, post, cell);
    });
    cells.push_back(std::move(cell));
  }

  Eigen::VectorXd kff_diag;
  if (gram) kff_diag = gram->kff().diagonal();

  for (SchemeKind kind : ctx.schemes) {
    std::optional<GramEigensystem> eig;
    double eig_seconds = 0.0;
    for (Index m : ctx.m_values.at(kind)) {
      CellResult cell;
      cell.replicate = r;
      cell.scheme = to_string(kind);
      cell.m = m;
      cell.seed = seed;
      guarded(cell, [&] {
        double shared = 0.0;
        if (kind == SchemeKind::EmpiricalSpectral) {
          if (!gram) {
            const auto g0 = Clock::now();
            gram.emplace(build_gram(*ctx.op, ctx.prior, data));
            gram_seconds = seconds_since(g0);
          }
          if (!eig) {
            const auto e0 = Clock::now();
            eig.emplace(gram_eigensystem(*gram));
            eig_seconds = seconds_since(e0);
          }
          // The empirical method pays for K_ff and its eigensystem.
          shared = gram_seconds + eig_seconds;
        }
        const auto start = Clock::now();
        std::optional<InducingScheme> scheme;
        if (kind == SchemeKind::PopulationSpectral) {
          scheme.emplace(population_scheme(ctx.op, ctx.prior, data, m));
        } else {
          scheme.emplace(empirical_scheme(ctx.op, ctx.prior, data, *gram, *eig, m));
        }
        const VariationalParams params = fit_variational(*scheme, data);
        const GaussianPosterior post =
            variational_posterior(*scheme, params, ctx.prior, ctx.op);
        cell.seconds = seconds_since(start) + shared;
        if (std::isfinite(log_ml)) {
          // Round-off below zero is reported as 0; larger gaps stay visible.
          const double gap = log_ml - elbo(*scheme, data, kff_diag);
          cell.kl = gap < 0.0 && gap > -1e-10 * (1.0 + std::abs(log_ml)) ? 0.0 : gap;
        } else {
          cell.kl = kNaN;
        }
        summarize(ctx, post, cell);
      });
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

unsigned worker_count(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

// --- names -----------------------------------------------------------------

std::string to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::Volterra: return "volterra";
    case OperatorKind::Heat: return "heat";
    case OperatorKind::Radon: return "radon";
  }
  return "?";
}

std::string to_string(PriorFamily f) {
  switch (f) {
    case PriorFamily::Auto: return "auto";
    case PriorFamily::Polynomial: return "polynomial";
    case PriorFamily::Exponential: return "exponential";
  }
  return "?";
}

std::string to_string(SchemeChoice s) {
  switch (s) {
    case SchemeChoice::Population: return "population";
    case SchemeChoice::Empirical: return "empirical";
    case SchemeChoice::Both: return "both";
  }
  return "?";
}

std::string to_string(TruthRecipe r) { return to_string(static_cast<OperatorKind>(r)); }

std::string to_string(SchemeKind s) {
  return s == SchemeKind::PopulationSpectral ? "population" : "empirical";
}

OperatorKind parse_operator(const std::string& s) {
  static const std::map<std::string, OperatorKind> table{
      {"volterra", OperatorKind::Volterra},
      {"heat", OperatorKind::Heat},
      {"radon", OperatorKind::Radon}};
  return lookup(table, s, "operator");
}

PriorFamily parse_prior_family(const std::string& s) {
  static const std::map<std::string, PriorFamily> table{
      {"auto", PriorFamily::Auto},
      {"polynomial", PriorFamily::Polynomial},
      {"exponential", PriorFamily::Exponential}};
  return lookup(table, s, "prior family");
}

SchemeChoice parse_scheme(const std::string& s) {
  static const std::map<std::string, SchemeChoice> table{
      {"population", SchemeChoice::Population},
      {"empirical", SchemeChoice::Empirical},
      {"both", SchemeChoice::Both}};
  return lookup(table, s, "scheme");
}

TruthRecipe parse_truth(const std::string& s) {
  static const std::map<std::string, TruthRecipe> table{
      {"volterra", TruthRecipe::Volterra},
      {"heat", TruthRecipe::Heat},
      {"radon", TruthRecipe::Radon}};
  return lookup(table, s, "truth recipe");
}

// --- configuration -----------------------------------------------------------

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (n < 1) fail("n must be >= 1");
  if (replicates < 1) fail("reps must be >= 1");
  if (m_list.empty()) fail("m list must not be empty");
  for (Index m : m_list) {
    if (m < 1) fail("every m must be >= 1");
  }
  if (!(beta > 0.0)) fail("beta must be > 0");
  if (op == OperatorKind::Heat && !(T > 0.0)) fail("T must be > 0");
  if (!(sigma2 > 0.0)) fail("sigma2 must be > 0");
  if (grid_size < 2) fail("grid size must be >= 2");
  if (!(level > 0.0 && level < 1.0)) fail("level must lie in (0, 1)");
  if (truncation < 0) fail("truncation must be >= 0");
  const DecayFamily fam = decay_family();
  if (const auto* poly = std::get_if<PolynomialDecay>(&fam)) {
    if (!(poly->alpha > 0.0)) fail("alpha must be > 0 for the polynomial prior");
  } else {
    const auto& e = std::get<ExponentialDecay>(fam);
    if (!(e.alpha >= 0.0)) fail("alpha must be >= 0 for the exponential prior");
    if (!(e.xi > 0.0)) fail("xi must be > 0");
    if (!(e.p >= 1.0)) fail("prior exponent p must be >= 1");
  }
  if (!truth_coeffs.empty()) return;
  if (static_cast<int>(resolved_truth()) != static_cast<int>(op)) {
    fail("truth recipe '" + to_string(resolved_truth()) +
         "' is defined on a different basis than operator '" + to_string(op) + "'");
  }
}

DecayFamily ExperimentConfig::decay_family() const {
  PriorFamily fam = prior;
  if (fam == PriorFamily::Auto) {
    fam = op == OperatorKind::Heat ? PriorFamily::Exponential : PriorFamily::Polynomial;
  }
  if (fam == PriorFamily::Polynomial) return PolynomialDecay{alpha.value_or(beta)};
  const double p = prior_p.value_or(op == OperatorKind::Heat ? 2.0 : 1.0);
  return ExponentialDecay{alpha.value_or(0.0), xi, p};
}

TruthRecipe ExperimentConfig::resolved_truth() const {
  return truth.value_or(static_cast<TruthRecipe>(op));
}

std::shared_ptr<const ForwardSVD> make_operator(const ExperimentConfig& cfg) {
  switch (cfg.op) {
    case OperatorKind::Volterra: return volterra();
    case OperatorKind::Heat: return heat(cfg.T);
    case OperatorKind::Radon: return radon();
  }
  throw ConfigError("unknown operator");
}

Index resolve_truncation(const ExperimentConfig& cfg, const ForwardSVD& op) {
  if (cfg.truncation > 0) return cfg.truncation;
  return std::max(default_truncation(op, cfg.decay_family()), kMinAutoTruncation);
}

// --- truth and data ----------------------------------------------------------

double recipe_weight(TruthRecipe recipe, Index j) {
  const double x = static_cast<double>(j) * std::numbers::pi;
  const bool odd = j % 2 == 1;
  switch (recipe) {
    case TruthRecipe::Heat:
      return odd ? 1.0 + 0.4 * std::sin(std::sqrt(5.0) * x)
                 : 2.5 + 2.0 * std::sin(std::sqrt(2.0) * x);
    case TruthRecipe::Volterra:
      return odd ? 1.0 + 0.9 * std::sin(std::sqrt(3.0) * x)
                 : 1.0 + 0.8 * std::sin(std::sqrt(7.0) * x);
    case TruthRecipe::Radon:
      return odd ? 1.0 + 0.5 * std::sin(std::sqrt(3.0) * x)
                 : 2.0 + 0.8 * std::sin(std::sqrt(7.0) * x);
  }
  return 0.0;
}

SobolevTruth make_truth(TruthRecipe recipe, double beta, Index J) {
  if (J < 1) throw ParameterError("truth truncation must be >= 1");
  const double decay = 1.0 + beta;
  Eigen::VectorXd f(J);
  for (Index j = 1; j <= J; ++j) {
    f(j - 1) = recipe_weight(recipe, j) * std::pow(static_cast<double>(j), -decay);
  }
  // Sum the tail explicitly over a long horizon, then close it with the
  // integral of j^{-2(1+beta)} scaled by the mean squared weight.
  const Index horizon = 50 * J + 1000;
  double tail = 0.0, c2 = 0.0;
  for (Index j = J + 1; j <= J + horizon; ++j) {
    const double c = recipe_weight(recipe, j);
    c2 += c * c;
    tail += c * c * std::pow(static_cast<double>(j), -2.0 * decay);
  }
  c2 /= static_cast<double>(horizon);
  const double end = static_cast<double>(J + horizon) + 0.5;
  tail += c2 * std::pow(end, 1.0 - 2.0 * decay) / (2.0 * decay - 1.0);
  return SobolevTruth(beta, SeriesFunction(std::move(f), Basis::E), tail);
}

SobolevTruth make_truth(const std::vector<double>& coeffs, double beta, Index J) {
  if (J < 1) throw ParameterError("truth truncation must be >= 1");
  Eigen::VectorXd f = Eigen::VectorXd::Zero(J);
  double tail = 0.0;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    if (static_cast<Index>(k) < J) {
      f(static_cast<Index>(k)) = coeffs[k];
    } else {
      tail += coeffs[k] * coeffs[k];
    }
  }
  return SobolevTruth(beta, SeriesFunction(std::move(f), Basis::E), tail);
}

SobolevTruth make_truth(const ExperimentConfig& cfg, Index J) {
  if (!cfg.truth_coeffs.empty()) return make_truth(cfg.truth_coeffs, cfg.beta, J);
  return make_truth(cfg.resolved_truth(), cfg.beta, J);
}

Eigen::VectorXd forward_values(const ForwardSVD& op, const SobolevTruth& truth,
                               const std::vector<Point>& x) {
  const SeriesFunction af = forward_map(truth.series, op);
  Eigen::VectorXd out(static_cast<Index>(x.size()));
  Eigen::VectorXd g(af.truncation());
  for (std::size_t i = 0; i < x.size(); ++i) {
    op.basis_values(Basis::G, x[i],
                    std::span<double>(g.data(), static_cast<std::size_t>(g.size())));
    out(static_cast<Index>(i)) = af.coeffs().dot(g);
  }
  return out;
}

Dataset generate_data(const ForwardSVD& op, const SobolevTruth& truth, Index n,
                      double sigma2, std::uint64_t seed) {
  if (n < 1) throw ParameterError("generate_data requires n >= 1");
  if (!(sigma2 >= 0.0)) throw ParameterError("noise variance must be >= 0");
  Dataset data;
  data.seed = seed;
  data.sigma2 = sigma2;
  data.x = op.sample_design(n, seed);
  data.y = forward_values(op, truth, data.x);
  const CounterRng noise(seed, kNoiseStream);
  const double sd = std::sqrt(sigma2);
  for (Index i = 0; i < n; ++i) {
    data.y(i) += sd * noise.normal(static_cast<std::uint64_t>(i));
  }
  return data;
}

std::vector<Point> evaluation_grid(const ForwardSVD& op, Index size) {
  if (size < 1) throw ParameterError("grid size must be >= 1");
  std::vector<Point> grid;
  grid.reserve(static_cast<std::size_t>(size));
  if (op.parameter_domain().kind == DomainKind::UnitInterval) {
    for (Index k = 0; k < size; ++k) {
      grid.push_back({(static_cast<double>(k) + 0.5) / static_cast<double>(size), 0.0});
    }
    return grid;
  }
  // Equal-area rings on the disc.
  const Index rings = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(size))));
  const Index per_ring = (size + rings - 1) / rings;
  for (Index i = 0; i < rings && static_cast<Index>(grid.size()) < size; ++i) {
    const double r = std::sqrt((static_cast<double>(i) + 0.5) / static_cast<double>(rings));
    for (Index k = 0; k < per_ring && static_cast<Index>(grid.size()) < size; ++k) {
      const double theta = 2.0 * std::numbers::pi * (static_cast<double>(k) + 0.5) /
                           static_cast<double>(per_ring);
      grid.push_back({r, theta});
    }
  }
  return grid;
}

// --- experiments ---------------------------------------------------------------

void parallel_for(Index count, unsigned threads, const std::function<void(Index)>& fn) {
  if (count <= 0) return;
  const unsigned workers =
      static_cast<unsigned>(std::min<Index>(count, worker_count(threads)));
  if (workers == 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (Index i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

RunRecord run_experiment(const ExperimentConfig& cfg) {
  const Context ctx = make_context(cfg);
  RunRecord rec;
  rec.config = cfg;
  rec.truncation = ctx.J;
  rec.recommended_m = cfg.n >= 2
                          ? recommended_m(*ctx.op, ctx.prior, cfg.n, cfg.severe_constant)
                          : 1;
  rec.warnings = ctx.warnings;

  std::vector<std::vector<CellResult>> per_rep(static_cast<std::size_t>(cfg.replicates));
  parallel_for(cfg.replicates, cfg.threads, [&](Index r) {
    per_rep[static_cast<std::size_t>(r)] = run_replicate(ctx, r, true);
  });
  for (auto& cells : per_rep) {
    for (auto& c : cells) rec.cells.push_back(std::move(c));
  }
  return rec;
}

std::vector<CellResult> fit_replicate(const ExperimentConfig& cfg, Index replicate) {
  const Context ctx = make_context(cfg);
  return run_replicate(ctx, replicate, false);
}

void write_results_csv(const RunRecord& rec, std::ostream& out) {
  out << "replicate,scheme,m,mise,sq_bias,variance_mass,kl,coverage,band_width,seed,status\n";
  for (const CellResult& c : rec.cells) {
    out << c.replicate << ',' << c.scheme << ',' << c.m << ',' << fmt(c.mise.mise)
        << ',' << fmt(c.mise.sq_bias) << ',' << fmt(c.mise.variance_mass) << ','
        << fmt(c.kl) << ',' << fmt(c.coverage) << ',' << fmt(c.band_width) << ','
        << c.seed << ',' << csv_field(c.status) << '\n';
  }
}

void write_timings_csv(const RunRecord& rec, std::ostream& out) {
  out << "replicate,scheme,m,seconds\n";
  for (const CellResult& c : rec.cells) {
    out << c.replicate << ',' << c.scheme << ',' << c.m << ',' << fmt(c.seconds) << '\n';
  }
}

namespace {

nlohmann::json config_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["operator"] = to_string(cfg.op);
  if (cfg.op == OperatorKind::Heat) j["T"] = cfg.T;
  const DecayFamily fam = cfg.decay_family();
  if (const auto* poly = std::get_if<PolynomialDecay>(&fam)) {
    j["prior"] = {{"family", "polynomial"}, {"alpha", poly->alpha}};
  } else {
    const auto& e = std::get<ExponentialDecay>(fam);
    j["prior"] = {{"family", "exponential"}, {"alpha", e.alpha}, {"xi", e.xi}, {"p", e.p}};
  }
  j["beta"] = cfg.beta;
  if (cfg.truth_coeffs.empty()) {
    j["truth"] = to_string(cfg.resolved_truth());
  } else {
    j["truth"] = cfg.truth_coeffs;
  }
  j["n"] = cfg.n;
  j["m"] = cfg.m_list;
  j["reps"] = cfg.replicates;
  j["seed"] = cfg.seed;
  j["scheme"] = to_string(cfg.scheme);
  j["exact"] = cfg.exact;
  j["sigma2"] = cfg.sigma2;
  j["grid_size"] = cfg.grid_size;
  j["level"] = cfg.level;
  j["truncation_requested"] = cfg.truncation;
  j["severe_constant"] =
      cfg.severe_constant == SevereConstant::XiPlusTwoC ? "xi+2c" : "xi+c";
  return j;
}

}  // namespace

void write_manifest(const RunRecord& rec, std::ostream& out) {
  nlohmann::json j;
  j["version"] = kLibraryVersion;
  j["config"] = config_json(rec.config);
  j["truncation_J"] = rec.truncation;
  j["recommended_m"] = rec.recommended_m;
  j["thresholds"] = {{"truncation_tail", tolerance::kTruncationTail},
                     {"truncation_cap", tolerance::kTruncationCap},
                     {"min_auto_truncation", kMinAutoTruncation}};
  j["seeding"] =
      "replicate r: seed_r = splitmix(master, stream 3, r); design stream 1, noise stream 2";
  j["warnings"] = rec.warnings;
  std::size_t failed = 0;
  for (const auto& c : rec.cells) failed += c.status != "ok";
  j["failed_cells"] = failed;
  out << j.dump(2) << '\n';
}

void write_outputs(const RunRecord& rec) {
  const std::filesystem::path dir(rec.config.output_dir);
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw ConfigError("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("results.csv");
    write_results_csv(rec, f);
  }
  {
    auto f = open("timings.csv");
    write_timings_csv(rec, f);
  }
  auto f = open("manifest.json");
  write_manifest(rec, f);
}

std::vector<PhaseCell> phase_grid(const ExperimentConfig& cfg,
                                  const std::vector<Index>& n_list,
                                  const std::vector<Index>& m_list) {
  cfg.validate();
  if (n_list.empty() || m_list.empty()) throw ConfigError("phase grid needs n and m values");
  for (Index n : n_list) {
    if (n < 2) throw ConfigError("phase grid sample sizes must be >= 2");
  }
  auto op = make_operator(cfg);
  const Index J = resolve_truncation(cfg, *op);
  const PriorSpectrum prior(cfg.decay_family(), J);
  const SobolevTruth truth = make_truth(cfg, J);

  const Index reps = cfg.replicates;
  const Index cells = static_cast<Index>(n_list.size()) * reps;
  const Index nm = static_cast<Index>(m_list.size());
  // exact[(a, r)] and variational[(a, r), k]
  std::vector<double> exact(static_cast<std::size_t>(cells), kNaN);
  std::vector<double> variational(static_cast<std::size_t>(cells * nm), kNaN);

  parallel_for(cells, cfg.threads, [&](Index task) {
    const Index a = task / reps;
    const Index r = task % reps;
    const Index n = n_list[static_cast<std::size_t>(a)];
    // Seeds depend on (n, r) only, so every cell of a row shares its data.
    const std::uint64_t seed = replicate_seed(
        mix(cfg.seed, kReplicateStream, static_cast<std::uint64_t>(n)),
        static_cast<std::uint64_t>(r));
    const Dataset data = generate_data(*op, truth, n, cfg.sigma2, seed);
    try {
      const GaussianPosterior post = exact_posterior(op, prior, data);
      exact[static_cast<std::size_t>(task)] = mise(post, truth).mise;
    } catch (const NumericalError&) {
    }
    for (Index k = 0; k < nm; ++k) {
      const Index m = std::min(m_list[static_cast<std::size_t>(k)], J);
      try {
        const InducingScheme scheme = population_scheme(op, prior, data, m);
        const VariationalParams params = fit_variational(scheme, data);
        const GaussianPosterior post = variational_posterior(scheme, params, prior, op);
        variational[static_cast<std::size_t>(task * nm + k)] = mise(post, truth).mise;
      } catch (const NumericalError&) {
      }
    }
  });

  std::vector<PhaseCell> out;
  for (std::size_t a = 0; a < n_list.size(); ++a) {
    const Index n = n_list[a];
    double ex = 0.0;
    for (Index r = 0; r < reps; ++r) ex += exact[a * static_cast<std::size_t>(reps) + r];
    ex /= static_cast<double>(reps);
    const Index threshold = recommended_m(*op, prior, n, cfg.severe_constant);
    for (Index k = 0; k < nm; ++k) {
      double var = 0.0;
      for (Index r = 0; r < reps; ++r) {
        const Index task = static_cast<Index>(a) * reps + r;
        var += variational[static_cast<std::size_t>(task * nm + k)];
      }
      var /= static_cast<double>(reps);
      out.push_back({n, m_list[static_cast<std::size_t>(k)], ex, var, std::log(ex / var),
                     threshold});
    }
  }
  return out;
}

void write_phase_csv(const std::vector<PhaseCell>& grid, std::ostream& out) {
  out << "n,m,mise_exact,mise_variational,log_ratio,threshold_m\n";
  for (const PhaseCell& c : grid) {
    out << c.n << ',' << c.m << ',' << fmt(c.mise_exact) << ','
        << fmt(c.mise_variational) << ',' << fmt(c.log_ratio) << ',' << c.threshold_m
        << '\n';
  }
}

std::vector<BandSeries> band_export(const ExperimentConfig& cfg) {
  const Context ctx = make_context(cfg);
  const std::uint64_t seed = replicate_seed(cfg.seed, 0);
  const Dataset data = generate_data(*ctx.op, ctx.truth, cfg.n, cfg.sigma2, seed);
  std::vector<BandSeries> out;
  std::optional<GramSet> gram;
  if (cfg.exact || cfg.scheme != SchemeChoice::Population) {
    gram.emplace(build_gram(*ctx.op, ctx.prior, data));
  }
  if (cfg.exact) {
    const GaussianPosterior post = exact_posterior(ctx.op, ctx.prior, data, *gram);
    out.push_back({"exact", 0, credible_band(post, ctx.grid, cfg.level), ctx.truth_on_grid});
  }
  std::optional<GramEigensystem> eig;
  for (SchemeKind kind : ctx.schemes) {
    for (Index m : ctx.m_values.at(kind)) {
      std::optional<InducingScheme> scheme;
      if (kind == SchemeKind::PopulationSpectral) {
        scheme.emplace(population_scheme(ctx.op, ctx.prior, data, m));
      } else {
        if (!eig) eig.emplace(gram_eigensystem(*gram));
        scheme.emplace(empirical_scheme(ctx.op, ctx.prior, data, *gram, *eig, m));
      }
      const VariationalParams params = fit_variational(*scheme, data);
      const GaussianPosterior post =
          variational_posterior(*scheme, params, ctx.prior, ctx.op);
      out.push_back({to_string(kind), m, credible_band(post, ctx.grid, cfg.level),
                     ctx.truth_on_grid});
    }
  }
  return out;
}

void write_band_csv(const std::vector<BandSeries>& bands, std::ostream& out) {
  out << "method,m,t1,t2,truth,mean,lower,upper\n";
  for (const BandSeries& b : bands) {
    for (std::size_t a = 0; a < b.band.grid.size(); ++a) {
      const Index i = static_cast<Index>(a);
      out << b.method << ',' << b.m << ',' << fmt(b.band.grid[a].x) << ','
          << fmt(b.band.grid[a].y) << ',' << fmt(b.truth[a]) << ','
          << fmt(b.band.mean(i)) << ',' << fmt(b.band.lower(i)) << ','
          << fmt(b.band.upper(i)) << '\n';
    }
  }
}

void write_dataset_csv(const Dataset& data, const Eigen::VectorXd& signal,
                       std::ostream& out) {
  out << "x1,x2,y,signal\n";
  for (Index i = 0; i < data.size(); ++i) {
    const Point& p = data.x[static_cast<std::size_t>(i)];
    out << fmt(p.x) << ',' << fmt(p.y) << ',' << fmt(data.y(i)) << ',' << fmt(signal(i))
        << '\n';
  }
}

}  // namespace invgp
