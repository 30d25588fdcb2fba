#include "invgp/metrics.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "invgp/errors.hpp"

namespace invgp {

namespace {

constexpr double kNegativeVarianceTolerance = 1e-8;

// Guards the ceiling against values like 10.000000000000002 produced by
// pow/log round-off when the exact answer is an integer.
Index ceil_count(double v) {
  const double r = std::round(v);
  const double c = std::abs(v - r) < 1e-9 * std::max(1.0, r) ? r : std::ceil(v);
  return std::max<Index>(1, static_cast<Index>(c));
}

}  // namespace

MiseReport mise(const GaussianPosterior& post, const SobolevTruth& truth) {
  const SeriesFunction& f0 = truth.series;
  if (f0.basis() != Basis::E || post.mean_coeffs().basis() != Basis::E) {
    throw ContractError("mise: posterior and truth must both use the e-basis");
  }
  if (f0.truncation() != post.truncation()) {
    std::ostringstream msg;
    msg << "mise: truncation mismatch (posterior " << post.truncation()
        << ", truth " << f0.truncation() << ")";
    throw ContractError(msg.str());
  }
  MiseReport r;
  r.sq_bias = (post.mean_coeffs().coeffs() - f0.coeffs()).squaredNorm();
  r.variance_mass = std::max(0.0, post.variance_mass());
  r.mise = r.sq_bias + r.variance_mass;
  r.truncation_tail = post.prior_tail() + truth.tail_mass;
  return r;
}

double two_sided_quantile(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw ParameterError("credible level must lie in (0, 1)");
  }
  const boost::math::normal_distribution<double> z;
  return boost::math::quantile(z, 0.5 * (1.0 + level));
}

CredibleBand credible_band(const GaussianPosterior& post,
                           std::span<const Point> grid, double level) {
  const double z = two_sided_quantile(level);
  const Index J = post.truncation();
  const Eigen::MatrixXd E = post.op().basis_matrix(Basis::E, grid, J);
  const Eigen::VectorXd mean = E * post.mean_coeffs().coeffs();
  const Eigen::VectorXd var = (E * post.coeff_cov()).cwiseProduct(E).rowwise().sum();
  const Eigen::VectorXd scale = E.cwiseAbs2().rowwise().sum();

  CredibleBand band;
  band.grid.assign(grid.begin(), grid.end());
  band.level = level;
  band.mean = mean;
  band.lower.resize(mean.size());
  band.upper.resize(mean.size());
  for (Index a = 0; a < mean.size(); ++a) {
    double v = var(a);
    if (v < 0.0) {
      if (v < -kNegativeVarianceTolerance * std::max(1.0, scale(a))) {
        std::ostringstream msg;
        msg << "credible_band: negative posterior variance " << v;
        throw NumericalError(msg.str());
      }
      v = 0.0;
    }
    const double half = z * std::sqrt(v);
    band.lower(a) = mean(a) - half;
    band.upper(a) = mean(a) + half;
  }
  return band;
}

double coverage(const CredibleBand& band, std::span<const double> truth_values) {
  if (static_cast<Index>(truth_values.size()) != band.mean.size()) {
    throw ContractError("coverage: truth values do not match the band grid");
  }
  if (truth_values.empty()) return 0.0;
  std::size_t inside = 0;
  for (std::size_t a = 0; a < truth_values.size(); ++a) {
    const Index i = static_cast<Index>(a);
    if (band.lower(i) <= truth_values[a] && truth_values[a] <= band.upper(i)) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(truth_values.size());
}

double coverage(const CredibleBand& band, const SobolevTruth& truth,
                const ForwardSVD& op) {
  std::vector<double> values;
  values.reserve(band.grid.size());
  for (const Point& t : band.grid) values.push_back(eval_series(truth.series, op, t));
  return coverage(band, values);
}

Index recommended_m(const ForwardSVD& op, const PriorSpectrum& prior, Index n,
                    SevereConstant convention) {
  if (n < 2) throw ParameterError("recommended_m requires n >= 2");
  const double logn = std::log(static_cast<double>(n));
  const IllPosedness ill = op.illposedness();
  const auto* poly = std::get_if<PolynomialDecay>(&prior.family());
  const auto* expo = std::get_if<ExponentialDecay>(&prior.family());

  if (const auto* mild = std::get_if<MildlyIllPosed>(&ill)) {
    if (poly) {
      const double denom = 1.0 + 2.0 * mild->p + 2.0 * poly->alpha;
      return ceil_count(std::exp(logn / denom));
    }
    // Exponential prior: the prior decay alone sets the effective dimension.
    return ceil_count(std::pow(logn / expo->xi, 1.0 / expo->p));
  }
  const auto& severe = std::get<SeverelyIllPosed>(ill);
  const double c =
      convention == SevereConstant::XiPlusTwoC ? 2.0 * severe.c : severe.c;
  const double xi = expo ? expo->xi : 0.0;
  return ceil_count(std::pow(logn / (xi + c), 1.0 / severe.p));
}

LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw DataError("least_squares needs two equally long series of length >= 2");
  }
  const double k = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DataError("least_squares: regressor has no spread");
  const double slope = sxy / sxx;
  const double r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return {slope, my - slope * mx, r2};
}

std::pair<RateRegressor, double> theory_exponent(const ForwardSVD& op,
                                                 const PriorSpectrum& prior,
                                                 double beta) {
  const IllPosedness ill = op.illposedness();
  if (const auto* severe = std::get_if<SeverelyIllPosed>(&ill)) {
    return {RateRegressor::LogLogN, -2.0 * beta / severe->p};
  }
  const double p = std::get<MildlyIllPosed>(ill).p;
  if (const auto* poly = std::get_if<PolynomialDecay>(&prior.family())) {
    const double a = poly->alpha;
    return {RateRegressor::LogN, -2.0 * std::min(a, beta) / (1.0 + 2.0 * a + 2.0 * p)};
  }
  return {RateRegressor::LogN, std::numeric_limits<double>::quiet_NaN()};
}

RateEstimate rate_slope(std::span<const std::pair<Index, double>> mise_by_n,
                        const ForwardSVD& op, const PriorSpectrum& prior,
                        const SobolevTruth& truth) {
  if (mise_by_n.size() < 4) throw DataError("rate_slope needs at least 4 sample sizes");
  RateEstimate est;
  std::tie(est.regressor, est.theory_exponent) = theory_exponent(op, prior, truth.beta);

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < mise_by_n.size(); ++i) {
    const auto [n, value] = mise_by_n[i];
    if (i > 0 && n <= mise_by_n[i - 1].first) {
      throw DataError("rate_slope: sample sizes must be strictly increasing");
    }
    if (!(value > 0.0)) throw DataError("rate_slope: MISE values must be positive");
    if (n < 2) throw DataError("rate_slope: sample sizes must be >= 2");
    const double logn = std::log(static_cast<double>(n));
    xs.push_back(est.regressor == RateRegressor::LogN ? logn : std::log(logn));
    ys.push_back(std::log(value));
    est.n_grid.push_back(n);
  }
  const LineFit fit = least_squares(xs, ys);
  est.slope = fit.slope;
  est.intercept = fit.intercept;
  est.r2 = fit.r2;
  return est;
}

}  // namespace invgp
