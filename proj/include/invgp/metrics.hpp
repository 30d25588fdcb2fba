#pragma once

// Evaluation functionals for Gaussian posteriors: integrated squared error,
// pointwise credible bands, recommended inducing counts and rate slopes.

#include <span>
#include <utility>
#include <vector>

#include "invgp/gp_exact.hpp"
#include "invgp/spectral_model.hpp"

namespace invgp {

struct MiseReport {
  double mise = 0.0;
  double sq_bias = 0.0;        // ||posterior mean - f_0||^2 over j <= J
  double variance_mass = 0.0;  // integral of C(t, t) d mu(t) over j <= J
  /// Prior variance plus truth energy beyond the truncation. Reported, not
  /// added to `mise`.
  double truncation_tail = 0.0;
};

/// Closed-form MISE of a Gaussian posterior. Throws ContractError if the
/// truth is not on the posterior's e-basis with the same truncation.
MiseReport mise(const GaussianPosterior& post, const SobolevTruth& truth);

struct CredibleBand {
  std::vector<Point> grid;
  Eigen::VectorXd mean;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double level = 0.95;

  double mean_width() const { return (upper - lower).mean(); }
};

/// Two-sided standard normal quantile z with P(|Z| <= z) = level.
double two_sided_quantile(double level);

/// mean(t) -/+ z sqrt(cov(t, t)) on `grid`. Variances below
/// -1e-8 (k(t,t) v 1) raise NumericalError; smaller negatives clamp to 0.
CredibleBand credible_band(const GaussianPosterior& post,
                           std::span<const Point> grid, double level = 0.95);

/// Fraction of grid points where lower <= truth <= upper.
double coverage(const CredibleBand& band, std::span<const double> truth_values);
double coverage(const CredibleBand& band, const SobolevTruth& truth,
                const ForwardSVD& op);

/// Which constant multiplies m^p in the severely ill-posed threshold.
enum class SevereConstant {
  XiPlusTwoC,  // (xi + 2c)^{-1} log n, reproduces the heat example (m = 6)
  XiPlusC,     // (xi + c)^{-1} log n
};

/// Smallest inducing count the contraction theory asks for at sample size n.
///   mild operator, polynomial prior:  ceil(n^{1/(1 + 2p + 2 alpha)})
///   severe operator, exponential prior: ceil(((xi + 2c)^{-1} log n)^{1/p})
/// Mixed cases balance the same way using whichever decay is exponential.
Index recommended_m(const ForwardSVD& op, const PriorSpectrum& prior, Index n,
                    SevereConstant convention = SevereConstant::XiPlusTwoC);

enum class RateRegressor { LogN, LogLogN };

struct RateEstimate {
  double slope = 0.0;
  double intercept = 0.0;
  double theory_exponent = 0.0;  // NaN when the theory does not cover the pair
  RateRegressor regressor = RateRegressor::LogN;
  std::vector<Index> n_grid;
  double r2 = 0.0;
};

struct LineFit {
  double slope;
  double intercept;
  double r2;
};

/// Ordinary least squares y = intercept + slope x.
LineFit least_squares(std::span<const double> x, std::span<const double> y);

/// Unweighted OLS of log MISE on log n (mild) or log log n (severe).
/// Requires at least 4 strictly increasing n and positive MISE values;
/// violations raise DataError.
RateEstimate rate_slope(std::span<const std::pair<Index, double>> mise_by_n,
                        const ForwardSVD& op, const PriorSpectrum& prior,
                        const SobolevTruth& truth);

/// Theoretical squared-error exponent for (op, prior, beta).
std::pair<RateRegressor, double> theory_exponent(const ForwardSVD& op,
                                                 const PriorSpectrum& prior,
                                                 double beta);

}  // namespace invgp
