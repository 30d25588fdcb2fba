#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "invgp/spectral_model.hpp"

namespace invgp {

/// Observations Y_i = (A f_0)(x_i) + Z_i, Z_i ~ N(0, sigma2).
struct Dataset {
  std::vector<Point> x;
  Eigen::VectorXd y;
  double sigma2 = 1.0;
  std::uint64_t seed = 0;

  Index size() const { return static_cast<Index>(x.size()); }

  /// Throws DataError unless sizes agree, n >= 1 and sigma2 > 0.
  void validate() const;
};

/// Row i holds g_1(x_i), ..., g_J(x_i).
Eigen::MatrixXd design_features(const ForwardSVD& op, const Dataset& data,
                                Index J);

/// Forward Gram matrix K_ff[i][k] = sum_j lambda_j kappa_j^2 g_j(x_i) g_j(x_k)
/// together with a Cholesky factor of K_ff + sigma2 I.
class GramSet {
 public:
  GramSet(Eigen::MatrixXd features, Eigen::VectorXd forward_weights,
          double sigma2);

  const Eigen::MatrixXd& kff() const { return kff_; }
  const Eigen::LLT<Eigen::MatrixXd>& chol() const { return chol_; }
  /// Design features g_j(x_i) used to build K_ff (n x J).
  const Eigen::MatrixXd& features() const { return features_; }
  /// lambda_j kappa_j^2, j = 1..J.
  const Eigen::VectorXd& forward_weights() const { return weights_; }
  double sigma2() const { return sigma2_; }
  /// Diagonal shift added beyond sigma2 to make the factorization succeed.
  double jitter() const { return jitter_; }
  Index size() const { return kff_.rows(); }

  /// (K_ff + sigma2 I)^{-1} b using the cached factor.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const { return chol_.solve(b); }
  double log_det() const;

 private:
  Eigen::MatrixXd features_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd kff_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  double sigma2_;
  double jitter_ = 0.0;
};

GramSet build_gram(const ForwardSVD& op, const PriorSpectrum& prior,
                   const Dataset& data);

enum class PosteriorKind { Exact, Variational };
enum class SchemeKind { PopulationSpectral, EmpiricalSpectral };

/// Gaussian measure on f = sum_j theta_j e_j with theta ~ N(mean, coeff_cov).
/// Mean and covariance evaluate at points through the e-basis.
class GaussianPosterior {
 public:
  GaussianPosterior(PosteriorKind kind,
                    std::shared_ptr<const ForwardSVD> op, SeriesFunction mean,
                    Eigen::MatrixXd coeff_cov, double prior_tail);

  PosteriorKind kind() const { return kind_; }
  std::optional<SchemeKind> scheme() const { return scheme_; }
  Index inducing_count() const { return m_; }
  void set_scheme(SchemeKind scheme, Index m) {
    scheme_ = scheme;
    m_ = m;
  }

  const ForwardSVD& op() const { return *op_; }
  const SeriesFunction& mean_coeffs() const { return mean_; }
  const Eigen::MatrixXd& coeff_cov() const { return cov_; }
  Index truncation() const { return mean_.truncation(); }
  /// Prior variance mass sum_{j > J} lambda_j outside the truncation.
  double prior_tail() const { return prior_tail_; }

  double mean(Point t) const;
  double covariance(Point t, Point s) const;
  double variance(Point t) const { return covariance(t, t); }
  /// Integral of C(t, t) d mu(t) = trace of the coefficient covariance.
  double variance_mass() const { return cov_.trace(); }

  /// Covariance matrix on a grid, C[a][b] = cov(grid[a], grid[b]).
  Eigen::MatrixXd covariance_matrix(std::span<const Point> grid) const;

 private:
  PosteriorKind kind_;
  std::optional<SchemeKind> scheme_;
  Index m_ = 0;
  std::shared_ptr<const ForwardSVD> op_;
  SeriesFunction mean_;
  Eigen::MatrixXd cov_;
  double prior_tail_;
};

/// Exact conjugate posterior in coefficient form:
///   mean a = Lambda K Phi^T w, w = (K_ff + sigma2 I)^{-1} y
///   cov    = Lambda - (Phi K Lambda)^T (K_ff + sigma2 I)^{-1} (Phi K Lambda)
GaussianPosterior exact_posterior(std::shared_ptr<const ForwardSVD> op,
                                  const PriorSpectrum& prior,
                                  const Dataset& data, const GramSet& gram);
GaussianPosterior exact_posterior(std::shared_ptr<const ForwardSVD> op,
                                  const PriorSpectrum& prior,
                                  const Dataset& data);

/// log N(y | 0, K_ff + sigma2 I).
double log_marginal_likelihood(const Dataset& data, const GramSet& gram);

/// k(t, s) = sum_j lambda_j e_j(t) e_j(s).
double prior_covariance(const ForwardSVD& op, const PriorSpectrum& prior,
                        Point t, Point s);

/// Cov(f(t), A f(x)) = sum_j lambda_j kappa_j e_j(t) g_j(x).
double cross_covariance(const ForwardSVD& op, const PriorSpectrum& prior,
                        Point t, Point x);

/// Kernel-form evaluation of the exact posterior, working with n-vectors
/// K_{t,Af} instead of coefficients.
class KernelPosterior {
 public:
  KernelPosterior(std::shared_ptr<const ForwardSVD> op, PriorSpectrum prior,
                  const Dataset& data, const GramSet& gram);

  /// K_{t,Af} as an n-vector.
  Eigen::VectorXd cross_row(Point t) const;
  double mean(Point t) const;
  double covariance(Point t, Point s) const;

 private:
  std::shared_ptr<const ForwardSVD> op_;
  PriorSpectrum prior_;
  GramSet gram_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd lambda_kappa_;
};

}  // namespace invgp
