#pragma once

// Inducing-variable variational posteriors for the linear inverse model.
//
// Both spectral schemes give a diagonal K_uu, so the scheme stores its
// diagonal. Fitting works in whitened coordinates u = K_uu^{1/2} w, which
// stays well defined when trailing eigenvalues of K_ff vanish numerically.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <utility>

#include "invgp/gp_exact.hpp"
#include "invgp/spectral_model.hpp"

namespace invgp {

class InducingScheme {
 public:
  using CrossEval = std::function<Eigen::VectorXd(Point)>;

  InducingScheme(SchemeKind kind, Eigen::VectorXd kuu_diag, Eigen::MatrixXd kuf,
                 Eigen::MatrixXd ktu_coeffs, CrossEval cross_eval);

  SchemeKind kind() const { return kind_; }
  Index m() const { return kuu_.size(); }
  Index n() const { return kuf_.cols(); }

  /// Diagonal of K_uu = Cov(u).
  const Eigen::VectorXd& kuu_diag() const { return kuu_; }
  Eigen::MatrixXd kuu() const { return kuu_.asDiagonal(); }
  /// K_uf = Cov(u, A f(x_i)), m x n.
  const Eigen::MatrixXd& kuf() const { return kuf_; }
  /// Cov(f(t), u) = e(t)^T ktu_coeffs, with ktu_coeffs of size J x m.
  const Eigen::MatrixXd& ktu_coeffs() const { return ktu_; }
  /// Cov(f(t), u) evaluated from the scheme's defining kernel formula.
  Eigen::VectorXd cross_covariance(Point t) const { return cross_eval_(t); }

  /// Q_ff = K_fu K_uu^{-1} K_uf as an explicit n x n matrix.
  Eigen::MatrixXd qff() const;
  /// diag(Q_ff) without forming the n x n matrix.
  Eigen::VectorXd qff_diagonal() const;
  /// K_uu^{-1/2} K_uf, with rows of degenerate (zero-variance) u set to 0.
  Eigen::MatrixXd whitened_kuf() const;
  /// K_uu^{-1/2} as a diagonal, 0 where K_uu vanishes.
  Eigen::VectorXd inv_sqrt_kuu() const;

 private:
  SchemeKind kind_;
  Eigen::VectorXd kuu_;
  Eigen::MatrixXd kuf_;
  Eigen::MatrixXd ktu_;
  CrossEval cross_eval_;
};

/// u_j = int A f(x) g_j(x) dG(x), j <= m:
///   K_uu = diag(lambda_j kappa_j^2), K_uf[j][i] = lambda_j kappa_j^2 g_j(x_i),
///   Cov(f(t), u_j) = lambda_j kappa_j e_j(t).
/// Costs O(n m) and never touches an n x n matrix.
InducingScheme population_scheme(std::shared_ptr<const ForwardSVD> op,
                                 const PriorSpectrum& prior,
                                 const Dataset& data, Index m);

/// u_j = v_j^T (A f(x_1), ..., A f(x_n)) for the top-m eigenvectors v_j of
/// K_ff with eigenvalues rho_1 >= ... >= rho_m.
InducingScheme empirical_scheme(std::shared_ptr<const ForwardSVD> op,
                                const PriorSpectrum& prior,
                                const Dataset& data, const GramSet& gram,
                                Index m);

/// Eigenpairs of K_ff sorted by decreasing eigenvalue (stable in the
/// solver's index order), negatives clamped to 0.
struct GramEigensystem {
  Eigen::VectorXd rho;
  Eigen::MatrixXd vectors;  // column j pairs with rho(j)
};

/// Throws NumericalError if the solver fails or an eigenvalue falls below
/// -1e-10 * trace(K_ff).
GramEigensystem gram_eigensystem(const GramSet& gram);

/// Same as above but reuses a precomputed eigensystem, so sweeping m costs
/// one O(n^3) decomposition in total.
InducingScheme empirical_scheme(std::shared_ptr<const ForwardSVD> op,
                                const PriorSpectrum& prior,
                                const Dataset& data, const GramSet& gram,
                                const GramEigensystem& eig, Index m);

struct VariationalParams {
  Eigen::VectorXd mu_u;     // optimal mean of u
  Eigen::MatrixXd sigma_u;  // optimal covariance of u
  // Same quantities for the whitened variables w = K_uu^{-1/2} u.
  Eigen::VectorXd mu_w;
  Eigen::MatrixXd sigma_w;
};

/// mu_u = sigma^{-2} K_uu (K_uu + sigma^{-2} K_uf K_uf^T)^{-1} K_uf y,
/// Sigma_u = K_uu (K_uu + sigma^{-2} K_uf K_uf^T)^{-1} K_uu.
VariationalParams fit_variational(const InducingScheme& scheme,
                                  const Dataset& data);

/// The variational posterior in coefficient form:
///   mean = C K_uu^{-1} mu_u,  cov = Lambda - C K_uu^{-1} (K_uu - Sigma_u) K_uu^{-1} C^T
/// with C = ktu_coeffs.
GaussianPosterior variational_posterior(const InducingScheme& scheme,
                                        const VariationalParams& params,
                                        const PriorSpectrum& prior,
                                        std::shared_ptr<const ForwardSVD> op);

/// Pointwise evaluation of the variational mean/covariance through
/// InducingScheme::cross_covariance rather than coefficients.
class InducingPredictor {
 public:
  InducingPredictor(const InducingScheme& scheme, const VariationalParams& params,
                    std::shared_ptr<const ForwardSVD> op, PriorSpectrum prior);

  double mean(Point t) const;
  double covariance(Point t, Point s) const;

 private:
  Eigen::VectorXd whitened_cross(Point t) const;

  InducingScheme scheme_;
  Eigen::VectorXd inv_sqrt_;
  Eigen::VectorXd mu_w_;
  Eigen::MatrixXd correction_;  // I - Sigma_w
  std::shared_ptr<const ForwardSVD> op_;
  PriorSpectrum prior_;
};

/// KL(variational || exact posterior), evaluated from the n x n matrices:
///   1/2 [ y^T((s2 I + Q)^{-1} - (s2 I + K)^{-1}) y
///         + log |s2 I + Q| / |s2 I + K| + s2^{-1} Tr(K - Q) ].
/// Round-off negatives (within 1e-10 of the summed term magnitudes) are
/// returned as 0; larger negatives raise NumericalError.
double kl_to_posterior(const InducingScheme& scheme, const Dataset& data,
                       const GramSet& gram);

/// Collapsed evidence lower bound
///   log N(y | 0, s2 I + Q) - (2 s2)^{-1} Tr(K - Q),
/// evaluated through the m x m Woodbury identities. `kff_diag` is diag(K_ff).
double elbo(const InducingScheme& scheme, const Dataset& data,
            const Eigen::VectorXd& kff_diag);
double elbo(const InducingScheme& scheme, const Dataset& data,
            const GramSet& gram);

/// diag(K_ff) = sum_j lambda_j kappa_j^2 g_j(x_i)^2, streamed point by point.
Eigen::VectorXd kff_diagonal(const ForwardSVD& op, const PriorSpectrum& prior,
                             const Dataset& data);

/// (Tr(K_ff - Q_ff), ||K_ff - Q_ff||_2).
std::pair<double, double> trace_and_norm_gap(const InducingScheme& scheme,
                                             const GramSet& gram);

/// Tr(K_ff - Q_ff) from diagonals only.
double trace_gap(const InducingScheme& scheme, const Eigen::VectorXd& kff_diag);

}  // namespace invgp
