#include "invgp/gp_variational.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "invgp/errors.hpp"

namespace invgp {

namespace {

constexpr double kKlRoundoff = 1e-10;

constexpr double kNegativeEigenTolerance = 1e-10;

Eigen::VectorXd lambda_kappa(const ForwardSVD& op, const PriorSpectrum& prior) {
  return prior.eigenvalues().cwiseProduct(op.singular_values(prior.truncation()));
}

}  // namespace

InducingScheme::InducingScheme(SchemeKind kind, Eigen::VectorXd kuu_diag,
                               Eigen::MatrixXd kuf, Eigen::MatrixXd ktu_coeffs,
                               CrossEval cross_eval)
    : kind_(kind),
      kuu_(std::move(kuu_diag)),
      kuf_(std::move(kuf)),
      ktu_(std::move(ktu_coeffs)),
      cross_eval_(std::move(cross_eval)) {
  if (kuf_.rows() != kuu_.size() || ktu_.cols() != kuu_.size()) {
    throw ContractError("inducing scheme matrices have inconsistent sizes");
  }
  if ((kuu_.array() < 0.0).any()) {
    throw ContractError("K_uu must be positive semi-definite");
  }
}

Eigen::VectorXd InducingScheme::inv_sqrt_kuu() const {
  return kuu_.unaryExpr([](double d) { return d > 0.0 ? 1.0 / std::sqrt(d) : 0.0; });
}

Eigen::MatrixXd InducingScheme::whitened_kuf() const {
  return inv_sqrt_kuu().asDiagonal() * kuf_;
}

Eigen::MatrixXd InducingScheme::qff() const {
  const Eigen::MatrixXd W = whitened_kuf();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(W.cols(), W.cols());
  q.selfadjointView<Eigen::Lower>().rankUpdate(W.transpose());
  q.triangularView<Eigen::StrictlyUpper>() = q.transpose();
  return q;
}

Eigen::VectorXd InducingScheme::qff_diagonal() const {
  return whitened_kuf().colwise().squaredNorm().transpose();
}

InducingScheme population_scheme(std::shared_ptr<const ForwardSVD> op,
                                 const PriorSpectrum& prior,
                                 const Dataset& data, Index m) {
  data.validate();
  const Index J = prior.truncation();
  if (m < 1 || m > J) {
    std::ostringstream msg;
    msg << "population scheme requires 1 <= m <= J (m=" << m << ", J=" << J << ")";
    throw ParameterError(msg.str());
  }
  const Eigen::VectorXd lk = lambda_kappa(*op, prior).head(m);
  const Eigen::VectorXd w = lk.cwiseProduct(op->singular_values(m));

  const Index n = data.size();
  Eigen::MatrixXd kuf(m, n);
  Eigen::VectorXd g(m);
  for (Index i = 0; i < n; ++i) {
    op->basis_values(Basis::G, data.x[static_cast<std::size_t>(i)],
                     std::span<double>(g.data(), static_cast<std::size_t>(m)));
    kuf.col(i) = w.cwiseProduct(g);
  }
  Eigen::MatrixXd ktu = Eigen::MatrixXd::Zero(J, m);
  ktu.topRows(m).diagonal() = lk;

  auto cross = [op, lk, m](Point t) -> Eigen::VectorXd {
    return lk.cwiseProduct(op->basis_values(Basis::E, t, m));
  };
  return InducingScheme(SchemeKind::PopulationSpectral, w, std::move(kuf),
                        std::move(ktu), std::move(cross));
}

GramEigensystem gram_eigensystem(const GramSet& gram) {
  const Index n = gram.size();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram.kff());
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition of K_ff failed");
  }
  const Eigen::VectorXd& ev = solver.eigenvalues();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&ev](Index a, Index b) { return ev(a) > ev(b); });

  const double floor = -kNegativeEigenTolerance * std::abs(gram.kff().trace());
  GramEigensystem out;
  out.rho.resize(n);
  out.vectors.resize(n, n);
  for (Index j = 0; j < n; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    const double r = ev(src);
    if (r < floor) {
      std::ostringstream msg;
      msg << "K_ff has eigenvalue " << r << " below tolerance " << floor;
      throw NumericalError(msg.str());
    }
    out.rho(j) = std::max(r, 0.0);
    out.vectors.col(j) = solver.eigenvectors().col(src);
  }
  return out;
}

InducingScheme empirical_scheme(std::shared_ptr<const ForwardSVD> op,
                                const PriorSpectrum& prior,
                                const Dataset& data, const GramSet& gram,
                                Index m) {
  return empirical_scheme(std::move(op), prior, data, gram,
                          gram_eigensystem(gram), m);
}

InducingScheme empirical_scheme(std::shared_ptr<const ForwardSVD> op,
                                const PriorSpectrum& prior,
                                const Dataset& data, const GramSet& gram,
                                const GramEigensystem& eig, Index m) {
  data.validate();
  const Index n = data.size();
  if (gram.size() != n || gram.features().cols() != prior.truncation() ||
      eig.rho.size() != n) {
    throw ContractError("gram does not match dataset or prior truncation");
  }
  if (m < 1 || m > n) {
    std::ostringstream msg;
    msg << "empirical scheme requires 1 <= m <= n (m=" << m << ", n=" << n << ")";
    throw ParameterError(msg.str());
  }
  Eigen::VectorXd rho = eig.rho.head(m);
  auto V = std::make_shared<const Eigen::MatrixXd>(eig.vectors.leftCols(m));

  Eigen::MatrixXd kuf = rho.asDiagonal() * V->transpose();
  const Eigen::VectorXd lk = lambda_kappa(*op, prior);
  Eigen::MatrixXd ktu = lk.asDiagonal() * (gram.features().transpose() * *V);

  auto features = std::make_shared<const Eigen::MatrixXd>(gram.features());
  auto cross = [op, lk, features, V](Point t) -> Eigen::VectorXd {
    // k_fA(t, x_i) at every design point, projected onto v_1..v_m.
    const Eigen::VectorXd kt =
        *features * lk.cwiseProduct(op->basis_values(Basis::E, t, lk.size()));
    return V->transpose() * kt;
  };
  return InducingScheme(SchemeKind::EmpiricalSpectral, std::move(rho),
                        std::move(kuf), std::move(ktu), std::move(cross));
}

VariationalParams fit_variational(const InducingScheme& scheme,
                                  const Dataset& data) {
  data.validate();
  if (scheme.n() != data.size()) {
    throw ContractError("scheme was built for a different number of points");
  }
  const double s2 = data.sigma2;
  const Index m = scheme.m();
  const Eigen::MatrixXd W = scheme.whitened_kuf();
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(m, m);
  B.selfadjointView<Eigen::Lower>().rankUpdate(W, 1.0 / s2);
  B.triangularView<Eigen::StrictlyUpper>() = B.transpose();
  Eigen::LLT<Eigen::MatrixXd> chol(B);
  if (chol.info() != Eigen::Success) {
    throw NumericalError("variational inner matrix is not positive definite");
  }

  VariationalParams p;
  p.mu_w = chol.solve(W * data.y) / s2;
  p.sigma_w = chol.solve(Eigen::MatrixXd::Identity(m, m));
  p.sigma_w = 0.5 * (p.sigma_w + p.sigma_w.transpose()).eval();
  const Eigen::VectorXd sq = scheme.kuu_diag().cwiseSqrt();
  p.mu_u = sq.cwiseProduct(p.mu_w);
  p.sigma_u = sq.asDiagonal() * p.sigma_w * sq.asDiagonal();
  return p;
}

GaussianPosterior variational_posterior(const InducingScheme& scheme,
                                        const VariationalParams& params,
                                        const PriorSpectrum& prior,
                                        std::shared_ptr<const ForwardSVD> op) {
  const Index J = prior.truncation();
  if (scheme.ktu_coeffs().rows() != J) {
    throw ContractError("scheme truncation differs from prior truncation");
  }
  const Index m = scheme.m();
  const Eigen::MatrixXd Cw = scheme.ktu_coeffs() * scheme.inv_sqrt_kuu().asDiagonal();
  Eigen::VectorXd mean = Cw * params.mu_w;
  const Eigen::MatrixXd correction =
      Eigen::MatrixXd::Identity(m, m) - params.sigma_w;
  Eigen::MatrixXd cov = -(Cw * correction * Cw.transpose());
  cov.diagonal() += prior.eigenvalues();
  cov = 0.5 * (cov + cov.transpose()).eval();

  GaussianPosterior post(PosteriorKind::Variational, std::move(op),
                         SeriesFunction(std::move(mean), Basis::E),
                         std::move(cov), prior.tail_mass());
  post.set_scheme(scheme.kind(), m);
  return post;
}

InducingPredictor::InducingPredictor(const InducingScheme& scheme,
                                     const VariationalParams& params,
                                     std::shared_ptr<const ForwardSVD> op,
                                     PriorSpectrum prior)
    : scheme_(scheme),
      inv_sqrt_(scheme.inv_sqrt_kuu()),
      mu_w_(params.mu_w),
      correction_(Eigen::MatrixXd::Identity(scheme.m(), scheme.m()) - params.sigma_w),
      op_(std::move(op)),
      prior_(std::move(prior)) {}

Eigen::VectorXd InducingPredictor::whitened_cross(Point t) const {
  return inv_sqrt_.cwiseProduct(scheme_.cross_covariance(t));
}

double InducingPredictor::mean(Point t) const {
  return whitened_cross(t).dot(mu_w_);
}

double InducingPredictor::covariance(Point t, Point s) const {
  const Eigen::VectorXd at = whitened_cross(t);
  const Eigen::VectorXd as = whitened_cross(s);
  return prior_covariance(*op_, prior_, t, s) - at.dot(correction_ * as);
}

double kl_to_posterior(const InducingScheme& scheme, const Dataset& data,
                       const GramSet& gram) {
  data.validate();
  if (gram.size() != data.size() || scheme.n() != data.size()) {
    throw ContractError("kl_to_posterior: size mismatch");
  }
  const double s2 = data.sigma2;
  const Eigen::MatrixXd Q = scheme.qff();
  Eigen::MatrixXd shifted = Q;
  shifted.diagonal().array() += s2;
  Eigen::LLT<Eigen::MatrixXd> cq(shifted);
  if (cq.info() != Eigen::Success) {
    throw NumericalError("Cholesky of Q_ff + sigma2 I failed");
  }
  const double quad_q = data.y.dot(cq.solve(data.y));
  const double quad_k = data.y.dot(gram.solve(data.y).col(0));
  const double logdet_q = 2.0 * cq.matrixLLT().diagonal().array().log().sum();
  const double logdet_k = gram.log_det();
  const double trace = (gram.kff() - Q).trace();
  const double kl = 0.5 * ((quad_q - quad_k) + (logdet_q - logdet_k) + trace / s2);
  if (!std::isfinite(kl)) throw NumericalError("kl_to_posterior is not finite");
  if (kl >= 0.0) return kl;
  // The terms cancel almost exactly once Q_ff reaches K_ff, so a tiny
  // negative value is round-off. Anything larger means a broken factorization.
  const double scale = 1.0 + std::abs(quad_q) + std::abs(quad_k) + std::abs(logdet_q) +
                       std::abs(logdet_k) + std::abs(trace / s2);
  if (kl >= -kKlRoundoff * scale) return 0.0;
  std::ostringstream msg;
  msg << "kl_to_posterior: negative divergence " << kl;
  throw NumericalError(msg.str());
}

double elbo(const InducingScheme& scheme, const Dataset& data,
            const Eigen::VectorXd& kff_diag) {
  data.validate();
  if (scheme.n() != data.size() || kff_diag.size() != data.size()) {
    throw ContractError("elbo: size mismatch");
  }
  const double s2 = data.sigma2;
  const double n = static_cast<double>(data.size());
  const Index m = scheme.m();
  const Eigen::MatrixXd W = scheme.whitened_kuf();
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(m, m);
  B.selfadjointView<Eigen::Lower>().rankUpdate(W, 1.0 / s2);
  B.triangularView<Eigen::StrictlyUpper>() = B.transpose();
  Eigen::LLT<Eigen::MatrixXd> chol(B);
  if (chol.info() != Eigen::Success) {
    throw NumericalError("elbo: inner matrix is not positive definite");
  }
  const Eigen::VectorXd wy = W * data.y;
  const double logdet = n * std::log(s2) +
                        2.0 * chol.matrixLLT().diagonal().array().log().sum();
  const double quad = data.y.squaredNorm() / s2 - wy.dot(chol.solve(wy)) / (s2 * s2);
  const double trace = trace_gap(scheme, kff_diag);
  const double bound = -0.5 * (n * std::log(2.0 * std::numbers::pi) + logdet) -
                       0.5 * quad - 0.5 * trace / s2;
  if (!std::isfinite(bound)) {
    throw NumericalError("elbo is not finite (noise variance too small for double precision?)");
  }
  return bound;
}

double elbo(const InducingScheme& scheme, const Dataset& data,
            const GramSet& gram) {
  return elbo(scheme, data, Eigen::VectorXd(gram.kff().diagonal()));
}

Eigen::VectorXd kff_diagonal(const ForwardSVD& op, const PriorSpectrum& prior,
                             const Dataset& data) {
  const Index J = prior.truncation();
  const Eigen::VectorXd kappa = op.singular_values(J);
  const Eigen::VectorXd w = prior.eigenvalues().cwiseProduct(kappa.cwiseAbs2());
  Eigen::VectorXd diag(data.size());
  Eigen::VectorXd g(J);
  for (Index i = 0; i < data.size(); ++i) {
    op.basis_values(Basis::G, data.x[static_cast<std::size_t>(i)],
                    std::span<double>(g.data(), static_cast<std::size_t>(J)));
    diag(i) = w.dot(g.cwiseAbs2());
  }
  return diag;
}

std::pair<double, double> trace_and_norm_gap(const InducingScheme& scheme,
                                             const GramSet& gram) {
  if (scheme.n() != gram.size()) {
    throw ContractError("trace_and_norm_gap: size mismatch");
  }
  const Eigen::MatrixXd D = gram.kff() - scheme.qff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(D, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition of K_ff - Q_ff failed");
  }
  return {D.trace(), eig.eigenvalues().cwiseAbs().maxCoeff()};
}

double trace_gap(const InducingScheme& scheme, const Eigen::VectorXd& kff_diag) {
  return kff_diag.sum() - scheme.qff_diagonal().sum();
}

}  // namespace invgp
