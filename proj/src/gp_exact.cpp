#include "invgp/gp_exact.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <sstream>

#include "invgp/errors.hpp"

namespace invgp {

namespace {

constexpr int kJitterDoublings = 6;
constexpr double kJitterScale = 1e-10;

}  // namespace

void Dataset::validate() const {
  if (x.empty()) throw DataError("dataset must contain at least one point");
  if (static_cast<Index>(x.size()) != y.size()) {
    throw DataError("dataset x and y lengths differ");
  }
  if (!(sigma2 > 0.0)) throw DataError("dataset noise variance must be > 0");
}

Eigen::MatrixXd design_features(const ForwardSVD& op, const Dataset& data,
                                Index J) {
  return op.basis_matrix(Basis::G, data.x, J);
}

GramSet::GramSet(Eigen::MatrixXd features, Eigen::VectorXd forward_weights,
                 double sigma2)
    : features_(std::move(features)),
      weights_(std::move(forward_weights)),
      sigma2_(sigma2) {
  const Index n = features_.rows();
  const Eigen::MatrixXd scaled =
      features_ * weights_.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  kff_ = Eigen::MatrixXd::Zero(n, n);
  kff_.selfadjointView<Eigen::Lower>().rankUpdate(scaled);
  kff_.triangularView<Eigen::StrictlyUpper>() = kff_.transpose();
  // LLT does not notice NaN pivots, so reject non-finite input up front.
  if (!kff_.allFinite() || !std::isfinite(sigma2_)) {
    throw NumericalError("K_ff contains non-finite entries");
  }

  Eigen::MatrixXd shifted = kff_;
  shifted.diagonal().array() += sigma2_;
  chol_.compute(shifted);
  if (chol_.info() == Eigen::Success) return;

  const double base = kJitterScale * shifted.diagonal().mean();
  double jitter = base;
  for (int attempt = 0; attempt <= kJitterDoublings; ++attempt, jitter *= 2.0) {
    Eigen::MatrixXd trial = shifted;
    trial.diagonal().array() += jitter;
    chol_.compute(trial);
    if (chol_.info() == Eigen::Success) {
      jitter_ = jitter;
      return;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(shifted, Eigen::EigenvaluesOnly);
  std::ostringstream msg;
  msg << "Cholesky of K_ff + sigma2 I failed after jitter " << jitter / 2.0
      << "; min eigenvalue " << eig.eigenvalues().minCoeff();
  throw NumericalError(msg.str());
}

double GramSet::log_det() const {
  return 2.0 * chol_.matrixLLT().diagonal().array().log().sum();
}

GramSet build_gram(const ForwardSVD& op, const PriorSpectrum& prior,
                   const Dataset& data) {
  data.validate();
  const Index J = prior.truncation();
  const Eigen::VectorXd kappa = op.singular_values(J);
  Eigen::VectorXd w = prior.eigenvalues().cwiseProduct(kappa.cwiseAbs2());
  return GramSet(design_features(op, data, J), std::move(w), data.sigma2);
}

GaussianPosterior::GaussianPosterior(PosteriorKind kind,
                                     std::shared_ptr<const ForwardSVD> op,
                                     SeriesFunction mean,
                                     Eigen::MatrixXd coeff_cov,
                                     double prior_tail)
    : kind_(kind),
      op_(std::move(op)),
      mean_(std::move(mean)),
      cov_(std::move(coeff_cov)),
      prior_tail_(prior_tail) {
  if (mean_.basis() != Basis::E) {
    throw ContractError("posterior mean must be in the e-basis");
  }
  if (cov_.rows() != mean_.truncation() || cov_.cols() != mean_.truncation()) {
    throw ContractError("posterior covariance size does not match the mean");
  }
}

double GaussianPosterior::mean(Point t) const {
  return eval_series(mean_, *op_, t);
}

double GaussianPosterior::covariance(Point t, Point s) const {
  const Index J = truncation();
  const Eigen::VectorXd et = op_->basis_values(Basis::E, t, J);
  if (t == s) return et.dot(cov_ * et);
  const Eigen::VectorXd es = op_->basis_values(Basis::E, s, J);
  return et.dot(cov_ * es);
}

Eigen::MatrixXd GaussianPosterior::covariance_matrix(std::span<const Point> grid) const {
  const Eigen::MatrixXd E = op_->basis_matrix(Basis::E, grid, truncation());
  Eigen::MatrixXd C = E * cov_ * E.transpose();
  return 0.5 * (C + C.transpose());
}

GaussianPosterior exact_posterior(std::shared_ptr<const ForwardSVD> op,
                                  const PriorSpectrum& prior,
                                  const Dataset& data, const GramSet& gram) {
  data.validate();
  const Index J = prior.truncation();
  if (gram.features().cols() != J || gram.size() != data.size()) {
    throw ContractError("gram does not match prior truncation or dataset");
  }
  const Eigen::VectorXd lk =
      prior.eigenvalues().cwiseProduct(op->singular_values(J));
  // Phi K Lambda, n x J
  const Eigen::MatrixXd cross = gram.features() * lk.asDiagonal();
  const Eigen::VectorXd w = gram.chol().solve(data.y);
  Eigen::VectorXd mean = cross.transpose() * w;

  const Eigen::MatrixXd B = gram.chol().matrixL().solve(cross);
  Eigen::MatrixXd cov = -B.transpose() * B;
  cov.diagonal() += prior.eigenvalues();
  cov = 0.5 * (cov + cov.transpose()).eval();

  return GaussianPosterior(PosteriorKind::Exact, std::move(op),
                           SeriesFunction(std::move(mean), Basis::E),
                           std::move(cov), prior.tail_mass());
}

GaussianPosterior exact_posterior(std::shared_ptr<const ForwardSVD> op,
                                  const PriorSpectrum& prior,
                                  const Dataset& data) {
  const GramSet gram = build_gram(*op, prior, data);
  return exact_posterior(std::move(op), prior, data, gram);
}

double log_marginal_likelihood(const Dataset& data, const GramSet& gram) {
  data.validate();
  if (gram.size() != data.size()) {
    throw ContractError("gram does not match dataset size");
  }
  const Eigen::VectorXd w = gram.chol().solve(data.y);
  const double n = static_cast<double>(data.size());
  const double lml = -0.5 * (n * std::log(2.0 * std::numbers::pi) + gram.log_det()) -
                     0.5 * data.y.dot(w);
  if (!std::isfinite(lml)) throw NumericalError("log marginal likelihood is not finite");
  return lml;
}

double prior_covariance(const ForwardSVD& op, const PriorSpectrum& prior,
                        Point t, Point s) {
  const Index J = prior.truncation();
  const Eigen::VectorXd et = op.basis_values(Basis::E, t, J);
  const Eigen::VectorXd es = op.basis_values(Basis::E, s, J);
  return (prior.eigenvalues().array() * et.array() * es.array()).sum();
}

double cross_covariance(const ForwardSVD& op, const PriorSpectrum& prior,
                        Point t, Point x) {
  const Index J = prior.truncation();
  const Eigen::VectorXd et = op.basis_values(Basis::E, t, J);
  const Eigen::VectorXd gx = op.basis_values(Basis::G, x, J);
  return (prior.eigenvalues().array() * op.singular_values(J).array() *
          et.array() * gx.array())
      .sum();
}

KernelPosterior::KernelPosterior(std::shared_ptr<const ForwardSVD> op,
                                 PriorSpectrum prior, const Dataset& data,
                                 const GramSet& gram)
    : op_(std::move(op)), prior_(std::move(prior)), gram_(gram) {
  weights_ = gram.solve(data.y);
  lambda_kappa_ = prior_.eigenvalues().cwiseProduct(
      op_->singular_values(prior_.truncation()));
}

Eigen::VectorXd KernelPosterior::cross_row(Point t) const {
  const Eigen::VectorXd et =
      op_->basis_values(Basis::E, t, prior_.truncation());
  return gram_.features() * lambda_kappa_.cwiseProduct(et);
}

double KernelPosterior::mean(Point t) const {
  return cross_row(t).dot(weights_);
}

double KernelPosterior::covariance(Point t, Point s) const {
  const Eigen::VectorXd kt = cross_row(t);
  const Eigen::VectorXd ks = cross_row(s);
  return prior_covariance(*op_, prior_, t, s) - kt.dot(gram_.solve(ks).col(0));
}

}  // namespace invgp
