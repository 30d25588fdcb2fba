#include "invgp/spectral_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "invgp/errors.hpp"

namespace invgp {

bool Domain::contains(Point p) const {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  switch (kind) {
    case DomainKind::UnitInterval:
      return p.x >= 0.0 && p.x <= 1.0;
    case DomainKind::UnitDisc:
    case DomainKind::LineSpace:
      return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= two_pi;
  }
  return false;
}

std::string_view Domain::name() const {
  switch (kind) {
    case DomainKind::UnitInterval: return "[0,1]";
    case DomainKind::UnitDisc: return "unit disc (r, theta)";
    case DomainKind::LineSpace: return "[0,1] x [0,2pi) (s, phi)";
  }
  return "?";
}

std::string_view to_string(Basis b) { return b == Basis::E ? "e" : "g"; }

SeriesFunction::SeriesFunction(Eigen::VectorXd coeffs, Basis basis)
    : coeffs_(std::move(coeffs)), basis_(basis) {
  if (coeffs_.size() < 1) {
    throw ContractError("SeriesFunction: truncation must be positive");
  }
}

SeriesFunction SeriesFunction::zero(Index truncation, Basis basis) {
  return SeriesFunction(Eigen::VectorXd::Zero(truncation), basis);
}

namespace {

void validate_family(const DecayFamily& family) {
  if (const auto* poly = std::get_if<PolynomialDecay>(&family)) {
    if (!(poly->alpha > 0.0)) {
      throw ParameterError("polynomial prior requires alpha > 0");
    }
  } else {
    const auto& ex = std::get<ExponentialDecay>(family);
    if (!(ex.alpha >= 0.0) || !(ex.xi > 0.0) || !(ex.p >= 1.0)) {
      throw ParameterError(
          "exponential prior requires alpha >= 0, xi > 0, p >= 1");
    }
  }
}

}  // namespace

PriorSpectrum::PriorSpectrum(DecayFamily family, Index truncation)
    : family_(family) {
  validate_family(family_);
  if (truncation < 1) throw ParameterError("prior truncation must be >= 1");
  lambda_.resize(truncation);
  for (Index j = 1; j <= truncation; ++j) lambda_(j - 1) = eigenvalue(family_, j);
  if (!(lambda_(truncation - 1) > 0.0)) {
    std::ostringstream msg;
    msg << "prior eigenvalue underflows to zero before truncation J="
        << truncation;
    throw ParameterError(msg.str());
  }
}

double PriorSpectrum::eigenvalue(const DecayFamily& family, Index j) {
  const double x = static_cast<double>(j);
  if (const auto* poly = std::get_if<PolynomialDecay>(&family)) {
    return std::pow(x, -1.0 - 2.0 * poly->alpha);
  }
  const auto& ex = std::get<ExponentialDecay>(family);
  return std::pow(x, -ex.alpha) * std::exp(-ex.xi * std::pow(x, ex.p));
}

double PriorSpectrum::tail_mass() const {
  const Index J = truncation();
  if (const auto* poly = std::get_if<PolynomialDecay>(&family_)) {
    // Midpoint-rule estimate of the Hurwitz zeta tail.
    const double s = 1.0 + 2.0 * poly->alpha;
    return std::pow(static_cast<double>(J) + 0.5, 1.0 - s) / (s - 1.0);
  }
  double tail = 0.0;
  for (Index j = J + 1;; ++j) {
    const double term = eigenvalue(family_, j);
    tail += term;
    if (term <= 1e-17 * tail || term == 0.0) break;
  }
  return tail;
}

void ForwardSVD::basis_values(Basis basis, Point p, std::span<double> out) const {
  const Domain& dom = basis == Basis::E ? parameter_domain() : design_domain();
  if (!dom.contains(p)) {
    std::ostringstream msg;
    msg << name() << ": point (" << p.x << ", " << p.y << ") outside "
        << dom.name();
    throw DomainError(msg.str());
  }
  if (basis == Basis::E) {
    eval_e(p, out);
  } else {
    eval_g(p, out);
  }
}

Eigen::VectorXd ForwardSVD::basis_values(Basis basis, Point p, Index J) const {
  Eigen::VectorXd v(J);
  basis_values(basis, p, std::span<double>(v.data(), static_cast<std::size_t>(J)));
  return v;
}

double ForwardSVD::e(Index j, Point t) const {
  return basis_values(Basis::E, t, j)(j - 1);
}

double ForwardSVD::g(Index j, Point x) const {
  return basis_values(Basis::G, x, j)(j - 1);
}

Eigen::MatrixXd ForwardSVD::basis_matrix(Basis basis,
                                         std::span<const Point> points,
                                         Index J) const {
  // Column-major result; fill a row buffer and scatter.
  Eigen::MatrixXd out(static_cast<Index>(points.size()), J);
  Eigen::VectorXd row(J);
  std::span<double> buf(row.data(), static_cast<std::size_t>(J));
  for (std::size_t i = 0; i < points.size(); ++i) {
    basis_values(basis, points[i], buf);
    out.row(static_cast<Index>(i)) = row.transpose();
  }
  return out;
}

Eigen::VectorXd ForwardSVD::singular_values(Index J) const {
  Eigen::VectorXd k(J);
  for (Index j = 1; j <= J; ++j) k(j - 1) = singular_value(j);
  return k;
}

SobolevTruth::SobolevTruth(double beta_, SeriesFunction series_, double tail)
    : beta(beta_),
      series(std::move(series_)),
      sobolev_norm(invgp::sobolev_norm(series, beta_)),
      tail_mass(tail) {
  if (!(beta > 0.0)) throw ParameterError("truth smoothness beta must be > 0");
  if (series.basis() != Basis::E) {
    throw ContractError("truth must be expressed in the e-basis");
  }
}

double eval_series(const SeriesFunction& f, const ForwardSVD& op, Point t) {
  const Eigen::VectorXd b = op.basis_values(f.basis(), t, f.truncation());
  return f.coeffs().dot(b);
}

SeriesFunction forward_map(const SeriesFunction& f, const ForwardSVD& op) {
  if (f.basis() != Basis::E) {
    throw ContractError("forward_map: input must be in the e-basis");
  }
  return SeriesFunction(
      f.coeffs().cwiseProduct(op.singular_values(f.truncation())), Basis::G);
}

double sobolev_norm(const SeriesFunction& f, double beta) {
  if (beta < 0.0) throw ParameterError("sobolev_norm requires beta >= 0");
  double acc = 0.0;
  for (Index j = 1; j <= f.truncation(); ++j) {
    const double c = f.coeffs()(j - 1);
    acc += std::pow(static_cast<double>(j), 2.0 * beta) * c * c;
  }
  return std::sqrt(acc);
}

Index default_truncation(const ForwardSVD& op, const DecayFamily& family,
                         Index cap) {
  if (cap < 1) throw ParameterError("truncation cap must be >= 1");
  // Scan a horizon well past the cap and close the series with a power-law
  // remainder fitted to the last octave.
  const Index horizon = std::max<Index>(4 * cap, 64);
  std::vector<double> terms(static_cast<std::size_t>(horizon));
  for (Index j = 1; j <= horizon; ++j) {
    const double k = op.singular_value(j);
    terms[static_cast<std::size_t>(j - 1)] =
        PriorSpectrum::eigenvalue(family, j) * k * k;
  }
  double remainder = 0.0;
  const double last = terms.back();
  const double mid = terms[static_cast<std::size_t>(horizon / 2 - 1)];
  if (last > 0.0 && mid > 0.0) {
    const double s = std::log(mid / last) / std::log(2.0);
    remainder = s > 1.0 ? last * static_cast<double>(horizon) / (s - 1.0)
                        : std::numeric_limits<double>::infinity();
  }
  std::vector<double> suffix(terms.size() + 1, 0.0);
  suffix.back() = remainder;
  for (std::size_t i = terms.size(); i-- > 0;) suffix[i] = suffix[i + 1] + terms[i];
  double head = 0.0;
  for (Index J = 1; J <= cap; ++J) {
    head += terms[static_cast<std::size_t>(J - 1)];
    if (suffix[static_cast<std::size_t>(J)] < tolerance::kTruncationTail * head) {
      return J;
    }
  }
  return cap;
}

}  // namespace invgp
