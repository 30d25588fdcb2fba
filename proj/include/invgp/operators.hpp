#pragma once

// Concrete singular systems: Volterra integration, the Dirichlet heat
// semigroup on [0, 1], and the Radon transform on the unit disc.

#include <memory>

#include "invgp/spectral_model.hpp"

namespace invgp {

/// A f(x) = int_0^x f(s) ds on L2[0, 1]. kappa_j = ((j - 1/2) pi)^{-1},
/// e_j = sqrt2 cos((j - 1/2) pi x), g_j = sqrt2 sin((j - 1/2) pi x).
class VolterraOp final : public ForwardSVD {
 public:
  std::string_view name() const override { return "volterra"; }
  double singular_value(Index j) const override;
  IllPosedness illposedness() const override { return MildlyIllPosed{1.0}; }
  const Domain& parameter_domain() const override { return domain_; }
  const Domain& design_domain() const override { return domain_; }
  std::vector<Point> sample_design(Index n, std::uint64_t seed) const override;
  QuadratureRule parameter_quadrature(Index J) const override;
  QuadratureRule design_quadrature(Index J) const override;

  /// Direct evaluation of int_0^x f(s) ds by Gauss-Legendre quadrature.
  template <class F>
  static double apply(F&& f, double x, std::size_t nodes = 64);

 protected:
  void eval_e(Point t, std::span<double> out) const override;
  void eval_g(Point x, std::span<double> out) const override;

 private:
  Domain domain_{DomainKind::UnitInterval};
};

/// Initial condition -> solution at time T of u_t = u_xx on [0, 1] with
/// Dirichlet boundary. kappa_j = exp(-j^2 pi^2 T), e_j = g_j = sqrt2 sin(j pi x).
class HeatOp final : public ForwardSVD {
 public:
  explicit HeatOp(double T);

  double diffusion_time() const { return T_; }

  std::string_view name() const override { return "heat"; }
  double singular_value(Index j) const override;
  IllPosedness illposedness() const override;
  const Domain& parameter_domain() const override { return domain_; }
  const Domain& design_domain() const override { return domain_; }
  std::vector<Point> sample_design(Index n, std::uint64_t seed) const override;
  QuadratureRule parameter_quadrature(Index J) const override;
  QuadratureRule design_quadrature(Index J) const override;

 protected:
  void eval_e(Point t, std::span<double> out) const override;
  void eval_g(Point x, std::span<double> out) const override;

 private:
  double T_;
  Domain domain_{DomainKind::UnitInterval};
};

/// Zernike (degree, signed order) pair for a single index j >= 1.
struct ZernikeIndex {
  int degree;  // m_j
  int order;   // l_j, |l_j| <= m_j, m_j - l_j even
};

ZernikeIndex radon_index(Index j);

/// Radial Zernike polynomial R_n^k(r) via the three-term radial recurrence.
double zernike_radial(int n, int k, double r);

/// Chebyshev polynomial of the second kind U_n(s).
double chebyshev_u(int n, double s);

/// Radon transform on the unit disc, normalized so that
///   A f(s, phi) = (2 sqrt(1 - s^2))^{-1} * (integral of f along the line
///   at signed distance s and normal angle phi).
/// Parameter measure mu: Lebesgue / pi on the disc. Design distribution G:
/// density 2 pi^{-2} sqrt(1 - s^2) on [0, 1] x [0, 2 pi).
///   e_j(r, theta) = sqrt(m + 1) R_m^{|l|}(r) a_l(theta)
///   g_j(s, phi)   = U_m(s) a_l(phi)
///   kappa_j       = (m + 1)^{-1/2}
/// with a_0 = 1, a_l = sqrt2 cos(l .) for l > 0 and sqrt2 sin(l .) for l < 0.
class RadonOp final : public ForwardSVD {
 public:
  std::string_view name() const override { return "radon"; }
  double singular_value(Index j) const override;
  IllPosedness illposedness() const override { return MildlyIllPosed{0.25}; }
  double basis_growth() const override { return 0.5; }
  const Domain& parameter_domain() const override { return disc_; }
  const Domain& design_domain() const override { return lines_; }
  std::vector<Point> sample_design(Index n, std::uint64_t seed) const override;
  QuadratureRule parameter_quadrature(Index J) const override;
  QuadratureRule design_quadrature(Index J) const override;

  /// Normalized line integral of a Cartesian function f(x, y).
  template <class F>
  static double apply(F&& f, double s, double phi, std::size_t nodes = 64);

 protected:
  void eval_e(Point t, std::span<double> out) const override;
  void eval_g(Point x, std::span<double> out) const override;

 private:
  Domain disc_{DomainKind::UnitDisc};
  Domain lines_{DomainKind::LineSpace};
};

std::shared_ptr<const ForwardSVD> volterra();
std::shared_ptr<const ForwardSVD> heat(double T);
std::shared_ptr<const ForwardSVD> radon();

/// n i.i.d. draws from op's design distribution; same seed, same points.
std::vector<Point> sample_design(const ForwardSVD& op, Index n,
                                 std::uint64_t seed);

}  // namespace invgp

#include "invgp/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace invgp {

template <class F>
double VolterraOp::apply(F&& f, double x, std::size_t nodes) {
  const auto rule = gauss_legendre(nodes, 0.0, x);
  double acc = 0.0;
  for (std::size_t q = 0; q < nodes; ++q) acc += rule.weights[q] * f(rule.nodes[q]);
  return acc;
}

template <class F>
double RadonOp::apply(F&& f, double s, double phi, std::size_t nodes) {
  // With t = h * tau, h = sqrt(1 - s^2), the prefactor (2h)^{-1} cancels the
  // Jacobian and leaves half the tau-integral over [-1, 1].
  const double h = std::sqrt(std::max(0.0, 1.0 - s * s));
  const double c = std::cos(phi);
  const double sn = std::sin(phi);
  const auto rule = gauss_legendre(nodes);
  double acc = 0.0;
  for (std::size_t q = 0; q < nodes; ++q) {
    const double t = h * rule.nodes[q];
    acc += rule.weights[q] * f(s * c - t * sn, s * sn + t * c);
  }
  return 0.5 * acc;
}

}  // namespace invgp
