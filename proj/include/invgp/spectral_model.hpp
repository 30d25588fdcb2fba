#pragma once

// Truncated spectral representations of functions, priors and forward
// operators. Every object here is immutable after construction.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace invgp {

using Index = Eigen::Index;

/// Module-level tolerances.
namespace tolerance {
/// Relative mass of the forward prior spectrum allowed beyond the truncation.
inline constexpr double kTruncationTail = 1e-12;
/// Upper bound on the automatically chosen truncation level.
inline constexpr Index kTruncationCap = 300;
}  // namespace tolerance

/// A point of a 1-D or 2-D domain. One-dimensional domains use `x` only;
/// polar domains store (radius or offset, angle) as (x, y).
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

enum class DomainKind {
  UnitInterval,  // [0, 1]
  UnitDisc,      // polar (r, theta) in [0, 1] x [0, 2pi]
  LineSpace,     // lines (s, phi) in [0, 1] x [0, 2pi]
};

struct Domain {
  DomainKind kind = DomainKind::UnitInterval;

  int dimension() const { return kind == DomainKind::UnitInterval ? 1 : 2; }
  bool contains(Point p) const;
  std::string_view name() const;
};

/// Which of the two singular bases a coefficient vector refers to: the
/// e-basis on the parameter domain T or the g-basis on the design domain X.
enum class Basis { E, G };

std::string_view to_string(Basis b);

/// A truncated expansion sum_j coeffs[j-1] * b_j in an orthonormal basis.
class SeriesFunction {
 public:
  SeriesFunction(Eigen::VectorXd coeffs, Basis basis);

  static SeriesFunction zero(Index truncation, Basis basis);

  const Eigen::VectorXd& coeffs() const { return coeffs_; }
  Basis basis() const { return basis_; }
  Index truncation() const { return coeffs_.size(); }

  /// L2 norm; equals the Euclidean norm of the coefficients by Parseval.
  double l2_norm() const { return coeffs_.norm(); }

 private:
  Eigen::VectorXd coeffs_;
  Basis basis_;
};

struct PolynomialDecay {
  double alpha = 1.0;  // lambda_j = j^{-1-2 alpha}
};

struct ExponentialDecay {
  double alpha = 0.0;  // lambda_j = j^{-alpha} exp(-xi j^p)
  double xi = 0.1;
  double p = 1.0;
};

using DecayFamily = std::variant<PolynomialDecay, ExponentialDecay>;

/// Prior covariance eigenvalues lambda_1 > lambda_2 > ... > lambda_J > 0.
class PriorSpectrum {
 public:
  PriorSpectrum(DecayFamily family, Index truncation);

  static PriorSpectrum polynomial(double alpha, Index truncation) {
    return PriorSpectrum(PolynomialDecay{alpha}, truncation);
  }
  static PriorSpectrum exponential(double alpha, double xi, double p,
                                   Index truncation) {
    return PriorSpectrum(ExponentialDecay{alpha, xi, p}, truncation);
  }

  /// lambda_j for any j >= 1 (not limited to the truncation).
  static double eigenvalue(const DecayFamily& family, Index j);

  double eigenvalue(Index j) const { return eigenvalue(family_, j); }
  const Eigen::VectorXd& eigenvalues() const { return lambda_; }
  const DecayFamily& family() const { return family_; }
  Index truncation() const { return lambda_.size(); }

  /// Estimate of sum_{j > J} lambda_j.
  double tail_mass() const;

 private:
  DecayFamily family_;
  Eigen::VectorXd lambda_;
};

struct MildlyIllPosed {
  double p;  // kappa_j ~ j^{-p}
};

struct SeverelyIllPosed {
  double c;  // kappa_j ~ exp(-c j^p)
  double p;
};

using IllPosedness = std::variant<MildlyIllPosed, SeverelyIllPosed>;

/// Nodes and weights integrating against a measure (weights sum to its mass).
struct QuadratureRule {
  std::vector<Point> nodes;
  std::vector<double> weights;
};

/// Singular system (kappa_j, e_j, g_j) of a compact forward operator A with
/// A e_j = kappa_j g_j. Indices j are 1-based throughout.
class ForwardSVD {
 public:
  virtual ~ForwardSVD() = default;

  virtual std::string_view name() const = 0;
  virtual double singular_value(Index j) const = 0;
  virtual IllPosedness illposedness() const = 0;
  /// Exponent gamma of the sup-norm growth ||g_j||_inf <~ j^gamma. Metadata.
  virtual double basis_growth() const { return 0.0; }
  virtual const Domain& parameter_domain() const = 0;
  virtual const Domain& design_domain() const = 0;

  /// n independent draws from the design distribution G, a pure function
  /// of (n, seed).
  virtual std::vector<Point> sample_design(Index n, std::uint64_t seed) const = 0;

  /// Rule for the parameter measure mu, accurate for products of e_j, j <= J.
  virtual QuadratureRule parameter_quadrature(Index J) const = 0;
  /// Rule for the design distribution G, accurate for products of g_j, j <= J.
  virtual QuadratureRule design_quadrature(Index J) const = 0;

  /// Writes b_1(p), ..., b_J(p) into `out` (J = out.size()). Throws
  /// DomainError if p is outside the basis' domain.
  void basis_values(Basis basis, Point p, std::span<double> out) const;
  Eigen::VectorXd basis_values(Basis basis, Point p, Index J) const;

  double e(Index j, Point t) const;
  double g(Index j, Point x) const;

  /// Row i holds b_1..b_J evaluated at points[i].
  Eigen::MatrixXd basis_matrix(Basis basis, std::span<const Point> points,
                               Index J) const;

  Eigen::VectorXd singular_values(Index J) const;

 protected:
  virtual void eval_e(Point t, std::span<double> out) const = 0;
  virtual void eval_g(Point x, std::span<double> out) const = 0;
};

/// A true parameter f_0 with smoothness beta and its truncated Sobolev norm.
struct SobolevTruth {
  SobolevTruth(double beta, SeriesFunction series, double tail_mass = 0.0);

  double beta;
  SeriesFunction series;
  double sobolev_norm;
  /// Estimate of sum_{j > J} f_{0,j}^2 dropped by the truncation.
  double tail_mass;
};

/// sum_{j<=J} f_j b_j(t) in the basis named by `f.basis()`.
double eval_series(const SeriesFunction& f, const ForwardSVD& op, Point t);

/// Coefficients (kappa_j f_j) of A f in the g-basis.
SeriesFunction forward_map(const SeriesFunction& f, const ForwardSVD& op);

/// sqrt(sum_j j^{2 beta} f_j^2).
double sobolev_norm(const SeriesFunction& f, double beta);

/// Smallest J with sum_{j>J} lambda_j kappa_j^2 below
/// tolerance::kTruncationTail times the retained mass, capped at `cap`.
Index default_truncation(const ForwardSVD& op, const DecayFamily& family,
                         Index cap = tolerance::kTruncationCap);

}  // namespace invgp
