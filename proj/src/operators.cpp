#include "invgp/operators.hpp"

#include <cmath>
#include <numbers>

#include "invgp/errors.hpp"
#include "invgp/random.hpp"

namespace invgp {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
const double kSqrt2 = std::sqrt(2.0);

QuadratureRule unit_interval_rule(Index J) {
  const auto gl = gauss_legendre(static_cast<std::size_t>(std::max<Index>(4 * J, 16)),
                                 0.0, 1.0);
  QuadratureRule rule;
  rule.weights = gl.weights;
  rule.nodes.reserve(gl.nodes.size());
  for (double x : gl.nodes) rule.nodes.push_back({x, 0.0});
  return rule;
}

std::vector<Point> uniform_design(Index n, std::uint64_t seed) {
  if (n < 1) throw ParameterError("sample_design requires n >= 1");
  const CounterRng rng(seed, kDesignStream);
  std::vector<Point> pts(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    pts[static_cast<std::size_t>(i)] = {rng.uniform(static_cast<std::uint64_t>(i)), 0.0};
  }
  return pts;
}

}  // namespace

// --- Volterra --------------------------------------------------------------

double VolterraOp::singular_value(Index j) const {
  return 1.0 / ((static_cast<double>(j) - 0.5) * kPi);
}

void VolterraOp::eval_e(Point t, std::span<double> out) const {
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = kSqrt2 * std::cos((static_cast<double>(k) + 0.5) * kPi * t.x);
  }
}

void VolterraOp::eval_g(Point x, std::span<double> out) const {
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = kSqrt2 * std::sin((static_cast<double>(k) + 0.5) * kPi * x.x);
  }
}

std::vector<Point> VolterraOp::sample_design(Index n, std::uint64_t seed) const {
  return uniform_design(n, seed);
}

QuadratureRule VolterraOp::parameter_quadrature(Index J) const {
  return unit_interval_rule(J);
}

QuadratureRule VolterraOp::design_quadrature(Index J) const {
  return unit_interval_rule(J);
}

// --- Heat ------------------------------------------------------------------

HeatOp::HeatOp(double T) : T_(T) {
  if (!(T > 0.0)) throw ParameterError("heat operator requires T > 0");
}

double HeatOp::singular_value(Index j) const {
  const double x = static_cast<double>(j);
  return std::exp(-x * x * kPi * kPi * T_);
}

IllPosedness HeatOp::illposedness() const {
  return SeverelyIllPosed{kPi * kPi * T_, 2.0};
}

void HeatOp::eval_e(Point t, std::span<double> out) const {
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = kSqrt2 * std::sin((static_cast<double>(k) + 1.0) * kPi * t.x);
  }
}

void HeatOp::eval_g(Point x, std::span<double> out) const { eval_e(x, out); }

std::vector<Point> HeatOp::sample_design(Index n, std::uint64_t seed) const {
  return uniform_design(n, seed);
}

QuadratureRule HeatOp::parameter_quadrature(Index J) const {
  return unit_interval_rule(J);
}

QuadratureRule HeatOp::design_quadrature(Index J) const {
  return unit_interval_rule(J);
}

// --- Radon -----------------------------------------------------------------

ZernikeIndex radon_index(Index j) {
  if (j < 1) throw ParameterError("radon_index requires j >= 1");
  // Smallest k with k(k+1)/2 >= j equals ceil((sqrt(1+8j)-1)/2).
  Index k = 0;
  while (k * (k + 1) / 2 < j) ++k;
  const Index m = k - 1;
  const Index l = 2 * (j - 1) - m * (m + 2);
  return {static_cast<int>(m), static_cast<int>(l)};
}

double zernike_radial(int n, int k, double r) {
  k = std::abs(k);
  if (k > n || (n - k) % 2 != 0) return 0.0;
  // R_n^k = r (R_{n-1}^{|k-1|} + R_{n-1}^{k+1}) - R_{n-2}^k, tabulated by degree.
  std::vector<double> prev2(static_cast<std::size_t>(n + 2), 0.0);
  std::vector<double> prev(static_cast<std::size_t>(n + 2), 0.0);
  std::vector<double> cur(static_cast<std::size_t>(n + 2), 0.0);
  prev[0] = 1.0;  // degree 0
  if (n == 0) return 1.0;
  for (int d = 1; d <= n; ++d) {
    std::fill(cur.begin(), cur.end(), 0.0);
    for (int q = d % 2; q <= d; q += 2) {
      if (q == d) {
        cur[static_cast<std::size_t>(q)] = r * prev[static_cast<std::size_t>(q - 1)];
      } else {
        cur[static_cast<std::size_t>(q)] =
            r * (prev[static_cast<std::size_t>(std::abs(q - 1))] +
                 prev[static_cast<std::size_t>(q + 1)]) -
            prev2[static_cast<std::size_t>(q)];
      }
    }
    prev2.swap(prev);
    prev.swap(cur);
  }
  return prev[static_cast<std::size_t>(k)];
}

double chebyshev_u(int n, double s) {
  if (n == 0) return 1.0;
  double u0 = 1.0;
  double u1 = 2.0 * s;
  for (int k = 2; k <= n; ++k) {
    const double u2 = 2.0 * s * u1 - u0;
    u0 = u1;
    u1 = u2;
  }
  return u1;
}

namespace {

double angular(int l, double angle) {
  if (l == 0) return 1.0;
  return l > 0 ? kSqrt2 * std::cos(l * angle) : kSqrt2 * std::sin(l * angle);
}

int max_degree(std::size_t J) {
  return J == 0 ? 0 : radon_index(static_cast<Index>(J)).degree;
}

}  // namespace

double RadonOp::singular_value(Index j) const {
  return 1.0 / std::sqrt(static_cast<double>(radon_index(j).degree) + 1.0);
}

void RadonOp::eval_e(Point t, std::span<double> out) const {
  const int M = max_degree(out.size());
  const double r = t.x;
  // radial[d][q] = R_d^q(r) for the whole triangle up to degree M.
  std::vector<std::vector<double>> radial(static_cast<std::size_t>(M + 1));
  for (int d = 0; d <= M; ++d) {
    auto& row = radial[static_cast<std::size_t>(d)];
    row.assign(static_cast<std::size_t>(d + 2), 0.0);
    if (d == 0) {
      row[0] = 1.0;
      continue;
    }
    const auto& p1 = radial[static_cast<std::size_t>(d - 1)];
    for (int q = d % 2; q <= d; q += 2) {
      double v = r * p1[static_cast<std::size_t>(std::abs(q - 1))];
      if (q < d) {
        v += r * p1[static_cast<std::size_t>(q + 1)];
        if (d >= 2) v -= radial[static_cast<std::size_t>(d - 2)][static_cast<std::size_t>(q)];
      }
      row[static_cast<std::size_t>(q)] = v;
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto [m, l] = radon_index(static_cast<Index>(k + 1));
    out[k] = std::sqrt(m + 1.0) *
             radial[static_cast<std::size_t>(m)][static_cast<std::size_t>(std::abs(l))] *
             angular(l, t.y);
  }
}

void RadonOp::eval_g(Point x, std::span<double> out) const {
  const int M = max_degree(out.size());
  std::vector<double> u(static_cast<std::size_t>(M + 1));
  for (int d = 0; d <= M; ++d) {
    u[static_cast<std::size_t>(d)] =
        d == 0 ? 1.0
               : (d == 1 ? 2.0 * x.x
                         : 2.0 * x.x * u[static_cast<std::size_t>(d - 1)] -
                               u[static_cast<std::size_t>(d - 2)]);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto [m, l] = radon_index(static_cast<Index>(k + 1));
    out[k] = u[static_cast<std::size_t>(m)] * angular(l, x.y);
  }
}

std::vector<Point> RadonOp::sample_design(Index n, std::uint64_t seed) const {
  if (n < 1) throw ParameterError("sample_design requires n >= 1");
  // s = sin(psi) with CDF F(psi) = (2 psi + sin 2psi) / pi on [0, pi/2];
  // phi uniform on [0, 2pi).
  const CounterRng rng(seed, kDesignStream);
  std::vector<Point> pts(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto c = static_cast<std::uint64_t>(2 * i);
    const double u = rng.uniform(c);
    double lo = 0.0;
    double hi = 0.5 * kPi;
    double psi = 0.5 * u * kPi;
    for (int it = 0; it < 60; ++it) {
      const double f = (2.0 * psi + std::sin(2.0 * psi)) / kPi - u;
      if (f > 0.0) hi = psi; else lo = psi;
      const double df = 4.0 * std::cos(psi) * std::cos(psi) / kPi;
      double next = df > 0.0 ? psi - f / df : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - psi) < 1e-15) {
        psi = next;
        break;
      }
      psi = next;
    }
    pts[static_cast<std::size_t>(i)] = {std::sin(psi), kTwoPi * rng.uniform(c + 1)};
  }
  return pts;
}

QuadratureRule RadonOp::parameter_quadrature(Index J) const {
  // mu = Lebesgue / pi in polar form: r dr dtheta / pi.
  const auto nr = static_cast<std::size_t>(std::max<Index>(4 * J, 16));
  const auto nt = static_cast<std::size_t>(std::max<Index>(8 * J, 32));
  const auto gl = gauss_legendre(nr, 0.0, 1.0);
  QuadratureRule rule;
  rule.nodes.reserve(nr * nt);
  rule.weights.reserve(nr * nt);
  for (std::size_t a = 0; a < nr; ++a) {
    for (std::size_t b = 0; b < nt; ++b) {
      rule.nodes.push_back({gl.nodes[a], kTwoPi * static_cast<double>(b) / static_cast<double>(nt)});
      rule.weights.push_back(gl.weights[a] * gl.nodes[a] * (kTwoPi / static_cast<double>(nt)) / kPi);
    }
  }
  return rule;
}

QuadratureRule RadonOp::design_quadrature(Index J) const {
  // dG = 2 pi^{-2} sqrt(1 - s^2) ds dphi; with s = sin(psi) the density
  // becomes 2 pi^{-2} cos^2(psi) dpsi, smooth on [0, pi/2].
  const auto ns = static_cast<std::size_t>(std::max<Index>(4 * J, 16));
  const auto nt = static_cast<std::size_t>(std::max<Index>(8 * J, 32));
  const auto gl = gauss_legendre(ns, 0.0, 0.5 * kPi);
  QuadratureRule rule;
  rule.nodes.reserve(ns * nt);
  rule.weights.reserve(ns * nt);
  for (std::size_t a = 0; a < ns; ++a) {
    const double c = std::cos(gl.nodes[a]);
    for (std::size_t b = 0; b < nt; ++b) {
      rule.nodes.push_back({std::sin(gl.nodes[a]), kTwoPi * static_cast<double>(b) / static_cast<double>(nt)});
      rule.weights.push_back(gl.weights[a] * 2.0 / (kPi * kPi) * c * c *
                             (kTwoPi / static_cast<double>(nt)));
    }
  }
  return rule;
}

// --- factories -------------------------------------------------------------

std::shared_ptr<const ForwardSVD> volterra() {
  return std::make_shared<const VolterraOp>();
}

std::shared_ptr<const ForwardSVD> heat(double T) {
  return std::make_shared<const HeatOp>(T);
}

std::shared_ptr<const ForwardSVD> radon() {
  return std::make_shared<const RadonOp>();
}

std::vector<Point> sample_design(const ForwardSVD& op, Index n,
                                 std::uint64_t seed) {
  return op.sample_design(n, seed);
}

}  // namespace invgp
