#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "invgp/errors.hpp"
#include "invgp/gp_exact.hpp"
#include "invgp/operators.hpp"
#include "test_support.hpp"

using namespace invgp;

namespace {

Dataset permuted(const Dataset& d, std::uint64_t seed) {
  std::vector<Index> idx(static_cast<std::size_t>(d.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  const CounterRng rng(seed, 5);
  for (std::size_t i = idx.size(); i-- > 1;) {
    const auto j = static_cast<std::size_t>(rng.bits(i) % (i + 1));
    std::swap(idx[i], idx[j]);
  }
  Dataset out = d;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.x[i] = d.x[static_cast<std::size_t>(idx[i])];
    out.y(static_cast<Index>(i)) = d.y(idx[i]);
  }
  return out;
}

}  // namespace

TEST_SUITE("gp_exact") {

TEST_CASE("Dataset validation") {
  Dataset d;
  CHECK_THROWS_AS(d.validate(), DataError);
  d.x = {{0.5, 0.0}};
  d.y = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(d.validate(), DataError);
  d.y = Eigen::VectorXd::Ones(1);
  d.sigma2 = 0.0;
  CHECK_THROWS_AS(d.validate(), DataError);
  d.sigma2 = 1.0;
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("scalar Gram entry for Volterra at x = 1") {
  const auto op = volterra();
  Dataset d;
  d.x = {{1.0, 0.0}};
  d.y = Eigen::VectorXd::Zero(1);
  const Eigen::MatrixXd phi = design_features(*op, d, 3);
  CHECK(phi(0, 0) == doctest::Approx(std::sqrt(2.0)));
  // lambda = (1, 0, 0)
  const double k1 = op->singular_value(1);
  const GramSet g(phi, Eigen::Vector3d(k1 * k1, 0.0, 0.0), 1.0);
  CHECK(g.kff()(0, 0) == doctest::Approx(8.0 / (std::numbers::pi * std::numbers::pi)));
}

TEST_CASE("zero prior gives a zero Gram matrix") {
  const Eigen::MatrixXd phi = Eigen::MatrixXd::Random(6, 4);
  const GramSet g(phi, Eigen::VectorXd::Zero(4), 1.0);
  CHECK(g.kff().cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.jitter() == 0.0);
}

TEST_CASE("Gram matrix is exactly symmetric and matches the kernel series") {
  const auto op = radon();
  const PriorSpectrum prior = PriorSpectrum::polynomial(0.6, 40);
  const Dataset d = testing::simulated(*op, TruthRecipe::Radon, 40, 30, 3);
  const GramSet g = build_gram(*op, prior, d);
  CHECK(g.kff() == g.kff().transpose());
  const Eigen::VectorXd w = prior.eigenvalues().cwiseProduct(op->singular_values(40).cwiseAbs2());
  for (Index i : {0, 7, 29}) {
    for (Index k : {0, 3, 18}) {
      const Eigen::VectorXd gi = op->basis_values(Basis::G, d.x[static_cast<std::size_t>(i)], 40);
      const Eigen::VectorXd gk = op->basis_values(Basis::G, d.x[static_cast<std::size_t>(k)], 40);
      CHECK(g.kff()(i, k) == doctest::Approx((w.array() * gi.array() * gk.array()).sum()));
    }
  }
}

TEST_CASE("jitter rescues a singular shifted Gram matrix") {
  // Two identical design rows and a vanishing noise level.
  Eigen::MatrixXd phi(2, 2);
  phi << 1.0, 0.0, 1.0, 0.0;
  const GramSet g(phi, Eigen::Vector2d(1.0, 1.0), 1e-300);
  CHECK(g.jitter() > 0.0);
  CHECK(g.jitter() <= 1e-6);
  CHECK(std::isfinite(g.log_det()));

  Eigen::MatrixXd bad = phi;
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(GramSet(bad, Eigen::Vector2d(1.0, 1.0), 1.0), NumericalError);
}

TEST_CASE("n = 1, J = 1 scalar posterior oracle") {
  const auto op = volterra();
  const PriorSpectrum prior = PriorSpectrum::polynomial(0.5, 1);
  Dataset d;
  d.x = {{0.37, 0.0}};
  d.y = Eigen::VectorXd::Constant(1, 1.3);
  d.sigma2 = 0.7;
  const GaussianPosterior post = exact_posterior(op, prior, d);
  const double lam = prior.eigenvalue(1), k = op->singular_value(1), g = op->g(1, d.x[0]);
  const double a1 = lam * k * g * 1.3 / (lam * k * k * g * g + 0.7);
  CHECK(std::abs(post.mean_coeffs().coeffs()(0) - a1) < 1e-12 * std::abs(a1));
  const double v1 = lam - lam * lam * k * k * g * g / (lam * k * k * g * g + 0.7);
  CHECK(post.coeff_cov()(0, 0) == doctest::Approx(v1).epsilon(1e-12));
  CHECK(post.kind() == PosteriorKind::Exact);
  CHECK_FALSE(post.scheme().has_value());
}

TEST_CASE("zero responses give a zero mean and shrunken variance") {
  const auto op = heat(0.01);
  const PriorSpectrum prior = PriorSpectrum::exponential(0.0, 0.1, 2.0, 12);
  Dataset d = testing::simulated(*op, TruthRecipe::Heat, 12, 40, 11);
  d.y.setZero();
  const GaussianPosterior post = exact_posterior(op, prior, d);
  CHECK(post.mean_coeffs().coeffs().cwiseAbs().maxCoeff() == 0.0);
  for (const Point& t : testing::random_parameter_points(*op, 20, 4)) {
    CHECK(post.mean(t) == 0.0);
    CHECK(post.variance(t) <= prior_covariance(*op, prior, t, t) + 1e-12);
    CHECK(post.variance(t) >= -1e-12);
  }
}

TEST_CASE("huge noise returns the prior mean") {
  const auto op = volterra();
  const PriorSpectrum prior = PriorSpectrum::polynomial(1.0, 30);
  Dataset d = testing::simulated(*op, TruthRecipe::Volterra, 30, 50, 12);
  const double ref = exact_posterior(op, prior, d).mean_coeffs().l2_norm();
  d.sigma2 = 1e12;
  const double far = exact_posterior(op, prior, d).mean_coeffs().l2_norm();
  CHECK(far < 1e-6 * ref);
}

TEST_CASE("log marginal likelihood closed forms") {
  Dataset d;
  d.x = {{0.5, 0.0}};
  d.y = Eigen::VectorXd::Zero(1);
  const GramSet g(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1), 1.0);
  CHECK(log_marginal_likelihood(d, g) == doctest::Approx(-0.91893853320467274).epsilon(1e-14));
  d.y(0) = 2.0;
  CHECK(log_marginal_likelihood(d, g) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi) - 2.0).epsilon(1e-14));
}

TEST_CASE("permutation invariance") {
  const auto op = volterra();
  const PriorSpectrum prior = PriorSpectrum::polynomial(0.8, 60);
  const Dataset d = testing::simulated(*op, TruthRecipe::Volterra, 60, 80, 21);
  const Dataset p = permuted(d, 3);
  const GramSet gd = build_gram(*op, prior, d), gp = build_gram(*op, prior, p);
  CHECK(std::abs(log_marginal_likelihood(d, gd) - log_marginal_likelihood(p, gp)) < 1e-10);
  const GaussianPosterior a = exact_posterior(op, prior, d, gd);
  const GaussianPosterior b = exact_posterior(op, prior, p, gp);
  for (const Point& t : testing::random_parameter_points(*op, 10, 8)) {
    CHECK(a.mean(t) == doctest::Approx(b.mean(t)).epsilon(1e-10));
    CHECK(a.variance(t) == doctest::Approx(b.variance(t)).epsilon(1e-9));
  }
}

TEST_CASE("coefficient path and kernel path agree") {
  for (const auto& op : {volterra(), heat(0.01), radon()}) {
    CAPTURE(op->name());
    const bool is_heat = op->name() == "heat";
    const Index J = is_heat ? 20 : 80;
    const PriorSpectrum prior = is_heat ? PriorSpectrum::exponential(0.0, 0.1, 2.0, J)
                                        : PriorSpectrum::polynomial(0.7, J);
    const TruthRecipe recipe = op->name() == "volterra" ? TruthRecipe::Volterra
                               : is_heat                ? TruthRecipe::Heat
                                                        : TruthRecipe::Radon;
    const Dataset d = testing::simulated(*op, recipe, J, 60, 31);
    const GramSet g = build_gram(*op, prior, d);
    const GaussianPosterior coeff = exact_posterior(op, prior, d, g);
    const KernelPosterior kernel(op, prior, d, g);
    const auto pts = testing::random_parameter_points(*op, 20, 17);
    for (std::size_t a = 0; a < pts.size(); ++a) {
      const double m1 = coeff.mean(pts[a]), m2 = kernel.mean(pts[a]);
      CHECK(std::abs(m1 - m2) <= 1e-9 * std::max(1.0, std::abs(m2)));
      const Point s = pts[(a + 3) % pts.size()];
      CHECK(std::abs(coeff.covariance(pts[a], s) - kernel.covariance(pts[a], s)) < 1e-9);
    }
    const Point t = pts[0], x = d.x[0];
    const Eigen::VectorXd row = kernel.cross_row(t);
    CHECK(row(0) == doctest::Approx(cross_covariance(*op, prior, t, x)));
  }
}

TEST_CASE("posterior covariance on a grid is symmetric PSD") {
  const auto op = radon();
  const PriorSpectrum prior = PriorSpectrum::polynomial(0.6, 45);
  const Dataset d = testing::simulated(*op, TruthRecipe::Radon, 45, 70, 41);
  const GaussianPosterior post = exact_posterior(op, prior, d);
  const auto grid = evaluation_grid(*op, 60);
  const Eigen::MatrixXd C = post.covariance_matrix(grid);
  CHECK(C == C.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-8 * C.trace());
  CHECK(post.variance_mass() == doctest::Approx(post.coeff_cov().trace()));
}

TEST_CASE("adding a data point never increases the posterior variance") {
  const auto op = volterra();
  const PriorSpectrum prior = PriorSpectrum::polynomial(1.0, 50);
  const Dataset full = testing::simulated(*op, TruthRecipe::Volterra, 50, 41, 51);
  Dataset less = full;
  less.x.pop_back();
  less.y.conservativeResize(40);
  const GaussianPosterior a = exact_posterior(op, prior, less);
  const GaussianPosterior b = exact_posterior(op, prior, full);
  for (const Point& t : testing::random_parameter_points(*op, 30, 61)) {
    CHECK(b.variance(t) <= a.variance(t) + 1e-12);
  }
}

TEST_CASE("exact_posterior rejects a Gram set built for another truncation") {
  const auto op = volterra();
  const Dataset d = testing::simulated(*op, TruthRecipe::Volterra, 10, 5, 1);
  const GramSet g = build_gram(*op, PriorSpectrum::polynomial(1.0, 10), d);
  CHECK_THROWS_AS(exact_posterior(op, PriorSpectrum::polynomial(1.0, 12), d, g), ContractError);
}

}  // TEST_SUITE
