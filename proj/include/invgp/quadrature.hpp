#pragma once

#include <cstddef>
#include <vector>

#include "invgp/spectral_model.hpp"

namespace invgp {

/// Nodes and weights of a rule on [-1, 1] (weights sum to 2).
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule with n nodes, computed by Newton iteration on P_n.
GaussLegendre gauss_legendre(std::size_t n);

/// The same rule mapped affinely onto [a, b].
GaussLegendre gauss_legendre(std::size_t n, double a, double b);

/// Sum of weight * f(node) over a rule.
template <class F>
double integrate(const QuadratureRule& rule, F&& f) {
  double acc = 0.0;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    acc += rule.weights[q] * f(rule.nodes[q]);
  }
  return acc;
}

}  // namespace invgp
