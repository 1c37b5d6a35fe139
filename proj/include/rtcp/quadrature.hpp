#pragma once

#include <string>
#include <vector>

namespace rtcp {

enum class QuadratureRule {
  gauss_hermite,  // Gauss-Hermite under the change of variable xi = sqrt(2) x
  trapezoid,      // equally spaced nodes on [-L, L] with normal-density weights
};

// Discrete approximation of the standard normal distribution: for smooth g,
// sum_k weights[k] * g(nodes[k]) approximates E[g(xi)], xi ~ N(0, 1).
struct QuadratureGrid {
  QuadratureRule rule = QuadratureRule::gauss_hermite;
  std::vector<double> nodes;
  std::vector<double> weights;      // positive, sum to 1
  std::vector<double> log_weights;  // log of weights, accurate in the tails

  int size() const noexcept { return static_cast<int>(nodes.size()); }
};

struct QuadratureSpec {
  QuadratureRule rule = QuadratureRule::trapezoid;
  int points = 201;
  double half_width = 7.0;  // trapezoid only
};

// Gauss-Hermite grid for the standard normal. Throws ErrorKind::domain for K < 2.
QuadratureGrid build_grid(int points);

// Trapezoid grid on [-half_width, half_width]. Throws for K < 2 or half_width <= 0.
QuadratureGrid build_trapezoid_grid(int points, double half_width = 7.0);

QuadratureGrid build_grid(const QuadratureSpec& spec);

// A grid with the single node 0 and weight 1; only useful for testing.
QuadratureGrid degenerate_grid();

std::string to_string(QuadratureRule rule);
QuadratureRule parse_quadrature_rule(const std::string& name);

}  // namespace rtcp
