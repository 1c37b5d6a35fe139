#include "rtcp/quadrature.hpp"

#include "rtcp/error.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rtcp {

namespace {

// Orthonormal probabilists' Hermite recurrence at x. Returns p_K(x), p_{K-1}(x)
// and sum_{n<K} p_n(x)^2, where p_n = He_n / sqrt(n!).
struct HermiteEval {
  double p_k = 0.0;
  double p_km1 = 0.0;
  double sum_sq = 0.0;
};

HermiteEval hermite_orthonormal(double x, int K) {
  double prev = 0.0;
  double cur = 1.0;
  double sum_sq = 0.0;
  for (int n = 0; n < K; ++n) {
    sum_sq += cur * cur;
    const double next = (x * cur - std::sqrt(static_cast<double>(n)) * prev) / std::sqrt(static_cast<double>(n + 1));
    prev = cur;
    cur = next;
  }
  return {cur, prev, sum_sq};
}

void finalize(QuadratureGrid& grid) {
  const double total = std::accumulate(grid.weights.begin(), grid.weights.end(), 0.0);
  const double log_total = std::log(total);
  for (std::size_t k = 0; k < grid.weights.size(); ++k) {
    grid.weights[k] /= total;
    grid.log_weights[k] -= log_total;
  }
}

}  // namespace

QuadratureGrid build_grid(int points) {
  if (points < 2) throw Error(ErrorKind::domain, fmt::format("quadrature needs at least 2 points, got {}", points));
  const int K = points;

  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd sub(K - 1);
  for (int n = 1; n < K; ++n) sub[n - 1] = std::sqrt(static_cast<double>(n));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  std::vector<double> x(solver.eigenvalues().data(), solver.eigenvalues().data() + K);

  QuadratureGrid grid;
  grid.rule = QuadratureRule::gauss_hermite;
  grid.nodes.resize(K);
  grid.weights.resize(K);
  grid.log_weights.resize(K);
  for (int k = 0; k < K; ++k) {
    double node = x[k];
    // Newton polish; p_K' = sqrt(K) p_{K-1}.
    for (int it = 0; it < 3; ++it) {
      const auto h = hermite_orthonormal(node, K);
      const double deriv = std::sqrt(static_cast<double>(K)) * h.p_km1;
      if (deriv == 0.0) break;
      node -= h.p_k / deriv;
    }
    const auto h = hermite_orthonormal(node, K);
    grid.nodes[k] = node;
    grid.weights[k] = 1.0 / h.sum_sq;
    grid.log_weights[k] = -std::log(h.sum_sq);
  }
  // Exact symmetry about zero.
  for (int k = 0; k < K / 2; ++k) {
    const int m = K - 1 - k;
    const double node = 0.5 * (grid.nodes[m] - grid.nodes[k]);
    const double logw = 0.5 * (grid.log_weights[k] + grid.log_weights[m]);
    grid.nodes[k] = -node;
    grid.nodes[m] = node;
    grid.log_weights[k] = grid.log_weights[m] = logw;
    grid.weights[k] = grid.weights[m] = std::exp(logw);
  }
  if (K % 2 == 1) grid.nodes[K / 2] = 0.0;
  finalize(grid);
  return grid;
}

QuadratureGrid build_trapezoid_grid(int points, double half_width) {
  if (points < 2) throw Error(ErrorKind::domain, fmt::format("quadrature needs at least 2 points, got {}", points));
  if (!(half_width > 0.0)) throw Error(ErrorKind::domain, "trapezoid half-width must be positive");
  const int K = points;
  QuadratureGrid grid;
  grid.rule = QuadratureRule::trapezoid;
  grid.nodes.resize(K);
  grid.weights.resize(K);
  grid.log_weights.resize(K);
  const double step = 2.0 * half_width / (K - 1);
  for (int k = 0; k < K; ++k) {
    const double node = k == (K - 1) / 2 && K % 2 == 1 ? 0.0 : -half_width + k * step;
    grid.nodes[k] = node;
    // End-point halving; the normal density there is negligible for half_width >= 6.
    const double log_end = (k == 0 || k == K - 1) ? std::log(0.5) : 0.0;
    grid.log_weights[k] = -0.5 * node * node + log_end;
    grid.weights[k] = std::exp(grid.log_weights[k]);
  }
  finalize(grid);
  return grid;
}

QuadratureGrid build_grid(const QuadratureSpec& spec) {
  switch (spec.rule) {
    case QuadratureRule::gauss_hermite: return build_grid(spec.points);
    case QuadratureRule::trapezoid: return build_trapezoid_grid(spec.points, spec.half_width);
  }
  throw Error(ErrorKind::config, "unknown quadrature rule");
}

QuadratureGrid degenerate_grid() {
  QuadratureGrid grid;
  grid.nodes = {0.0};
  grid.weights = {1.0};
  grid.log_weights = {0.0};
  return grid;
}

std::string to_string(QuadratureRule rule) {
  return rule == QuadratureRule::gauss_hermite ? "gauss-hermite" : "trapezoid";
}

QuadratureRule parse_quadrature_rule(const std::string& name) {
  if (name == "gauss-hermite" || name == "gh") return QuadratureRule::gauss_hermite;
  if (name == "trapezoid") return QuadratureRule::trapezoid;
  throw Error(ErrorKind::config, fmt::format("unknown quadrature rule '{}'", name));
}

}  // namespace rtcp
