#pragma once

// Test-only instance generators and independent oracles. Nothing here calls
// the library's likelihood code; densities are evaluated term by term.

#include "rtcp/model.hpp"
#include "rtcp/params.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace rtcp::testing {

enum class Scale {
  simulation,  // beta ~ U(3,4), alpha ~ U(.5,1.5), gamma ~ U(.3,.8), sigma ~ U(.2,.4)
  empirical,   // alpha ~ U(.1,.5), sigma ~ U(.3,.55), gamma ~ U(-1,-.5)
  flat,        // alpha ~ U(.1,.3), sigma ~ U(.5,.8): little information about xi
};

struct Instance {
  ModelConfig config;
  ParamVector theta;
  RtMatrix data;
  std::vector<double> xi;
  std::vector<int> tau;
};

inline double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd) - 0.5 * z * z;
}

// Direct evaluation of both pmf branches without any stabilization.
inline double oracle_pmf(int tau, double xi, double psi1, double psi2, double psi3, int c, int J) {
  const double no_change = 1.0 / (1.0 + std::exp(-psi2 - psi3 * xi));
  if (tau == J) return no_change;
  double z = 0.0;
  for (int l = 0; l <= J - c - 2; ++l) z += std::exp(l * psi1);
  return std::exp((tau - c - 1) * psi1) / z * (1.0 - no_change);
}

inline double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

struct Unpacked {
  std::vector<double> beta, alpha, gamma, sigma;
  double psi1, psi2, psi3;
};

inline Unpacked unpack(const ParamVector& theta, const ModelConfig& config) {
  const ParamLayout layout(config);
  const int J = config.n_items();
  Unpacked u;
  for (int j = 1; j <= J; ++j) {
    u.beta.push_back(theta[layout.beta(j)]);
    u.alpha.push_back(theta[layout.alpha(j)]);
    u.gamma.push_back(config.has_gamma(j) ? theta[layout.gamma(j)] : 0.0);
    u.sigma.push_back(std::exp(theta[layout.log_sigma(j)]));
  }
  u.psi1 = theta[layout.psi1()];
  u.psi2 = theta[layout.psi2()];
  u.psi3 = theta[layout.psi3()];
  return u;
}

// log of sum_tau f(y | xi, tau) P(tau | xi), by explicit enumeration.
inline double oracle_log_integrand(const double* y, double xi, const Unpacked& u, int c, int J) {
  std::vector<double> terms;
  for (int tau = c + 1; tau <= J; ++tau) {
    double lf = 0.0;
    for (int j = 1; j <= J; ++j) {
      const double mean = u.beta[j - 1] - u.alpha[j - 1] * xi + (j > tau ? u.gamma[j - 1] : 0.0);
      lf += normal_logpdf(y[j - 1], mean, u.sigma[j - 1]);
    }
    terms.push_back(lf + std::log(oracle_pmf(tau, xi, u.psi1, u.psi2, u.psi3, c, J)));
  }
  return log_sum_exp(terms);
}

// Marginal log-likelihood for an arbitrary node/weight set.
inline double oracle_loglik(const RtMatrix& data, const ParamVector& theta, const ModelConfig& config,
                            const std::vector<double>& nodes, const std::vector<double>& weights) {
  const auto u = unpack(theta, config);
  double total = 0.0;
  for (long i = 0; i < data.n_respondents(); ++i) {
    std::vector<double> terms;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (weights[k] <= 0.0) continue;
      terms.push_back(std::log(weights[k]) +
                      oracle_log_integrand(data.row(i).data(), nodes[k], u, config.boundary(), config.n_items()));
    }
    total += log_sum_exp(terms);
  }
  return total;
}

// Trapezoid integration of the standard normal density times the integrand
// over [-half, half] with `points` equally spaced nodes.
inline double dense_trapezoid_loglik(const RtMatrix& data, const ParamVector& theta, const ModelConfig& config,
                                     int points = 4001, double half = 8.0) {
  std::vector<double> nodes(points), weights(points);
  const double h = 2.0 * half / (points - 1);
  for (int k = 0; k < points; ++k) {
    nodes[k] = -half + k * h;
    const double phi = std::exp(-0.5 * nodes[k] * nodes[k]) / std::sqrt(2.0 * std::numbers::pi);
    weights[k] = phi * h * ((k == 0 || k == points - 1) ? 0.5 : 1.0);
  }
  return oracle_loglik(data, theta, config, nodes, weights);
}

// Plain log-normal response-time model without change-points, with the
// closed-form marginal: y_i ~ N(beta, diag(sigma^2) + alpha alpha^T).
inline double lognormal_model_loglik(const RtMatrix& data, const std::vector<double>& beta,
                                     const std::vector<double>& alpha, const std::vector<double>& sigma) {
  const int J = static_cast<int>(beta.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(J, J);
  Eigen::VectorXd a(J);
  for (int j = 0; j < J; ++j) {
    a[j] = alpha[j];
    cov(j, j) = sigma[j] * sigma[j];
  }
  cov += a * a.transpose();
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::MatrixXd L = llt.matrixL();
  const double log_det = 2.0 * L.diagonal().array().log().sum();
  double total = 0.0;
  for (long i = 0; i < data.n_respondents(); ++i) {
    Eigen::VectorXd r(J);
    for (int j = 0; j < J; ++j) r[j] = data.values()(i, j) - beta[j];
    const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(r);
    total += -0.5 * J * std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * z.squaredNorm();
  }
  return total;
}

// Draws item and structural parameters and data directly from the model.
inline Instance random_instance(std::uint64_t seed, int N, int J, int c, Scale scale = Scale::simulation) {
  std::mt19937_64 rng(seed);
  auto unif = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  std::normal_distribution<double> normal;
  const ModelConfig config(J, c);
  const ParamLayout layout(config);
  ParamVector theta(layout.dim());
  for (int j = 1; j <= J; ++j) {
    theta[layout.beta(j)] = unif(3.0, 4.0);
    switch (scale) {
      case Scale::simulation:
        theta[layout.alpha(j)] = unif(0.5, 1.5);
        theta[layout.log_sigma(j)] = std::log(unif(0.2, 0.4));
        if (config.has_gamma(j)) theta[layout.gamma(j)] = unif(0.3, 0.8);
        break;
      case Scale::empirical:
        theta[layout.alpha(j)] = unif(0.1, 0.5);
        theta[layout.log_sigma(j)] = std::log(unif(0.3, 0.55));
        if (config.has_gamma(j)) theta[layout.gamma(j)] = unif(-1.0, -0.5);
        break;
      case Scale::flat:
        theta[layout.alpha(j)] = unif(0.1, 0.3);
        theta[layout.log_sigma(j)] = std::log(unif(0.5, 0.8));
        if (config.has_gamma(j)) theta[layout.gamma(j)] = unif(0.3, 0.8);
        break;
    }
  }
  theta[layout.psi1()] = unif(-0.3, 0.3);
  theta[layout.psi2()] = unif(-0.5, 1.5);
  theta[layout.psi3()] = unif(-0.7, 0.3);

  const auto u = unpack(theta, config);
  RowMatrix y(N, J);
  std::vector<double> xis(N);
  std::vector<int> taus(N);
  for (int i = 0; i < N; ++i) {
    const double xi = normal(rng);
    double draw = unif(0.0, 1.0);
    int tau = J;
    for (int t = c + 1; t <= J; ++t) {
      draw -= oracle_pmf(t, xi, u.psi1, u.psi2, u.psi3, c, J);
      if (draw <= 0.0) {
        tau = t;
        break;
      }
    }
    xis[i] = xi;
    taus[i] = tau;
    for (int j = 1; j <= J; ++j) {
      const double mean = u.beta[j - 1] - u.alpha[j - 1] * xi + (j > tau ? u.gamma[j - 1] : 0.0);
      y(i, j - 1) = mean + u.sigma[j - 1] * normal(rng);
    }
  }
  return {config, theta, RtMatrix(std::move(y)), std::move(xis), std::move(taus)};
}

}  // namespace rtcp::testing

namespace rtcp::testing {

// Plain log-normal response-time model (no change-point) integrated over xi
// with the given node/weight set.
inline double lognormal_quadrature_loglik(const RtMatrix& data, const std::vector<double>& beta,
                                          const std::vector<double>& alpha, const std::vector<double>& sigma,
                                          const std::vector<double>& nodes, const std::vector<double>& weights) {
  double total = 0.0;
  for (long i = 0; i < data.n_respondents(); ++i) {
    std::vector<double> terms;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      double lf = std::log(weights[k]);
      for (std::size_t j = 0; j < beta.size(); ++j) {
        lf += normal_logpdf(data.values()(i, static_cast<Eigen::Index>(j)), beta[j] - alpha[j] * nodes[k], sigma[j]);
      }
      terms.push_back(lf);
    }
    total += log_sum_exp(terms);
  }
  return total;
}

}  // namespace rtcp::testing
