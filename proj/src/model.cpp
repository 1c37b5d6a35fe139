#include "rtcp/model.hpp"

#include "rtcp/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rtcp {

ModelConfig::ModelConfig(int n_items, int boundary) : n_items_(n_items), boundary_(boundary) {
  if (n_items < 3 || boundary < 1 || boundary >= n_items - 1) {
    throw Error(ErrorKind::config,
                fmt::format("invalid model configuration J={}, c={}: need J >= 3 and 1 <= c < J-1", n_items, boundary));
  }
}

ItemParams::ItemParams(const ModelConfig& config, Vector beta, Vector alpha, Vector gamma, Vector sigma)
    : beta_(std::move(beta)), alpha_(std::move(alpha)), gamma_(std::move(gamma)), sigma_(std::move(sigma)) {
  const Eigen::Index J = config.n_items();
  if (beta_.size() != J || alpha_.size() != J || gamma_.size() != J || sigma_.size() != J) {
    throw Error(ErrorKind::domain, fmt::format("item parameter vectors must have length J={}", J));
  }
  for (Eigen::Index j = 0; j < J; ++j) {
    if (!(sigma_[j] > 0.0) || !std::isfinite(sigma_[j])) {
      throw Error(ErrorKind::domain, fmt::format("sigma of item {} must be positive and finite, got {}", j + 1, sigma_[j]));
    }
    if (!std::isfinite(beta_[j]) || !std::isfinite(alpha_[j]) || !std::isfinite(gamma_[j])) {
      throw Error(ErrorKind::domain, fmt::format("non-finite parameter for item {}", j + 1));
    }
    if (!config.has_gamma(static_cast<int>(j) + 1) && gamma_[j] != 0.0) {
      throw Error(ErrorKind::domain,
                  fmt::format("gamma of item {} must be 0 (items <= c+1 = {} carry no change effect)", j + 1,
                              config.boundary() + 1));
    }
  }
}

RtMatrix::RtMatrix(RowMatrix values, bool logged_at_ingest)
    : values_(std::move(values)), logged_at_ingest_(logged_at_ingest) {
  if (values_.rows() < 1 || values_.cols() < 1) throw Error(ErrorKind::data, "response-time matrix is empty");
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      if (!std::isfinite(values_(i, j))) {
        throw Error(ErrorKind::data, fmt::format("non-finite log response time at row {}, column {}", i + 1, j + 1));
      }
    }
  }
}

double logistic(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) noexcept {
  if (x <= -37.0) return std::exp(x);
  if (x <= 18.0) return std::log1p(std::exp(x));
  if (x <= 33.3) return x + std::exp(-x);
  return x;
}

std::vector<double> location_log_weights(double psi1, const ModelConfig& config) {
  const int n = config.n_locations();
  std::vector<double> out(static_cast<std::size_t>(n));
  const double top = psi1 >= 0.0 ? (n - 1) * psi1 : 0.0;
  double z = 0.0;
  for (int a = 0; a < n; ++a) z += std::exp(a * psi1 - top);
  const double log_z = top + std::log(z);
  for (int a = 0; a < n; ++a) out[static_cast<std::size_t>(a)] = a * psi1 - log_z;
  return out;
}

double log_changepoint_pmf(int tau, double xi, const StructuralParams& psi, const ModelConfig& config) {
  if (!config.in_support(tau)) {
    throw Error(ErrorKind::domain, fmt::format("change-point {} outside support {{{}, ..., {}}}", tau,
                                               config.first_tau(), config.last_tau()));
  }
  const double eta = psi.psi2 + psi.psi3 * xi;
  if (tau == config.last_tau()) return -softplus(-eta);
  const auto weights = location_log_weights(psi.psi1, config);
  return weights[static_cast<std::size_t>(tau - config.first_tau())] - softplus(eta);
}

double changepoint_pmf(int tau, double xi, const StructuralParams& psi, const ModelConfig& config) {
  return std::exp(log_changepoint_pmf(tau, xi, psi, config));
}

double residual(double y, int item, const LatentState& state, const ItemParams& items) {
  const auto j = static_cast<Eigen::Index>(item - 1);
  const double shift = item > state.tau ? items.gamma()[j] : 0.0;
  return y - items.beta()[j] + items.alpha()[j] * state.xi - shift;
}

double conditional_logdensity(std::span<const double> y, const LatentState& state, const ItemParams& items,
                              const ModelConfig& config) {
  if (static_cast<int>(y.size()) != config.n_items() || items.n_items() != config.n_items()) {
    throw Error(ErrorKind::domain, "response vector length does not match the number of items");
  }
  if (!config.in_support(state.tau)) throw Error(ErrorKind::domain, "change-point outside support");
  double total = 0.0;
  for (int item = 1; item <= config.n_items(); ++item) {
    const double s = items.sigma()[item - 1];
    if (!(s > 0.0)) throw Error(ErrorKind::domain, "sigma must be positive");
    const double r = residual(y[static_cast<std::size_t>(item - 1)], item, state, items);
    total += -0.5 * std::log(2.0 * std::numbers::pi * s * s) - r * r / (2.0 * s * s);
  }
  return total;
}

}  // namespace rtcp
