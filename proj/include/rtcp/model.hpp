#pragma once

// Domain types of the change-point model for log response times, the
// change-point probability mass function, and the conditional density of a
// response-time vector given latent speed and change-point location.
//
// Items and change-point locations are numbered 1..J as in the model; all
// containers are 0-based, so item j lives at index j - 1.

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace rtcp {

using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ModelConfig {
 public:
  // Throws ErrorKind::config unless J >= 3, c >= 1 and c < J - 1.
  ModelConfig(int n_items, int boundary);

  int n_items() const noexcept { return n_items_; }
  int boundary() const noexcept { return boundary_; }

  // Support of the change-point is {c+1, ..., J}; tau = J means no change.
  int first_tau() const noexcept { return boundary_ + 1; }
  int last_tau() const noexcept { return n_items_; }
  int support_size() const noexcept { return n_items_ - boundary_; }
  // Pre-terminal locations {c+1, ..., J-1}.
  int n_locations() const noexcept { return n_items_ - boundary_ - 1; }
  // Items with a free post-change effect: {c+2, ..., J}.
  int first_gamma_item() const noexcept { return boundary_ + 2; }
  int n_free_gamma() const noexcept { return n_items_ - boundary_ - 1; }

  bool in_support(int tau) const noexcept { return tau >= first_tau() && tau <= last_tau(); }
  bool has_gamma(int item) const noexcept { return item >= first_gamma_item() && item <= n_items_; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;

 private:
  int n_items_;
  int boundary_;
};

struct StructuralParams {
  double psi1 = 0.0;  // location weighting
  double psi2 = 0.0;  // no-change log-odds intercept
  double psi3 = 0.0;  // latent-speed slope on the no-change log-odds
};

// Item parameters on the log-time scale. gamma is stored for every item but
// entries j <= c+1 are fixed at zero and never exposed as free parameters.
class ItemParams {
 public:
  // Validates sigma > 0, finiteness, and the gamma-zero constraint.
  ItemParams(const ModelConfig& config, Vector beta, Vector alpha, Vector gamma, Vector sigma);

  const Vector& beta() const noexcept { return beta_; }
  const Vector& alpha() const noexcept { return alpha_; }
  const Vector& gamma() const noexcept { return gamma_; }
  const Vector& sigma() const noexcept { return sigma_; }
  int n_items() const noexcept { return static_cast<int>(beta_.size()); }

 private:
  Vector beta_, alpha_, gamma_, sigma_;
};

// N x J matrix of log response times, one row per respondent.
class RtMatrix {
 public:
  // Throws ErrorKind::data on non-finite entries or an empty matrix.
  explicit RtMatrix(RowMatrix values, bool logged_at_ingest = false);

  long n_respondents() const noexcept { return values_.rows(); }
  int n_items() const noexcept { return static_cast<int>(values_.cols()); }
  const RowMatrix& values() const noexcept { return values_; }
  bool logged_at_ingest() const noexcept { return logged_at_ingest_; }

  std::span<const double> row(long i) const {
    return {values_.data() + i * values_.cols(), static_cast<std::size_t>(values_.cols())};
  }

 private:
  RowMatrix values_;
  bool logged_at_ingest_;
};

struct LatentState {
  double xi = 0.0;
  int tau = 0;
};

double logistic(double x) noexcept;
// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;

// log of exp(a*psi1) / Z(psi1) for a = 0..J-c-2, i.e. the location weights
// given that a change occurs. Z is evaluated with the largest term factored out.
std::vector<double> location_log_weights(double psi1, const ModelConfig& config);

// log P(tau | xi, psi).
double log_changepoint_pmf(int tau, double xi, const StructuralParams& psi, const ModelConfig& config);

// P(tau | xi, psi). Throws ErrorKind::domain for tau outside {c+1, ..., J}.
double changepoint_pmf(int tau, double xi, const StructuralParams& psi, const ModelConfig& config);

// y_ij - beta_j + alpha_j * xi - gamma_j * 1(j > tau), item is 1-based.
double residual(double y, int item, const LatentState& state, const ItemParams& items);

// log f(y | xi, tau) under independent normal item densities.
double conditional_logdensity(std::span<const double> y, const LatentState& state, const ItemParams& items,
                              const ModelConfig& config);

}  // namespace rtcp
