#pragma once

// Marginal maximum likelihood for the change-point model: a weakly penalized
// warm start followed by an unpenalized refit, observed-information standard
// errors, and the inferential procedures built on them.

#include "rtcp/likelihood.hpp"
#include "rtcp/model.hpp"
#include "rtcp/params.hpp"
#include "rtcp/quadrature.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rtcp {

struct FitOptions {
  int max_iterations = 2000;         // per stage
  double gradient_tolerance = 1e-6;  // sup-norm of the unpenalized score
  double ridge_gamma = 0.01;         // stage-1 penalty on sum gamma_j^2
  double ridge_psi1 = 0.01;          // stage-1 penalty on psi1^2
  QuadratureSpec quadrature{};
  int multistart = 0;  // extra jittered starts
  // Also start from the initializer with every gamma sign-flipped and keep the
  // better fit. The initializer presumes acceleration (gamma < 0); data with
  // post-change slowing otherwise tend to land in a degenerate mode where all
  // change mass piles onto the first location.
  bool mirrored_start = true;
  std::uint64_t seed = 1;
  int lbfgs_memory = 10;
  bool standard_errors = true;
  EvalOptions eval{};
  // Coordinates held fixed at the given value throughout the fit.
  std::vector<std::pair<int, double>> frozen;
  // Replaces the deterministic initializer when set.
  std::optional<ParamVector> warm_start;
};

struct FitResult {
  explicit FitResult(const ModelConfig& model) : config(model) {}

  ModelConfig config;
  ParamVector theta_hat;
  double loglik = 0.0;
  bool converged = false;
  int n_iterations = 0;
  int n_evaluations = 0;
  // Inverse observed information over free coordinates; NaN rows/columns for
  // frozen coordinates and for coordinates in a singular direction.
  Eigen::MatrixXd covariance;
  Vector standard_errors;  // NaN where undefined
  double gradient_norm = 0.0;
  double stage1_loglik = 0.0;
  std::string status;
  std::vector<bool> free;  // per coordinate
  QuadratureSpec quadrature;
  long n_respondents = 0;

  bool has_standard_errors() const { return covariance.size() > 0; }
};

// beta_j = column mean, alpha_j = 0.5, gamma_j = -0.1, log sigma_j = log(column
// sd), psi = (0, 1.5, 0). Throws ErrorKind::data for a zero-variance column.
ParamVector initialize(const RtMatrix& data, const ModelConfig& config);

// Throws ErrorKind::config on a shape mismatch and ErrorKind::estimation if
// the objective is not finite at the initializer. Hitting the iteration cap
// returns converged = false.
FitResult fit(const RtMatrix& data, const ModelConfig& config, const FitOptions& options = {});

// Negative Hessian of the marginal log-likelihood at theta, by central
// differences of the analytic score with step max(1e-5, 1e-5 |theta_r|),
// symmetrized. Throws ErrorKind::numerical on non-finite entries.
Eigen::MatrixXd observed_information(const RtMatrix& data, const ParamVector& theta, const QuadratureGrid& grid,
                                     const ModelConfig& config, const EvalOptions& eval = {});

struct CovarianceEstimate {
  Eigen::MatrixXd covariance;
  Vector standard_errors;
  std::vector<int> undefined;  // free coordinates lying in a singular direction
};

// Inverts the free block of an information matrix. Coordinates with weight on
// eigenvalues below 1e-10 of the largest are reported as undefined.
CovarianceEstimate invert_information(const Eigen::MatrixXd& information, const std::vector<bool>& free);

struct WaldTest {
  int item = 0;
  double estimate = 0.0;
  double standard_error = 0.0;
  double z = 0.0;
  double p_raw = 0.0;   // one-sided, H1: gamma_j < 0
  double p_holm = 0.0;  // Holm across the defined tests
  bool defined = false;
};

struct WaldTestResult {
  std::vector<WaldTest> tests;
};

// One-sided Wald tests of H1: gamma_j < 0 for every free gamma, Holm adjusted.
WaldTestResult wald_gamma_tests(const FitResult& fit);

// Two-sided Wald test for a single coordinate.
WaldTest wald_test(const FitResult& fit, int index);

enum class PsiCoordinate { psi1, psi3 };

struct LrtResult {
  PsiCoordinate which = PsiCoordinate::psi1;
  double constrained_loglik = 0.0;
  double unconstrained_loglik = 0.0;
  double statistic = 0.0;  // chi-square, 1 df
  double p_value = 1.0;
  bool constrained_converged = false;
};

LrtResult lrt_from_logliks(PsiCoordinate which, double unconstrained, double constrained);

// Refits with the chosen psi coordinate frozen at zero, warm-started from the
// full fit. Throws ErrorKind::estimation if the constrained refit fails.
LrtResult lrt_psi(const RtMatrix& data, const FitOptions& options, PsiCoordinate which, const FitResult& full_fit);

struct ProbabilityInterval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double standard_error = 0.0;
};

// P(no change | xi = 0) = logistic(psi2) with a delta-method interval.
ProbabilityInterval no_change_probability_ci(double psi2, double psi2_se, double level);
ProbabilityInterval no_change_probability_ci(const FitResult& fit, double level);

}  // namespace rtcp
