#pragma once

// Marginal likelihood of the change-point model under a quadrature grid,
// posterior weights over the (tau, node) lattice, and the analytic score.

#include "rtcp/model.hpp"
#include "rtcp/params.hpp"
#include "rtcp/quadrature.hpp"

#include <span>

namespace rtcp {

struct EvalOptions {
  int threads = 1;
  // Sum per-respondent contributions in fixed blocks and a fixed order, so
  // that results are bitwise identical for any thread count. Without it the
  // block layout follows the thread count.
  bool deterministic_reduction = true;
};

// sum_i log sum_{tau, k} w_k f(y_i | xi_k, tau) P(tau | xi_k), stabilized by
// log-sum-exp per respondent. Throws RespondentError (ErrorKind::estimation)
// if a respondent's contribution is not finite.
double marginal_loglik(const RtMatrix& data, const ParamVector& theta, const QuadratureGrid& grid,
                       const ModelConfig& config, const EvalOptions& options = {});

// Gradient of marginal_loglik with respect to every coordinate of theta.
Vector score(const RtMatrix& data, const ParamVector& theta, const QuadratureGrid& grid, const ModelConfig& config,
             const EvalOptions& options = {});

// Both at once; `gradient` is resized to theta's dimension.
double loglik_and_score(const RtMatrix& data, const ParamVector& theta, const QuadratureGrid& grid,
                        const ModelConfig& config, Vector& gradient, const EvalOptions& options = {});

// Normalized posterior weights p_{tau k} for one respondent: a
// (J - c) x K matrix whose row t corresponds to tau = c + 1 + t.
RowMatrix posterior_weights(std::span<const double> y, const ParamVector& theta, const QuadratureGrid& grid,
                            const ModelConfig& config);

// Per-respondent log-likelihood contributions.
Vector respondent_logliks(const RtMatrix& data, const ParamVector& theta, const QuadratureGrid& grid,
                          const ModelConfig& config, const EvalOptions& options = {});

}  // namespace rtcp
