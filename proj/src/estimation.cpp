#include "rtcp/estimation.hpp"

#include "rtcp/error.hpp"
#include "rtcp/lbfgs.hpp"
#include "rtcp/stats.hpp"

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <random>

namespace rtcp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct FreeMap {
  std::vector<int> free_index;  // coordinate of each free variable
  std::vector<bool> is_free;

  Vector gather(const ParamVector& theta) const {
    Vector x(static_cast<Eigen::Index>(free_index.size()));
    for (std::size_t i = 0; i < free_index.size(); ++i) x[static_cast<Eigen::Index>(i)] = theta[free_index[i]];
    return x;
  }
  void scatter(const Vector& x, ParamVector& theta) const {
    for (std::size_t i = 0; i < free_index.size(); ++i) theta[free_index[i]] = x[static_cast<Eigen::Index>(i)];
  }
};

FreeMap make_free_map(const ParamLayout& layout, const std::vector<std::pair<int, double>>& frozen) {
  FreeMap map;
  map.is_free.assign(static_cast<std::size_t>(layout.dim()), true);
  for (const auto& [index, value] : frozen) {
    if (index < 0 || index >= layout.dim()) {
      throw Error(ErrorKind::config, fmt::format("frozen coordinate {} out of range", index));
    }
    map.is_free[static_cast<std::size_t>(index)] = false;
  }
  for (int r = 0; r < layout.dim(); ++r) {
    if (map.is_free[static_cast<std::size_t>(r)]) map.free_index.push_back(r);
  }
  return map;
}

struct StageOutcome {
  ParamVector theta;
  double loglik = 0.0;  // unpenalized
  LbfgsResult run;
};

class Problem {
 public:
  Problem(const RtMatrix& data, const ModelConfig& config, const QuadratureGrid& grid, const FreeMap& map,
          const EvalOptions& eval)
      : data_(data), config_(config), layout_(config), grid_(grid), map_(map), eval_(eval) {}

  // Minimizes -loglik + ridge_gamma * sum gamma^2 + ridge_psi1 * psi1^2 over
  // the free coordinates.
  StageOutcome run_stage(const ParamVector& start, double ridge_gamma, double ridge_psi1,
                         const FitOptions& options) const {
    ParamVector theta = start;
    Objective objective = [&](const Vector& x, Vector& grad) -> double {
      map_.scatter(x, theta);
      Vector full;
      double ll;
      try {
        ll = loglik_and_score(data_, theta, grid_, config_, full, eval_);
      } catch (const RespondentError&) {
        return std::numeric_limits<double>::infinity();
      }
      double value = -ll;
      for (int j = config_.first_gamma_item(); j <= config_.n_items(); ++j) {
        const int r = layout_.gamma(j);
        value += ridge_gamma * theta[r] * theta[r];
        full[r] -= 2.0 * ridge_gamma * theta[r];
      }
      value += ridge_psi1 * theta[layout_.psi1()] * theta[layout_.psi1()];
      full[layout_.psi1()] -= 2.0 * ridge_psi1 * theta[layout_.psi1()];
      for (std::size_t i = 0; i < map_.free_index.size(); ++i) {
        grad[static_cast<Eigen::Index>(i)] = -full[map_.free_index[i]];
      }
      return value;
    };
    LbfgsOptions lopt;
    lopt.memory = options.lbfgs_memory;
    lopt.max_iterations = options.max_iterations;
    lopt.gradient_tolerance = options.gradient_tolerance;
    StageOutcome out;
    out.run = minimize_lbfgs(objective, map_.gather(start), lopt);
    out.theta = start;
    map_.scatter(out.run.x, out.theta);
    out.loglik = marginal_loglik(data_, out.theta, grid_, config_, eval_);
    return out;
  }

  double free_gradient_norm(const ParamVector& theta) const {
    const Vector g = score(data_, theta, grid_, config_, eval_);
    double norm = 0.0;
    for (int r : map_.free_index) norm = std::max(norm, std::abs(g[r]));
    return norm;
  }

 private:
  const RtMatrix& data_;
  const ModelConfig& config_;
  ParamLayout layout_;
  const QuadratureGrid& grid_;
  const FreeMap& map_;
  EvalOptions eval_;
};

struct StartOutcome {
  ParamVector theta;
  double loglik = -std::numeric_limits<double>::infinity();
  double stage1_loglik = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool stage2_converged = false;
  std::string status;
};

StartOutcome fit_from(const Problem& problem, const ParamVector& start, const FitOptions& options) {
  StartOutcome out;
  ParamVector stage2_start = start;
  const bool penalized = options.ridge_gamma > 0.0 || options.ridge_psi1 > 0.0;
  if (penalized) {
    const auto stage1 = problem.run_stage(start, options.ridge_gamma, options.ridge_psi1, options);
    out.iterations += stage1.run.iterations;
    out.evaluations += stage1.run.evaluations;
    out.stage1_loglik = stage1.loglik;
    if (std::isfinite(stage1.loglik)) stage2_start = stage1.theta;
  }
  auto stage2 = problem.run_stage(stage2_start, 0.0, 0.0, options);
  out.iterations += stage2.run.iterations;
  out.evaluations += stage2.run.evaluations;
  if (!penalized) out.stage1_loglik = stage2.loglik;
  out.status = stage2.run.status;
  out.stage2_converged = stage2.run.converged;
  out.theta = std::move(stage2.theta);
  out.loglik = stage2.loglik;
  return out;
}

}  // namespace

ParamVector initialize(const RtMatrix& data, const ModelConfig& config) {
  if (data.n_items() != config.n_items()) {
    throw Error(ErrorKind::config,
                fmt::format("data have {} items but the model expects J={}", data.n_items(), config.n_items()));
  }
  const ParamLayout layout(config);
  ParamVector theta(layout.dim());
  const auto& y = data.values();
  const double n = static_cast<double>(data.n_respondents());
  for (int item = 1; item <= config.n_items(); ++item) {
    const auto col = y.col(item - 1);
    const double mean = col.mean();
    const double var = n > 1 ? (col.array() - mean).square().sum() / (n - 1.0) : 0.0;
    if (!(var > 0.0)) {
      throw Error(ErrorKind::data, fmt::format("item {} has zero variance; the model cannot be initialized", item));
    }
    theta[layout.beta(item)] = mean;
    theta[layout.alpha(item)] = 0.5;
    if (config.has_gamma(item)) theta[layout.gamma(item)] = -0.1;
    theta[layout.log_sigma(item)] = 0.5 * std::log(var);
  }
  theta[layout.psi1()] = 0.0;
  theta[layout.psi2()] = 1.5;
  theta[layout.psi3()] = 0.0;
  return theta;
}

FitResult fit(const RtMatrix& data, const ModelConfig& config, const FitOptions& options) {
  if (data.n_items() != config.n_items()) {
    throw Error(ErrorKind::config,
                fmt::format("data have {} items but the model expects J={}", data.n_items(), config.n_items()));
  }
  if (!(options.gradient_tolerance > 0.0) || options.max_iterations < 1) {
    throw Error(ErrorKind::config, "gradient tolerance and iteration cap must be positive");
  }
  if (options.ridge_gamma < 0.0 || options.ridge_psi1 < 0.0) {
    throw Error(ErrorKind::config, "ridge penalties must be nonnegative");
  }
  const ParamLayout layout(config);
  const QuadratureGrid grid = build_grid(options.quadrature);
  const FreeMap map = make_free_map(layout, options.frozen);

  ParamVector start = options.warm_start ? *options.warm_start : initialize(data, config);
  layout.check(start);
  for (const auto& [index, value] : options.frozen) start[index] = value;
  try {
    const double ll0 = marginal_loglik(data, start, grid, config, options.eval);
    if (!std::isfinite(ll0)) throw Error(ErrorKind::estimation, "non-finite objective at the initializer");
  } catch (const RespondentError& e) {
    throw Error(ErrorKind::estimation, fmt::format("objective not finite at the initializer: {}", e.what()));
  }

  const Problem problem(data, config, grid, map, options.eval);
  StartOutcome best = fit_from(problem, start, options);
  int total_iterations = best.iterations;
  int total_evaluations = best.evaluations;
  if (options.mirrored_start && !options.warm_start && config.n_free_gamma() > 0) {
    ParamVector mirror = start;
    for (int j = config.first_gamma_item(); j <= config.n_items(); ++j) {
      if (map.is_free[static_cast<std::size_t>(layout.gamma(j))]) mirror[layout.gamma(j)] = -start[layout.gamma(j)];
    }
    try {
      StartOutcome candidate = fit_from(problem, mirror, options);
      total_iterations += candidate.iterations;
      total_evaluations += candidate.evaluations;
      if (candidate.loglik > best.loglik) best = std::move(candidate);
    } catch (const Error& e) {
      spdlog::debug("mirrored start failed: {}", e.what());
    }
  }
  for (int s = 1; s <= options.multistart; ++s) {
    std::mt19937_64 rng(options.seed + static_cast<std::uint64_t>(s));
    std::normal_distribution<double> jitter(0.0, 0.1);
    ParamVector jittered = start;
    for (int r : map.free_index) jittered[r] += jitter(rng);
    StartOutcome candidate;
    try {
      candidate = fit_from(problem, jittered, options);
    } catch (const Error& e) {
      spdlog::debug("multistart {} failed: {}", s, e.what());
      continue;
    }
    total_iterations += candidate.iterations;
    total_evaluations += candidate.evaluations;
    if (candidate.loglik > best.loglik) best = std::move(candidate);
  }

  FitResult result(config);
  result.theta_hat = best.theta;
  result.loglik = best.loglik;
  result.stage1_loglik = best.stage1_loglik;
  result.n_iterations = total_iterations;
  result.n_evaluations = total_evaluations;
  result.free = map.is_free;
  result.quadrature = options.quadrature;
  result.n_respondents = data.n_respondents();
  result.gradient_norm = problem.free_gradient_norm(result.theta_hat);
  result.converged = result.gradient_norm < options.gradient_tolerance;
  result.status = result.converged ? "converged" : best.status;
  if (!std::isfinite(result.loglik)) throw Error(ErrorKind::estimation, "fit ended at a non-finite log-likelihood");

  if (options.standard_errors) {
    if (result.gradient_norm >= 10.0 * options.gradient_tolerance) {
      spdlog::warn("standard errors computed away from a stationary point (score sup-norm {:.3g})",
                   result.gradient_norm);
    }
    const auto info = observed_information(data, result.theta_hat, grid, config, options.eval);
    auto cov = invert_information(info, result.free);
    result.covariance = std::move(cov.covariance);
    result.standard_errors = std::move(cov.standard_errors);
  } else {
    result.standard_errors = Vector::Constant(layout.dim(), kNaN);
  }
  return result;
}

Eigen::MatrixXd observed_information(const RtMatrix& data, const ParamVector& theta, const QuadratureGrid& grid,
                                     const ModelConfig& config, const EvalOptions& eval) {
  const Eigen::Index d = theta.size();
  Eigen::MatrixXd hessian(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    const double h = std::max(1e-5, 1e-5 * std::abs(theta[r]));
    ParamVector up = theta, down = theta;
    up[r] += h;
    down[r] -= h;
    hessian.col(r) = (score(data, up, grid, config, eval) - score(data, down, grid, config, eval)) / (2.0 * h);
  }
  Eigen::MatrixXd info = -0.5 * (hessian + hessian.transpose());
  if (!info.allFinite()) throw Error(ErrorKind::numerical, "observed information has non-finite entries");
  return info;
}

CovarianceEstimate invert_information(const Eigen::MatrixXd& information, const std::vector<bool>& free) {
  const Eigen::Index d = information.rows();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index r = 0; r < d; ++r) {
    if (free[static_cast<std::size_t>(r)]) idx.push_back(r);
  }
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd block(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) block(a, b) = information(idx[a], idx[b]);
  }

  CovarianceEstimate out;
  out.covariance = Eigen::MatrixXd::Constant(d, d, kNaN);
  out.standard_errors = Vector::Constant(d, kNaN);
  if (m == 0) return out;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
  const Vector& values = eig.eigenvalues();
  const Eigen::MatrixXd& vectors = eig.eigenvectors();
  const double top = values.cwiseAbs().maxCoeff();
  const double threshold = 1e-10 * top;
  Vector inv = Vector::Zero(m);
  Vector singular_weight = Vector::Zero(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    if (values[k] > threshold) {
      inv[k] = 1.0 / values[k];
    } else {
      singular_weight += vectors.col(k).cwiseAbs2();
    }
  }
  const Eigen::MatrixXd cov = vectors * inv.asDiagonal() * vectors.transpose();
  std::vector<bool> bad(static_cast<std::size_t>(m), false);
  for (Eigen::Index a = 0; a < m; ++a) {
    if (singular_weight[a] > 1e-6) {
      bad[static_cast<std::size_t>(a)] = true;
      out.undefined.push_back(static_cast<int>(idx[a]));
    }
  }
  for (Eigen::Index a = 0; a < m; ++a) {
    if (bad[static_cast<std::size_t>(a)]) continue;
    for (Eigen::Index b = 0; b < m; ++b) {
      if (bad[static_cast<std::size_t>(b)]) continue;
      out.covariance(idx[a], idx[b]) = 0.5 * (cov(a, b) + cov(b, a));
    }
    const double var = cov(a, a);
    out.standard_errors[idx[a]] = var > 0.0 ? std::sqrt(var) : kNaN;
  }
  return out;
}

WaldTest wald_test(const FitResult& fit, int index) {
  WaldTest t;
  t.estimate = fit.theta_hat[index];
  t.standard_error = fit.standard_errors.size() > index ? fit.standard_errors[index] : kNaN;
  t.defined = std::isfinite(t.standard_error) && t.standard_error > 0.0;
  if (!t.defined) {
    t.z = t.p_raw = t.p_holm = kNaN;
    return t;
  }
  t.z = t.estimate / t.standard_error;
  t.p_raw = 2.0 * normal_cdf(-std::abs(t.z));
  t.p_holm = t.p_raw;
  return t;
}

WaldTestResult wald_gamma_tests(const FitResult& fit) {
  const auto& config = fit.config;
  const ParamLayout layout(config);
  WaldTestResult result;
  std::vector<double> raw;
  std::vector<std::size_t> defined_at;
  for (int item = config.first_gamma_item(); item <= config.n_items(); ++item) {
    const int r = layout.gamma(item);
    WaldTest t;
    t.item = item;
    t.estimate = fit.theta_hat[r];
    t.standard_error = fit.standard_errors.size() > r ? fit.standard_errors[r] : kNaN;
    t.defined = fit.free.empty() || fit.free[static_cast<std::size_t>(r)];
    t.defined = t.defined && std::isfinite(t.standard_error) && t.standard_error > 0.0;
    if (t.defined) {
      t.z = t.estimate / t.standard_error;
      t.p_raw = normal_cdf(t.z);
      raw.push_back(t.p_raw);
      defined_at.push_back(result.tests.size());
    } else {
      t.z = t.p_raw = t.p_holm = kNaN;
    }
    result.tests.push_back(t);
  }
  const auto adjusted = holm_adjust(raw);
  for (std::size_t i = 0; i < defined_at.size(); ++i) result.tests[defined_at[i]].p_holm = adjusted[i];
  return result;
}

LrtResult lrt_from_logliks(PsiCoordinate which, double unconstrained, double constrained) {
  LrtResult r;
  r.which = which;
  r.unconstrained_loglik = unconstrained;
  r.constrained_loglik = constrained;
  const double stat = 2.0 * (unconstrained - constrained);
  if (stat < -1e-6) {
    spdlog::warn("constrained fit exceeds the full fit by {:.3g} log-likelihood units; the full fit is not a global "
                 "optimum",
                 -0.5 * stat);
  }
  r.statistic = std::max(0.0, stat);
  r.p_value = chi_square1_sf(r.statistic);
  return r;
}

LrtResult lrt_psi(const RtMatrix& data, const FitOptions& options, PsiCoordinate which, const FitResult& full_fit) {
  if (!full_fit.converged) spdlog::warn("likelihood-ratio test against a fit that did not converge");
  const ParamLayout layout(full_fit.config);
  const int index = which == PsiCoordinate::psi1 ? layout.psi1() : layout.psi3();
  FitOptions constrained = options;
  constrained.frozen.emplace_back(index, 0.0);
  constrained.warm_start = full_fit.theta_hat;
  (*constrained.warm_start)[index] = 0.0;
  constrained.ridge_gamma = 0.0;
  constrained.ridge_psi1 = 0.0;
  constrained.standard_errors = false;
  constrained.multistart = 0;
  FitResult refit = [&] {
    try {
      return fit(data, full_fit.config, constrained);
    } catch (const Error& e) {
      throw Error(ErrorKind::estimation,
                  fmt::format("constrained refit with {} = 0 failed: {}", which == PsiCoordinate::psi1 ? "psi1" : "psi3",
                              e.what()));
    }
  }();
  if (!std::isfinite(refit.loglik)) {
    throw Error(ErrorKind::estimation, fmt::format("constrained refit diverged after {} iterations ({})",
                                                   refit.n_iterations, refit.status));
  }
  auto result = lrt_from_logliks(which, full_fit.loglik, refit.loglik);
  result.constrained_converged = refit.converged;
  return result;
}

ProbabilityInterval no_change_probability_ci(double psi2, double psi2_se, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::domain, "confidence level must lie in (0, 1)");
  ProbabilityInterval out;
  out.estimate = logistic(psi2);
  out.standard_error = out.estimate * (1.0 - out.estimate) * psi2_se;
  const double z = normal_quantile(0.5 + 0.5 * level);
  out.lower = std::clamp(out.estimate - z * out.standard_error, 0.0, 1.0);
  out.upper = std::clamp(out.estimate + z * out.standard_error, 0.0, 1.0);
  return out;
}

ProbabilityInterval no_change_probability_ci(const FitResult& fit, double level) {
  const ParamLayout layout(fit.config);
  return no_change_probability_ci(fit.theta_hat[layout.psi2()], fit.standard_errors[layout.psi2()], level);
}

}  // namespace rtcp
