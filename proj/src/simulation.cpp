#include "rtcp/simulation.hpp"

#include "rtcp/error.hpp"
#include "rtcp/parallel.hpp"
#include "rtcp/stats.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>

namespace rtcp {

namespace {

enum Purpose : std::uint64_t { params_stream = 1, respondent_stream = 2 };

}  // namespace

double SimCondition::psi2() const { return std::log((1.0 - prevalence) / prevalence); }

ModelConfig SimCondition::config() const { return ModelConfig(n_items, boundary); }

void SimCondition::validate() const {
  if (!(prevalence > 0.0 && prevalence < 1.0)) {
    throw Error(ErrorKind::config, fmt::format("prevalence must lie in (0, 1), got {}", prevalence));
  }
  if (n_respondents < 2) throw Error(ErrorKind::config, "need at least two respondents");
  if (replications < 1) throw Error(ErrorKind::config, "need at least one replication");
  if (!std::isfinite(psi1) || !std::isfinite(psi3)) throw Error(ErrorKind::config, "psi values must be finite");
  (void)config();
}

std::string SimCondition::label() const {
  return fmt::format("N={} J={} c={} pi={:.2f}", n_respondents, n_items, boundary, prevalence);
}

std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t replication, std::uint64_t respondent,
                            std::uint64_t purpose) {
  std::vector<std::uint32_t> words;
  for (auto v : {master, replication, respondent, purpose}) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

ParamVector draw_true_params(const SimCondition& condition, std::mt19937_64& rng) {
  const ModelConfig config = condition.config();
  const ParamLayout layout(config);
  auto unif = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  ParamVector theta(layout.dim());
  for (int j = 1; j <= config.n_items(); ++j) {
    theta[layout.beta(j)] = unif(3.0, 4.0);
    theta[layout.alpha(j)] = unif(0.5, 1.5);
    if (config.has_gamma(j)) theta[layout.gamma(j)] = unif(0.3, 0.8);
    theta[layout.log_sigma(j)] = std::log(unif(0.2, 0.4));
  }
  theta[layout.psi1()] = condition.psi1;
  theta[layout.psi2()] = condition.psi2();
  theta[layout.psi3()] = condition.psi3;
  return theta;
}

RespondentDraw simulate_respondent(const ParamVector& theta, const ModelConfig& config, std::mt19937_64& rng,
                                   const double* forced_xi) {
  const ParamLayout layout(config);
  const ItemParams items = layout.items(theta);
  const StructuralParams psi = layout.structural(theta);
  std::normal_distribution<double> normal;
  RespondentDraw out;
  out.xi = forced_xi ? *forced_xi : normal(rng);
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  out.tau = config.last_tau();
  for (int tau = config.first_tau(); tau < config.last_tau(); ++tau) {
    u -= changepoint_pmf(tau, out.xi, psi, config);
    if (u < 0.0) {
      out.tau = tau;
      break;
    }
  }
  out.y.resize(static_cast<std::size_t>(config.n_items()));
  for (int j = 1; j <= config.n_items(); ++j) {
    const double mean = items.beta()[j - 1] - items.alpha()[j - 1] * out.xi + (j > out.tau ? items.gamma()[j - 1] : 0.0);
    out.y[static_cast<std::size_t>(j - 1)] = mean + items.sigma()[j - 1] * normal(rng);
  }
  return out;
}

SimulatedData simulate_dataset(const SimCondition& condition, int replication) {
  condition.validate();
  const ModelConfig config = condition.config();
  const auto rep = static_cast<std::uint64_t>(replication);
  auto param_rng = make_stream(condition.seed, rep, 0, params_stream);
  TrueParams truth;
  truth.theta = draw_true_params(condition, param_rng);
  RowMatrix y(condition.n_respondents, config.n_items());
  for (long i = 0; i < condition.n_respondents; ++i) {
    auto rng = make_stream(condition.seed, rep, static_cast<std::uint64_t>(i), respondent_stream);
    auto draw = simulate_respondent(truth.theta, config, rng);
    for (int j = 0; j < config.n_items(); ++j) y(i, j) = draw.y[static_cast<std::size_t>(j)];
    truth.xi.push_back(draw.xi);
    truth.tau.push_back(draw.tau);
  }
  return {RtMatrix(std::move(y)), std::move(truth)};
}

Estimator mle_estimator(const FitOptions& options) {
  return [options](const SimulatedData& sim, const ModelConfig& config) {
    const FitResult f = fit(sim.data, config, options);
    Estimate e;
    e.theta = f.theta_hat;
    e.converged = f.converged;
    const auto rows =
        posterior_table(sim.data, f.theta_hat, build_grid(options.quadrature), config, options.eval.threads);
    for (const auto& row : rows) {
      e.mode.push_back(row.mode);
      e.mean.push_back(row.mean);
    }
    return e;
  };
}

Estimate perfect_estimate(const SimulatedData& sim, const ModelConfig&) {
  Estimate e;
  e.theta = sim.truth.theta;
  e.mode = sim.truth.tau;
  e.mean.assign(sim.truth.tau.begin(), sim.truth.tau.end());
  return e;
}

std::vector<std::string> natural_names(const ModelConfig& config) {
  const ParamLayout layout(config);
  std::vector<std::string> names;
  for (int r = 0; r < layout.dim(); ++r) {
    auto name = layout.name(r);
    if (name.starts_with("log_sigma")) name = name.substr(4);
    names.push_back(std::move(name));
  }
  return names;
}

ParamVector to_natural_scale(const ParamVector& theta, const ModelConfig& config) {
  const ParamLayout layout(config);
  ParamVector out = theta;
  for (int j = 1; j <= config.n_items(); ++j) out[layout.log_sigma(j)] = std::exp(theta[layout.log_sigma(j)]);
  return out;
}

const CellSummary& RecoveryReport::cell(const std::string& name) const {
  for (const auto& c : cells) {
    if (c.name == name) return c;
  }
  throw Error(ErrorKind::domain, fmt::format("no recovery cell named '{}'", name));
}

RecoveryReport summarize_records(const SimCondition& condition, std::vector<ReplicationRecord> records) {
  const ModelConfig config = condition.config();
  RecoveryReport report;
  report.condition = condition;
  const auto names = natural_names(config);
  std::vector<std::vector<double>> errors(names.size());
  std::vector<double> mae_mode, mae_mean;
  for (const auto& rec : records) {
    if (rec.failed) {
      ++report.n_failed;
      continue;
    }
    if (!rec.converged) ++report.n_nonconverged;
    for (std::size_t r = 0; r < names.size(); ++r) {
      const auto k = static_cast<Eigen::Index>(r);
      errors[r].push_back(rec.estimate[k] - rec.truth[k]);
    }
    mae_mode.push_back(rec.mae_mode);
    mae_mean.push_back(rec.mae_mean);
  }
  report.n_used = static_cast<int>(mae_mode.size());
  for (std::size_t r = 0; r < names.size(); ++r) {
    const auto m = summarize(errors[r]);
    report.cells.push_back({names[r], m.mean, std::sqrt(m.mean * m.mean + m.variance), m.variance});
  }
  report.mae_mode = summarize(mae_mode).mean;
  report.mae_mean = summarize(mae_mean).mean;
  report.records = std::move(records);
  return report;
}

RecoveryReport run_condition(const SimCondition& condition, const Estimator& estimator, const StudyOptions& study) {
  condition.validate();
  const ModelConfig config = condition.config();
  std::vector<ReplicationRecord> records(static_cast<std::size_t>(condition.replications));
  parallel_for(records.size(), study.threads, [&](std::size_t r) {
    auto& rec = records[r];
    rec.replication = static_cast<int>(r);
    const SimulatedData sim = simulate_dataset(condition, rec.replication);
    rec.truth = to_natural_scale(sim.truth.theta, config);
    try {
      const Estimate e = estimator(sim, config);
      rec.estimate = to_natural_scale(e.theta, config);
      rec.converged = e.converged;
      double mode_err = 0.0, mean_err = 0.0;
      for (std::size_t i = 0; i < sim.truth.tau.size(); ++i) {
        mode_err += std::abs(e.mode[i] - sim.truth.tau[i]);
        mean_err += std::abs(e.mean[i] - sim.truth.tau[i]);
      }
      const auto n = static_cast<double>(sim.truth.tau.size());
      rec.mae_mode = mode_err / n;
      rec.mae_mean = mean_err / n;
    } catch (const Error& e) {
      rec.failed = true;
      rec.error = e.what();
      spdlog::warn("{} replication {} failed: {}", condition.label(), r, e.what());
    }
  });
  auto report = summarize_records(condition, std::move(records));
  if (report.n_failed > study.max_failure_rate * condition.replications) {
    throw Error(ErrorKind::estimation, fmt::format("{}: {} of {} replications failed", condition.label(),
                                                   report.n_failed, condition.replications));
  }
  if (report.n_nonconverged > 0) {
    spdlog::info("{}: {} of {} fits stopped before the gradient tolerance", condition.label(),
                 report.n_nonconverged, report.n_used);
  }
  return report;
}

std::vector<SimCondition> grid_conditions(GridKind kind, int replications, std::uint64_t seed) {
  std::vector<SimCondition> out;
  if (kind == GridKind::primary) {
    for (int c : {5, 10, 15}) {
      for (double pi : {0.15, 0.25, 0.40}) {
        SimCondition s;
        s.n_respondents = 256;
        s.n_items = 20;
        s.boundary = c;
        s.prevalence = pi;
        s.replications = replications;
        s.seed = seed;
        out.push_back(s);
      }
    }
  } else {
    for (long n : {200L, 600L, 1800L}) {
      for (auto [j, c] : {std::pair{20, 12}, std::pair{30, 18}, std::pair{40, 24}}) {
        SimCondition s;
        s.n_respondents = n;
        s.n_items = j;
        s.boundary = c;
        s.prevalence = 0.15;
        s.replications = replications;
        s.seed = seed;
        out.push_back(s);
      }
    }
  }
  return out;
}

GridKind parse_grid_kind(const std::string& name) {
  if (name == "primary") return GridKind::primary;
  if (name == "secondary") return GridKind::secondary;
  throw Error(ErrorKind::config, fmt::format("unknown grid '{}' (expected primary or secondary)", name));
}

std::vector<RecoveryReport> run_grid(const std::vector<SimCondition>& conditions, const Estimator& estimator,
                                     const StudyOptions& study) {
  std::vector<RecoveryReport> reports;
  for (const auto& condition : conditions) reports.push_back(run_condition(condition, estimator, study));
  return reports;
}

}  // namespace rtcp
