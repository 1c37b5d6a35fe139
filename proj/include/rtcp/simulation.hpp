#pragma once

// Data generation from the change-point model and the parameter-recovery
// harness for the simulation grids.

#include "rtcp/estimation.hpp"
#include "rtcp/model.hpp"
#include "rtcp/params.hpp"
#include "rtcp/posterior.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace rtcp {

struct SimCondition {
  long n_respondents = 256;
  int n_items = 20;
  int boundary = 15;
  double prevalence = 0.15;  // pi: population share of changers at xi = 0
  double psi1 = 0.2;
  double psi3 = -0.5;
  int replications = 50;
  std::uint64_t seed = 1;

  // log((1 - pi) / pi)
  double psi2() const;
  ModelConfig config() const;
  // Throws ErrorKind::config on out-of-range fields.
  void validate() const;
  std::string label() const;
};

struct TrueParams {
  ParamVector theta;
  std::vector<double> xi;
  std::vector<int> tau;
};

struct SimulatedData {
  RtMatrix data;
  TrueParams truth;
};

// Independent stream for (master seed, replication, respondent, purpose).
std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t replication, std::uint64_t respondent,
                            std::uint64_t purpose);

// beta ~ U(3,4), alpha ~ U(.5,1.5), gamma ~ U(.3,.8) for j > c+1,
// sigma ~ U(.2,.4); psi from the condition.
ParamVector draw_true_params(const SimCondition& condition, std::mt19937_64& rng);

struct RespondentDraw {
  std::vector<double> y;
  double xi = 0.0;
  int tau = 0;
};

// xi ~ N(0,1), tau by inverse CDF of the change-point pmf at xi, then y from
// the conditional normal. A forced xi skips the latent-speed draw.
RespondentDraw simulate_respondent(const ParamVector& theta, const ModelConfig& config, std::mt19937_64& rng,
                                   const double* forced_xi = nullptr);

SimulatedData simulate_dataset(const SimCondition& condition, int replication);

// What an estimator hands back to the harness for one replication.
struct Estimate {
  ParamVector theta;
  std::vector<int> mode;
  std::vector<double> mean;
  bool converged = true;
};

using Estimator = std::function<Estimate(const SimulatedData&, const ModelConfig&)>;

// Fit with c known, then posterior modes and means on the fitted grid.
Estimator mle_estimator(const FitOptions& options);
// Returns the truth; used to check the harness itself.
Estimate perfect_estimate(const SimulatedData& sim, const ModelConfig& config);

struct ReplicationRecord {
  int replication = 0;
  bool failed = false;
  bool converged = false;
  std::string error;
  ParamVector truth;      // natural scale: sigma instead of log sigma
  ParamVector estimate;   // natural scale
  double mae_mode = 0.0;  // averaged over all respondents
  double mae_mean = 0.0;
};

struct CellSummary {
  std::string name;  // e.g. "beta[3]", "sigma[4]", "psi1"
  double bias = 0.0;
  double rmse = 0.0;
  double variance = 0.0;  // population variance of the error
};

struct RecoveryReport {
  SimCondition condition;
  std::vector<ReplicationRecord> records;
  std::vector<CellSummary> cells;  // ParamLayout order
  double mae_mode = 0.0;
  double mae_mean = 0.0;
  int n_failed = 0;
  int n_nonconverged = 0;
  int n_used = 0;

  const CellSummary& cell(const std::string& name) const;
};

struct StudyOptions {
  int threads = 1;               // concurrent replications
  double max_failure_rate = 0.2;  // above this the condition errors out
};

// Replications that throw are excluded and counted; non-converged fits are
// kept and counted. Throws ErrorKind::estimation when too many fail.
RecoveryReport run_condition(const SimCondition& condition, const Estimator& estimator,
                             const StudyOptions& study = {});

// Aggregates replication records into bias/RMSE/MAE.
RecoveryReport summarize_records(const SimCondition& condition, std::vector<ReplicationRecord> records);

// Natural-scale names and values (log sigma mapped to sigma).
std::vector<std::string> natural_names(const ModelConfig& config);
ParamVector to_natural_scale(const ParamVector& theta, const ModelConfig& config);

enum class GridKind { primary, secondary };

// primary: c in {5,10,15} x pi in {.15,.25,.40}, N = 256, J = 20.
// secondary: N in {200,600,1800} x J in {20,30,40}, c = 12/18/24, pi = .15.
std::vector<SimCondition> grid_conditions(GridKind kind, int replications, std::uint64_t seed);
GridKind parse_grid_kind(const std::string& name);

std::vector<RecoveryReport> run_grid(const std::vector<SimCondition>& conditions, const Estimator& estimator,
                                     const StudyOptions& study = {});

}  // namespace rtcp
