#pragma once

// Respondent-level posterior summaries over change-point locations.

#include "rtcp/likelihood.hpp"
#include "rtcp/model.hpp"
#include "rtcp/params.hpp"
#include "rtcp/quadrature.hpp"

#include <span>
#include <vector>

namespace rtcp {

struct PosteriorRow {
  std::vector<double> probs;  // tau = first_tau .. J
  int first_tau = 0;
  int mode = 0;               // ties toward the smaller tau
  double mean = 0.0;          // includes tau = J
  double p_change = 0.0;      // 1 - probs.back()
  double entropy_normalized = 0.0;

  int last_tau() const { return first_tau + static_cast<int>(probs.size()) - 1; }
};

enum class Classification { unchanged, changed };

// P(tau | y) marginalized over the quadrature nodes.
std::vector<double> tau_posterior(std::span<const double> y, const ParamVector& theta, const QuadratureGrid& grid,
                                  const ModelConfig& config);

// Summaries computed from a probability sequence over {first_tau, ..., last}.
PosteriorRow summarize_posterior(std::vector<double> probs, int first_tau);

std::vector<PosteriorRow> posterior_table(const RtMatrix& data, const ParamVector& theta, const QuadratureGrid& grid,
                                          const ModelConfig& config, int threads = 1);

int posterior_mode(std::span<const double> probs, int first_tau);
double posterior_mean_tau(std::span<const double> probs, int first_tau);

// -sum p log p / log(size). Throws ErrorKind::domain when fewer than two
// support points.
double entropy_normalized(std::span<const double> probs);
// -sum p log p in nats, 0 log 0 = 0.
double entropy(std::span<const double> probs);

// changed iff p_change >= threshold.
Classification classify(const PosteriorRow& row, double threshold);

// Support points sorted by descending probability (ties: smaller tau first),
// truncated at the shortest prefix with mass >= 1 - alpha. Zero-probability
// points are never included.
std::vector<int> credible_set(const PosteriorRow& row, double alpha);

struct PriorPosteriorComparison {
  std::vector<double> prior;           // pmf at xi = 0
  std::vector<double> average_posterior;
  int first_tau = 0;
};

// Model-implied prior at xi = 0 against the population-average posterior.
PriorPosteriorComparison compare_prior_posterior(const std::vector<PosteriorRow>& rows, const ParamVector& theta,
                                                 const ModelConfig& config);

}  // namespace rtcp
