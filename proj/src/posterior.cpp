#include "rtcp/posterior.hpp"

#include "rtcp/error.hpp"
#include "rtcp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rtcp {

std::vector<double> tau_posterior(std::span<const double> y, const ParamVector& theta, const QuadratureGrid& grid,
                                  const ModelConfig& config) {
  const RowMatrix weights = posterior_weights(y, theta, grid, config);
  std::vector<double> probs(static_cast<std::size_t>(weights.rows()));
  for (Eigen::Index t = 0; t < weights.rows(); ++t) probs[static_cast<std::size_t>(t)] = weights.row(t).sum();
  return probs;
}

int posterior_mode(std::span<const double> probs, int first_tau) {
  const auto it = std::max_element(probs.begin(), probs.end());  // first maximum
  return first_tau + static_cast<int>(it - probs.begin());
}

double posterior_mean_tau(std::span<const double> probs, int first_tau) {
  double mean = 0.0;
  for (std::size_t t = 0; t < probs.size(); ++t) mean += (first_tau + static_cast<double>(t)) * probs[t];
  return mean;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double entropy_normalized(std::span<const double> probs) {
  if (probs.size() < 2) throw Error(ErrorKind::domain, "normalized entropy needs at least two support points");
  return std::clamp(entropy(probs) / std::log(static_cast<double>(probs.size())), 0.0, 1.0);
}

PosteriorRow summarize_posterior(std::vector<double> probs, int first_tau) {
  PosteriorRow row;
  row.first_tau = first_tau;
  row.mode = posterior_mode(probs, first_tau);
  row.mean = posterior_mean_tau(probs, first_tau);
  row.p_change = 1.0 - probs.back();
  row.entropy_normalized = entropy_normalized(probs);
  row.probs = std::move(probs);
  return row;
}

std::vector<PosteriorRow> posterior_table(const RtMatrix& data, const ParamVector& theta, const QuadratureGrid& grid,
                                          const ModelConfig& config, int threads) {
  std::vector<PosteriorRow> rows(static_cast<std::size_t>(data.n_respondents()));
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    rows[i] = summarize_posterior(tau_posterior(data.row(static_cast<long>(i)), theta, grid, config),
                                  config.first_tau());
  });
  return rows;
}

Classification classify(const PosteriorRow& row, double threshold) {
  return row.p_change >= threshold ? Classification::changed : Classification::unchanged;
}

std::vector<int> credible_set(const PosteriorRow& row, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error(ErrorKind::domain, "credible-set alpha must lie in [0, 1)");
  std::vector<std::size_t> order(row.probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return row.probs[a] > row.probs[b]; });
  const double total = std::accumulate(row.probs.begin(), row.probs.end(), 0.0);
  const double target = (1.0 - alpha) * total;
  std::vector<int> set;
  double mass = 0.0;
  for (std::size_t t : order) {
    if (row.probs[t] <= 0.0) break;
    set.push_back(row.first_tau + static_cast<int>(t));
    mass += row.probs[t];
    // Relative slack absorbs rounding in the running sum at alpha = 0.
    if (mass >= target * (1.0 - 1e-14)) break;
  }
  return set;
}

PriorPosteriorComparison compare_prior_posterior(const std::vector<PosteriorRow>& rows, const ParamVector& theta,
                                                 const ModelConfig& config) {
  const ParamLayout layout(config);
  const StructuralParams psi = layout.structural(theta);
  PriorPosteriorComparison out;
  out.first_tau = config.first_tau();
  out.average_posterior.assign(static_cast<std::size_t>(config.support_size()), 0.0);
  for (int tau = config.first_tau(); tau <= config.last_tau(); ++tau) {
    out.prior.push_back(changepoint_pmf(tau, 0.0, psi, config));
  }
  for (const auto& row : rows) {
    for (std::size_t t = 0; t < row.probs.size(); ++t) out.average_posterior[t] += row.probs[t];
  }
  if (!rows.empty()) {
    for (double& p : out.average_posterior) p /= static_cast<double>(rows.size());
  }
  return out;
}

}  // namespace rtcp
