#include "rtcp/selection.hpp"

#include "rtcp/error.hpp"
#include "rtcp/parallel.hpp"
#include "rtcp/posterior.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace rtcp {

int free_parameter_count(const ModelConfig& config) {
  const int J = config.n_items();
  return 3 * J + config.n_free_gamma() + 3;
}

CandidateScore score_candidate(int boundary, double loglik, int n_params, long n_respondents, double entropy_total) {
  CandidateScore s;
  s.boundary = boundary;
  s.loglik = loglik;
  s.n_params = n_params;
  s.entropy_total = entropy_total;
  s.aic = -2.0 * loglik + 2.0 * n_params;
  s.bic = -2.0 * loglik + n_params * std::log(static_cast<double>(n_respondents));
  s.icl = s.bic + 2.0 * entropy_total;
  return s;
}

SelectionResult rank_candidates(std::vector<CandidateScore> candidates) {
  std::sort(candidates.begin(), candidates.end(),
            [](const CandidateScore& a, const CandidateScore& b) { return a.boundary < b.boundary; });
  auto argmin = [&](double CandidateScore::*field) {
    const CandidateScore* best = nullptr;
    for (const auto& c : candidates) {
      if (c.failed) continue;
      // Ascending c, so "<=" within tolerance lets the larger c win ties.
      if (!best || c.*field <= best->*field + 1e-9) best = &c;
    }
    if (!best) throw Error(ErrorKind::estimation, "every candidate fit failed; nothing to select");
    return best->boundary;
  };
  SelectionResult result;
  result.selected_aic = argmin(&CandidateScore::aic);
  result.selected_bic = argmin(&CandidateScore::bic);
  result.selected_icl = argmin(&CandidateScore::icl);
  result.candidates = std::move(candidates);
  return result;
}

SelectionResult select_c(const RtMatrix& data, std::vector<int> candidates, const FitOptions& options, int threads) {
  if (candidates.empty()) throw Error(ErrorKind::config, "no candidate values of c");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (int c : candidates) (void)ModelConfig(data.n_items(), c);  // validates every candidate up front

  std::vector<CandidateScore> scores(candidates.size());
  parallel_for(candidates.size(), threads, [&](std::size_t k) {
    const ModelConfig config(data.n_items(), candidates[k]);
    try {
      const FitResult f = fit(data, config, options);
      const auto rows = posterior_table(data, f.theta_hat, build_grid(options.quadrature), config);
      double h = 0.0;
      for (const auto& row : rows) h += entropy(row.probs);
      scores[k] = score_candidate(candidates[k], f.loglik, free_parameter_count(config), data.n_respondents(), h);
      scores[k].converged = f.converged;
    } catch (const Error& e) {
      spdlog::warn("candidate c={} failed: {}", candidates[k], e.what());
      scores[k].boundary = candidates[k];
      scores[k].failed = true;
      scores[k].error = e.what();
    }
  });
  return rank_candidates(std::move(scores));
}

}  // namespace rtcp
