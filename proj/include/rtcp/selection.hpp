#pragma once

// Choice of the boundary parameter c by AIC, BIC and ICL over candidate fits.

#include "rtcp/estimation.hpp"
#include "rtcp/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rtcp {

// 3J + (J - c - 1) + 3: constrained gamma entries are not counted.
int free_parameter_count(const ModelConfig& config);

struct CandidateScore {
  int boundary = 0;
  bool failed = false;
  std::string error;
  double loglik = 0.0;
  int n_params = 0;
  double aic = 0.0;
  double bic = 0.0;
  double icl = 0.0;
  double entropy_total = 0.0;  // sum over respondents of -sum p log p, nats
  bool converged = false;
};

struct SelectionResult {
  std::vector<CandidateScore> candidates;  // ascending c
  int selected_aic = 0;
  int selected_bic = 0;
  int selected_icl = 0;
};

// Information criteria from stored components.
CandidateScore score_candidate(int boundary, double loglik, int n_params, long n_respondents, double entropy_total);

// Argmin per criterion over non-failed candidates; values within 1e-9 go to
// the larger c. Throws ErrorKind::estimation when every candidate failed.
SelectionResult rank_candidates(std::vector<CandidateScore> candidates);

// Fits each candidate c and ranks them. Throws ErrorKind::config for a
// candidate outside 1 <= c < J - 1 or an empty candidate set.
SelectionResult select_c(const RtMatrix& data, std::vector<int> candidates, const FitOptions& options,
                         int threads = 1);

}  // namespace rtcp
