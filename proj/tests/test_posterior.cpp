#include "doctest.h"

#include "rtcp/error.hpp"
#include "rtcp/posterior.hpp"
#include "support.hpp"

#include <cmath>

using namespace rtcp;
using namespace rtcp::testing;

TEST_CASE("credible set by hand") {
  const auto row = summarize_posterior({0.6, 0.25, 0.15}, 18);
  CHECK(credible_set(row, 0.2) == std::vector<int>{18, 19});
  CHECK(credible_set(row, 0.0) == std::vector<int>{18, 19, 20});
  CHECK(credible_set(row, 0.5) == std::vector<int>{18});
  CHECK_THROWS_AS(credible_set(row, 1.0), Error);
  CHECK_THROWS_AS(credible_set(row, -0.1), Error);
}

TEST_CASE("credible set of a degenerate posterior is the single point") {
  std::vector<double> p(15, 0.0);
  p[7] = 1.0;
  const auto row = summarize_posterior(p, 6);
  for (double alpha : {0.0, 0.05, 0.5, 0.99}) CHECK(credible_set(row, alpha) == std::vector<int>{13});
}

TEST_CASE("credible set under ties keeps the smaller locations") {
  std::vector<double> p(15, 1.0 / 14.0);
  p.back() = 0.0;
  const auto row = summarize_posterior(p, 6);
  const auto set = credible_set(row, 0.05);
  REQUIRE(set.size() == 14);
  for (int k = 0; k < 14; ++k) CHECK(set[static_cast<std::size_t>(k)] == 6 + k);
  // A smaller level cuts the ordered prefix.
  const auto half = credible_set(row, 0.5);
  REQUIRE(half.size() == 7);
  CHECK(half.front() == 6);
  CHECK(half.back() == 12);
}

TEST_CASE("mode, mean and entropy summaries") {
  std::vector<double> degenerate(15, 0.0);
  degenerate[7] = 1.0;
  const auto d = summarize_posterior(degenerate, 6);
  CHECK(d.mode == 13);
  CHECK(d.mean == 13.0);
  CHECK(d.entropy_normalized == 0.0);
  CHECK(d.p_change == 1.0);

  const std::vector<double> uniform(15, 1.0 / 15.0);
  const auto u = summarize_posterior(uniform, 6);
  CHECK(u.mean == doctest::Approx(13.0).epsilon(1e-14));
  CHECK(u.entropy_normalized == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(u.mode == 6);  // all tied
  CHECK(entropy(uniform) == doctest::Approx(std::log(15.0)));

  CHECK(posterior_mode(std::vector<double>{0.2, 0.4, 0.4}, 3) == 4);
  CHECK(entropy(std::vector<double>{0.0, 1.0}) == 0.0);
  CHECK_THROWS_AS(entropy_normalized(std::vector<double>{1.0}), Error);
}

TEST_CASE("classification threshold is inclusive") {
  const auto half = summarize_posterior({0.3, 0.2, 0.5}, 4);
  CHECK(half.p_change == 0.5);
  CHECK(classify(half, 0.5) == Classification::changed);
  CHECK(classify(half, 0.51) == Classification::unchanged);
  const auto none = summarize_posterior({0.0, 0.0, 1.0}, 4);
  CHECK(classify(none, 1e-12) == Classification::unchanged);
}

TEST_CASE("uninformative data return the prior") {
  // alpha = gamma = 0: the data say nothing about xi or tau.
  auto inst = random_instance(8, 5, 8, 3);
  const ParamLayout layout(inst.config);
  for (int j = 1; j <= 8; ++j) {
    inst.theta[layout.alpha(j)] = 0.0;
    if (inst.config.has_gamma(j)) inst.theta[layout.gamma(j)] = 0.0;
  }
  inst.theta[layout.psi3()] = 0.0;  // prior free of xi
  const auto grid = build_grid(QuadratureSpec{});
  const auto rows = posterior_table(inst.data, inst.theta, grid, inst.config);
  const StructuralParams psi = layout.structural(inst.theta);
  for (const auto& row : rows) {
    for (int tau = 4; tau <= 8; ++tau) {
      CHECK(row.probs[static_cast<std::size_t>(tau - 4)] ==
            doctest::Approx(changepoint_pmf(tau, 0.0, psi, inst.config)).epsilon(1e-10));
    }
  }
  const auto cmp = compare_prior_posterior(rows, inst.theta, inst.config);
  for (std::size_t k = 0; k < cmp.prior.size(); ++k) {
    CHECK(cmp.average_posterior[k] == doctest::Approx(cmp.prior[k]).epsilon(1e-10));
  }
}

TEST_CASE("posterior identities hold for every respondent") {
  const auto inst = random_instance(31, 300, 12, 4);
  const auto grid = build_grid(QuadratureSpec{});
  const auto rows = posterior_table(inst.data, inst.theta, grid, inst.config, 2);
  REQUIRE(rows.size() == 300);
  for (const auto& row : rows) {
    double total = 0.0;
    for (double p : row.probs) total += p;
    CHECK(std::abs(total - 1.0) < 1e-10);
    CHECK(row.entropy_normalized >= 0.0);
    CHECK(row.entropy_normalized <= 1.0);
    CHECK(row.p_change == 1.0 - row.probs.back());
    for (double alpha : {0.05, 0.2}) {
      double mass = 0.0;
      for (int tau : credible_set(row, alpha)) mass += row.probs[static_cast<std::size_t>(tau - row.first_tau)];
      CHECK(mass >= (1.0 - alpha) * (1.0 - 1e-12));
    }
  }
  // Modal locations agree with the truth for most respondents at this scale.
  int hits = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) hits += rows[i].mode == inst.tau[i];
  CHECK(hits > 200);
}
