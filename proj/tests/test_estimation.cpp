#include "doctest.h"

#include "rtcp/error.hpp"
#include "rtcp/estimation.hpp"
#include "rtcp/stats.hpp"
#include "support.hpp"

#include <cmath>

using namespace rtcp;
using namespace rtcp::testing;

TEST_CASE("holm adjustment") {
  const std::vector<double> p = {0.04, 0.01};
  const auto adj = holm_adjust(p);
  CHECK(adj[0] == doctest::Approx(0.04));
  CHECK(adj[1] == doctest::Approx(0.02));
  const std::vector<double> q = {0.01, 0.02, 0.03, 0.5};
  const auto adjq = holm_adjust(q);
  CHECK(adjq[0] == doctest::Approx(0.04));
  CHECK(adjq[1] == doctest::Approx(0.06));
  CHECK(adjq[2] == doctest::Approx(0.06));
  CHECK(adjq[3] == doctest::Approx(0.5));
}

TEST_CASE("chi-square tail and likelihood-ratio statistic") {
  const auto r = lrt_from_logliks(PsiCoordinate::psi1, -100.0, -100.0145);
  CHECK(r.statistic == doctest::Approx(0.029));
  CHECK(r.p_value == doctest::Approx(0.8648).epsilon(1e-3));
  const auto eq = lrt_from_logliks(PsiCoordinate::psi3, -50.0, -50.0);
  CHECK(eq.statistic == 0.0);
  CHECK(eq.p_value == doctest::Approx(1.0));
  // Constrained fit slightly better than the full fit: clamped to zero.
  CHECK(lrt_from_logliks(PsiCoordinate::psi1, -50.0, -49.9999999).statistic == 0.0);
  CHECK(chi_square1_sf(3.841458820694124) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("delta-method interval for the no-change probability") {
  const auto ci = no_change_probability_ci(1.597, 0.209, 0.95);
  CHECK(std::abs(ci.estimate - 0.832) < 1e-3);
  CHECK(std::abs(ci.lower - 0.774) < 1e-3);
  CHECK(std::abs(ci.upper - 0.889) < 1e-3);
  const auto zero = no_change_probability_ci(0.0, 0.0, 0.95);
  CHECK(zero.estimate == 0.5);
  CHECK(zero.lower == 0.5);
  CHECK(zero.upper == 0.5);
  const auto wide = no_change_probability_ci(0.0, 100.0, 0.95);
  CHECK(wide.lower == 0.0);
  CHECK(wide.upper == 1.0);
  CHECK_THROWS_AS(no_change_probability_ci(0.0, 1.0, 1.5), Error);
}

TEST_CASE("wald tests on a hand-built fit") {
  const ModelConfig config(6, 2);
  const ParamLayout layout(config);
  FitResult f(config);
  f.theta_hat = ParamVector::Zero(layout.dim());
  f.standard_errors = Vector::Constant(layout.dim(), 0.054);
  f.free.assign(static_cast<std::size_t>(layout.dim()), true);
  f.theta_hat[layout.gamma(4)] = -0.877;
  const auto res = wald_gamma_tests(f);
  REQUIRE(res.tests.size() == 3);
  CHECK(res.tests[0].item == 4);
  CHECK(res.tests[0].z == doctest::Approx(-0.877 / 0.054));
  CHECK(res.tests[0].p_raw < 1e-15);
  CHECK(res.tests[1].p_raw == doctest::Approx(0.5));
  CHECK(res.tests[1].p_holm == doctest::Approx(1.0));

  // Undefined standard errors drop out of the family.
  f.standard_errors[layout.gamma(5)] = std::nan("");
  const auto partial = wald_gamma_tests(f);
  CHECK_FALSE(partial.tests[1].defined);
  CHECK(std::isnan(partial.tests[1].p_holm));
  CHECK(partial.tests[2].p_holm == doctest::Approx(0.5));  // family of two

  const auto two = wald_test(f, layout.gamma(4));
  CHECK(two.p_raw == doctest::Approx(2.0 * normal_cdf(-0.877 / 0.054)));
}

TEST_CASE("initializer") {
  const auto inst = random_instance(3, 40, 8, 3);
  const auto a = initialize(inst.data, inst.config);
  CHECK(a == initialize(inst.data, inst.config));
  const ParamLayout layout(inst.config);
  CHECK(a[layout.beta(2)] == doctest::Approx(inst.data.values().col(1).mean()));
  CHECK(a[layout.psi2()] == 1.5);
  RowMatrix y = inst.data.values();
  y.col(4).setConstant(2.0);
  CHECK_THROWS_AS(initialize(RtMatrix(y), inst.config), Error);
  CHECK_THROWS_AS(initialize(inst.data, ModelConfig(9, 3)), Error);
}

TEST_CASE("invert_information flags singular directions") {
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(3, 3);
  info(0, 0) = 4.0;
  info(1, 1) = 1.0;
  info(1, 2) = info(2, 1) = 1.0;
  info(2, 2) = 1.0;  // coordinates 1 and 2 collinear
  const auto est = invert_information(info, {true, true, true});
  CHECK(est.standard_errors[0] == doctest::Approx(0.5));
  CHECK(std::isnan(est.standard_errors[1]));
  CHECK(std::isnan(est.standard_errors[2]));
  CHECK(est.undefined.size() == 2);

  const auto frozen = invert_information(info, {true, true, false});
  CHECK(frozen.standard_errors[1] == doctest::Approx(1.0));
  CHECK(std::isnan(frozen.standard_errors[2]));
}

TEST_CASE("fit recovers parameters of a simulated data set") {
  const auto inst = random_instance(2025, 1500, 10, 4);
  FitOptions options;
  const auto f = fit(inst.data, inst.config, options);
  CHECK(f.converged);
  CHECK(f.loglik >= marginal_loglik(inst.data, inst.theta, build_grid(options.quadrature), inst.config));
  const ParamLayout layout(inst.config);
  for (int j = 1; j <= 10; ++j) {
    INFO("item " << j);
    CHECK(std::abs(f.theta_hat[layout.beta(j)] - inst.theta[layout.beta(j)]) < 0.1);
    CHECK(std::abs(f.theta_hat[layout.alpha(j)] - inst.theta[layout.alpha(j)]) < 0.1);
    CHECK(std::abs(f.theta_hat[layout.log_sigma(j)] - inst.theta[layout.log_sigma(j)]) < 0.1);
  }
  // Standard errors are defined and of a sensible order.
  for (int r = 0; r < layout.dim(); ++r) {
    INFO(layout.name(r));
    CHECK(std::isfinite(f.standard_errors[r]));
    CHECK(f.standard_errors[r] < 1.0);
  }
  // Estimates lie within a few standard errors of the truth.
  int outside = 0;
  for (int r = 0; r < layout.dim(); ++r) {
    if (std::abs(f.theta_hat[r] - inst.theta[r]) > 4.0 * f.standard_errors[r]) ++outside;
  }
  CHECK(outside <= 1);
}

TEST_CASE("observed information is symmetric and matches second differences") {
  const auto inst = random_instance(77, 60, 6, 2, Scale::empirical);
  const auto grid = build_grid(QuadratureSpec{});
  const auto info = observed_information(inst.data, inst.theta, grid, inst.config);
  CHECK((info - info.transpose()).cwiseAbs().maxCoeff() == 0.0);
  const double h = 1e-4;
  const double f0 = marginal_loglik(inst.data, inst.theta, grid, inst.config);
  for (Eigen::Index r = 0; r < inst.theta.size(); ++r) {
    ParamVector up = inst.theta, down = inst.theta;
    up[r] += h;
    down[r] -= h;
    const double second =
        (marginal_loglik(inst.data, up, grid, inst.config) - 2.0 * f0 + marginal_loglik(inst.data, down, grid, inst.config)) /
        (h * h);
    INFO("coordinate " << r);
    CHECK(std::abs(-second - info(r, r)) <= 1e-3 * std::max(1.0, std::abs(second)));
  }
}

TEST_CASE("frozen gammas at zero reproduce the change-free log-normal fit") {
  // With every gamma frozen at zero the psi block only shifts prior mass that
  // no longer affects the likelihood, so the log-likelihood equals the plain
  // model integrated on the same grid.
  auto inst = random_instance(5, 200, 6, 2, Scale::empirical);
  const ParamLayout layout(inst.config);
  FitOptions options;
  options.standard_errors = false;
  for (int j = inst.config.first_gamma_item(); j <= 6; ++j) options.frozen.emplace_back(layout.gamma(j), 0.0);
  const auto f = fit(inst.data, inst.config, options);
  const auto u = unpack(f.theta_hat, inst.config);
  const auto grid = build_grid(options.quadrature);
  CHECK(f.loglik ==
        doctest::Approx(lognormal_quadrature_loglik(inst.data, u.beta, u.alpha, u.sigma, grid.nodes, grid.weights))
            .epsilon(1e-10));
  for (int j = inst.config.first_gamma_item(); j <= 6; ++j) CHECK(f.theta_hat[layout.gamma(j)] == 0.0);
  CHECK_FALSE(f.free[static_cast<std::size_t>(layout.gamma(4))]);
}

TEST_CASE("likelihood-ratio refit stays at or below the full fit") {
  const auto inst = random_instance(12, 400, 8, 3);
  FitOptions options;
  const auto full = fit(inst.data, inst.config, options);
  const auto lrt = lrt_psi(inst.data, options, PsiCoordinate::psi3, full);
  CHECK(lrt.constrained_loglik <= full.loglik + 1e-6);
  CHECK(lrt.statistic >= 0.0);
  CHECK(lrt.p_value >= 0.0);
  CHECK(lrt.p_value <= 1.0);
}

TEST_CASE("fit argument validation") {
  const auto inst = random_instance(1, 30, 6, 2);
  FitOptions bad;
  bad.gradient_tolerance = 0.0;
  CHECK_THROWS_AS(fit(inst.data, inst.config, bad), Error);
  FitOptions neg;
  neg.ridge_gamma = -1.0;
  CHECK_THROWS_AS(fit(inst.data, inst.config, neg), Error);
  CHECK_THROWS_AS(fit(inst.data, ModelConfig(7, 2)), Error);
}

TEST_CASE("multistart never worsens the fit") {
  const auto inst = random_instance(44, 150, 8, 3);
  FitOptions one;
  one.standard_errors = false;
  FitOptions many = one;
  many.multistart = 2;
  CHECK(fit(inst.data, inst.config, many).loglik >= fit(inst.data, inst.config, one).loglik - 1e-9);
}
