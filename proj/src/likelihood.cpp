#include "rtcp/likelihood.hpp"

#include "rtcp/error.hpp"
#include "rtcp/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace rtcp {

namespace {

// Lattice terms below the per-respondent maximum by more than this are
// dropped; exp(-60) is far below double precision relative to the maximum.
constexpr double kLatticeCutoff = 60.0;
constexpr long kDeterministicBlock = 32;

// Everything about theta that does not depend on a respondent's data.
//
// For fixed tau, sum_j (r_ij / sigma_j)^2 is a quadratic in xi whose xi^2
// coefficient C = sum_j alpha_j^2 / sigma_j^2 does not depend on tau or y, so
// the lattice exponent is base[t, k] - A_t / 2 - B_t xi_k with A_t, B_t built
// from prefix/suffix sums over items.
class Lattice {
 public:
  Lattice(const ParamVector& theta, const QuadratureGrid& grid, const ModelConfig& config)
      : config_(config), layout_(config), grid_(grid) {
    layout_.check(theta);
    if (grid.size() < 1) throw Error(ErrorKind::domain, "empty quadrature grid");
    const int J = config.n_items();
    beta_.resize(J);
    alpha_.resize(J);
    gamma_.resize(J);
    inv_var_.resize(J);
    sigma_.resize(J);
    log_norm_ = 0.0;
    double curvature = 0.0;
    for (int item = 1; item <= J; ++item) {
      const int j = item - 1;
      beta_[j] = theta[layout_.beta(item)];
      alpha_[j] = theta[layout_.alpha(item)];
      gamma_[j] = config.has_gamma(item) ? theta[layout_.gamma(item)] : 0.0;
      const double log_sigma = theta[layout_.log_sigma(item)];
      sigma_[j] = std::exp(log_sigma);
      inv_var_[j] = std::exp(-2.0 * log_sigma);
      log_norm_ += -0.5 * std::log(2.0 * std::numbers::pi) - log_sigma;
      curvature += alpha_[j] * alpha_[j] * inv_var_[j];
    }

    const StructuralParams psi = layout_.structural(theta);
    const auto loc = location_log_weights(psi.psi1, config);
    mean_location_ = 0.0;
    for (std::size_t a = 0; a < loc.size(); ++a) mean_location_ += static_cast<double>(a) * std::exp(loc[a]);

    const int T = config.support_size();
    const int K = grid.size();
    base_.resize(T, K);
    q_.resize(K);
    for (int k = 0; k < K; ++k) {
      const double xi = grid.nodes[k];
      const double eta = psi.psi2 + psi.psi3 * xi;
      q_[k] = logistic(eta);
      const double common = grid.log_weights[k] - 0.5 * curvature * xi * xi;
      const double log_change = -softplus(eta);
      for (int t = 0; t + 1 < T; ++t) base_(t, k) = common + loc[t] + log_change;
      base_(T - 1, k) = common - softplus(-eta);
    }
  }

  struct Workspace {
    std::vector<double> d, e, pre_a, pre_b, suf_a, suf_b;
    Vector a, b, m0, m1, m2;
    RowMatrix v;
  };

  // Returns log f(y_i) and, if `grad` is set, adds the respondent's score
  // into it. If `weights` is set it receives the normalized lattice.
  double respondent(std::span<const double> y, Workspace& ws, Vector* grad, RowMatrix* weights) const {
    const int J = config_.n_items();
    const int T = config_.support_size();
    const int K = grid_.size();
    const int first = config_.first_tau();

    ws.d.resize(J);
    ws.e.resize(J);
    ws.pre_a.assign(J + 1, 0.0);
    ws.pre_b.assign(J + 1, 0.0);
    ws.suf_a.assign(J + 1, 0.0);
    ws.suf_b.assign(J + 1, 0.0);
    for (int j = 0; j < J; ++j) {
      ws.d[j] = y[j] - beta_[j];
      ws.e[j] = ws.d[j] - gamma_[j];
      ws.pre_a[j + 1] = ws.pre_a[j] + ws.d[j] * ws.d[j] * inv_var_[j];
      ws.pre_b[j + 1] = ws.pre_b[j] + ws.d[j] * alpha_[j] * inv_var_[j];
    }
    // suf_*[m] sums the shifted terms over items m+1..J (0-based m..J-1).
    for (int j = J - 1; j >= 0; --j) {
      ws.suf_a[j] = ws.suf_a[j + 1] + ws.e[j] * ws.e[j] * inv_var_[j];
      ws.suf_b[j] = ws.suf_b[j + 1] + ws.e[j] * alpha_[j] * inv_var_[j];
    }
    ws.a.resize(T);
    ws.b.resize(T);
    for (int t = 0; t < T; ++t) {
      const int tau = first + t;  // items 1..tau are pre-change
      ws.a[t] = ws.pre_a[tau] + ws.suf_a[tau];
      ws.b[t] = ws.pre_b[tau] + ws.suf_b[tau];
    }

    ws.v.resize(T, K);
    double vmax = -std::numeric_limits<double>::infinity();
    for (int t = 0; t < T; ++t) {
      const double half_a = 0.5 * ws.a[t];
      const double b = ws.b[t];
      for (int k = 0; k < K; ++k) {
        const double v = base_(t, k) - half_a - b * grid_.nodes[k];
        ws.v(t, k) = v;
        vmax = std::max(vmax, v);
      }
    }
    if (!std::isfinite(vmax)) return std::numeric_limits<double>::quiet_NaN();
    const double floor = vmax - kLatticeCutoff;
    double total = 0.0;
    for (int t = 0; t < T; ++t) {
      for (int k = 0; k < K; ++k) {
        const double v = ws.v(t, k);
        const double p = v > floor ? std::exp(v - vmax) : 0.0;
        ws.v(t, k) = p;
        total += p;
      }
    }
    const double loglik = log_norm_ + vmax + std::log(total);
    if (!std::isfinite(loglik)) return loglik;
    const double inv_total = 1.0 / total;
    if (weights) *weights = ws.v * inv_total;
    if (!grad) return loglik;

    // Posterior moments of xi per tau, and the psi2/psi3 terms.
    ws.m0.setZero(T);
    ws.m1.setZero(T);
    ws.m2.setZero(T);
    double pq = 0.0;
    double pxq = 0.0;
    for (int t = 0; t < T; ++t) {
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, sq = 0.0, sxq = 0.0;
      for (int k = 0; k < K; ++k) {
        const double p = ws.v(t, k);
        if (p == 0.0) continue;
        const double xi = grid_.nodes[k];
        s0 += p;
        s1 += p * xi;
        s2 += p * xi * xi;
        sq += p * q_[k];
        sxq += p * xi * q_[k];
      }
      ws.m0[t] = s0 * inv_total;
      ws.m1[t] = s1 * inv_total;
      ws.m2[t] = s2 * inv_total;
      pq += sq * inv_total;
      pxq += sxq * inv_total;
    }
    const double mean_xi = ws.m1.sum();
    const double mean_xi2 = ws.m2.sum();

    Vector& g = *grad;
    double post0 = 0.0;  // posterior mass of tau <= item - 1
    double post1 = 0.0;
    for (int item = 1; item <= J; ++item) {
      const int j = item - 1;
      const int t_prev = item - 1 - first;  // tau = item - 1 becomes post-change for this item
      if (t_prev >= 0 && t_prev < T) {
        post0 += ws.m0[t_prev];
        post1 += ws.m1[t_prev];
      }
      const double d = ws.d[j];
      const double al = alpha_[j];
      const double ga = gamma_[j];
      const double w = inv_var_[j];
      const double er = d + al * mean_xi - ga * post0;
      const double exir = d * mean_xi + al * mean_xi2 - ga * post1;
      const double epost = (d - ga) * post0 + al * post1;
      const double centred = d + al * mean_xi;
      const double er2 = centred * centred + al * al * (mean_xi2 - mean_xi * mean_xi) -
                         2.0 * ga * (d * post0 + al * post1) + ga * ga * post0;
      g[layout_.beta(item)] += er * w;
      g[layout_.alpha(item)] -= exir * w;
      if (config_.has_gamma(item)) g[layout_.gamma(item)] += epost * w;
      g[layout_.log_sigma(item)] += er2 * w - 1.0;
    }

    double d_psi1 = 0.0;
    for (int t = 0; t + 1 < T; ++t) d_psi1 += ws.m0[t] * (t - mean_location_);
    g[layout_.psi1()] += d_psi1;
    g[layout_.psi2()] += ws.m0[T - 1] - pq;
    g[layout_.psi3()] += ws.m1[T - 1] - pxq;
    return loglik;
  }

  int dim() const noexcept { return layout_.dim(); }

 private:
  ModelConfig config_;
  ParamLayout layout_;
  const QuadratureGrid& grid_;
  std::vector<double> beta_, alpha_, gamma_, inv_var_, sigma_;
  double log_norm_ = 0.0;
  double mean_location_ = 0.0;
  RowMatrix base_;
  std::vector<double> q_;
};

void check_shapes(const RtMatrix& data, const ModelConfig& config) {
  if (data.n_items() != config.n_items()) {
    throw Error(ErrorKind::config,
                fmt::format("data have {} items but the model expects J={}", data.n_items(), config.n_items()));
  }
}

[[noreturn]] void non_finite(long respondent) {
  throw RespondentError(ErrorKind::estimation,
                        fmt::format("non-finite likelihood contribution for respondent {}", respondent + 1), respondent);
}

double evaluate(const RtMatrix& data, const ParamVector& theta, const QuadratureGrid& grid, const ModelConfig& config,
                Vector* gradient, const EvalOptions& options) {
  check_shapes(data, config);
  const Lattice lattice(theta, grid, config);
  const long N = data.n_respondents();
  const int threads = std::max(1, options.threads);
  const long block = options.deterministic_reduction ? kDeterministicBlock : (N + threads - 1) / threads;
  const long n_blocks = (N + block - 1) / block;

  std::vector<double> block_loglik(static_cast<std::size_t>(n_blocks), 0.0);
  std::vector<Vector> block_grad(gradient ? static_cast<std::size_t>(n_blocks) : 0);
  parallel_for(static_cast<std::size_t>(n_blocks), threads, [&](std::size_t b) {
    Lattice::Workspace ws;
    Vector* g = nullptr;
    if (gradient) {
      block_grad[b] = Vector::Zero(lattice.dim());
      g = &block_grad[b];
    }
    double sum = 0.0;
    const long lo = static_cast<long>(b) * block;
    const long hi = std::min(N, lo + block);
    for (long i = lo; i < hi; ++i) {
      const double li = lattice.respondent(data.row(i), ws, g, nullptr);
      if (!std::isfinite(li)) non_finite(i);
      sum += li;
    }
    block_loglik[b] = sum;
  });

  double total = 0.0;
  for (double v : block_loglik) total += v;
  if (gradient) {
    gradient->setZero(lattice.dim());
    for (const auto& g : block_grad) *gradient += g;
  }
  return total;
}

}  // namespace

double marginal_loglik(const RtMatrix& data, const ParamVector& theta, const QuadratureGrid& grid,
                       const ModelConfig& config, const EvalOptions& options) {
  return evaluate(data, theta, grid, config, nullptr, options);
}

Vector score(const RtMatrix& data, const ParamVector& theta, const QuadratureGrid& grid, const ModelConfig& config,
             const EvalOptions& options) {
  Vector g;
  evaluate(data, theta, grid, config, &g, options);
  return g;
}

double loglik_and_score(const RtMatrix& data, const ParamVector& theta, const QuadratureGrid& grid,
                        const ModelConfig& config, Vector& gradient, const EvalOptions& options) {
  return evaluate(data, theta, grid, config, &gradient, options);
}

RowMatrix posterior_weights(std::span<const double> y, const ParamVector& theta, const QuadratureGrid& grid,
                            const ModelConfig& config) {
  if (static_cast<int>(y.size()) != config.n_items()) {
    throw Error(ErrorKind::config, "response vector length does not match the number of items");
  }
  const Lattice lattice(theta, grid, config);
  Lattice::Workspace ws;
  RowMatrix weights;
  const double li = lattice.respondent(y, ws, nullptr, &weights);
  if (!std::isfinite(li)) non_finite(0);
  return weights;
}

Vector respondent_logliks(const RtMatrix& data, const ParamVector& theta, const QuadratureGrid& grid,
                          const ModelConfig& config, const EvalOptions& options) {
  check_shapes(data, config);
  const Lattice lattice(theta, grid, config);
  const long N = data.n_respondents();
  Vector out(N);
  const long block = kDeterministicBlock;
  const long n_blocks = (N + block - 1) / block;
  parallel_for(static_cast<std::size_t>(n_blocks), options.threads, [&](std::size_t b) {
    Lattice::Workspace ws;
    const long lo = static_cast<long>(b) * block;
    const long hi = std::min(N, lo + block);
    for (long i = lo; i < hi; ++i) {
      out[i] = lattice.respondent(data.row(i), ws, nullptr, nullptr);
      if (!std::isfinite(out[i])) non_finite(i);
    }
  });
  return out;
}

}  // namespace rtcp
