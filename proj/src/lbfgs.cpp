#include "rtcp/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

namespace rtcp {

namespace {

using Eigen::VectorXd;

struct Probe {
  double alpha = 0.0;
  double f = 0.0;
  double dphi = 0.0;
  VectorXd x;
  VectorXd g;
};

class LineSearch {
 public:
  LineSearch(const Objective& objective, const VectorXd& x0, const VectorXd& direction, double f0, double dphi0,
             const LbfgsOptions& options, int& evaluations)
      : objective_(objective),
        x0_(x0),
        dir_(direction),
        f0_(f0),
        dphi0_(dphi0),
        options_(options),
        evaluations_(evaluations) {}

  std::optional<Probe> run(double alpha) {
    Probe prev{0.0, f0_, dphi0_, {}, {}};
    for (int i = 0; i < options_.max_line_search; ++i) {
      Probe cur = eval(alpha);
      if (!finite(cur)) {
        alpha = prev.alpha + 0.5 * (alpha - prev.alpha);
        continue;
      }
      if (acceptable(cur)) return cur;
      if (!armijo(cur) || (i > 0 && cur.f >= prev.f)) return zoom(std::move(prev), std::move(cur));
      if (cur.dphi >= 0.0) return zoom(std::move(cur), std::move(prev));
      prev = std::move(cur);
      alpha = std::min(2.0 * alpha, 1e10);
    }
    return std::nullopt;
  }

 private:
  Probe eval(double alpha) {
    Probe p;
    p.alpha = alpha;
    p.x = x0_ + alpha * dir_;
    p.g.resize(p.x.size());
    p.f = objective_(p.x, p.g);
    ++evaluations_;
    p.dphi = std::isfinite(p.f) ? p.g.dot(dir_) : std::numeric_limits<double>::quiet_NaN();
    return p;
  }

  static bool finite(const Probe& p) { return std::isfinite(p.f) && std::isfinite(p.dphi); }

  bool armijo(const Probe& p) const { return p.f <= f0_ + options_.sufficient_decrease * p.alpha * dphi0_; }

  bool approx_wolfe(const Probe& p) const {
    const double eps = options_.approx_wolfe_epsilon * std::abs(f0_);
    return p.f <= f0_ + eps && p.dphi >= options_.curvature * dphi0_ &&
           p.dphi <= (2.0 * options_.sufficient_decrease - 1.0) * dphi0_;
  }

  bool acceptable(const Probe& p) const {
    return (armijo(p) && std::abs(p.dphi) <= -options_.curvature * dphi0_) || approx_wolfe(p);
  }

  // lo satisfies sufficient decrease and has the lower objective of the pair.
  std::optional<Probe> zoom(Probe lo, Probe hi) {
    for (int i = 0; i < options_.max_line_search; ++i) {
      const double width = hi.alpha - lo.alpha;
      double alpha = 0.5 * (lo.alpha + hi.alpha);
      if (finite(hi)) {
        const double denom = 2.0 * (hi.f - lo.f - lo.dphi * width);
        if (denom > 0.0) {
          const double trial = lo.alpha - lo.dphi * width * width / denom;
          const double a = std::min(lo.alpha, hi.alpha);
          const double b = std::max(lo.alpha, hi.alpha);
          const double margin = 0.1 * (b - a);
          if (std::isfinite(trial) && trial > a + margin && trial < b - margin) alpha = trial;
        }
      }
      Probe cur = eval(alpha);
      if (!finite(cur)) {
        hi = std::move(cur);
        continue;
      }
      if (acceptable(cur)) return cur;
      if (!armijo(cur) || cur.f >= lo.f) {
        hi = std::move(cur);
      } else {
        if (cur.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = std::move(lo);
        lo = std::move(cur);
      }
      if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
    }
    if (lo.alpha > 0.0 && lo.f < f0_) return lo;
    return std::nullopt;
  }

  const Objective& objective_;
  const VectorXd& x0_;
  const VectorXd& dir_;
  double f0_;
  double dphi0_;
  const LbfgsOptions& options_;
  int& evaluations_;
};

struct Correction {
  VectorXd s;
  VectorXd y;
  double rho;
};

VectorXd two_loop(const VectorXd& g, const std::deque<Correction>& history) {
  VectorXd q = -g;
  std::vector<double> a(history.size());
  for (std::size_t i = history.size(); i-- > 0;) {
    a[i] = history[i].rho * history[i].s.dot(q);
    q -= a[i] * history[i].y;
  }
  const auto& last = history.back();
  q *= last.s.dot(last.y) / last.y.squaredNorm();
  for (std::size_t i = 0; i < history.size(); ++i) {
    const double b = history[i].rho * history[i].y.dot(q);
    q += (a[i] - b) * history[i].s;
  }
  return q;
}

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd x0, const LbfgsOptions& options) {
  LbfgsResult result;
  result.x = std::move(x0);
  result.gradient.resize(result.x.size());
  result.value = objective(result.x, result.gradient);
  result.evaluations = 1;
  if (!std::isfinite(result.value) || !result.gradient.allFinite()) {
    result.status = "non-finite objective at the starting point";
    return result;
  }

  std::deque<Correction> history;
  bool restarted = false;
  for (;;) {
    if (result.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      result.converged = true;
      result.status = "gradient tolerance reached";
      return result;
    }
    if (result.iterations >= options.max_iterations) {
      result.status = "iteration limit reached";
      return result;
    }

    VectorXd direction = history.empty() ? VectorXd(-result.gradient) : two_loop(result.gradient, history);
    double dphi0 = result.gradient.dot(direction);
    if (!(dphi0 < 0.0)) {
      history.clear();
      direction = -result.gradient;
      dphi0 = result.gradient.dot(direction);
    }
    const double initial_step =
        history.empty() ? std::min(1.0, 1.0 / result.gradient.lpNorm<Eigen::Infinity>()) : 1.0;

    LineSearch search(objective, result.x, direction, result.value, dphi0, options, result.evaluations);
    auto probe = search.run(initial_step);
    ++result.iterations;
    if (!probe) {
      if (!history.empty() && !restarted) {
        history.clear();
        restarted = true;
        continue;
      }
      result.status = "line search failed";
      return result;
    }
    restarted = false;

    VectorXd s = probe->x - result.x;
    VectorXd y = probe->g - result.gradient;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      history.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (static_cast<int>(history.size()) > options.memory) history.pop_front();
    }
    result.x = std::move(probe->x);
    result.gradient = std::move(probe->g);
    result.value = probe->f;
  }
}

}  // namespace rtcp
