#include "rtcp/params.hpp"

#include "rtcp/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace rtcp {

void ParamLayout::check(const ParamVector& theta) const {
  if (theta.size() != dim()) {
    throw Error(ErrorKind::domain, fmt::format("parameter vector has dimension {}, expected {}", theta.size(), dim()));
  }
}

ItemParams ParamLayout::items(const ParamVector& theta) const {
  check(theta);
  Vector b(J()), a(J()), g = Vector::Zero(J()), s(J());
  for (int item = 1; item <= J(); ++item) {
    b[item - 1] = theta[beta(item)];
    a[item - 1] = theta[alpha(item)];
    if (config_.has_gamma(item)) g[item - 1] = theta[gamma(item)];
    s[item - 1] = std::exp(theta[log_sigma(item)]);
  }
  return ItemParams(config_, std::move(b), std::move(a), std::move(g), std::move(s));
}

StructuralParams ParamLayout::structural(const ParamVector& theta) const {
  check(theta);
  return {theta[psi1()], theta[psi2()], theta[psi3()]};
}

ParamVector ParamLayout::pack(const ItemParams& items, const StructuralParams& psi) const {
  if (items.n_items() != J()) throw Error(ErrorKind::domain, "item parameters do not match the configuration");
  ParamVector theta(dim());
  for (int item = 1; item <= J(); ++item) {
    theta[beta(item)] = items.beta()[item - 1];
    theta[alpha(item)] = items.alpha()[item - 1];
    if (config_.has_gamma(item)) theta[gamma(item)] = items.gamma()[item - 1];
    theta[log_sigma(item)] = std::log(items.sigma()[item - 1]);
  }
  theta[psi1()] = psi.psi1;
  theta[psi2()] = psi.psi2;
  theta[psi3()] = psi.psi3;
  return theta;
}

std::string ParamLayout::name(int index) const {
  if (index < 0 || index >= dim()) throw Error(ErrorKind::domain, fmt::format("parameter index {} out of range", index));
  if (index < J()) return fmt::format("beta[{}]", index + 1);
  if (index < 2 * J()) return fmt::format("alpha[{}]", index - J() + 1);
  if (index < 2 * J() + config_.n_free_gamma()) {
    return fmt::format("gamma[{}]", index - 2 * J() + config_.first_gamma_item());
  }
  if (index < psi1()) return fmt::format("log_sigma[{}]", index - 2 * J() - config_.n_free_gamma() + 1);
  if (index == psi1()) return "psi1";
  if (index == psi2()) return "psi2";
  return "psi3";
}

}  // namespace rtcp
