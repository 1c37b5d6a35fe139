#pragma once

// Flat free-parameter vector theta, ordered
//   beta_1..beta_J, alpha_1..alpha_J, gamma_{c+2}..gamma_J,
//   log sigma_1..log sigma_J, psi1, psi2, psi3
// so that d = 3J + (J - c - 1) + 3.

#include "rtcp/model.hpp"

#include <string>

namespace rtcp {

using ParamVector = Eigen::VectorXd;

class ParamLayout {
 public:
  explicit ParamLayout(const ModelConfig& config) : config_(config) {}

  const ModelConfig& config() const noexcept { return config_; }
  int dim() const noexcept { return 3 * J() + config_.n_free_gamma() + 3; }

  // Items are 1-based.
  int beta(int item) const noexcept { return item - 1; }
  int alpha(int item) const noexcept { return J() + item - 1; }
  int gamma(int item) const noexcept { return 2 * J() + item - config_.first_gamma_item(); }
  int log_sigma(int item) const noexcept { return 2 * J() + config_.n_free_gamma() + item - 1; }
  int psi1() const noexcept { return 3 * J() + config_.n_free_gamma(); }
  int psi2() const noexcept { return psi1() + 1; }
  int psi3() const noexcept { return psi1() + 2; }

  ItemParams items(const ParamVector& theta) const;
  StructuralParams structural(const ParamVector& theta) const;
  ParamVector pack(const ItemParams& items, const StructuralParams& psi) const;

  // Human-readable coordinate name such as "beta[3]" or "log_sigma[12]".
  std::string name(int index) const;

  // Throws ErrorKind::domain if theta has the wrong dimension.
  void check(const ParamVector& theta) const;

 private:
  int J() const noexcept { return config_.n_items(); }
  ModelConfig config_;
};

}  // namespace rtcp
