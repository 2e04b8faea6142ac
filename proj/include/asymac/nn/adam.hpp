#pragma once

#include <vector>

#include "asymac/nn/tape.hpp"

namespace asymac::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed parameter list. Reads p->grad, writes
/// p->value; does not clear gradients.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter*> params, AdamConfig config);

  void step();
  void zero_grad();

  long long steps() const { return t_; }
  void set_steps(long long t) { t_ = t; }
  AdamConfig& config() { return config_; }
  const std::vector<Parameter*>& parameters() const { return params_; }
  std::vector<Matrix>& first_moments() { return m_; }
  std::vector<Matrix>& second_moments() { return v_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig config_;
  std::vector<Matrix> m_, v_;
  long long t_ = 0;
};

}  // namespace asymac::nn
