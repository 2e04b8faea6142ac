#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "asymac/nn/tape.hpp"

namespace asymac::nn {

struct GradcheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  /// Denominator floor for the relative error, so entries whose true
  /// gradient is ~0 are judged on absolute error.
  double floor = 1e-6;
  int samples_per_group = 25;
  std::uint64_t seed = 1;
  /// Test hook: the analytic gradient of one sampled entry of this group is
  /// doubled before comparison.
  std::string corrupt_group;
};

struct GroupCheck {
  std::string name;
  int checked = 0;
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
  bool pass = true;
};

struct GradcheckReport {
  std::vector<GroupCheck> groups;
  bool pass() const;
  std::vector<std::string> failing_groups() const;
  double max_rel_error() const;
};

/// Compares backward() of `loss` against central differences for sampled
/// entries of every parameter. `loss` must build a 1 x 1 output on the given
/// tape from the parameters' current values.
GradcheckReport gradcheck(const std::vector<Parameter*>& params, const std::function<Var(Tape&)>& loss,
                          const GradcheckOptions& options = {});

}  // namespace asymac::nn
