// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "medre/optim.hpp"

namespace medre {

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t samples_per_param = 200; // all coordinates when fewer
  std::uint64_t seed = 0;
  // Denominator floor of the relative error, so coordinates whose true
  // gradient is ~0 are judged on absolute error instead.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

/// Compares the analytic gradient of `loss_fn` against central differences
/// (f(x+eps) - f(x-eps)) / (2 eps) on sampled coordinates of every parameter.
/// Relative error is |a - n| / max(|a|, |n|, floor). `loss_fn` must be
/// deterministic.
GradCheckResult finite_diff_check(const std::function<Tensor()> &loss_fn,
                                  ParamStore &params,
                                  const GradCheckOptions &opts = {});

} // namespace medre
