// SPDX-License-Identifier: Apache-2.0
#include "medre/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace medre {

GradCheckResult finite_diff_check(const std::function<Tensor()> &loss_fn,
                                  ParamStore &params,
                                  const GradCheckOptions &opts) {
  params.zero_grad();
  loss_fn().backward();
  std::vector<std::vector<double>> analytic;
  for (auto &e : params.entries()) {
    const auto g = e.value.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty())
      analytic.back().assign(e.value.numel(), 0.0);
  }
  params.zero_grad();

  auto eval = [&] {
    NoGradGuard guard;
    return loss_fn().item();
  };

  GradCheckResult res;
  std::mt19937_64 rng(opts.seed);
  for (std::size_t p = 0; p < params.entries().size(); ++p) {
    auto &entry = params.entries()[p];
    auto values = entry.value.values();
    std::vector<std::size_t> coords(values.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > opts.samples_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.samples_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t idx : coords) {
      const double orig = values[idx];
      values[idx] = orig + opts.eps;
      const double up = eval();
      values[idx] = orig - opts.eps;
      const double down = eval();
      values[idx] = orig;
      const double numeric = (up - down) / (2.0 * opts.eps);
      const double a = analytic[p][idx];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), opts.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++res.coordinates_checked;
      if (rel > res.max_rel_error || res.worst_param.empty()) {
        if (rel >= res.max_rel_error) {
          res.max_rel_error = rel;
          res.worst_param = entry.name;
          res.worst_index = idx;
          res.worst_analytic = a;
          res.worst_numeric = numeric;
        }
      }
    }
  }
  return res;
}

} // namespace medre
