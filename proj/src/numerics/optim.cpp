// SPDX-License-Identifier: Apache-2.0
#include "medre/optim.hpp"

#include <cmath>

#include "medre/error.hpp"
#include "medre/kernels.hpp"

namespace medre {

Tensor ParamStore::add(const std::string &name, Shape shape,
                       std::vector<double> init) {
  if (contains(name))
    throw ConfigError("parameter '" + name + "' registered twice");
  Entry e;
  e.name = name;
  e.value = Tensor::parameter(std::move(shape), std::move(init));
  e.m.assign(e.value.numel(), 0.0);
  e.v.assign(e.value.numel(), 0.0);
  entries_.push_back(std::move(e));
  return entries_.back().value;
}

Tensor &ParamStore::get(const std::string &name) {
  for (auto &e : entries_)
    if (e.name == name)
      return e.value;
  throw ConfigError("no parameter named '" + name + "'");
}

const Tensor &ParamStore::get(const std::string &name) const {
  for (const auto &e : entries_)
    if (e.name == name)
      return e.value;
  throw ConfigError("no parameter named '" + name + "'");
}

bool ParamStore::contains(const std::string &name) const {
  for (const auto &e : entries_)
    if (e.name == name)
      return true;
  return false;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto &e : entries_)
    n += e.value.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto &e : entries_)
    e.value.zero_grad();
}

void adam_step(ParamStore &store, double lr, double beta1, double beta2,
               double eps) {
  bool any = false;
  for (const auto &e : store.entries_)
    any = any || e.value.has_grad();
  if (!any)
    throw Error("adam_step: no parameter has a gradient; run backward first");
  ++store.step_;
  const double t = static_cast<double>(store.step_);
  const double bias1 = 1.0 - std::pow(beta1, t);
  const double bias2 = 1.0 - std::pow(beta2, t);
  const auto &kt = kernels::active();
  for (auto &e : store.entries_) {
    // Parameters untouched by this graph still decay their moments.
    auto &grad = e.value.impl()->grad_buffer();
    kt.adam_update(grad.size(), e.value.values().data(), grad.data(),
                   e.m.data(), e.v.data(), lr, beta1, beta2, eps, bias1, bias2);
  }
}

LrSchedule LrSchedule::with_warmup_fraction(double peak, std::uint64_t total,
                                            double fraction) {
  LrSchedule s;
  s.peak_lr = peak;
  s.total_steps = total;
  s.warmup_steps =
      static_cast<std::uint64_t>(std::floor(fraction * static_cast<double>(total)));
  s.check();
  return s;
}

void LrSchedule::check() const {
  if (warmup_steps > total_steps)
    throw ConfigError("warmup steps exceed total steps");
  if (!(peak_lr >= 0.0) || !std::isfinite(peak_lr))
    throw ConfigError("peak learning rate must be finite and non-negative");
}

double lr_at(const LrSchedule &s, std::uint64_t step) {
  if (step > s.total_steps)
    throw ConfigError("lr_at: step " + std::to_string(step) +
                      " beyond total steps " + std::to_string(s.total_steps));
  if (step < s.warmup_steps)
    return s.peak_lr * (static_cast<double>(step) /
                        static_cast<double>(s.warmup_steps));
  if (s.total_steps == s.warmup_steps)
    return s.peak_lr;
  return s.peak_lr * (static_cast<double>(s.total_steps - step) /
                      static_cast<double>(s.total_steps - s.warmup_steps));
}

std::vector<double> xavier_uniform(std::size_t fan_in, std::size_t fan_out,
                                   std::mt19937_64 &rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  std::vector<double> out(fan_in * fan_out);
  for (auto &x : out)
    x = u(rng);
  return out;
}

std::vector<double> normal_init(std::size_t n, double stddev,
                                std::mt19937_64 &rng) {
  std::normal_distribution<double> d(0.0, stddev);
  std::vector<double> out(n);
  for (auto &x : out)
    x = d(rng);
  return out;
}

} // namespace medre
