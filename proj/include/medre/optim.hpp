// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "medre/tensor.hpp"

namespace medre {

/// Named trainable parameters with their Adam moments. Insertion order is the
/// checkpoint order.
class ParamStore {
public:
  struct Entry {
    std::string name;
    Tensor value;
    std::vector<double> m;
    std::vector<double> v;
  };

  /// Registers a parameter; names must be unique.
  Tensor add(const std::string &name, Shape shape, std::vector<double> init);

  Tensor &get(const std::string &name);
  const Tensor &get(const std::string &name) const;
  bool contains(const std::string &name) const;

  std::vector<Entry> &entries() { return entries_; }
  const std::vector<Entry> &entries() const { return entries_; }

  std::size_t parameter_count() const;
  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }
  void zero_grad();

private:
  friend void adam_step(ParamStore &, double, double, double, double);
  std::vector<Entry> entries_;
  std::uint64_t step_ = 0;
};

/// One bias-corrected Adam update of every parameter that received a
/// gradient; gradients are zeroed afterwards. Throws when no parameter has
/// a gradient.
void adam_step(ParamStore &store, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

/// Linear warmup from 0 to `peak_lr`, then linear decay back to 0 at
/// `total_steps`.
struct LrSchedule {
  double peak_lr = 1e-4;
  std::uint64_t warmup_steps = 0;
  std::uint64_t total_steps = 0;

  /// Warmup of `fraction` * total, rounded down.
  static LrSchedule with_warmup_fraction(double peak, std::uint64_t total,
                                         double fraction = 0.1);
  void check() const;
};

double lr_at(const LrSchedule &schedule, std::uint64_t step);

/// Initialisers; all draw from the given engine so runs are reproducible.
std::vector<double> xavier_uniform(std::size_t fan_in, std::size_t fan_out,
                                   std::mt19937_64 &rng);
std::vector<double> normal_init(std::size_t n, double stddev,
                                std::mt19937_64 &rng);

} // namespace medre
