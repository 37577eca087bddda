// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace medre {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape &shape);
std::size_t shape_numel(const Shape &shape);

struct TensorImpl;

/// Recorded operation: the inputs it read and how to push the output
/// gradient back into them.
struct GraphNode {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(TensorImpl &out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad; // empty until first accumulation
  bool requires_grad = false;
  bool released = false; // graph already consumed by backward()
  std::shared_ptr<GraphNode> node;

  std::vector<double> &grad_buffer();
};

/// Dense float64 array with reverse-mode differentiation. Copies share
/// storage; `detach()` and `clone()` make independent values.
class Tensor {
public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  /// Leaf that accumulates gradients.
  static Tensor parameter(Shape shape, std::vector<double> values);

  const Shape &shape() const { return impl_->shape; }
  std::size_t dim() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->value.size(); }
  std::size_t rows() const; // product of leading dims
  std::size_t cols() const; // last dim

  std::span<const double> values() const { return impl_->value; }
  std::span<double> values() { return impl_->value; }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> grad() { return impl_->grad; }
  bool has_grad() const { return !impl_->grad.empty(); }
  void zero_grad();

  double item() const;
  double at(std::size_t r, std::size_t c) const {
    return impl_->value[r * cols() + c];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  bool is_leaf() const { return impl_->node == nullptr; }

  Tensor detach() const;

  /// Reverse-mode sweep from this scalar. Gradients accumulate into every
  /// reachable parameter; the recorded graph is released afterwards.
  void backward();

  const std::shared_ptr<TensorImpl> &impl() const { return impl_; }

private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_result(Shape, std::vector<double>,
                            std::vector<std::shared_ptr<TensorImpl>>,
                            std::function<void(TensorImpl &)>);
  std::shared_ptr<TensorImpl> impl_;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

private:
  bool previous_;
};

bool grad_enabled();

/// Finiteness assertion on every op output. Defaults to on in debug builds.
void set_finite_checks(bool on);
bool finite_checks();

namespace ops {

Tensor matmul(const Tensor &a, const Tensor &b);
/// a * b^T
Tensor matmul_nt(const Tensor &a, const Tensor &b);
/// Elementwise sum. `b` may also match only the trailing dims of `a`, in
/// which case it is broadcast over the leading ones.
Tensor add(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b);
Tensor scale(const Tensor &a, double s);
/// Concatenation along the last dimension of 2-D tensors with equal rows.
Tensor concat(const std::vector<Tensor> &parts);
Tensor slice_cols(const Tensor &a, std::size_t begin, std::size_t count);
Tensor gather_rows(const Tensor &a, std::span<const std::size_t> rows);
Tensor row_softmax(const Tensor &a);
Tensor relu(const Tensor &a);
/// tanh approximation.
Tensor gelu(const Tensor &a);
Tensor layer_norm(const Tensor &a, const Tensor &gain, const Tensor &bias,
                  double eps = 1e-5);
Tensor embedding(const Tensor &table, std::span<const int> ids);
/// Identity unless `training`; then inverted dropout with keep prob 1-p.
Tensor dropout(const Tensor &a, double p, bool training, std::mt19937_64 &rng);
/// sum_k w_k * CE(logits_k, class_k) / rows. Empty weights mean all ones.
Tensor cross_entropy(const Tensor &logits, std::span<const int> classes,
                     std::span<const double> weights = {});
Tensor sum(const Tensor &a);
Tensor mean(const Tensor &a);

} // namespace ops

} // namespace medre
