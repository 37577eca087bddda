// SPDX-License-Identifier: Apache-2.0
#include "medre/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "medre/error.hpp"
#include "medre/kernels.hpp"

namespace medre {

namespace {

thread_local bool g_grad_enabled = true;

#ifdef NDEBUG
bool g_finite_checks = false;
#else
bool g_finite_checks = true;
#endif

void check_finite(std::span<const double> v, const char *what) {
  for (double x : v)
    if (!std::isfinite(x))
      throw Error(std::string("non-finite value in ") + what);
}

[[noreturn]] void shape_error(const char *op, const Shape &a, const Shape &b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " +
                   shape_string(a) + " and " + shape_string(b));
}

void require_2d(const char *op, const Tensor &t) {
  if (t.dim() != 2)
    throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " +
                     shape_string(t.shape()));
}

void accumulate(TensorImpl &dst, std::span<const double> src) {
  auto &g = dst.grad_buffer();
  kernels::active().axpy(src.size(), 1.0, src.data(), g.data());
}

} // namespace

std::string shape_string(const Shape &shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i)
      s += " x ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_numel(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::vector<double> &TensorImpl::grad_buffer() {
  if (grad.empty())
    grad.assign(value.size(), 0.0);
  return grad;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void set_finite_checks(bool on) { g_finite_checks = on; }
bool finite_checks() { return g_finite_checks; }

Tensor::Tensor() : Tensor(Shape{}, 0.0) {}

Tensor::Tensor(Shape shape, double fill)
    : impl_(std::make_shared<TensorImpl>()) {
  impl_->value.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : impl_(std::make_shared<TensorImpl>()) {
  if (values.size() != shape_numel(shape))
    throw ShapeError("tensor: " + std::to_string(values.size()) +
                     " values for shape " + shape_string(shape));
  impl_->shape = std::move(shape);
  impl_->value = std::move(values);
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector{v}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape), std::move(values));
  t.impl_->requires_grad = true;
  return t;
}

std::size_t Tensor::rows() const {
  return impl_->shape.empty() ? 1 : numel() / impl_->shape.back();
}

std::size_t Tensor::cols() const {
  return impl_->shape.empty() ? 1 : impl_->shape.back();
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1)
    throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  return impl_->value[0];
}

Tensor Tensor::detach() const { return Tensor(shape(), impl_->value); }

void Tensor::backward() {
  if (numel() != 1)
    throw ShapeError("backward() needs a scalar loss, got shape " +
                     shape_string(shape()));
  if (impl_->released)
    throw ShapeError("backward() called twice on the same graph; run the "
                     "forward pass again");
  if (!impl_->requires_grad)
    throw ShapeError("backward() on a tensor that does not require grad");

  // Iterative post-order DFS gives a topological order.
  std::vector<TensorImpl *> order;
  std::unordered_set<TensorImpl *> seen;
  std::vector<std::pair<TensorImpl *, std::size_t>> stack{{impl_.get(), 0}};
  seen.insert(impl_.get());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (node->node && next < node->node->inputs.size()) {
      TensorImpl *child = node->node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second)
        stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  impl_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl *t = *it;
    if (t->node && !t->grad.empty()) {
      t->node->backward(*t);
      if (g_finite_checks)
        for (const auto &in : t->node->inputs)
          if (in->requires_grad)
            check_finite(in->grad, "gradient");
    }
  }
  for (TensorImpl *t : order) {
    if (t->node) {
      t->node.reset();
      t->released = true;
    }
  }
  impl_->released = true;
}

Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<std::shared_ptr<TensorImpl>> inputs,
                   std::function<void(TensorImpl &)> backward) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->value = std::move(value);
  if (g_finite_checks)
    check_finite(impl->value, "op output");
  const bool needs =
      g_grad_enabled && std::any_of(inputs.begin(), inputs.end(),
                                    [](const auto &p) { return p->requires_grad; });
  if (needs) {
    impl->requires_grad = true;
    impl->node = std::make_shared<GraphNode>();
    impl->node->inputs = std::move(inputs);
    impl->node->backward = std::move(backward);
  }
  return Tensor(std::move(impl));
}

namespace ops {

Tensor matmul(const Tensor &a, const Tensor &b) {
  require_2d("matmul", a);
  require_2d("matmul", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k)
    shape_error("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n, 0.0);
  kernels::active().gemm_nn(m, n, k, a.values().data(), b.values().data(),
                            out.data());
  auto ai = a.impl(), bi = b.impl();
  return make_result({m, n}, std::move(out), {ai, bi}, [=](TensorImpl &o) {
    const auto &kt = kernels::active();
    if (ai->requires_grad)
      kt.gemm_nt(m, k, n, o.grad.data(), bi->value.data(),
                 ai->grad_buffer().data());
    if (bi->requires_grad)
      kt.gemm_tn(k, n, m, ai->value.data(), o.grad.data(),
                 bi->grad_buffer().data());
  });
}

Tensor matmul_nt(const Tensor &a, const Tensor &b) {
  require_2d("matmul_nt", a);
  require_2d("matmul_nt", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  if (b.shape()[1] != k)
    shape_error("matmul_nt", a.shape(), b.shape());
  std::vector<double> out(m * n, 0.0);
  kernels::active().gemm_nt(m, n, k, a.values().data(), b.values().data(),
                            out.data());
  auto ai = a.impl(), bi = b.impl();
  return make_result({m, n}, std::move(out), {ai, bi}, [=](TensorImpl &o) {
    const auto &kt = kernels::active();
    if (ai->requires_grad)
      kt.gemm_nn(m, k, n, o.grad.data(), bi->value.data(),
                 ai->grad_buffer().data());
    if (bi->requires_grad)
      kt.gemm_tn(n, k, m, o.grad.data(), ai->value.data(),
                 bi->grad_buffer().data());
  });
}

Tensor add(const Tensor &a, const Tensor &b) {
  const auto &as = a.shape(), &bs = b.shape();
  if (as == bs) {
    std::vector<double> out(a.values().begin(), a.values().end());
    kernels::active().axpy(out.size(), 1.0, b.values().data(), out.data());
    auto ai = a.impl(), bi = b.impl();
    return make_result(as, std::move(out), {ai, bi}, [=](TensorImpl &o) {
      if (ai->requires_grad)
        accumulate(*ai, o.grad);
      if (bi->requires_grad)
        accumulate(*bi, o.grad);
    });
  }
  // b must equal a trailing block of a's dims.
  if (bs.size() > as.size() ||
      !std::equal(bs.begin(), bs.end(), as.end() - static_cast<long>(bs.size())))
    shape_error("add", as, bs);
  const std::size_t inner = b.numel();
  const std::size_t outer = inner == 0 ? 0 : a.numel() / inner;
  std::vector<double> out(a.values().begin(), a.values().end());
  for (std::size_t r = 0; r < outer; ++r)
    kernels::active().axpy(inner, 1.0, b.values().data(), out.data() + r * inner);
  auto ai = a.impl(), bi = b.impl();
  return make_result(as, std::move(out), {ai, bi}, [=](TensorImpl &o) {
    if (ai->requires_grad)
      accumulate(*ai, o.grad);
    if (bi->requires_grad) {
      auto &g = bi->grad_buffer();
      for (std::size_t r = 0; r < outer; ++r)
        kernels::active().axpy(inner, 1.0, o.grad.data() + r * inner, g.data());
    }
  });
}

Tensor mul(const Tensor &a, const Tensor &b) {
  if (a.shape() != b.shape())
    shape_error("mul", a.shape(), b.shape());
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] * b.values()[i];
  auto ai = a.impl(), bi = b.impl();
  return make_result(a.shape(), std::move(out), {ai, bi}, [=](TensorImpl &o) {
    if (ai->requires_grad) {
      auto &g = ai->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i)
        g[i] += o.grad[i] * bi->value[i];
    }
    if (bi->requires_grad) {
      auto &g = bi->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i)
        g[i] += o.grad[i] * ai->value[i];
    }
  });
}

Tensor scale(const Tensor &a, double s) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto &x : out)
    x *= s;
  auto ai = a.impl();
  return make_result(a.shape(), std::move(out), {ai}, [=](TensorImpl &o) {
    kernels::active().axpy(o.grad.size(), s, o.grad.data(),
                           ai->grad_buffer().data());
  });
}

Tensor concat(const std::vector<Tensor> &parts) {
  if (parts.empty())
    throw ShapeError("concat: no inputs");
  const std::size_t rows = parts[0].shape().at(0);
  std::size_t width = 0;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::vector<std::size_t> widths;
  for (const auto &p : parts) {
    require_2d("concat", p);
    if (p.shape()[0] != rows)
      shape_error("concat", parts[0].shape(), p.shape());
    widths.push_back(p.shape()[1]);
    width += p.shape()[1];
    inputs.push_back(p.impl());
  }
  std::vector<double> out(rows * width);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto v = parts[k].values();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.data() + r * widths[k], widths[k],
                  out.data() + r * width + off);
    off += widths[k];
  }
  auto ins = inputs;
  return make_result({rows, width}, std::move(out), std::move(inputs),
                     [=](TensorImpl &o) {
                       std::size_t offset = 0;
                       for (std::size_t k = 0; k < ins.size(); ++k) {
                         if (ins[k]->requires_grad) {
                           auto &g = ins[k]->grad_buffer();
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t c = 0; c < widths[k]; ++c)
                               g[r * widths[k] + c] +=
                                   o.grad[r * width + offset + c];
                         }
                         offset += widths[k];
                       }
                     });
}

Tensor slice_cols(const Tensor &a, std::size_t begin, std::size_t count) {
  require_2d("slice_cols", a);
  const std::size_t rows = a.shape()[0], width = a.shape()[1];
  if (begin + count > width)
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of " +
                     shape_string(a.shape()));
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(a.values().data() + r * width + begin, count,
                out.data() + r * count);
  auto ai = a.impl();
  return make_result({rows, count}, std::move(out), {ai}, [=](TensorImpl &o) {
    auto &g = ai->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < count; ++c)
        g[r * width + begin + c] += o.grad[r * count + c];
  });
}

Tensor gather_rows(const Tensor &a, std::span<const std::size_t> rows) {
  require_2d("gather_rows", a);
  const std::size_t n = a.shape()[0], width = a.shape()[1];
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<double> out(idx.size() * width);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= n)
      throw ShapeError("gather_rows: row " + std::to_string(idx[r]) +
                       " out of " + shape_string(a.shape()));
    std::copy_n(a.values().data() + idx[r] * width, width,
                out.data() + r * width);
  }
  auto ai = a.impl();
  return make_result({idx.size(), width}, std::move(out), {ai},
                     [=](TensorImpl &o) {
                       auto &g = ai->grad_buffer();
                       for (std::size_t r = 0; r < idx.size(); ++r)
                         kernels::active().axpy(width, 1.0,
                                                o.grad.data() + r * width,
                                                g.data() + idx[r] * width);
                     });
}

Tensor row_softmax(const Tensor &a) {
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(a.numel());
  const auto v = a.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double *x = v.data() + r * cols;
    double *y = out.data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      z += y[c];
    }
    for (std::size_t c = 0; c < cols; ++c)
      y[c] /= z;
  }
  auto ai = a.impl();
  auto y = std::make_shared<std::vector<double>>(out);
  return make_result(a.shape(), std::move(out), {ai}, [=](TensorImpl &o) {
    auto &g = ai->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      const double *yr = y->data() + r * cols;
      const double *dy = o.grad.data() + r * cols;
      const double s = kernels::active().dot(cols, yr, dy);
      for (std::size_t c = 0; c < cols; ++c)
        g[r * cols + c] += yr[c] * (dy[c] - s);
    }
  });
}

Tensor relu(const Tensor &a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto &x : out)
    x = x > 0.0 ? x : 0.0;
  auto ai = a.impl();
  return make_result(a.shape(), std::move(out), {ai}, [=](TensorImpl &o) {
    auto &g = ai->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (ai->value[i] > 0.0)
        g[i] += o.grad[i];
  });
}

Tensor gelu(const Tensor &a) {
  constexpr double kAlpha = 0.7978845608028654; // sqrt(2 / pi)
  constexpr double kBeta = 0.044715;
  std::vector<double> out(a.numel());
  const auto v = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = v[i];
    out[i] = 0.5 * x * (1.0 + std::tanh(kAlpha * (x + kBeta * x * x * x)));
  }
  auto ai = a.impl();
  return make_result(a.shape(), std::move(out), {ai}, [=](TensorImpl &o) {
    auto &g = ai->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = ai->value[i];
      const double t = std::tanh(kAlpha * (x + kBeta * x * x * x));
      const double d = 0.5 * (1.0 + t) +
                       0.5 * x * (1.0 - t * t) * kAlpha *
                           (1.0 + 3.0 * kBeta * x * x);
      g[i] += o.grad[i] * d;
    }
  });
}

Tensor layer_norm(const Tensor &a, const Tensor &gain, const Tensor &bias,
                  double eps) {
  const std::size_t rows = a.rows(), cols = a.cols();
  if (gain.numel() != cols || bias.numel() != cols)
    shape_error("layer_norm", a.shape(), gain.shape());
  auto xhat = std::make_shared<std::vector<double>>(a.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(a.numel());
  const auto v = a.values();
  const auto gv = gain.values(), bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double *x = v.data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c)
      mu += x[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c)
      var += (x[c] - mu) * (x[c] - mu);
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (x[c] - mu) * is;
      (*xhat)[r * cols + c] = h;
      out[r * cols + c] = h * gv[c] + bv[c];
    }
  }
  auto ai = a.impl(), gi = gain.impl(), bi = bias.impl();
  return make_result(a.shape(), std::move(out), {ai, gi, bi},
                     [=](TensorImpl &o) {
                       const double n = static_cast<double>(cols);
                       std::vector<double> dh(cols);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double *dy = o.grad.data() + r * cols;
                         const double *h = xhat->data() + r * cols;
                         if (gi->requires_grad) {
                           auto &gg = gi->grad_buffer();
                           for (std::size_t c = 0; c < cols; ++c)
                             gg[c] += dy[c] * h[c];
                         }
                         if (bi->requires_grad) {
                           auto &bg = bi->grad_buffer();
                           for (std::size_t c = 0; c < cols; ++c)
                             bg[c] += dy[c];
                         }
                         if (!ai->requires_grad)
                           continue;
                         double s1 = 0.0, s2 = 0.0;
                         for (std::size_t c = 0; c < cols; ++c) {
                           dh[c] = dy[c] * gi->value[c];
                           s1 += dh[c];
                           s2 += dh[c] * h[c];
                         }
                         auto &ag = ai->grad_buffer();
                         const double is = (*inv_std)[r];
                         for (std::size_t c = 0; c < cols; ++c)
                           ag[r * cols + c] +=
                               is * (dh[c] - s1 / n - h[c] * s2 / n);
                       }
                     });
}

Tensor embedding(const Tensor &table, std::span<const int> ids) {
  require_2d("embedding", table);
  const std::size_t vocab = table.shape()[0];
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] < 0 || static_cast<std::size_t>(ids[k]) >= vocab)
      throw ShapeError("embedding: id " + std::to_string(ids[k]) +
                       " outside table " + shape_string(table.shape()));
    rows[k] = static_cast<std::size_t>(ids[k]);
  }
  return gather_rows(table, rows);
}

Tensor dropout(const Tensor &a, double p, bool training, std::mt19937_64 &rng) {
  if (!training || p <= 0.0)
    return a;
  if (p >= 1.0)
    throw ShapeError("dropout: probability must be below 1");
  const double keep = 1.0 - p;
  auto mask = std::make_shared<std::vector<double>>(a.numel());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = u(rng) < keep ? 1.0 / keep : 0.0;
    out[i] = a.values()[i] * (*mask)[i];
  }
  auto ai = a.impl();
  return make_result(a.shape(), std::move(out), {ai}, [=](TensorImpl &o) {
    auto &g = ai->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += o.grad[i] * (*mask)[i];
  });
}

Tensor cross_entropy(const Tensor &logits, std::span<const int> classes,
                     std::span<const double> weights) {
  require_2d("cross_entropy", logits);
  const std::size_t rows = logits.shape()[0], cols = logits.shape()[1];
  if (classes.size() != rows)
    throw ShapeError("cross_entropy: " + std::to_string(classes.size()) +
                     " targets for logits " + shape_string(logits.shape()));
  if (!weights.empty() && weights.size() != rows)
    throw ShapeError("cross_entropy: weight count does not match rows");
  if (rows == 0)
    throw ShapeError("cross_entropy: no rows");
  auto probs = std::make_shared<std::vector<double>>(rows * cols);
  std::vector<int> cls(classes.begin(), classes.end());
  std::vector<double> w(rows, 1.0);
  if (!weights.empty())
    w.assign(weights.begin(), weights.end());
  double loss = 0.0;
  const auto v = logits.values();
  for (std::size_t r = 0; r < rows; ++r) {
    if (cls[r] < 0 || static_cast<std::size_t>(cls[r]) >= cols)
      throw ShapeError("cross_entropy: class " + std::to_string(cls[r]) +
                       " out of " + std::to_string(cols));
    const double *x = v.data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c)
      z += std::exp(x[c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < cols; ++c)
      (*probs)[r * cols + c] = std::exp(x[c] - lse);
    loss += w[r] * (lse - x[cls[r]]);
  }
  loss /= static_cast<double>(rows);
  auto li = logits.impl();
  return make_result({}, {loss}, {li}, [=](TensorImpl &o) {
    auto &g = li->grad_buffer();
    const double scale = o.grad[0] / static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const double f = scale * w[r];
      for (std::size_t c = 0; c < cols; ++c)
        g[r * cols + c] += f * ((*probs)[r * cols + c] -
                                (static_cast<int>(c) == cls[r] ? 1.0 : 0.0));
    }
  });
}

Tensor sum(const Tensor &a) {
  double s = 0.0;
  for (double x : a.values())
    s += x;
  auto ai = a.impl();
  return make_result({}, {s}, {ai}, [=](TensorImpl &o) {
    auto &g = ai->grad_buffer();
    for (auto &x : g)
      x += o.grad[0];
  });
}

Tensor mean(const Tensor &a) {
  if (a.numel() == 0)
    throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

} // namespace ops

} // namespace medre
