// SPDX-License-Identifier: Apache-2.0
// Reference kernels. Every SIMD variant is tested against these.
#include <cmath>

#include "medre/kernels.hpp"

namespace medre::kernels {

namespace {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double *a,
             const double *b, double *c) {
  for (std::size_t i = 0; i < m; ++i) {
    double *ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double *bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j)
        ci[j] += aip * bp[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double *a,
             const double *b, double *c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p)
        s += a[i * k + p] * b[j * k + p];
      c[i * n + j] += s;
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double *a,
             const double *b, double *c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double *bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double api = a[p * m + i];
      double *ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j)
        ci[j] += api * bp[j];
    }
  }
}

void axpy(std::size_t n, double alpha, const double *x, double *y) {
  for (std::size_t i = 0; i < n; ++i)
    y[i] += alpha * x[i];
}

double dot(std::size_t n, const double *x, const double *y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    s += x[i] * y[i];
  return s;
}

void adam_update(std::size_t n, double *param, double *grad, double *m,
                 double *v, double lr, double beta1, double beta2, double eps,
                 double bias1, double bias2) {
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
    v[i] = beta2 * v[i] + (1.0 - beta2) * (g * g);
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    grad[i] = 0.0;
  }
}

} // namespace

const KernelTable &scalar_table() {
  static const KernelTable table{"scalar", gemm_nn, gemm_nt, gemm_tn,
                                 axpy,     dot,     adam_update};
  return table;
}

} // namespace medre::kernels
