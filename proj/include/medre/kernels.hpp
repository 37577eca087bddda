// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string_view>

namespace medre::kernels {

/// Dense float64 inner loops. Matrices are row-major and every routine
/// accumulates into its output.
struct KernelTable {
  const char *name;

  // C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double *a,
                  const double *b, double *c);
  // C[m x n] += A[m x k] * B[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double *a,
                  const double *b, double *c);
  // C[m x n] += A[k x m]^T * B[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double *a,
                  const double *b, double *c);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double *x, double *y);
  double (*dot)(std::size_t n, const double *x, const double *y);
  // Bias-corrected Adam update of n coordinates; zeroes the gradient.
  void (*adam_update)(std::size_t n, double *param, double *grad, double *m,
                      double *v, double lr, double beta1, double beta2,
                      double eps, double bias1, double bias2);
};

const KernelTable &scalar_table();

/// nullptr when the build has no AVX2 path.
const KernelTable *avx2_table();

bool cpu_supports_avx2();

/// The table every tensor op dispatches through. Chosen on first use from
/// MEDRE_KERNELS (scalar | avx2 | auto, default auto).
const KernelTable &active();

/// Switches the active table: "scalar", "avx2" or "auto". Throws
/// ConfigError when the requested variant is unavailable.
void select(std::string_view name);

} // namespace medre::kernels
