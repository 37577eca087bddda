// SPDX-License-Identifier: Apache-2.0
// AVX2/FMA kernels, compiled with per-function target attributes so the rest
// of the library stays baseline x86-64. Selected at runtime.
#include "medre/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define MEDRE_HAVE_AVX2_PATH 1
#include <immintrin.h>
#endif

#include <cmath>

namespace medre::kernels {

#ifdef MEDRE_HAVE_AVX2_PATH

#define MEDRE_AVX2 __attribute__((target("avx2,fma")))

namespace {

// C[m x n] += op(A) * B where op(A)(i, p) = a[i * rs + p * cs].
// 4 x 8 register tile; leftovers fall through to narrower loops.
MEDRE_AVX2 void gemm_strided_a(std::size_t m, std::size_t n, std::size_t k,
                               const double *a, std::size_t rs, std::size_t cs,
                               const double *b, double *c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
      __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
      __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
      __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
      for (std::size_t p = 0; p < k; ++p) {
        const double *bp = b + p * n + j;
        const __m256d b0 = _mm256_loadu_pd(bp);
        const __m256d b1 = _mm256_loadu_pd(bp + 4);
        const double *ap = a + i * rs + p * cs;
        __m256d av = _mm256_broadcast_sd(ap);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(ap + rs);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(ap + 2 * rs);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(ap + 3 * rs);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
      }
      double *cr = c + i * n + j;
      _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c00));
      _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c01));
      cr += n;
      _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c10));
      _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c11));
      cr += n;
      _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c20));
      _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c21));
      cr += n;
      _mm256_storeu_pd(cr, _mm256_add_pd(_mm256_loadu_pd(cr), c30));
      _mm256_storeu_pd(cr + 4, _mm256_add_pd(_mm256_loadu_pd(cr + 4), c31));
    }
    for (; j < n; ++j) {
      double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      for (std::size_t p = 0; p < k; ++p) {
        const double bv = b[p * n + j];
        const double *ap = a + i * rs + p * cs;
        s0 += ap[0] * bv;
        s1 += ap[rs] * bv;
        s2 += ap[2 * rs] * bv;
        s3 += ap[3 * rs] * bv;
      }
      c[i * n + j] += s0;
      c[(i + 1) * n + j] += s1;
      c[(i + 2) * n + j] += s2;
      c[(i + 3) * n + j] += s3;
    }
  }
  for (; i < m; ++i) {
    double *ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(a[i * rs + p * cs]);
      const double *bp = b + p * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4)
        _mm256_storeu_pd(ci + j, _mm256_fmadd_pd(av, _mm256_loadu_pd(bp + j),
                                                 _mm256_loadu_pd(ci + j)));
      const double as = a[i * rs + p * cs];
      for (; j < n; ++j)
        ci[j] += as * bp[j];
    }
  }
}

MEDRE_AVX2 double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

MEDRE_AVX2 void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
                        const double *a, const double *b, double *c) {
  gemm_strided_a(m, n, k, a, k, 1, b, c);
}

MEDRE_AVX2 void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
                        const double *a, const double *b, double *c) {
  gemm_strided_a(m, n, k, a, 1, m, b, c);
}

// Row i of A against four rows of B at once.
MEDRE_AVX2 void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
                        const double *a, const double *b, double *c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double *ai = a + i * k;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double *b0 = b + j * k;
      const double *b1 = b0 + k;
      const double *b2 = b1 + k;
      const double *b3 = b2 + k;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        const __m256d av = _mm256_loadu_pd(ai + p);
        s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), s0);
        s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), s1);
        s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + p), s2);
        s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + p), s3);
      }
      double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (; p < k; ++p) {
        r0 += ai[p] * b0[p];
        r1 += ai[p] * b1[p];
        r2 += ai[p] * b2[p];
        r3 += ai[p] * b3[p];
      }
      double *ci = c + i * n + j;
      ci[0] += r0;
      ci[1] += r1;
      ci[2] += r2;
      ci[3] += r3;
    }
    for (; j < n; ++j) {
      const double *bj = b + j * k;
      __m256d s = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4)
        s = _mm256_fmadd_pd(_mm256_loadu_pd(ai + p), _mm256_loadu_pd(bj + p), s);
      double r = hsum(s);
      for (; p < k; ++p)
        r += ai[p] * bj[p];
      c[i * n + j] += r;
    }
  }
}

MEDRE_AVX2 void axpy(std::size_t n, double alpha, const double *x, double *y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  for (; i < n; ++i)
    y[i] += alpha * x[i];
}

MEDRE_AVX2 double dot(std::size_t n, const double *x, const double *y) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4),
                         s1);
  }
  for (; i + 4 <= n; i += 4)
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
  double r = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i)
    r += x[i] * y[i];
  return r;
}

// No FMA here: mul/add/div/sqrt are correctly rounded, so this matches the
// scalar reference bit for bit.
MEDRE_AVX2 void adam_update(std::size_t n, double *param, double *grad,
                            double *m, double *v, double lr, double beta1,
                            double beta2, double eps, double bias1,
                            double bias2) {
  const __m256d b1 = _mm256_set1_pd(beta1), b2 = _mm256_set1_pd(beta2);
  const __m256d ob1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d ob2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d bc1 = _mm256_set1_pd(bias1), bc2 = _mm256_set1_pd(bias2);
  const __m256d lrv = _mm256_set1_pd(lr), epsv = _mm256_set1_pd(eps);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(ob1, g));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(ob2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mhat = _mm256_div_pd(mi, bc1);
    const __m256d vhat = _mm256_div_pd(vi, bc2);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lrv, mhat),
                                       _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
    _mm256_storeu_pd(grad + i, zero);
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    const double mg = (1.0 - beta1) * g;
    const double vg = (1.0 - beta2) * (g * g);
    const double bm = beta1 * m[i];
    const double bv = beta2 * v[i];
    m[i] = bm + mg;
    v[i] = bv + vg;
    const double mhat = m[i] / bias1;
    const double vhat = v[i] / bias2;
    const double num = lr * mhat;
    const double den = std::sqrt(vhat) + eps;
    param[i] -= num / den;
    grad[i] = 0.0;
  }
}

} // namespace

const KernelTable *avx2_table() {
  static const KernelTable table{"avx2", gemm_nn, gemm_nt, gemm_tn,
                                 axpy,   dot,     adam_update};
  return &table;
}

bool cpu_supports_avx2() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

#else

const KernelTable *avx2_table() { return nullptr; }
bool cpu_supports_avx2() { return false; }

#endif

} // namespace medre::kernels
