// SPDX-License-Identifier: Apache-2.0
// Every SIMD variant must agree with the scalar reference.
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "medre/kernels.hpp"

using namespace medre;

namespace {

std::vector<double> randvec(std::size_t n, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto &x : v)
    x = u(rng);
  return v;
}

double max_abs_diff(const std::vector<double> &a, const std::vector<double> &b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<const kernels::KernelTable *> variants() {
  std::vector<const kernels::KernelTable *> out;
  if (kernels::avx2_table() && kernels::cpu_supports_avx2())
    out.push_back(kernels::avx2_table());
  return out;
}

} // namespace

TEST_CASE("scalar gemm against a naive triple loop") {
  std::mt19937_64 rng(1);
  const auto &s = kernels::scalar_table();
  const std::size_t m = 5, n = 7, k = 3;
  const auto a = randvec(m * k, rng), b = randvec(k * n, rng);
  std::vector<double> c(m * n, 0.0);
  s.gemm_nn(m, n, k, a.data(), b.data(), c.data());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double ref = 0.0;
      for (std::size_t p = 0; p < k; ++p)
        ref += a[i * k + p] * b[p * n + j];
      CHECK(c[i * n + j] == doctest::Approx(ref).epsilon(1e-14));
    }
}

TEST_CASE("SIMD kernels match the scalar reference") {
  const auto vs = variants();
  if (vs.empty()) {
    MESSAGE("no SIMD variant on this machine; only the scalar path is tested");
    return;
  }
  const auto &ref = kernels::scalar_table();
  std::mt19937_64 rng(42);
  // Shapes straddle the 4x8 register tile in every direction.
  const std::vector<std::size_t> dims = {1, 3, 4, 5, 8, 9, 13, 16, 33, 64};
  for (const auto *kt : vs) {
    CAPTURE(kt->name);
    for (std::size_t m : dims)
      for (std::size_t n : dims)
        for (std::size_t k : {1, 2, 7, 24, 67}) {
          const auto a = randvec(m * k, rng), b = randvec(k * n, rng);
          const auto bt = randvec(n * k, rng), at = randvec(k * m, rng);
          const auto c0 = randvec(m * n, rng);
          auto r = c0, x = c0;
          ref.gemm_nn(m, n, k, a.data(), b.data(), r.data());
          kt->gemm_nn(m, n, k, a.data(), b.data(), x.data());
          CHECK(max_abs_diff(r, x) < 1e-12);
          r = x = c0;
          ref.gemm_nt(m, n, k, a.data(), bt.data(), r.data());
          kt->gemm_nt(m, n, k, a.data(), bt.data(), x.data());
          CHECK(max_abs_diff(r, x) < 1e-12);
          r = x = c0;
          ref.gemm_tn(m, n, k, at.data(), b.data(), r.data());
          kt->gemm_tn(m, n, k, at.data(), b.data(), x.data());
          CHECK(max_abs_diff(r, x) < 1e-12);
        }
    for (std::size_t n : {0, 1, 3, 4, 7, 8, 15, 16, 100, 267}) {
      const auto x = randvec(n, rng), y0 = randvec(n, rng);
      auto y1 = y0, y2 = y0;
      ref.axpy(n, 0.37, x.data(), y1.data());
      kt->axpy(n, 0.37, x.data(), y2.data());
      CHECK(max_abs_diff(y1, y2) < 1e-15);
      CHECK(std::abs(ref.dot(n, x.data(), y0.data()) -
                     kt->dot(n, x.data(), y0.data())) < 1e-12);
    }
  }
}

TEST_CASE("SIMD Adam update is bit-identical to the scalar reference") {
  const auto vs = variants();
  const auto &ref = kernels::scalar_table();
  std::mt19937_64 rng(9);
  for (const auto *kt : vs) {
    for (std::size_t n : {1, 4, 5, 31, 256}) {
      auto p1 = randvec(n, rng), g1 = randvec(n, rng), m1 = randvec(n, rng);
      auto v1 = randvec(n, rng);
      for (auto &x : v1)
        x = std::abs(x);
      auto p2 = p1, g2 = g1, m2 = m1, v2 = v1;
      ref.adam_update(n, p1.data(), g1.data(), m1.data(), v1.data(), 1e-3, 0.9,
                      0.999, 1e-8, 0.19, 0.002);
      kt->adam_update(n, p2.data(), g2.data(), m2.data(), v2.data(), 1e-3, 0.9,
                      0.999, 1e-8, 0.19, 0.002);
      CHECK(p1 == p2);
      CHECK(m1 == m2);
      CHECK(v1 == v2);
      CHECK(g2 == std::vector<double>(n, 0.0));
    }
  }
}

TEST_CASE("kernel selection") {
  kernels::select("scalar");
  CHECK(std::string(kernels::active().name) == "scalar");
  kernels::select("auto");
  if (kernels::cpu_supports_avx2())
    CHECK(std::string(kernels::active().name) == "avx2");
  CHECK_THROWS(kernels::select("neon"));
}
