#ifndef __AVX2__
#error "this file must be compiled with -mavx2"
#endif

#include <immintrin.h>

#include "adaptkit/kernels.hpp"

// 4-wide f64 lanes. Only _mm256_mul_pd / _mm256_add_pd are used so each lane
// rounds exactly like the scalar reference; tails fall back to scalar code.

namespace adaptkit::kernels::detail {
namespace {

void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const __m256d va = _mm256_set1_pd(av);
      const double* brow = b + p * n;
      std::size_t j = 0;
      for (; j < n4; j += 4) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(brow + j));
        _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), prod));
      }
      for (; j < n; ++j) {
        const double prod = av * brow[j];
        crow[j] = crow[j] + prod;
      }
    }
  }
}

void add(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void mul(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) {
    const double prod = alpha * x[i];
    y[i] = y[i] + prod;
  }
}

void scale(double alpha, const double* x, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) out[i] = alpha * x[i];
}

void add_rows(const double* x, const double* bias, double* out, std::size_t rows,
              std::size_t n) {
  for (std::size_t r = 0; r < rows; ++r) add(x + r * n, bias, out + r * n, n);
}

}  // namespace

const Table avx2_table{Isa::avx2, gemm_acc, add, mul, axpy, scale, add_rows};

}  // namespace adaptkit::kernels::detail
