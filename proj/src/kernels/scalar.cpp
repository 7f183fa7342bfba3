#include "adaptkit/kernels.hpp"

namespace adaptkit::kernels::detail {
namespace {

void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double prod = av * brow[j];
        crow[j] = crow[j] + prod;
      }
    }
  }
}

void add(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void mul(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double prod = alpha * x[i];
    y[i] = y[i] + prod;
  }
}

void scale(double alpha, const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

void add_rows(const double* x, const double* bias, double* out, std::size_t rows,
              std::size_t n) {
  for (std::size_t r = 0; r < rows; ++r) add(x + r * n, bias, out + r * n, n);
}

}  // namespace

const Table scalar_table{Isa::scalar, gemm_acc, add, mul, axpy, scale, add_rows};

}  // namespace adaptkit::kernels::detail
