#pragma once

// Dense f64 inner loops with a scalar reference implementation and SIMD
// variants selected at runtime.
//
// Every variant produces bitwise-identical results to the scalar reference:
// vector lanes run across independent output elements only, and each output
// element accumulates its products in ascending reduction index with separate
// multiply and add roundings (no FMA). Tests assert this equivalence.

#include <cstddef>
#include <string_view>

namespace adaptkit::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

struct Table {
  Isa isa;
  // c[m×n] += a[m×k] · b[k×n], row-major.
  void (*gemm_acc)(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                   std::size_t n);
  // out[i] = x[i] + y[i]
  void (*add)(const double* x, const double* y, double* out, std::size_t n);
  // out[i] = x[i] * y[i]
  void (*mul)(const double* x, const double* y, double* out, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[i] = alpha * x[i]
  void (*scale)(double alpha, const double* x, double* out, std::size_t n);
  // out[r×n] = x[r×n] + bias[n] broadcast over rows
  void (*add_rows)(const double* x, const double* bias, double* out, std::size_t rows,
                   std::size_t n);
};

// True when the variant was compiled in and the running CPU supports it.
bool supported(Isa isa);

// Best supported variant on this CPU.
Isa detect();

// Kernel table for a specific variant. Throws ValidationError when unsupported.
const Table& table(Isa isa);

// Table used by the tensor primitives. Defaults to detect(); the environment
// variable ADAPTKIT_SIMD=scalar|avx2 overrides it at first use.
const Table& active();

// Force the active variant (tests, benchmarks).
void select(Isa isa);

namespace detail {
extern const Table scalar_table;
#if defined(ADAPTKIT_HAVE_AVX2)
extern const Table avx2_table;
#endif
}  // namespace detail

}  // namespace adaptkit::kernels
