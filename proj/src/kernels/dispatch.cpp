#include <atomic>
#include <cstdlib>
#include <string>

#include "adaptkit/errors.hpp"
#include "adaptkit/kernels.hpp"

namespace adaptkit::kernels {
namespace {

std::atomic<const Table*> g_active{nullptr};

const Table* initial_table() {
  if (const char* env = std::getenv("ADAPTKIT_SIMD")) {
    const std::string want = env;
    if (want == "scalar") return &detail::scalar_table;
    if (want == "avx2" && supported(Isa::avx2)) return &table(Isa::avx2);
  }
  return &table(detect());
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

bool supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(ADAPTKIT_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Isa detect() { return supported(Isa::avx2) ? Isa::avx2 : Isa::scalar; }

const Table& table(Isa isa) {
  if (!supported(isa))
    throw ValidationError("kernel variant '" + std::string(isa_name(isa)) +
                          "' is not supported on this CPU");
#if defined(ADAPTKIT_HAVE_AVX2)
  if (isa == Isa::avx2) return detail::avx2_table;
#endif
  return detail::scalar_table;
}

const Table& active() {
  const Table* t = g_active.load(std::memory_order_acquire);
  if (!t) {
    t = initial_table();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

void select(Isa isa) { g_active.store(&table(isa), std::memory_order_release); }

}  // namespace adaptkit::kernels
