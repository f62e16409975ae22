#include <atomic>
#include <cstdlib>
#include <string>

#include "psn/error.hpp"
#include "psn/simd/kernels.hpp"

namespace psn::simd {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("PSN_SIMD")) {
    const std::string want = env;
    if (want == "scalar") return Isa::kScalar;
    if (want == "avx2" && cpu_has_avx2()) return Isa::kAvx2;
  }
  return cpu_has_avx2() ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
      return cpu_has_avx2();
  }
  return false;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw ValidationError("SIMD variant '" + std::string(isa_name(isa)) + "' is not supported by this CPU");
  }
  active().store(isa, std::memory_order_relaxed);
}

template <typename T>
const Kernels<T>& kernels_for(Isa isa) {
  if (!isa_supported(isa)) {
    throw ValidationError("SIMD variant '" + std::string(isa_name(isa)) + "' is not supported by this CPU");
  }
  return isa == Isa::kAvx2 ? detail::avx2_kernels<T>() : detail::scalar_kernels<T>();
}

template <typename T>
const Kernels<T>& kernels() {
  return active_isa() == Isa::kAvx2 ? detail::avx2_kernels<T>() : detail::scalar_kernels<T>();
}

template const Kernels<float>& kernels_for<float>(Isa);
template const Kernels<double>& kernels_for<double>(Isa);
template const Kernels<float>& kernels<float>();
template const Kernels<double>& kernels<double>();

}  // namespace psn::simd
