#pragma once

// Inner-loop kernels for the masked MLP. Each kernel has a portable scalar
// reference and an AVX2+FMA variant; the variant is picked once at startup
// from CPUID (override with PSN_SIMD=scalar|avx2).
//
// Batch-major rows: `x` points at a feature-major activation block where
// row j starts at x + j * ldx and holds `batch` contiguous samples.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace psn::simd {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

template <typename T>
struct AdamCoeffs {
  T lr;
  T beta1;
  T beta2;
  T eps;
  T correction1;  // 1 - beta1^t
  T correction2;  // 1 - beta2^t
};

template <typename T>
struct Kernels {
  Isa isa;

  // y += a * x
  void (*axpy)(std::size_t n, T a, const T* x, T* y);
  T (*dot)(std::size_t n, const T* x, const T* y);

  // z[0:batch] += sum_k w[cols[k]] * x[cols[k]][0:batch]
  void (*row_forward)(std::size_t batch, std::size_t nnz, const std::uint32_t* cols, const T* w,
                      const T* x, std::size_t ldx, T* z);
  // g[cols[k]] = dot(dz[0:batch], x[cols[k]][0:batch])
  void (*row_grad)(std::size_t batch, std::size_t nnz, const std::uint32_t* cols, const T* dz,
                   const T* x, std::size_t ldx, T* g);
  // dx[cols[k]][0:batch] += w[cols[k]] * dz[0:batch]
  void (*row_backprop)(std::size_t batch, std::size_t nnz, const std::uint32_t* cols, const T* w,
                       const T* dz, T* dx, std::size_t ldx);

  // Dense Adam over contiguous parameters.
  void (*adam)(std::size_t n, T* w, const T* g, T* m, T* v, const AdamCoeffs<T>& c);
};

bool isa_supported(Isa isa);

// The dispatched table for the active ISA.
template <typename T>
const Kernels<T>& kernels();

// A specific table, for equivalence tests. Throws if the CPU lacks the ISA.
template <typename T>
const Kernels<T>& kernels_for(Isa isa);

Isa active_isa();
// Switch the process-wide ISA. Not thread-safe with respect to running kernels.
void set_active_isa(Isa isa);

namespace detail {
template <typename T>
const Kernels<T>& scalar_kernels();
template <typename T>
const Kernels<T>& avx2_kernels();
}  // namespace detail

}  // namespace psn::simd
