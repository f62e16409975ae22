#include <cmath>

#include "psn/simd/kernels.hpp"

namespace psn::simd::detail {
namespace {

template <typename T>
void axpy(std::size_t n, T a, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
T dot(std::size_t n, const T* x, const T* y) {
  T s{0};
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void row_forward(std::size_t batch, std::size_t nnz, const std::uint32_t* cols, const T* w,
                 const T* x, std::size_t ldx, T* z) {
  for (std::size_t k = 0; k < nnz; ++k) {
    const std::uint32_t j = cols[k];
    axpy<T>(batch, w[j], x + j * ldx, z);
  }
}

template <typename T>
void row_grad(std::size_t batch, std::size_t nnz, const std::uint32_t* cols, const T* dz,
              const T* x, std::size_t ldx, T* g) {
  for (std::size_t k = 0; k < nnz; ++k) {
    const std::uint32_t j = cols[k];
    g[j] = dot<T>(batch, dz, x + j * ldx);
  }
}

template <typename T>
void row_backprop(std::size_t batch, std::size_t nnz, const std::uint32_t* cols, const T* w,
                  const T* dz, T* dx, std::size_t ldx) {
  for (std::size_t k = 0; k < nnz; ++k) {
    const std::uint32_t j = cols[k];
    axpy<T>(batch, w[j], dz, dx + j * ldx);
  }
}

template <typename T>
void adam(std::size_t n, T* w, const T* g, T* m, T* v, const AdamCoeffs<T>& c) {
  const T one{1};
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (one - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (one - c.beta2) * g[i] * g[i];
    const T mhat = m[i] / c.correction1;
    const T vhat = v[i] / c.correction2;
    w[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

template <typename T>
constexpr Kernels<T> kTable{Isa::kScalar,  &axpy<T>,         &dot<T>,  &row_forward<T>,
                            &row_grad<T>, &row_backprop<T>, &adam<T>};

}  // namespace

template <>
const Kernels<float>& scalar_kernels<float>() {
  return kTable<float>;
}
template <>
const Kernels<double>& scalar_kernels<double>() {
  return kTable<double>;
}

}  // namespace psn::simd::detail
