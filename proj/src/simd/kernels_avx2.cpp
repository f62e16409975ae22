// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after isa_supported(Isa::kAvx2) returned true. Keep it
// free of std:: inline templates so no AVX-encoded copy leaks into the rest of
// the program through ODR merging.

#include <immintrin.h>

#include "psn/simd/kernels.hpp"

namespace psn::simd::detail {
namespace {

template <typename T>
struct Vec;

template <>
struct Vec<float> {
  using Reg = __m256;
  static constexpr std::size_t kLanes = 8;
  static Reg zero() { return _mm256_setzero_ps(); }
  static Reg set1(float a) { return _mm256_set1_ps(a); }
  static Reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, Reg r) { _mm256_storeu_ps(p, r); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_ps(a, b, c); }
  static Reg add(Reg a, Reg b) { return _mm256_add_ps(a, b); }
  static Reg sub(Reg a, Reg b) { return _mm256_sub_ps(a, b); }
  static Reg mul(Reg a, Reg b) { return _mm256_mul_ps(a, b); }
  static Reg div(Reg a, Reg b) { return _mm256_div_ps(a, b); }
  static Reg sqrt(Reg a) { return _mm256_sqrt_ps(a); }
  static float hsum(Reg r) {
    __m128 lo = _mm256_castps256_ps128(r);
    __m128 hi = _mm256_extractf128_ps(r, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
  }
  static float sqrt1(float a) { return _mm_cvtss_f32(_mm_sqrt_ss(_mm_set_ss(a))); }
};

template <>
struct Vec<double> {
  using Reg = __m256d;
  static constexpr std::size_t kLanes = 4;
  static Reg zero() { return _mm256_setzero_pd(); }
  static Reg set1(double a) { return _mm256_set1_pd(a); }
  static Reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, Reg r) { _mm256_storeu_pd(p, r); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_pd(a, b, c); }
  static Reg add(Reg a, Reg b) { return _mm256_add_pd(a, b); }
  static Reg sub(Reg a, Reg b) { return _mm256_sub_pd(a, b); }
  static Reg mul(Reg a, Reg b) { return _mm256_mul_pd(a, b); }
  static Reg div(Reg a, Reg b) { return _mm256_div_pd(a, b); }
  static Reg sqrt(Reg a) { return _mm256_sqrt_pd(a); }
  static double hsum(Reg r) {
    __m128d lo = _mm256_castpd256_pd128(r);
    __m128d hi = _mm256_extractf128_pd(r, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
  static double sqrt1(double a) {
    const __m128d v = _mm_set_sd(a);
    return _mm_cvtsd_f64(_mm_sqrt_sd(v, v));
  }
};

template <typename T>
void axpy(std::size_t n, T a, const T* x, T* y) {
  using V = Vec<T>;
  constexpr std::size_t L = V::kLanes;
  const auto va = V::set1(a);
  std::size_t i = 0;
  for (; i + 2 * L <= n; i += 2 * L) {
    V::store(y + i, V::fmadd(va, V::load(x + i), V::load(y + i)));
    V::store(y + i + L, V::fmadd(va, V::load(x + i + L), V::load(y + i + L)));
  }
  for (; i + L <= n; i += L) V::store(y + i, V::fmadd(va, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
T dot(std::size_t n, const T* x, const T* y) {
  using V = Vec<T>;
  constexpr std::size_t L = V::kLanes;
  auto a0 = V::zero();
  auto a1 = V::zero();
  auto a2 = V::zero();
  auto a3 = V::zero();
  std::size_t i = 0;
  for (; i + 4 * L <= n; i += 4 * L) {
    a0 = V::fmadd(V::load(x + i), V::load(y + i), a0);
    a1 = V::fmadd(V::load(x + i + L), V::load(y + i + L), a1);
    a2 = V::fmadd(V::load(x + i + 2 * L), V::load(y + i + 2 * L), a2);
    a3 = V::fmadd(V::load(x + i + 3 * L), V::load(y + i + 3 * L), a3);
  }
  for (; i + L <= n; i += L) a0 = V::fmadd(V::load(x + i), V::load(y + i), a0);
  T s = V::hsum(V::add(V::add(a0, a1), V::add(a2, a3)));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename T>
void row_forward(std::size_t batch, std::size_t nnz, const std::uint32_t* cols, const T* w,
                 const T* x, std::size_t ldx, T* z) {
  using V = Vec<T>;
  constexpr std::size_t L = V::kLanes;
  std::size_t b = 0;
  // Four accumulators stay in registers while we stream over the active inputs.
  for (; b + 4 * L <= batch; b += 4 * L) {
    auto z0 = V::load(z + b);
    auto z1 = V::load(z + b + L);
    auto z2 = V::load(z + b + 2 * L);
    auto z3 = V::load(z + b + 3 * L);
    for (std::size_t k = 0; k < nnz; ++k) {
      const std::uint32_t j = cols[k];
      const auto wj = V::set1(w[j]);
      const T* xr = x + j * ldx + b;
      z0 = V::fmadd(wj, V::load(xr), z0);
      z1 = V::fmadd(wj, V::load(xr + L), z1);
      z2 = V::fmadd(wj, V::load(xr + 2 * L), z2);
      z3 = V::fmadd(wj, V::load(xr + 3 * L), z3);
    }
    V::store(z + b, z0);
    V::store(z + b + L, z1);
    V::store(z + b + 2 * L, z2);
    V::store(z + b + 3 * L, z3);
  }
  for (; b + L <= batch; b += L) {
    auto z0 = V::load(z + b);
    for (std::size_t k = 0; k < nnz; ++k) {
      const std::uint32_t j = cols[k];
      z0 = V::fmadd(V::set1(w[j]), V::load(x + j * ldx + b), z0);
    }
    V::store(z + b, z0);
  }
  for (; b < batch; ++b) {
    T acc = z[b];
    for (std::size_t k = 0; k < nnz; ++k) {
      const std::uint32_t j = cols[k];
      acc += w[j] * x[j * ldx + b];
    }
    z[b] = acc;
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
  using V = Vec<T>;
  constexpr std::size_t L = V::kLanes;
  const auto b1 = V::set1(c.beta1);
  const auto b2 = V::set1(c.beta2);
  const auto ib1 = V::set1(T{1} - c.beta1);
  const auto ib2 = V::set1(T{1} - c.beta2);
  const auto c1 = V::set1(c.correction1);
  const auto c2 = V::set1(c.correction2);
  const auto lr = V::set1(c.lr);
  const auto eps = V::set1(c.eps);
  std::size_t i = 0;
  for (; i + L <= n; i += L) {
    const auto gi = V::load(g + i);
    const auto mi = V::add(V::mul(b1, V::load(m + i)), V::mul(ib1, gi));
    const auto vi = V::add(V::mul(b2, V::load(v + i)), V::mul(V::mul(ib2, gi), gi));
    V::store(m + i, mi);
    V::store(v + i, vi);
    const auto mhat = V::div(mi, c1);
    const auto vhat = V::div(vi, c2);
    const auto step = V::div(V::mul(lr, mhat), V::add(V::sqrt(vhat), eps));
    V::store(w + i, V::sub(V::load(w + i), step));
  }
  for (; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (T{1} - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (T{1} - c.beta2) * g[i] * g[i];
    const T mhat = m[i] / c.correction1;
    const T vhat = v[i] / c.correction2;
    w[i] -= c.lr * mhat / (Vec<T>::sqrt1(vhat) + c.eps);
  }
}

template <typename T>
constexpr Kernels<T> kTable{Isa::kAvx2,   &axpy<T>,         &dot<T>,  &row_forward<T>,
                            &row_grad<T>, &row_backprop<T>, &adam<T>};

}  // namespace

template <>
const Kernels<float>& avx2_kernels<float>() {
  return kTable<float>;
}
template <>
const Kernels<double>& avx2_kernels<double>() {
  return kTable<double>;
}

}  // namespace psn::simd::detail
