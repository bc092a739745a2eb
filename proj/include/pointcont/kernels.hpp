#pragma once

// Dense inner loops used by every layer. Each kernel has a serial reference
// in `serial::` and an OpenMP version in `omp::`. Both assign every output
// element to exactly one loop iteration and accumulate it in the same order,
// so their results are bitwise identical for any thread count. The GEMM
// loops use explicit fused multiply-adds; the build disables implicit
// contraction, so rounding does not depend on how the compiler inlines.

#include <omp.h>

#include <cmath>
#include <cstddef>
#include <span>

namespace pct::kernels {

enum class Exec { serial, parallel };

// Process-wide default used by the layer code. Thread-safe to read.
Exec default_exec() noexcept;
void set_default_exec(Exec e) noexcept;

class ScopedExec {
 public:
  explicit ScopedExec(Exec e) : saved_(default_exec()) { set_default_exec(e); }
  ~ScopedExec() { set_default_exec(saved_); }
  ScopedExec(const ScopedExec&) = delete;
  ScopedExec& operator=(const ScopedExec&) = delete;

 private:
  Exec saved_;
};

namespace detail {

// c[i0..i1) = a[i0..i1) * b, four rows at a time so each b row is loaded once
// per block. Per element the sum runs over p = 0..inner-1 in order.
template <class T>
inline void gemm_nn_rows(std::size_t i0, std::size_t i1, std::size_t inner, std::size_t m,
                         const T* __restrict a, const T* __restrict b, T* __restrict c) {
  std::size_t i = i0;
  for (; i + 4 <= i1; i += 4) {
    T* __restrict c0 = c + (i + 0) * m;
    T* __restrict c1 = c + (i + 1) * m;
    T* __restrict c2 = c + (i + 2) * m;
    T* __restrict c3 = c + (i + 3) * m;
    for (std::size_t j = 0; j < m; ++j) c0[j] = c1[j] = c2[j] = c3[j] = T(0);
    for (std::size_t p = 0; p < inner; ++p) {
      const T a0 = a[(i + 0) * inner + p];
      const T a1 = a[(i + 1) * inner + p];
      const T a2 = a[(i + 2) * inner + p];
      const T a3 = a[(i + 3) * inner + p];
      const T* __restrict br = b + p * m;
      for (std::size_t j = 0; j < m; ++j) {
        const T bv = br[j];
        c0[j] = std::fma(a0, bv, c0[j]);
        c1[j] = std::fma(a1, bv, c1[j]);
        c2[j] = std::fma(a2, bv, c2[j]);
        c3[j] = std::fma(a3, bv, c3[j]);
      }
    }
  }
  for (; i < i1; ++i) {
    T* ci = c + i * m;
    for (std::size_t j = 0; j < m; ++j) ci[j] = T(0);
    for (std::size_t p = 0; p < inner; ++p) {
      const T av = a[i * inner + p];
      const T* br = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] = std::fma(av, br[j], ci[j]);
    }
  }
}

// c[p0..p1) += (a^T b)[p0..p1); per element the sum runs over rows i in
// order, in groups of four. Rows of a/b are the outer loop so b streams once.
template <class T>
inline void gemm_tn_rows(std::size_t p0, std::size_t p1, std::size_t n, std::size_t inner,
                         std::size_t m, const T* __restrict a, const T* __restrict b,
                         T* __restrict c) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const T* __restrict b0 = b + (i + 0) * m;
    const T* __restrict b1 = b + (i + 1) * m;
    const T* __restrict b2 = b + (i + 2) * m;
    const T* __restrict b3 = b + (i + 3) * m;
    for (std::size_t p = p0; p < p1; ++p) {
      const T a0 = a[(i + 0) * inner + p];
      const T a1 = a[(i + 1) * inner + p];
      const T a2 = a[(i + 2) * inner + p];
      const T a3 = a[(i + 3) * inner + p];
      T* __restrict cp = c + p * m;
      for (std::size_t j = 0; j < m; ++j) {
        T acc = cp[j];
        acc = std::fma(a0, b0[j], acc);
        acc = std::fma(a1, b1[j], acc);
        acc = std::fma(a2, b2[j], acc);
        acc = std::fma(a3, b3[j], acc);
        cp[j] = acc;
      }
    }
  }
  for (; i < n; ++i) {
    const T* bi = b + i * m;
    for (std::size_t p = p0; p < p1; ++p) {
      const T av = a[i * inner + p];
      T* cp = c + p * m;
      for (std::size_t j = 0; j < m; ++j) cp[j] = std::fma(av, bi[j], cp[j]);
    }
  }
}

}  // namespace detail

namespace serial {

// c (n x m) = a (n x inner) * b (inner x m)
template <class T>
void gemm_nn(std::size_t n, std::size_t inner, std::size_t m, std::span<const T> a,
             std::span<const T> b, std::span<T> c) {
  detail::gemm_nn_rows<T>(0, n, inner, m, a.data(), b.data(), c.data());
}

// c (inner x m) += a^T * b, with a (n x inner) and b (n x m)
template <class T>
void gemm_tn_acc(std::size_t n, std::size_t inner, std::size_t m, std::span<const T> a,
                 std::span<const T> b, std::span<T> c) {
  detail::gemm_tn_rows<T>(0, inner, n, inner, m, a.data(), b.data(), c.data());
}

// out (cols x rows) = in^T
template <class T>
void transpose(std::size_t rows, std::size_t cols, std::span<const T> in, std::span<T> out) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = in[r * cols + c];
}

// out[j] = |q - pts[j]|^2 for 3D points stored as xyz triples.
inline void sqdist3(const double* q, std::size_t n, std::span<const double> pts,
                    std::span<double> out) {
  for (std::size_t j = 0; j < n; ++j) {
    const double dx = pts[3 * j] - q[0];
    const double dy = pts[3 * j + 1] - q[1];
    const double dz = pts[3 * j + 2] - q[2];
    out[j] = dx * dx + dy * dy + dz * dz;
  }
}

}  // namespace serial

namespace omp {

template <class T>
void gemm_nn(std::size_t n, std::size_t inner, std::size_t m, std::span<const T> a,
             std::span<const T> b, std::span<T> c) {
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>((n + 15) / 16);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * 16;
    const std::size_t i1 = i0 + 16 < n ? i0 + 16 : n;
    detail::gemm_nn_rows<T>(i0, i1, inner, m, a.data(), b.data(), c.data());
  }
}

template <class T>
void gemm_tn_acc(std::size_t n, std::size_t inner, std::size_t m, std::span<const T> a,
                 std::span<const T> b, std::span<T> c) {
  // One contiguous slab of output rows per thread; each slab streams a and
  // b once, so a single thread makes exactly the serial pass.
#pragma omp parallel
  {
    const auto nt = static_cast<std::size_t>(omp_get_num_threads());
    const auto t = static_cast<std::size_t>(omp_get_thread_num());
    const std::size_t chunk = (inner + nt - 1) / nt;
    const std::size_t p0 = t * chunk < inner ? t * chunk : inner;
    const std::size_t p1 = p0 + chunk < inner ? p0 + chunk : inner;
    if (p0 < p1) detail::gemm_tn_rows<T>(p0, p1, n, inner, m, a.data(), b.data(), c.data());
  }
}

template <class T>
void transpose(std::size_t rows, std::size_t cols, std::span<const T> in, std::span<T> out) {
  const std::ptrdiff_t r_end = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < r_end; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out[c * rows + static_cast<std::size_t>(r)] = in[static_cast<std::size_t>(r) * cols + c];
}

}  // namespace omp

// Dispatch on default_exec().
template <class T>
void gemm_nn(std::size_t n, std::size_t inner, std::size_t m, std::span<const T> a,
             std::span<const T> b, std::span<T> c) {
  if (default_exec() == Exec::parallel && n >= 64)
    omp::gemm_nn<T>(n, inner, m, a, b, c);
  else
    serial::gemm_nn<T>(n, inner, m, a, b, c);
}

template <class T>
void gemm_tn_acc(std::size_t n, std::size_t inner, std::size_t m, std::span<const T> a,
                 std::span<const T> b, std::span<T> c) {
  if (default_exec() == Exec::parallel && n >= 64)
    omp::gemm_tn_acc<T>(n, inner, m, a, b, c);
  else
    serial::gemm_tn_acc<T>(n, inner, m, a, b, c);
}

template <class T>
void transpose(std::size_t rows, std::size_t cols, std::span<const T> in, std::span<T> out) {
  if (default_exec() == Exec::parallel && rows * cols >= 4096)
    omp::transpose<T>(rows, cols, in, out);
  else
    serial::transpose<T>(rows, cols, in, out);
}

}  // namespace pct::kernels
