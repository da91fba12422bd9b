#include "mldili/simd_kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace mldili::kernels {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void combine_avx2(double a, const double* x, double b, const double* y,
                  double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
    v = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), v);
    _mm256_storeu_pd(out + i, v);
  }
  for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

double weighted_ssq_avx2(const double* w, const double* r, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vr = _mm256_loadu_pd(r + i);
    acc = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_loadu_pd(w + i), vr), vr, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += w[i] * r[i] * r[i];
  return s;
}

void sq_dist_2d_avx2(double px, double py, const double* xs, const double* ys,
                     double* out, std::size_t n) {
  const __m256d vpx = _mm256_set1_pd(px);
  const __m256d vpy = _mm256_set1_pd(py);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(vpx, _mm256_loadu_pd(xs + i));
    const __m256d dy = _mm256_sub_pd(vpy, _mm256_loadu_pd(ys + i));
    _mm256_storeu_pd(out + i,
                     _mm256_fmadd_pd(dx, dx, _mm256_mul_pd(dy, dy)));
  }
  for (; i < n; ++i) {
    const double dx = px - xs[i];
    const double dy = py - ys[i];
    out[i] = dx * dx + dy * dy;
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table = {
      "avx2",       dot_avx2,          axpy_avx2,
      combine_avx2, weighted_ssq_avx2, sq_dist_2d_avx2,
  };
  return &table;
}

}  // namespace mldili::kernels

#else

namespace mldili::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace mldili::kernels

#endif
