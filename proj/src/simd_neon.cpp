#include "mldili/simd_kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace mldili::kernels {

namespace {

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void combine_neon(double a, const double* x, double b, const double* y,
                  double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  const float64x2_t vb = vdupq_n_f64(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t v = vmulq_f64(vb, vld1q_f64(y + i));
    vst1q_f64(out + i, vfmaq_f64(v, va, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

double weighted_ssq_neon(const double* w, const double* r, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vr = vld1q_f64(r + i);
    acc = vfmaq_f64(acc, vmulq_f64(vld1q_f64(w + i), vr), vr);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += w[i] * r[i] * r[i];
  return s;
}

void sq_dist_2d_neon(double px, double py, const double* xs, const double* ys,
                     double* out, std::size_t n) {
  const float64x2_t vpx = vdupq_n_f64(px);
  const float64x2_t vpy = vdupq_n_f64(py);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t dx = vsubq_f64(vpx, vld1q_f64(xs + i));
    const float64x2_t dy = vsubq_f64(vpy, vld1q_f64(ys + i));
    vst1q_f64(out + i, vfmaq_f64(vmulq_f64(dy, dy), dx, dx));
  }
  for (; i < n; ++i) {
    const double dx = px - xs[i];
    const double dy = py - ys[i];
    out[i] = dx * dx + dy * dy;
  }
}

}  // namespace

const KernelTable* neon_table() {
  static const KernelTable table = {
      "neon",       dot_neon,          axpy_neon,
      combine_neon, weighted_ssq_neon, sq_dist_2d_neon,
  };
  return &table;
}

}  // namespace mldili::kernels

#else

namespace mldili::kernels {
const KernelTable* neon_table() { return nullptr; }
}  // namespace mldili::kernels

#endif
