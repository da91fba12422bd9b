#include "mldili/simd_kernels.hpp"

namespace mldili::kernels {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void combine_scalar(double a, const double* x, double b, const double* y,
                    double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

double weighted_ssq_scalar(const double* w, const double* r, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += w[i] * r[i] * r[i];
  return acc;
}

void sq_dist_2d_scalar(double px, double py, const double* xs,
                       const double* ys, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = px - xs[i];
    const double dy = py - ys[i];
    out[i] = dx * dx + dy * dy;
  }
}

}  // namespace

const KernelTable& scalar() {
  static const KernelTable table = {
      "scalar",       dot_scalar,          axpy_scalar,
      combine_scalar, weighted_ssq_scalar, sq_dist_2d_scalar,
  };
  return table;
}

void autocov(const double* x, std::size_t n, std::size_t max_lag,
             double* out) {
  const KernelTable& k = active();
  for (std::size_t lag = 0; lag <= max_lag; ++lag)
    out[lag] = lag < n ? k.dot(x, x + lag, n - lag) : 0.0;
}

}  // namespace mldili::kernels
