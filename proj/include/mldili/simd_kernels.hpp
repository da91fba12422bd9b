#pragma once

#include <cstddef>
#include <string_view>

namespace mldili::kernels {

// Data-parallel inner loops used by the samplers and the covariance
// assembly. Every entry has a scalar reference implementation plus
// architecture variants (AVX2 on x86-64, NEON on aarch64) selected once at
// runtime. Variants are equivalence-tested against the scalar reference.
struct KernelTable {
  const char* name;

  // sum_i x[i]*y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);

  // y[i] += a*x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);

  // out[i] = a*x[i] + b*y[i]
  void (*combine)(double a, const double* x, double b, const double* y,
                  double* out, std::size_t n);

  // sum_i w[i]*r[i]*r[i]
  double (*weighted_ssq)(const double* w, const double* r, std::size_t n);

  // out[i] = (px-xs[i])^2 + (py-ys[i])^2
  void (*sq_dist_2d)(double px, double py, const double* xs, const double* ys,
                     double* out, std::size_t n);
};

// Kernel table selected for the host CPU (cached after first call).
const KernelTable& active();

// Scalar reference table.
const KernelTable& scalar();

// Force a specific variant ("scalar", "avx2", "neon"). Returns false if the
// variant is not compiled in or not supported by the host.
bool select(std::string_view name);

// Tables compiled into this binary (reference first).
const KernelTable* const* available(std::size_t* count);

// Lag-k autocovariance sums for a centered series, built on dot():
// out[k] = sum_{i=0}^{n-k-1} x[i]*x[i+k], for k = 0..max_lag.
void autocov(const double* x, std::size_t n, std::size_t max_lag, double* out);

}  // namespace mldili::kernels
