#include "mldili/lanczos.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "mldili/errors.hpp"
#include "mldili/rng.hpp"

namespace mldili {

namespace {

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12 * scale) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

struct RitzState {
  Eigen::VectorXd values;       // descending
  Eigen::MatrixXd coeffs;       // (j+1) x (j+1), columns aligned with values
  Eigen::VectorXd residuals;    // |beta_j * last coefficient|
};

RitzState ritz_from_tridiagonal(const std::vector<double>& alpha,
                                const std::vector<double>& beta,
                                double beta_last) {
  const int m = static_cast<int>(alpha.size());
  Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), m);
  Eigen::VectorXd sub(m > 1 ? m - 1 : 0);
  for (int i = 0; i + 1 < m; ++i) sub[i] = beta[i];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub);
  if (es.info() != Eigen::Success)
    throw NumericalError("lanczos: tridiagonal eigensolve failed");

  RitzState out;
  out.values.resize(m);
  out.coeffs.resize(m, m);
  out.residuals.resize(m);
  for (int k = 0; k < m; ++k) {
    const int src = m - 1 - k;  // descending
    out.values[k] = es.eigenvalues()[src];
    out.coeffs.col(k) = es.eigenvectors().col(src);
    out.residuals[k] = std::abs(beta_last * es.eigenvectors()(m - 1, src));
  }
  return out;
}

}  // namespace

LanczosResult lanczos_leading(const LinearOp& apply, int dim, int max_rank,
                              double threshold,
                              const LanczosOptions& options) {
  if (dim < 1) throw DimensionError("lanczos: empty operator");
  max_rank = std::min(max_rank, dim);
  if (max_rank < 1) throw DimensionError("lanczos: requested rank must be positive");

  const int max_sub =
      std::min(dim, std::max(max_rank * options.max_subspace_factor,
                             max_rank + 40));

  Eigen::MatrixXd basis(dim, max_sub);
  std::vector<double> alpha, beta;
  alpha.reserve(max_sub);
  beta.reserve(max_sub);

  Rng rng(options.seed);
  auto fresh_direction = [&](int cols) -> bool {
    Eigen::VectorXd r(dim);
    for (int attempt = 0; attempt < 8; ++attempt) {
      rng.fill_normal(r);
      if (options.project) r = options.project(r);
      if (cols > 0)
        r -= basis.leftCols(cols) * (basis.leftCols(cols).transpose() * r);
      const double nrm = r.norm();
      if (nrm > 1e-10 * std::sqrt(static_cast<double>(dim))) {
        basis.col(cols) = r / nrm;
        return true;
      }
    }
    return false;  // nothing left outside the span
  };

  if (!fresh_direction(0))
    throw NumericalError("lanczos: could not construct a start vector");

  double theta_scale = 0.0;
  RitzState ritz;
  int m = 0;  // columns with completed recurrence
  bool exhausted = false;

  auto converged_pair = [&](int i) {
    return ritz.residuals[i] <=
           options.residual_tol * std::max(std::abs(ritz.values[i]),
                                           1e-14 * std::max(theta_scale, 1.0));
  };

  auto satisfied = [&]() {
    if (m < 1) return false;
    if (threshold > 0.0) {
      bool witness_below = exhausted || m == dim;
      int above = 0;
      for (int i = 0; i < m; ++i) {
        if (ritz.values[i] > threshold) {
          ++above;
          if (!converged_pair(i)) return false;
          if (above >= max_rank) return true;  // cap reached
        } else if (ritz.values[i] + ritz.residuals[i] <= threshold) {
          witness_below = true;
        }
      }
      return witness_below;
    }
    if (m < std::min(max_rank, dim)) return false;
    for (int i = 0; i < std::min(max_rank, m); ++i)
      if (!converged_pair(i)) return false;
    return true;
  };

  for (int j = 0; j < max_sub; ++j) {
    Eigen::VectorXd w = apply(basis.col(j));
    if (w.size() != dim) throw DimensionError("lanczos: operator changed dimension");
    const double a = basis.col(j).dot(w);
    alpha.push_back(a);
    w -= a * basis.col(j);
    if (j > 0 && beta[j - 1] != 0.0) w -= beta[j - 1] * basis.col(j - 1);
    // Full reorthogonalisation, two passes.
    for (int pass = 0; pass < 2; ++pass)
      w -= basis.leftCols(j + 1) * (basis.leftCols(j + 1).transpose() * w);
    double b = w.norm();
    m = j + 1;
    theta_scale = std::max(theta_scale, std::abs(a) + b);

    const bool breakdown = b <= 1e-13 * std::max(theta_scale, 1.0);
    const bool check_now = breakdown || j + 1 == max_sub || j + 1 == dim ||
                           (m >= max_rank && (j % 5 == 4));

    if (check_now) {
      ritz = ritz_from_tridiagonal(alpha, beta, breakdown ? 0.0 : b);
      if (breakdown) exhausted = true;
      if (satisfied()) {
        m = j + 1;
        break;
      }
      if (m == dim) break;  // full space spanned; take what we have
    }

    if (j + 1 == max_sub) break;

    if (breakdown) {
      // Invariant subspace hit: continue in a fresh orthogonal direction
      // (zero coupling keeps the tridiagonal structure valid).
      if (!fresh_direction(j + 1)) {
        exhausted = true;
        break;
      }
      beta.push_back(0.0);
    } else {
      basis.col(j + 1) = w / b;
      beta.push_back(b);
    }
  }

  if (ritz.values.size() == 0)
    ritz = ritz_from_tridiagonal(alpha, beta, 0.0);

  if (!satisfied() && !(threshold <= 0.0 && m == dim)) {
    std::ostringstream msg;
    msg << "lanczos: stagnation after " << m
        << " iterations; ritz residuals:";
    for (int i = 0; i < std::min<int>(8, ritz.residuals.size()); ++i)
      msg << " " << ritz.residuals[i];
    throw NumericalError(msg.str());
  }

  // Select the pairs to return.
  std::vector<int> keep;
  for (int i = 0; i < m && static_cast<int>(keep.size()) < max_rank; ++i) {
    if (threshold > 0.0 && ritz.values[i] <= threshold) continue;
    if (threshold > 0.0 && !converged_pair(i)) continue;
    keep.push_back(i);
  }

  LanczosResult out;
  out.iterations = m;
  out.spectrum_exhausted = exhausted || m == dim;
  out.values.resize(keep.size());
  out.residuals.resize(keep.size());
  out.vectors.resize(dim, keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.values[k] = ritz.values[keep[k]];
    out.residuals[k] = ritz.residuals[keep[k]];
    out.vectors.col(k) = basis.leftCols(m) * ritz.coeffs.col(keep[k]).head(m);
    out.vectors.col(k).normalize();
    fix_sign(out.vectors.col(k));
  }
  return out;
}

}  // namespace mldili
