#include "mldili/laplace.hpp"

#include <cmath>

#include "mldili/errors.hpp"

namespace mldili {

namespace {

// CG on (H + I) s = rhs with matrix-free H.
Eigen::VectorXd cg_solve(const LinearizedOp& lin, const Eigen::VectorXd& rhs,
                         double rel_tol, int max_iters) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(rhs.size());
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  const double stop = rel_tol * rel_tol * rr;
  for (int it = 0; it < max_iters && rr > stop; ++it) {
    const Eigen::VectorXd ap = lin.gnh_apply(p) + p;
    const double alpha = rr / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return x;
}

}  // namespace

MapResult find_map(ForwardModel& model, int level, const MapOptions& options) {
  const int dim = model.hierarchy().param_dim(level);
  const double tol = options.tol_factor * std::sqrt(static_cast<double>(dim));

  MapResult out;
  out.point = Eigen::VectorXd::Zero(dim);
  double objective =
      model.evaluate(level, out.point).misfit;  // prior term is zero at v=0

  for (int it = 0; it < options.max_iters; ++it) {
    auto lin = model.linearize(level, out.point);
    const Eigen::VectorXd grad = lin->misfit_gradient() + out.point;
    out.gradient_norm = grad.norm();
    out.iterations = it;
    if (out.gradient_norm <= tol) {
      out.converged = true;
      break;
    }

    // Inexact Newton: forcing term shrinks with the gradient.
    const double forcing =
        std::min(0.5, std::sqrt(out.gradient_norm));
    const Eigen::VectorXd step =
        cg_solve(*lin, -grad, forcing * 1e-2, options.cg_max_iters);

    const double slope = grad.dot(step);
    double alpha = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < options.max_backtracks; ++bt) {
      const Eigen::VectorXd trial = out.point + alpha * step;
      const double trial_obj =
          model.evaluate(level, trial).misfit + 0.5 * trial.squaredNorm();
      if (trial_obj <= objective + options.armijo_c * alpha * slope) {
        out.point = trial;
        objective = trial_obj;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // line search exhausted; keep the best iterate
  }

  if (!out.converged) {
    auto lin = model.linearize(level, out.point);
    out.gradient_norm = (lin->misfit_gradient() + out.point).norm();
    out.converged = out.gradient_norm <= tol;
  }
  out.objective = objective;
  return out;
}

LaplaceReference build_laplace_reference(ForwardModel& model, int level,
                                         const Eigen::VectorXd& map_point,
                                         double threshold, int max_rank,
                                         const LanczosOptions& lopt) {
  auto lin = model.linearize(level, map_point);
  const auto eig = lanczos_leading(
      [&](const Eigen::VectorXd& x) { return lin->gnh_apply(x); },
      static_cast<int>(map_point.size()), max_rank, threshold, lopt);

  LaplaceReference ref;
  ref.level = level;
  ref.map_point = map_point;
  ref.eigenvalues = eig.values;
  ref.eigenvectors = eig.vectors;
  return ref;
}

Eigen::VectorXd laplace_sample(const LaplaceReference& ref, Rng& rng) {
  Eigen::VectorXd xi(ref.map_point.size());
  rng.fill_normal(xi);
  if (ref.eigenvalues.size() == 0) return ref.map_point + xi;
  const Eigen::VectorXd proj = ref.eigenvectors.transpose() * xi;
  const Eigen::ArrayXd shrink =
      1.0 - (1.0 + ref.eigenvalues.array()).rsqrt();
  return ref.map_point + xi -
         ref.eigenvectors * (shrink * proj.array()).matrix();
}

Eigen::MatrixXd laplace_sample_matrix(const LaplaceReference& ref, int n,
                                      std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd out(ref.map_point.size(), n);
  for (int k = 0; k < n; ++k) out.col(k) = laplace_sample(ref, rng);
  return out;
}

}  // namespace mldili
