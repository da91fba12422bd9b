#pragma once

#include <Eigen/Dense>
#include <functional>

namespace mldili {

using LinearOp = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LanczosOptions {
  // Ritz pair accepted when its residual estimate is below tol*|value|.
  double residual_tol = 1e-8;
  // Subspace cap as a multiple of the requested rank.
  int max_subspace_factor = 4;
  // Deterministic start vector seed.
  std::uint64_t seed = 0x5eed1e55;
  // Optional projector applied to the start vector (and to guard drift),
  // used when the operator is deflated against a known subspace.
  LinearOp project;
};

struct LanczosResult {
  Eigen::VectorXd values;     // descending
  Eigen::MatrixXd vectors;    // dim x k, orthonormal
  Eigen::VectorXd residuals;  // residual-norm estimates per pair
  int iterations = 0;
  // True when the run ended because the spectrum below `threshold` was
  // reached (threshold mode) or the operator range was exhausted.
  bool spectrum_exhausted = false;
};

// Leading eigenpairs of a symmetric positive-semidefinite operator by
// Lanczos with full reorthogonalisation (block size 1).
//
// threshold > 0: returns every converged pair with value > threshold (at
// most max_rank). threshold <= 0: returns the leading max_rank pairs.
// Throws NumericalError with the residual estimates if the subspace cap is
// reached before convergence.
LanczosResult lanczos_leading(const LinearOp& apply, int dim, int max_rank,
                              double threshold,
                              const LanczosOptions& options = {});

}  // namespace mldili
