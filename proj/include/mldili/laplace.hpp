#pragma once

#include <Eigen/Dense>

#include "mldili/lanczos.hpp"
#include "mldili/model.hpp"
#include "mldili/rng.hpp"

namespace mldili {

struct MapOptions {
  int max_iters = 40;
  // Convergence when |grad| <= tol_factor * sqrt(dim).
  double tol_factor = 1e-6;
  int cg_max_iters = 200;
  double armijo_c = 1e-4;
  int max_backtracks = 40;
};

struct MapResult {
  Eigen::VectorXd point;
  double gradient_norm = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Gauss-Newton minimisation of misfit(v) + |v|^2/2 with CG inner solves and
// Armijo backtracking. Returns the best iterate with a warning flag when the
// iteration budget runs out.
MapResult find_map(ForwardModel& model, int level, const MapOptions& options = {});

// Gaussian reference N(map, (I + H_r)^-1) with H_r the truncated GNH at the
// MAP point: eigenpairs with eigenvalue > threshold (capped).
struct LaplaceReference {
  int level = 0;
  Eigen::VectorXd map_point;
  Eigen::VectorXd eigenvalues;   // positive, descending
  Eigen::MatrixXd eigenvectors;  // dim x m, orthonormal
};

LaplaceReference build_laplace_reference(ForwardModel& model, int level,
                                         const Eigen::VectorXd& map_point,
                                         double threshold, int max_rank,
                                         const LanczosOptions& lopt = {});

// One draw: map + xi - Psi diag(1-(1+lambda)^-1/2) Psi^T xi, xi ~ N(0,I).
Eigen::VectorXd laplace_sample(const LaplaceReference& ref, Rng& rng);

// n draws as columns, deterministic in the seed.
Eigen::MatrixXd laplace_sample_matrix(const LaplaceReference& ref, int n,
                                      std::uint64_t seed);

}  // namespace mldili
