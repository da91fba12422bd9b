#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mldili/grid.hpp"
#include "mldili/hierarchy.hpp"

namespace mldili {

// Isotropic exponential covariance kernel variance * exp(-rate*|x-x'|).
struct KernelSpec {
  double correlation_rate = 5.0;
  double variance = 1.0;
};

// Kernel matrix of a point set; entry (i,j) = variance*exp(-rate*|x_i-x_j|).
Eigen::MatrixXd kernel_gram(const Eigen::VectorXd& xs,
                            const Eigen::VectorXd& ys,
                            const KernelSpec& spec);

// Truncated Karhunen-Loeve basis tabulated at the nodes of one level grid.
// Eigenvalues are descending; eigenfunctions are orthonormal in the
// quadrature inner product of the grid they were decomposed on.
struct KlBasis {
  int level = 0;
  Eigen::VectorXd eigenvalues;   // length R, descending, >= 0
  Eigen::MatrixXd modes;         // num_nodes x R
  Eigen::VectorXd mean;          // num_nodes (zero for the built-in problem)
  bool degenerate_pairs = false; // near-equal eigenvalues were tie-broken
};

// Leading-R eigenpairs of the quadrature-weighted covariance operator on
// `grid`. Deterministic: ties are ordered by the first differing eigenvector
// component and each eigenvector's first nonzero component is made positive.
KlBasis kl_decompose(const UnitSquareGrid& grid, const KernelSpec& spec,
                     int num_modes);

// Shared KL decomposition for the whole hierarchy. The eigenproblem is
// solved once on a reference grid and every level's basis is the leading
// param_dim(level) pairs tabulated at that level's nodes (exact restriction
// for coarser grids, bilinear interpolation for finer ones). Sharing one
// decomposition makes the across-level nesting of coefficients exact.
class KlExpansion {
 public:
  KlExpansion(const LevelHierarchy& hierarchy, const KernelSpec& spec,
              int reference_level);

  const KlBasis& level_basis(int level) const { return bases_.at(level); }
  int reference_level() const { return reference_level_; }
  const KernelSpec& spec() const { return spec_; }

  // Binary cache: per level a record {level, R, node_count} followed by
  // eigenvalues then eigenfunctions row-major, little-endian doubles.
  void save(const std::string& path) const;
  static KlExpansion load(const std::string& path,
                          const LevelHierarchy& hierarchy,
                          const KernelSpec& spec);

 private:
  KlExpansion() = default;
  KernelSpec spec_;
  int reference_level_ = 0;
  std::vector<KlBasis> bases_;
};

// Nodal field m0 + sum_j sqrt(w_j) phi_j v_j on the basis grid.
Eigen::VectorXd synthesize_field(const WhitenedVector& v, const KlBasis& basis);

// log N(v; 0, I) = -|v|^2/2 - (R/2) log(2*pi).
double prior_logpdf(const Eigen::VectorXd& v);

}  // namespace mldili
