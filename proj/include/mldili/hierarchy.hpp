#pragma once

#include <Eigen/Dense>
#include <vector>

namespace mldili {

// Level structure shared by every module: mesh sizes, finite element dofs
// and parameter dimensions per level. Immutable after construction, so it
// can be shared freely across workers.
class LevelHierarchy {
 public:
  LevelHierarchy(std::vector<double> mesh_size, std::vector<int> fem_dof,
                 std::vector<int> param_dim);

  // Built-in experiment layout: h_l = h0 * 2^-l on [0,1]^2 with
  // (1/h_l + 1)^2 grid nodes and param_dim given per level.
  static LevelHierarchy regular(double h0, std::vector<int> param_dim);

  int num_levels() const { return static_cast<int>(param_dim_.size()); }
  int finest() const { return num_levels() - 1; }
  double mesh_size(int level) const { return mesh_size_.at(level); }
  int fem_dof(int level) const { return fem_dof_.at(level); }
  int param_dim(int level) const { return param_dim_.at(level); }

  // Number of parameter coordinates added at `level` relative to the
  // previous one (param_dim(0) at the base).
  int added_dim(int level) const;

 private:
  std::vector<double> mesh_size_;
  std::vector<int> fem_dof_;
  std::vector<int> param_dim_;
};

// Parameter vector in whitened (standard Gaussian) coordinates at one level.
struct WhitenedVector {
  int level = 0;
  Eigen::VectorXd coeffs;
};

// Coarse/fine partition of a whitened vector: the leading param_dim(l-1)
// coordinates are the ones active on the previous level. The index-range
// selectors are never materialised as matrices.
struct CoarseFineSplit {
  Eigen::VectorXd coarse;
  Eigen::VectorXd fine;
};

// Partition v (level >= 1) into its coarse and fine coordinate blocks.
CoarseFineSplit split(const LevelHierarchy& h, const WhitenedVector& v);

// Inverse of split: assemble a level-`level` vector from its blocks.
WhitenedVector embed(const LevelHierarchy& h, int level,
                     const Eigen::VectorXd& coarse,
                     const Eigen::VectorXd& fine);

// First param_dim(level-1) coordinates of v, tagged with level-1.
WhitenedVector restrict_to_coarse(const LevelHierarchy& h,
                                  const WhitenedVector& v);

}  // namespace mldili
