#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "mldili/hierarchy.hpp"
#include "mldili/lanczos.hpp"
#include "mldili/laplace.hpp"
#include "mldili/model.hpp"

namespace mldili {

// Sample-averaged Gauss-Newton Hessian over reference draws; one linearised
// solver handle per draw so repeated actions reuse the factorisations.
class AveragedGnh {
 public:
  AveragedGnh(ForwardModel& model, int level, const Eigen::MatrixXd& samples,
              int workers = 1);

  Eigen::VectorXd apply(const Eigen::VectorXd& dv) const;
  int dim() const { return dim_; }
  int num_samples() const { return static_cast<int>(ops_.size()); }

 private:
  int dim_;
  int workers_;
  std::vector<std::unique_ptr<LinearizedOp>> ops_;
};

// One level of the block upper-triangular basis: the new columns split into
// their coarse-coordinate block and fine-coordinate block.
struct LisLevelBlock {
  Eigen::MatrixXd z_coarse;     // param_dim(l-1) x s_l, empty at the base
  Eigen::MatrixXd z_fine;       // (param_dim(l)-param_dim(l-1)) x s_l
  Eigen::VectorXd eigenvalues;  // retained values, descending
};

// Block upper-triangular orthonormal basis stored level by level; applying
// it or its transpose costs sum_j R_j s_j multiply-adds.
class HierarchicalLisBasis {
 public:
  explicit HierarchicalLisBasis(std::shared_ptr<const LevelHierarchy> hierarchy)
      : hierarchy_(std::move(hierarchy)) {}

  void append_level(LisLevelBlock block);

  int num_levels() const { return static_cast<int>(blocks_.size()); }
  int rank(int level) const;           // r_l
  int added(int level) const {         // s_l
    return static_cast<int>(blocks_.at(level).z_fine.cols());
  }
  const LisLevelBlock& block(int level) const { return blocks_.at(level); }
  const LevelHierarchy& hierarchy() const { return *hierarchy_; }

  // Psi_{l,r} w; optionally accumulates the multiply-add count.
  Eigen::VectorXd apply(int level, const Eigen::VectorXd& w,
                        std::uint64_t* flops = nullptr) const;
  // Psi_{l,r}^T x
  Eigen::VectorXd apply_transpose(int level, const Eigen::VectorXd& x,
                                  std::uint64_t* flops = nullptr) const;

  // Materialised Psi_{l,r} for oracles and small-instance checks.
  Eigen::MatrixXd densify(int level) const;

 private:
  std::shared_ptr<const LevelHierarchy> hierarchy_;
  std::vector<LisLevelBlock> blocks_;
};

struct LisOptions {
  double threshold = 1e-2;  // eigenvalue truncation
  int rank_cap = 1 << 20;   // hard cap on added columns per level
  LanczosOptions lanczos;
};

// Base-level subspace: leading eigenpairs of the averaged GNH above the
// threshold.
LisLevelBlock build_base_block(const AveragedGnh& op, const LisOptions& opt);

// Rayleigh-Ritz enrichment: leading eigenpairs of the averaged GNH deflated
// against the lifted basis (levels 0..l-1 of `basis`), orthogonal to it.
LisLevelBlock enrich_block(const HierarchicalLisBasis& basis,
                           const AveragedGnh& op, const LisOptions& opt);

// Storage/build complexity accounting for the hierarchical construction
// against the single-level one, with the closed-form upper bounds evaluated
// from fitted growth/decay rates.
struct CostModelInput {
  std::vector<double> param_dims;    // R_l
  std::vector<double> added_ranks;   // s_l
  std::vector<double> fem_dofs;      // M_l
  std::vector<double> single_ranks;  // r^single_l per level
  double theta_c = 1.2;
};

struct CostModelReport {
  double zeta_multi = 0.0;   // sum R_l s_l
  double zeta_single = 0.0;  // R_L r^single_L
  double chi_multi = 0.0;    // sum s_l M_l^theta_c (per reference sample)
  double chi_single = 0.0;   // r^single_L M_L^theta_c
  std::vector<double> storage_factor_by_level;  // cumulative ratio at each l
  double beta_p = 0.0, beta_r = 0.0, beta_m = 0.0;  // fitted rates
  double c_empirical = 0.0;  // r^single_L / r_0
  double storage_bound = 0.0, build_bound = 0.0;
};

CostModelReport cost_model(const CostModelInput& in);

// Binary artefact: basis blocks, per-level truncation metadata and the
// Laplace reference (MAP point and retained GNH eigenpairs) per level.
struct LisArtifact {
  double threshold = 0.0;
  std::vector<int> reference_samples;  // K_l
  HierarchicalLisBasis basis;
  std::vector<LaplaceReference> references;
};

void save_lis(const std::string& path, const LisArtifact& artifact);
LisArtifact load_lis(const std::string& path,
                     std::shared_ptr<const LevelHierarchy> hierarchy);

// Whole-subspace construction ladder: per level, a MAP search, the Laplace
// reference, K reference draws, the sample-averaged GNH and the recursive
// enrichment. Optionally also the non-recursive (single-level) construction
// for comparison.
struct LisBuildOptions {
  double threshold = 1e-2;
  int reference_samples = 40;  // K, same on every level
  int rank_cap = 1 << 20;      // cap on columns added per level
  std::uint64_t seed = 1;
  MapOptions map;
  LanczosOptions lanczos;
  int workers = 1;
  bool single_level_too = false;
  int max_level = -1;  // -1: every hierarchy level
};

struct LisBuildOutcome {
  LisArtifact artifact;
  std::vector<double> level_seconds;        // recursive build time per level
  std::vector<int> single_ranks;            // non-recursive dimensions
  std::vector<double> single_seconds;
};

LisBuildOutcome build_lis_pipeline(ForwardModel& model,
                                   std::shared_ptr<const LevelHierarchy> hierarchy,
                                   const LisBuildOptions& opt);

}  // namespace mldili
