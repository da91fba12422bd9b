#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <string>
#include <vector>

#include "mldili/grid.hpp"
#include "mldili/hierarchy.hpp"
#include "mldili/model.hpp"
#include "mldili/prior_kl.hpp"

namespace mldili {

// Sensors, noise level and data of the inverse problem.
struct ObservationSetup {
  int level = 0;  // level the data were generated on
  Eigen::MatrixX2d sensors;
  double sigma = 0.0;
  Eigen::VectorXd y;
  std::uint64_t truth_seed = 0;
  std::uint64_t noise_seed = 0;
  double snr = 0.0;
};

// 9x8 interior grid (i/10, j/9) minus the point closest to the centre: 71
// sensors, strictly interior.
Eigen::MatrixX2d default_sensor_layout();

// Immutable per-level discretisation: grid, free-node numbering for the
// Dirichlet problem (p=0 on the left edge, p=1 on the right, homogeneous
// Neumann top/bottom), stiffness sparsity with per-element scatter slots,
// sensor interpolation and the QoI weight function.
class EllipticLevel {
 public:
  EllipticLevel(const UnitSquareGrid& grid, const Eigen::MatrixX2d& sensors);

  const UnitSquareGrid& grid() const { return grid_; }
  int num_free() const { return static_cast<int>(free_to_node_.size()); }
  int num_sensors() const { return static_cast<int>(sensor_interp_.size()); }

 private:
  friend class EllipticSolver;
  UnitSquareGrid grid_;
  std::vector<int> node_to_free_;  // -1 on Dirichlet columns
  std::vector<int> free_to_node_;
  Eigen::VectorXd dirichlet_values_;      // full nodal lift (0/x=1 columns)
  Eigen::VectorXd qoi_weight_;            // nodal values of 1 - x
  std::vector<UnitSquareGrid::Interp> sensor_interp_;
  Eigen::SparseMatrix<double> pattern_;   // free x free sparsity, values reused
  std::vector<std::array<int, 16>> cell_slots_;  // value offsets, -2 skip, -1 dirichlet rhs
};

// One forward solve: pressure, observables and the cached quantities the
// tangent/adjoint actions need. Valid for the factorisation epoch recorded
// in `token`.
struct ForwardState {
  Eigen::VectorXd pressure;     // full nodal
  Eigen::VectorXd observables;  // at sensors
  Eigen::MatrixXd kappa_gauss;  // num_cells x 4, exp(u) at Gauss points
  std::uint64_t token = 0;
};

// Bilinear FEM solver for -div(exp(u) grad p) = 0. Owns one sparse Cholesky
// factorisation at a time; confined to a single worker.
class EllipticSolver {
 public:
  explicit EllipticSolver(std::shared_ptr<const EllipticLevel> level);

  // Assemble, factorise and solve for the nodal log-coefficient field u.
  const ForwardState& solve_observe(const Eigen::VectorXd& u_nodal);

  const ForwardState& state() const { return state_; }

  // Outflow through the left boundary, -int exp(u) grad p . grad w with w
  // the interpolant of 1-x, from the current state.
  double qoi() const;

  // One-sided boundary-flux evaluation of the same quantity (first-order
  // accurate); independent route used to cross-check qoi().
  double qoi_boundary_flux() const;

  // Directional derivative of the observables: J_u du. Reuses the current
  // factorisation (per-state token checked by the caller).
  Eigen::VectorXd tangent(const Eigen::VectorXd& du_nodal);

  // Adjoint action J_u^T w as a nodal vector.
  Eigen::VectorXd adjoint(const Eigen::VectorXd& w);

  // Redo the numeric factorisation of the current stiffness matrix. Used to
  // emulate the cost regime where factors are not kept around.
  void refactorize();

  const EllipticLevel& level() const { return *level_; }

 private:
  void assemble(const Eigen::VectorXd& u_nodal);
  Eigen::VectorXd solve_free(const Eigen::VectorXd& rhs_free);
  Eigen::VectorXd apply_moved_stiffness(const Eigen::VectorXd& du_nodal,
                                        const Eigen::VectorXd& p_full) const;

  std::shared_ptr<const EllipticLevel> level_;
  Eigen::SparseMatrix<double> matrix_;
  Eigen::VectorXd rhs_free_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> cholesky_;
  bool pattern_analyzed_ = false;
  ForwardState state_;
  std::uint64_t epoch_ = 0;
};

struct EllipticOptions {
  // When false, linearised/adjoint solves refactorise instead of reusing
  // the forward factorisation (cost-regime emulation for reporting).
  bool recycle_factors = true;
};

// Whitened-coordinate forward model: KL synthesis composed with the FEM
// solve, observation operator, misfit and QoI, plus matrix-free GNH actions.
class EllipticModel : public ForwardModel {
 public:
  EllipticModel(std::shared_ptr<const LevelHierarchy> hierarchy,
                std::shared_ptr<const KlExpansion> kl,
                std::shared_ptr<const ObservationSetup> obs,
                EllipticOptions options = {});

  const LevelHierarchy& hierarchy() const override { return *hierarchy_; }
  Evaluation evaluate(int level, const Eigen::VectorXd& v) override;
  std::unique_ptr<LinearizedOp> linearize(int level,
                                          const Eigen::VectorXd& v) override;
  std::unique_ptr<ForwardModel> clone_for_worker() const override;

  const ObservationSetup& observation() const { return *obs_; }
  const KlExpansion& kl() const { return *kl_; }

  // Nodal field for v at its level (KL synthesis).
  Eigen::VectorXd field(int level, const Eigen::VectorXd& v) const;

  // Direct access for tests and data generation.
  EllipticSolver& solver(int level);

 private:
  std::shared_ptr<const LevelHierarchy> hierarchy_;
  std::shared_ptr<const KlExpansion> kl_;
  std::shared_ptr<const ObservationSetup> obs_;
  EllipticOptions options_;
  std::vector<std::shared_ptr<const EllipticLevel>> levels_;
  std::vector<std::unique_ptr<EllipticSolver>> solvers_;
};

// Synthetic data: draws the truth from the prior at `level` with truth_seed,
// solves, sets sigma = max_i |F_i| / snr and perturbs with noise_seed.
struct GeneratedData {
  ObservationSetup setup;
  Eigen::VectorXd truth;  // whitened coefficients at `level`
};
GeneratedData generate_data(const LevelHierarchy& hierarchy,
                            const KlExpansion& kl,
                            const Eigen::MatrixX2d& sensors, int level,
                            double snr, std::uint64_t truth_seed,
                            std::uint64_t noise_seed);

// JSON data file plus binary truth coefficients alongside (path + ".truth").
void save_observation(const std::string& path, const ObservationSetup& setup,
                      const Eigen::VectorXd& truth);
GeneratedData load_observation(const std::string& path);

}  // namespace mldili
