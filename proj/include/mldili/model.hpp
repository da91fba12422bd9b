#pragma once

#include <Eigen/Dense>
#include <memory>

#include "mldili/hierarchy.hpp"

namespace mldili {

// One forward solve worth of scalar outputs.
struct Evaluation {
  double misfit = 0.0;
  double qoi = 0.0;
};

// Linearisation of the data-misfit map at a fixed parameter point. Exposes
// matrix-free Gauss-Newton Hessian actions and the misfit gradient, reusing
// whatever factorisation the underlying solver built for the point.
class LinearizedOp {
 public:
  virtual ~LinearizedOp() = default;
  virtual int dim() const = 0;
  virtual double misfit() const = 0;
  virtual double qoi() const = 0;
  // J^T Gamma_obs^-1 J dv
  virtual Eigen::VectorXd gnh_apply(const Eigen::VectorXd& dv) const = 0;
  // J^T Gamma_obs^-1 (F(v) - y)
  virtual Eigen::VectorXd misfit_gradient() const = 0;
};

// Level-indexed forward model in whitened coordinates. Implementations own
// whatever per-level solver state they need; one instance serves one worker
// at a time, clone_for_worker() hands out additional instances sharing the
// immutable setup.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  virtual const LevelHierarchy& hierarchy() const = 0;
  virtual Evaluation evaluate(int level, const Eigen::VectorXd& v) = 0;
  virtual std::unique_ptr<LinearizedOp> linearize(int level,
                                                  const Eigen::VectorXd& v) = 0;
  virtual std::unique_ptr<ForwardModel> clone_for_worker() const = 0;
};

}  // namespace mldili
