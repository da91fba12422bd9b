#pragma once

#include <Eigen/Dense>

#include "mldili/lis.hpp"
#include "mldili/rng.hpp"

namespace mldili {

// Operator-weighted proposal data at one level: symmetric A_r/B_r acting in
// the subspace coordinates, scalar pair (a_perp, b_perp) in the complement,
// with A^2 + B^2 = I throughout.
struct DiliOperators {
  int level = 0;
  double dt = 1.0;
  double dt_perp = 0.1;
  double a_perp = 0.0;
  double b_perp = 1.0;
  Eigen::MatrixXd a_r;      // r x r
  Eigen::MatrixXd b_r;      // r x r, SPD
  Eigen::MatrixXd xi;       // B_r^{-2}
  Eigen::MatrixXd sigma_r;  // covariance the operators were built from
};

// A_r = (2I + dt*Sigma)^-1 (2I - dt*Sigma), B_r = sqrt(I - A_r^2), computed
// through the eigendecomposition of Sigma so the pair commutes exactly.
DiliOperators build_dili_operators(const Eigen::MatrixXd& sigma_r, double dt,
                                   double dt_perp, int level = 0);

// Variant for the coupled levels: anisotropic scaling on the inherited
// subspace coordinates (the leading `inherited_rank` of them) and the
// complement scalars on the columns added at this level. This block
// structure zeroes the coarse/fine off-diagonal of the whole-space operator,
// which is exactly the condition under which the simplified coupled
// acceptance ratio is the true Metropolis-Hastings ratio.
DiliOperators build_dili_operators_split(const Eigen::MatrixXd& sigma_r,
                                         int inherited_rank, double dt,
                                         double dt_perp, int level);

// v' = a v + sqrt(1-a^2) xi in whitened coordinates; requires |a| < 1.
Eigen::VectorXd pcn_propose(const Eigen::VectorXd& v, double a, Rng& rng);

// min{1, exp(eta_cur - eta_prop)}; non-finite proposals get probability 0.
double accept_base(double eta_cur, double eta_prop);

// min{1, exp[(eta_f_cur - eta_c_cur) - (eta_f_prop - eta_c_prop)]}.
double accept_coupled(double eta_f_cur, double eta_c_cur, double eta_f_prop,
                      double eta_c_prop);

// A_l v = Psi A_r Psi^T v + a_perp (v - Psi Psi^T v).
Eigen::VectorXd dili_mean_apply(const HierarchicalLisBasis& basis,
                                const DiliOperators& ops,
                                const Eigen::VectorXd& v);

// Full-space draw v' = A_l v + B_l xi using the hierarchical basis; with an
// empty subspace this is pCN with coefficient a_perp.
Eigen::VectorXd dili_propose(const HierarchicalLisBasis& basis,
                             const DiliOperators& ops,
                             const Eigen::VectorXd& v, Rng& rng);

// Small factors realising the conditional Gaussian of the fine block of the
// proposal noise: thin QR of the fine block, an s x s eigendecomposition,
// and the precision blocks needed for the conditional mean.
struct ConditionalFactors {
  int level = 1;
  double b_perp = 1.0;
  Eigen::MatrixXd phi;        // fine_dim x s, orthonormal columns
  Eigen::VectorXd d;          // s eigenvalues, all > -1
  Eigen::MatrixXd mean_core;  // (D+I)^-1 W^T T
  Eigen::MatrixXd xi_fc;      // s x r_{l-1}
  Eigen::MatrixXd xi_ff;      // s x s
};

ConditionalFactors precompute_conditional(const HierarchicalLisBasis& basis,
                                          int level,
                                          const DiliOperators& ops);

// -P_ff^-1 P_fc r_c without forming either matrix.
Eigen::VectorXd conditional_mean(const HierarchicalLisBasis& basis,
                                 const ConditionalFactors& f,
                                 const Eigen::VectorXd& r_c);

// P_ff^-1/2 xi.
Eigen::VectorXd conditional_noise(const ConditionalFactors& f,
                                  const Eigen::VectorXd& xi);

// Factorised proposal for the coupled chain: the coarse block is the pooled
// candidate, the fine block is the conditional DILI Gaussian.
Eigen::VectorXd coupled_dili_propose(const HierarchicalLisBasis& basis,
                                     const DiliOperators& ops,
                                     const ConditionalFactors& f,
                                     const Eigen::VectorXd& v_cur,
                                     const Eigen::VectorXd& coarse_candidate,
                                     Rng& rng);

// Same coupling with an independent pCN move on the fine block.
Eigen::VectorXd coupled_pcn_propose(const Eigen::VectorXd& v_cur,
                                    const Eigen::VectorXd& coarse_candidate,
                                    double a, Rng& rng);

// Streaming covariance accumulator for proposal adaptation.
class OnlineCovariance {
 public:
  explicit OnlineCovariance(int dim)
      : count_(0),
        mean_(Eigen::VectorXd::Zero(dim)),
        m2_(Eigen::MatrixXd::Zero(dim, dim)) {}

  void add(const Eigen::VectorXd& x);
  long count() const { return count_; }
  Eigen::MatrixXd covariance() const;

 private:
  long count_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
};

}  // namespace mldili
