#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "mldili/model.hpp"
#include "mldili/proposal.hpp"

namespace mldili {

enum class ProposalKind { Pcn, Dili };

// Covariance adaptation: rebuild the operators every `interval_accepts`
// acceptances from the chain's subspace projections, frozen from
// `freeze_after_step` onwards (normally the end of burn-in).
struct AdaptationOptions {
  bool enabled = false;
  int interval_accepts = 100;
  long freeze_after_step = 0;
};

struct ChainRecord {
  int level = 0;
  std::vector<Eigen::VectorXd> states;  // stride `thin`, may be empty
  Eigen::VectorXd misfits;              // per step, current state
  Eigen::VectorXd qois;
  Eigen::MatrixXd tracked_coords;       // per step, a few monitored coordinates
  std::vector<char> accepted_steps;     // per step accept flag
  long steps = 0;
  long accepted = 0;
  long solver_failures = 0;
  double seconds = 0.0;
  int thin = 1;
};

struct BaseChainOptions {
  long steps = 1000;
  std::uint64_t seed = 1;
  int thin = 1;
  bool store_states = true;
  ProposalKind kind = ProposalKind::Dili;
  double pcn_a = 0.98;
  double dt = 1.0;
  double dt_perp = 0.1;
  AdaptationOptions adapt;
  int tracked = 10;  // leading coordinates recorded as scalar traces
};

// Metropolis-Hastings chain at one level. `basis`/`ops` are required for the
// Dili kind and ignored for Pcn. Solver failures count as rejections.
ChainRecord run_base_chain(ForwardModel& model, int level,
                           const HierarchicalLisBasis* basis,
                           const DiliOperators* ops,
                           const Eigen::VectorXd& init,
                           const BaseChainOptions& opt);

// Posterior sample store backing the coarse components of the next level:
// states with their cached misfits and QoIs, so pooled draws never re-solve.
struct CoarsePool {
  int level = 0;
  std::vector<Eigen::VectorXd> states;
  std::vector<double> misfits;
  std::vector<double> qois;
};

std::size_t pool_draw(const CoarsePool& pool, Rng& rng);

struct CoupledChainRecord {
  int level = 0;
  std::vector<Eigen::VectorXd> fine_states;      // stride `thin`
  std::vector<Eigen::VectorXd> coarse_states;    // recorded pairs, optional
  Eigen::VectorXd eta_fine, eta_coarse;          // per step, recorded pair
  Eigen::VectorXd q_fine, q_coarse, d;
  Eigen::MatrixXd tracked_coords;                // refined-coordinate traces
  std::vector<char> accepted_steps;              // per step accept flag
  long steps = 0;
  long accepted = 0;
  long solver_failures = 0;
  double seconds = 0.0;
  int thin = 1;
};

struct CoupledChainOptions {
  long steps = 1000;
  std::uint64_t seed = 1;
  int thin = 1;
  bool store_states = true;
  bool store_coarse_states = false;
  ProposalKind fine_kind = ProposalKind::Dili;
  double pcn_a = 0.98;
  double dt = 1.0;
  double dt_perp = 0.1;
  AdaptationOptions adapt;
  int tracked = 10;
};

// Level-l chain coupled to the level-(l-1) pool: the coarse candidate is a
// uniform pooled draw (accepted with probability one on the coarse side),
// the fine block comes from the conditional proposal, and the recorded
// coarse member advances every step while the fine state follows the
// Metropolis accept/reject decision.
CoupledChainRecord run_coupled_chain(ForwardModel& model, int level,
                                     const HierarchicalLisBasis* basis,
                                     const DiliOperators* ops,
                                     const ConditionalFactors* factors,
                                     const CoarsePool& pool,
                                     const Eigen::VectorXd& init,
                                     const CoupledChainOptions& opt);

// Post-burn-in, thinned pool from a finished chain.
CoarsePool pool_from_chain(const ChainRecord& rec, double burnin_fraction,
                           int stride);
CoarsePool pool_from_coupled(const CoupledChainRecord& rec,
                             double burnin_fraction, int stride);

}  // namespace mldili
