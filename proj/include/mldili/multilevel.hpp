#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mldili/lis.hpp"
#include "mldili/mcmc.hpp"
#include "mldili/model.hpp"

namespace mldili {

enum class RunMode { Pcn, Dili, MlPcn, MlDili, MlMixed };

const char* run_mode_name(RunMode mode);
RunMode parse_run_mode(const std::string& name);

struct LevelStats {
  int level = 0;
  double estimate = 0.0;       // Y_l
  double var_d = 0.0;          // sample variance of the correction
  double tau = 1.0;            // IACT of the correction chain
  double tau_params = 1.0;     // mean IACT of the tracked refined coordinates
  long steps = 0;              // total chain steps
  long post_burnin = 0;        // samples entering the estimate
  double cost_per_step = 0.0;  // seconds
  double ess = 0.0;
  double acceptance_rate = 0.0;
  long solver_failures = 0;
};

struct RateEstimates {
  bool available = false;
  double theta_b = 0.0, theta_v = 0.0, theta_c = 0.0;
  // Cost-regime exponent: eps^-predicted_exponent.
  double predicted_exponent = 2.0;
  int regime = 0;  // +1: variance decays faster than cost grows; 0: equal; -1: slower
};

struct MultilevelReport {
  RunMode mode = RunMode::MlDili;
  std::vector<LevelStats> levels;
  double estimate = 0.0;          // telescoped sum
  double variance = 0.0;          // sum tau_l var_l / n_l
  double variance_bound = 0.0;    // (1+r)/(1-r) adjusted
  double bias_estimate = 0.0;
  RateEstimates rates;
  Eigen::MatrixXd cross_level;    // batch-mean covariance ratios
  double cross_level_max = 0.0;
  bool premise_ok = true;         // max ratio < 1
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double total_seconds = 0.0;
};

// Y^ML = sum of the per-level estimates; levels must be contiguous.
double telescope(const std::vector<LevelStats>& stats);

// Sample sizes proportional to sqrt(tau var / cost), scaled so the
// cross-level-adjusted variance bound meets eps^2/2 (the other half of the
// error budget is reserved for the discretisation bias).
std::vector<long> allocate_samples(const std::vector<double>& tau,
                                   const std::vector<double>& var_d,
                                   const std::vector<double>& cost, double eps,
                                   double r_cross, long floor_steps = 100);

// Log-log least-squares fits of the bias proxies |Y_l| (l >= 1), the
// correction variances (l >= 1) and the per-step costs (all levels) against
// the forward-model dofs. Requires at least three levels.
RateEstimates estimate_rates(const std::vector<double>& bias_proxy,
                             const std::vector<double>& var_d,
                             const std::vector<double>& cost,
                             const std::vector<double>& fem_dofs);

// Proposal operators from a Laplace reference: draws cheap reference
// samples, projects them onto the subspace and fits the empirical
// covariance. `draws` <= 0 picks max(256, 4 rank). A non-negative
// `inherited_rank` produces the split (coupled-level) structure.
DiliOperators operators_from_reference(const HierarchicalLisBasis& basis,
                                       int level, const LaplaceReference& ref,
                                       double dt, double dt_perp, int draws,
                                       std::uint64_t seed,
                                       int inherited_rank = -1);

struct MultilevelOptions {
  RunMode mode = RunMode::MlDili;
  double epsilon = 0.0;           // > 0: pilot + allocation
  std::vector<long> fixed_steps;  // otherwise explicit per level
  long pilot_steps = 2000;
  // Inflation applied to pilot autocorrelation times at allocation time,
  // guarding the variance budget against pilot-estimation noise.
  double pilot_safety = 1.5;
  long floor_steps = 100;
  double burnin_fraction = 0.2;
  int thin = 1;
  int pool_stride = 1;
  double pcn_a = 0.98;
  double dt = 0.05;
  double dt_perp = 0.1;
  bool adapt = true;
  int adapt_interval = 100;
  int sigma_init_draws = 0;
  std::uint64_t seed = 1;
  double cross_level_guess = 0.1;
  int tracked = 10;
  bool keep_states = false;
  int max_level = -1;  // -1: the hierarchy's finest level
};

struct MultilevelResult {
  MultilevelReport report;
  // Scalar traces for every level (records have empty state storage unless
  // keep_states was set).
  std::vector<ChainRecord> base_records;          // single/base level
  std::vector<CoupledChainRecord> coupled_records;  // levels 1..L
};

// Full pipeline: per-level proposal operators from the LIS artifact, pilot
// runs and allocation (epsilon mode), then the bottom-up chain ladder with
// pooling, diagnostics and the assembled report. `lis` may be null for the
// pCN-only modes.
MultilevelResult run_multilevel(ForwardModel& model, const LisArtifact* lis,
                                const MultilevelOptions& opt);

}  // namespace mldili
