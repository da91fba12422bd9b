#pragma once

#include <Eigen/Dense>
#include <vector>

namespace mldili {

struct AutocorrResult {
  double tau = 1.0;            // integrated autocorrelation time, >= 1
  int window = 0;              // lags summed
  Eigen::VectorXd curve;       // autocorrelation at lags 0..window
  bool degenerate = false;     // constant input
  bool window_saturated = false;  // automatic window hit the length cap
};

// tau = 1 + 2 sum_{k<=W} rho(k) with the smallest window W >= 5*tau(W),
// clamped below at one. Series must have at least 100 entries.
AutocorrResult iact(const Eigen::VectorXd& series);

double effective_sample_size(double tau, long n);

struct VarianceOfD {
  double var_d = 0.0;
  double var_q_fine = 0.0;
  double var_q_coarse = 0.0;
  double covariance = 0.0;
};

// Sample variance of the per-step QoI corrections, reported together with
// its var(Qf)+var(Qc)-2cov decomposition.
VarianceOfD variance_of_d(const Eigen::VectorXd& q_fine,
                          const Eigen::VectorXd& q_coarse);

struct CrossLevelResult {
  Eigen::MatrixXd ratio;  // cov(Y_l,Y_k)/max(var) with unit diagonal
  double max_offdiag = 0.0;
};

// Batch-mean estimate of the cross-level covariance ratios from per-level
// correction traces; every trace is cut into `num_batches` equal batches.
CrossLevelResult cross_level_ratio(const std::vector<Eigen::VectorXd>& traces,
                                   int num_batches = 20);

}  // namespace mldili
