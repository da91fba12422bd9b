#pragma once

#include <string>
#include <vector>

#include "mldili/hierarchy.hpp"
#include "mldili/multilevel.hpp"
#include "mldili/prior_kl.hpp"

namespace mldili {

// Full run configuration; every field defaults to the built-in experiment
// (unit square, h0 = 1/20, four levels, 50 + 100 * 2^l parameter modes,
// exponential kernel with rate 5, snr 50, truncation 1e-2).
struct RunConfig {
  // hierarchy
  int levels = 4;  // L + 1
  double h0 = 1.0 / 20.0;
  int r_base = 50;
  int r_scale = 100;
  std::vector<int> param_dims;  // explicit override of the R_l rule
  int kl_reference_level = 2;   // grid the KL eigenproblem is solved on

  // prior kernel
  double kernel_rate = 5.0;
  double kernel_variance = 1.0;

  // data
  double snr = 50.0;
  std::uint64_t truth_seed = 424242;
  std::uint64_t noise_seed = 171717;

  // subspace construction
  double threshold = 1e-2;
  int reference_samples = 40;
  double lanczos_tol = 1e-8;
  int rank_cap = 142;  // twice the sensor count
  bool recycle_factors = true;

  // proposals
  double dt = 0.05;
  double dt_perp = 0.1;
  double pcn_a = 0.98;
  bool adapt = true;
  int adapt_interval = 100;

  // run
  std::string mode = "MLDILI";
  double epsilon = 0.0;
  std::vector<long> fixed_steps;
  long pilot_steps = 2000;
  long floor_steps = 100;
  double burnin_fraction = 0.2;
  int thin = 1;
  int pool_stride = 1;
  std::uint64_t seed = 1;
  int workers = 1;
  int tracked = 10;
  int max_level = -1;

  // files
  std::string output_dir = "out";
  std::string data_file;  // defaults to <output_dir>/data.json
  std::string lis_file;   // defaults to <output_dir>/lis.bin
  std::string kl_file;    // optional basis cache

  std::string resolved_data_file() const;
  std::string resolved_lis_file() const;
};

// Parse a JSON config; unknown keys and invalid values are collected and
// reported together.
RunConfig load_config(const std::string& path);
RunConfig config_from_json_text(const std::string& text);
std::string config_to_json(const RunConfig& cfg);

void validate_config(const RunConfig& cfg);

std::vector<int> config_param_dims(const RunConfig& cfg);
LevelHierarchy hierarchy_from_config(const RunConfig& cfg);
KernelSpec kernel_from_config(const RunConfig& cfg);

// Report and trace outputs.
struct RunPaths {
  std::string dir;  // per-run directory
};

void write_report_json(const std::string& path, const MultilevelReport& report,
                       const RunConfig& cfg, const std::string& data_hash,
                       double lis_build_seconds);
void write_trace_csv(const std::string& path, const ChainRecord& rec);
void write_trace_csv(const std::string& path, const CoupledChainRecord& rec);
void write_iact_table(const std::string& path, const MultilevelReport& report);
void write_level_csv(const std::string& path, const MultilevelReport& report,
                     const LevelHierarchy& hierarchy);
void write_autocorr_csv(const std::string& path, const Eigen::VectorXd& series,
                        const std::string& label);

// FNV-1a content hash used to tie reports to their data files.
std::string file_hash_hex(const std::string& path);

}  // namespace mldili
