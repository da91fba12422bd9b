#include "mldili/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mldili/diagnostics.hpp"
#include "mldili/errors.hpp"

namespace mldili {

using nlohmann::json;

std::string RunConfig::resolved_data_file() const {
  return data_file.empty() ? output_dir + "/data.json" : data_file;
}

std::string RunConfig::resolved_lis_file() const {
  return lis_file.empty() ? output_dir + "/lis.bin" : lis_file;
}

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid json: ") + e.what());
  }

  static const char* known[] = {
      "levels", "h0", "r_base", "r_scale", "param_dims", "kl_reference_level",
      "kernel_rate", "kernel_variance", "snr", "truth_seed", "noise_seed",
      "threshold", "reference_samples", "lanczos_tol", "rank_cap",
      "recycle_factors", "dt", "dt_perp", "pcn_a", "adapt", "adapt_interval",
      "mode", "epsilon", "fixed_steps", "pilot_steps", "floor_steps",
      "burnin_fraction", "thin", "pool_stride", "seed", "workers", "tracked",
      "max_level", "output_dir", "data_file", "lis_file", "kl_file"};
  std::ostringstream unknown;
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) unknown << " '" << it.key() << "'";
  }
  if (!unknown.str().empty())
    throw ConfigError("config: unknown fields:" + unknown.str());

  RunConfig c;
  read_field(j, "levels", c.levels);
  read_field(j, "h0", c.h0);
  read_field(j, "r_base", c.r_base);
  read_field(j, "r_scale", c.r_scale);
  read_field(j, "param_dims", c.param_dims);
  read_field(j, "kl_reference_level", c.kl_reference_level);
  read_field(j, "kernel_rate", c.kernel_rate);
  read_field(j, "kernel_variance", c.kernel_variance);
  read_field(j, "snr", c.snr);
  read_field(j, "truth_seed", c.truth_seed);
  read_field(j, "noise_seed", c.noise_seed);
  read_field(j, "threshold", c.threshold);
  read_field(j, "reference_samples", c.reference_samples);
  read_field(j, "lanczos_tol", c.lanczos_tol);
  read_field(j, "rank_cap", c.rank_cap);
  read_field(j, "recycle_factors", c.recycle_factors);
  read_field(j, "dt", c.dt);
  read_field(j, "dt_perp", c.dt_perp);
  read_field(j, "pcn_a", c.pcn_a);
  read_field(j, "adapt", c.adapt);
  read_field(j, "adapt_interval", c.adapt_interval);
  read_field(j, "mode", c.mode);
  read_field(j, "epsilon", c.epsilon);
  read_field(j, "fixed_steps", c.fixed_steps);
  read_field(j, "pilot_steps", c.pilot_steps);
  read_field(j, "floor_steps", c.floor_steps);
  read_field(j, "burnin_fraction", c.burnin_fraction);
  read_field(j, "thin", c.thin);
  read_field(j, "pool_stride", c.pool_stride);
  read_field(j, "seed", c.seed);
  read_field(j, "workers", c.workers);
  read_field(j, "tracked", c.tracked);
  read_field(j, "max_level", c.max_level);
  read_field(j, "output_dir", c.output_dir);
  read_field(j, "data_file", c.data_file);
  read_field(j, "lis_file", c.lis_file);
  read_field(j, "kl_file", c.kl_file);
  validate_config(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return config_from_json_text(buf.str());
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["levels"] = c.levels;
  j["h0"] = c.h0;
  j["r_base"] = c.r_base;
  j["r_scale"] = c.r_scale;
  if (!c.param_dims.empty()) j["param_dims"] = c.param_dims;
  j["kl_reference_level"] = c.kl_reference_level;
  j["kernel_rate"] = c.kernel_rate;
  j["kernel_variance"] = c.kernel_variance;
  j["snr"] = c.snr;
  j["truth_seed"] = c.truth_seed;
  j["noise_seed"] = c.noise_seed;
  j["threshold"] = c.threshold;
  j["reference_samples"] = c.reference_samples;
  j["lanczos_tol"] = c.lanczos_tol;
  j["rank_cap"] = c.rank_cap;
  j["recycle_factors"] = c.recycle_factors;
  j["dt"] = c.dt;
  j["dt_perp"] = c.dt_perp;
  j["pcn_a"] = c.pcn_a;
  j["adapt"] = c.adapt;
  j["adapt_interval"] = c.adapt_interval;
  j["mode"] = c.mode;
  j["epsilon"] = c.epsilon;
  if (!c.fixed_steps.empty()) j["fixed_steps"] = c.fixed_steps;
  j["pilot_steps"] = c.pilot_steps;
  j["floor_steps"] = c.floor_steps;
  j["burnin_fraction"] = c.burnin_fraction;
  j["thin"] = c.thin;
  j["pool_stride"] = c.pool_stride;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["tracked"] = c.tracked;
  j["max_level"] = c.max_level;
  j["output_dir"] = c.output_dir;
  j["data_file"] = c.data_file;
  j["lis_file"] = c.lis_file;
  j["kl_file"] = c.kl_file;
  return j.dump(2);
}

std::vector<int> config_param_dims(const RunConfig& c) {
  if (!c.param_dims.empty()) return c.param_dims;
  std::vector<int> dims;
  for (int l = 0; l < c.levels; ++l) dims.push_back(c.r_base + c.r_scale * (1 << l));
  return dims;
}

void validate_config(const RunConfig& c) {
  std::ostringstream errors;
  auto fail = [&](const std::string& msg) { errors << "\n  - " << msg; };

  if (c.levels < 1) fail("levels must be at least 1");
  if (c.h0 <= 0 || c.h0 > 0.5) fail("h0 must lie in (0, 0.5]");
  if (c.param_dims.empty() && (c.r_base < 1 || c.r_scale < 0))
    fail("parameter-dimension rule must be positive");
  if (!c.param_dims.empty() && static_cast<int>(c.param_dims.size()) != c.levels)
    fail("param_dims must list one dimension per level");
  if (c.kl_reference_level < 0) fail("kl_reference_level must be >= 0");
  if (c.kernel_rate <= 0) fail("kernel_rate must be positive");
  if (c.kernel_variance <= 0) fail("kernel_variance must be positive");
  if (c.snr <= 0) fail("snr must be positive");
  if (c.threshold <= 0) fail("threshold must be positive");
  if (c.reference_samples < 1) fail("reference_samples must be at least 1");
  if (c.lanczos_tol <= 0 || c.lanczos_tol > 1e-2)
    fail("lanczos_tol must lie in (0, 1e-2]");
  if (c.rank_cap < 1) fail("rank_cap must be positive");
  if (c.dt <= 0) fail("dt must be positive");
  if (c.dt_perp <= 0) fail("dt_perp must be positive");
  if (!(c.pcn_a > -1 && c.pcn_a < 1)) fail("pcn_a must lie in (-1, 1)");
  if (c.adapt_interval < 1) fail("adapt_interval must be positive");
  try {
    parse_run_mode(c.mode);
  } catch (const ConfigError& e) {
    fail(e.what());
  }
  if (c.epsilon < 0) fail("epsilon must be non-negative");
  if (c.epsilon == 0 && c.fixed_steps.empty())
    fail("either epsilon or fixed_steps must be set");
  for (long n : c.fixed_steps)
    if (n < 1) fail("fixed_steps entries must be positive");
  if (c.pilot_steps < 100) fail("pilot_steps must be at least 100");
  if (c.floor_steps < 1) fail("floor_steps must be positive");
  if (!(c.burnin_fraction >= 0 && c.burnin_fraction < 1))
    fail("burnin_fraction must lie in [0, 1)");
  if (c.thin < 1) fail("thin must be positive");
  if (c.pool_stride < 1) fail("pool_stride must be positive");
  if (c.workers < 1) fail("workers must be positive");
  if (c.tracked < 1) fail("tracked must be positive");
  if (c.output_dir.empty()) fail("output_dir must be set");
  if (c.threshold >= 1.0)
    // Not fatal: the truncation is expected below one, where eigenvalues
    // stop dominating the prior.
    fprintf(stderr, "warning: truncation threshold %g >= 1\n", c.threshold);

  if (!errors.str().empty())
    throw ConfigError("config validation failed:" + errors.str());
}

LevelHierarchy hierarchy_from_config(const RunConfig& c) {
  return LevelHierarchy::regular(c.h0, config_param_dims(c));
}

KernelSpec kernel_from_config(const RunConfig& c) {
  return KernelSpec{c.kernel_rate, c.kernel_variance};
}

void write_report_json(const std::string& path, const MultilevelReport& rep,
                       const RunConfig& cfg, const std::string& data_hash,
                       double lis_build_seconds) {
  json j;
  j["mode"] = run_mode_name(rep.mode);
  j["estimate"] = rep.estimate;
  j["variance"] = rep.variance;
  j["variance_bound"] = rep.variance_bound;
  j["bias_estimate"] = rep.bias_estimate;
  j["epsilon"] = rep.epsilon;
  j["seed"] = rep.seed;
  j["total_seconds"] = rep.total_seconds;
  j["lis_build_seconds"] = lis_build_seconds;
  j["cross_level_max"] = rep.cross_level_max;
  j["premise_ok"] = rep.premise_ok;
  j["data_hash"] = data_hash;
  if (rep.rates.available) {
    j["rates"] = {{"theta_b", rep.rates.theta_b},
                  {"theta_v", rep.rates.theta_v},
                  {"theta_c", rep.rates.theta_c},
                  {"predicted_exponent", rep.rates.predicted_exponent},
                  {"regime", rep.rates.regime}};
  } else {
    j["rates"] = nullptr;
  }
  j["levels"] = json::array();
  for (const auto& st : rep.levels) {
    j["levels"].push_back({{"level", st.level},
                           {"estimate", st.estimate},
                           {"var_d", st.var_d},
                           {"tau", st.tau},
                           {"tau_params", st.tau_params},
                           {"steps", st.steps},
                           {"post_burnin", st.post_burnin},
                           {"cost_per_step", st.cost_per_step},
                           {"ess", st.ess},
                           {"acceptance_rate", st.acceptance_rate},
                           {"solver_failures", st.solver_failures}});
  }
  j["config"] = json::parse(config_to_json(cfg));

  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os << j.dump(2) << "\n";
}

namespace {

std::ofstream open_csv(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os.precision(17);
  return os;
}

}  // namespace

void write_trace_csv(const std::string& path, const ChainRecord& rec) {
  auto os = open_csv(path);
  os << "step,accepted,eta_fine,eta_coarse,Q_fine,Q_coarse,D\n";
  for (long j = 0; j < rec.steps; ++j)
    os << j << "," << static_cast<int>(rec.accepted_steps[j]) << ","
       << rec.misfits[j] << ",0," << rec.qois[j] << ",0," << rec.qois[j]
       << "\n";
}

void write_trace_csv(const std::string& path, const CoupledChainRecord& rec) {
  auto os = open_csv(path);
  os << "step,accepted,eta_fine,eta_coarse,Q_fine,Q_coarse,D\n";
  for (long j = 0; j < rec.steps; ++j)
    os << j << "," << static_cast<int>(rec.accepted_steps[j]) << ","
       << rec.eta_fine[j] << "," << rec.eta_coarse[j] << "," << rec.q_fine[j]
       << "," << rec.q_coarse[j] << "," << rec.d[j] << "\n";
}

void write_iact_table(const std::string& path, const MultilevelReport& rep) {
  auto os = open_csv(path);
  os << "level,tau_refined_params,tau_D,ess,acceptance_rate\n";
  for (const auto& st : rep.levels)
    os << st.level << "," << st.tau_params << "," << st.tau << "," << st.ess
       << "," << st.acceptance_rate << "\n";
}

void write_level_csv(const std::string& path, const MultilevelReport& rep,
                     const LevelHierarchy& hierarchy) {
  auto os = open_csv(path);
  os << "level,fem_dof,variance_D,bias_proxy,cost_per_step\n";
  for (const auto& st : rep.levels)
    os << st.level << "," << hierarchy.fem_dof(st.level) << "," << st.var_d
       << "," << std::abs(st.estimate) << "," << st.cost_per_step << "\n";
}

void write_autocorr_csv(const std::string& path, const Eigen::VectorXd& series,
                        const std::string& label) {
  const auto res = iact(series);
  auto os = open_csv(path);
  os << "lag,autocorrelation\n";
  for (int k = 0; k < res.curve.size(); ++k)
    os << k << "," << res.curve[k] << "\n";
  os << "# " << label << " tau," << res.tau << "\n";
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot hash missing file: " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!is) break;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace mldili
