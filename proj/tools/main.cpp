// Command-line driver: synthetic data generation, subspace construction,
// sampler runs and report aggregation, all from one JSON configuration.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "mldili/config.hpp"
#include "mldili/elliptic.hpp"
#include "mldili/errors.hpp"
#include "mldili/lis.hpp"
#include "mldili/multilevel.hpp"
#include "mldili/simd_kernels.hpp"

namespace fs = std::filesystem;
using namespace mldili;

namespace {

std::shared_ptr<const KlExpansion> obtain_kl(
    const RunConfig& cfg, std::shared_ptr<const LevelHierarchy> hierarchy) {
  const int ref = std::min(cfg.kl_reference_level, hierarchy->finest());
  if (!cfg.kl_file.empty() && fs::exists(cfg.kl_file)) {
    std::cerr << "loading KL basis from " << cfg.kl_file << "\n";
    return std::make_shared<const KlExpansion>(
        KlExpansion::load(cfg.kl_file, *hierarchy, kernel_from_config(cfg)));
  }
  std::cerr << "building KL basis (reference level " << ref << ")...\n";
  auto kl = std::make_shared<const KlExpansion>(*hierarchy,
                                                kernel_from_config(cfg), ref);
  if (!cfg.kl_file.empty()) {
    kl->save(cfg.kl_file);
    std::cerr << "cached KL basis in " << cfg.kl_file << "\n";
  }
  return kl;
}

int cmd_generate_data(const RunConfig& cfg, bool force) {
  const auto path = cfg.resolved_data_file();
  if (fs::exists(path) && !force)
    throw ConfigError("data file exists (use --force to overwrite): " + path);
  fs::create_directories(cfg.output_dir);

  auto hierarchy = std::make_shared<const LevelHierarchy>(
      hierarchy_from_config(cfg));
  auto kl = obtain_kl(cfg, hierarchy);
  const auto data =
      generate_data(*hierarchy, *kl, default_sensor_layout(),
                    hierarchy->finest(), cfg.snr, cfg.truth_seed,
                    cfg.noise_seed);
  save_observation(path, data.setup, data.truth);
  std::cout << "wrote " << path << ": " << data.setup.y.size()
            << " sensors, sigma=" << data.setup.sigma
            << " (max-abs snr convention), level " << data.setup.level << "\n";
  return 0;
}

int cmd_build_lis(const RunConfig& cfg) {
  const auto data_path = cfg.resolved_data_file();
  if (!fs::exists(data_path))
    throw ConfigError("no data file at " + data_path + "; run generate-data first");
  auto hierarchy = std::make_shared<const LevelHierarchy>(
      hierarchy_from_config(cfg));
  auto kl = obtain_kl(cfg, hierarchy);
  auto data = load_observation(data_path);
  auto obs = std::make_shared<const ObservationSetup>(std::move(data.setup));

  EllipticOptions eopt;
  eopt.recycle_factors = cfg.recycle_factors;
  EllipticModel model(hierarchy, kl, obs, eopt);

  LisBuildOptions opt;
  opt.threshold = cfg.threshold;
  opt.reference_samples = cfg.reference_samples;
  opt.rank_cap = cfg.rank_cap;
  opt.seed = cfg.seed;
  opt.lanczos.residual_tol = cfg.lanczos_tol;
  opt.workers = cfg.workers;
  opt.single_level_too = true;

  std::cerr << "building hierarchical subspace (threshold " << cfg.threshold
            << ", K=" << cfg.reference_samples << ")...\n";
  const auto outcome = build_lis_pipeline(model, hierarchy, opt);
  fs::create_directories(cfg.output_dir);
  save_lis(cfg.resolved_lis_file(), outcome.artifact);

  // Per-level summary: the single-level dimension, the recursively added
  // dimension, the running total and the storage reduction factor.
  CostModelInput cmi;
  double build_total = 0, single_total = 0;
  for (int l = 0; l < hierarchy->num_levels(); ++l) {
    cmi.param_dims.push_back(hierarchy->param_dim(l));
    cmi.added_ranks.push_back(outcome.artifact.basis.added(l));
    cmi.fem_dofs.push_back(hierarchy->fem_dof(l));
    cmi.single_ranks.push_back(outcome.single_ranks[l]);
    build_total += outcome.level_seconds[l];
    single_total += outcome.single_seconds[l];
  }
  const auto cm = cost_model(cmi);

  std::cout << "level  single  added  total  storage_factor  seconds\n";
  int total = 0;
  for (int l = 0; l < hierarchy->num_levels(); ++l) {
    total += outcome.artifact.basis.added(l);
    std::printf("%5d  %6d  %5d  %5d  %14.2f  %7.2f\n", l,
                outcome.single_ranks[l], outcome.artifact.basis.added(l),
                total, cm.storage_factor_by_level[l],
                outcome.level_seconds[l]);
  }
  if (outcome.artifact.basis.rank(hierarchy->finest()) == 0)
    std::cerr << "warning: empty subspace (threshold above the spectrum); "
                 "runs will degenerate to pCN\n";
  std::cout << "recursive build: " << build_total
            << " s, single-level build: " << single_total
            << " s, factor recycling "
            << (cfg.recycle_factors ? "on" : "off") << "\n";

  nlohmann::json j;
  j["added"] = cmi.added_ranks;
  j["single"] = cmi.single_ranks;
  j["storage_factors"] = cm.storage_factor_by_level;
  j["level_seconds"] = outcome.level_seconds;
  j["single_seconds"] = outcome.single_seconds;
  j["total_seconds"] = build_total;
  j["single_total_seconds"] = single_total;
  j["recycle_factors"] = cfg.recycle_factors;
  std::ofstream os(cfg.output_dir + "/lis_summary.json");
  os << j.dump(2) << "\n";
  return 0;
}

int cmd_run(const RunConfig& cfg) {
  const auto data_path = cfg.resolved_data_file();
  if (!fs::exists(data_path))
    throw ConfigError("no data file at " + data_path + "; run generate-data first");
  const RunMode mode = parse_run_mode(cfg.mode);

  auto hierarchy = std::make_shared<const LevelHierarchy>(
      hierarchy_from_config(cfg));
  auto kl = obtain_kl(cfg, hierarchy);
  auto data = load_observation(data_path);
  auto obs = std::make_shared<const ObservationSetup>(std::move(data.setup));
  EllipticOptions eopt;
  eopt.recycle_factors = cfg.recycle_factors;
  EllipticModel model(hierarchy, kl, obs, eopt);

  LisArtifact lis{0, {}, HierarchicalLisBasis(hierarchy), {}};
  const bool needs_lis = mode != RunMode::Pcn && mode != RunMode::MlPcn;
  if (needs_lis) {
    if (!fs::exists(cfg.resolved_lis_file()))
      throw ConfigError("mode " + cfg.mode + " needs " +
                        cfg.resolved_lis_file() + "; run build-lis first");
    lis = load_lis(cfg.resolved_lis_file(), hierarchy);
  }

  MultilevelOptions opt;
  opt.mode = mode;
  opt.epsilon = cfg.epsilon;
  opt.fixed_steps = cfg.fixed_steps;
  opt.pilot_steps = cfg.pilot_steps;
  opt.floor_steps = cfg.floor_steps;
  opt.burnin_fraction = cfg.burnin_fraction;
  opt.thin = cfg.thin;
  opt.pool_stride = cfg.pool_stride;
  opt.pcn_a = cfg.pcn_a;
  opt.dt = cfg.dt;
  opt.dt_perp = cfg.dt_perp;
  opt.adapt = cfg.adapt;
  opt.adapt_interval = cfg.adapt_interval;
  opt.seed = cfg.seed;
  opt.tracked = cfg.tracked;
  opt.max_level = cfg.max_level;

  std::cerr << "running " << cfg.mode << "...\n";
  const auto result = run_multilevel(model, needs_lis ? &lis : nullptr, opt);

  std::ostringstream dir;
  dir << cfg.output_dir << "/run_" << cfg.mode << "_seed" << cfg.seed;
  if (cfg.epsilon > 0) dir << "_eps" << cfg.epsilon;
  fs::create_directories(dir.str());

  double lis_seconds = 0.0;
  const std::string lis_summary = cfg.output_dir + "/lis_summary.json";
  if (needs_lis && fs::exists(lis_summary)) {
    std::ifstream is(lis_summary);
    nlohmann::json j;
    is >> j;
    lis_seconds = j.value("total_seconds", 0.0);
  }

  {
    std::ofstream os(dir.str() + "/config_echo.json");
    os << config_to_json(cfg) << "\n";
  }
  write_report_json(dir.str() + "/report.json", result.report, cfg,
                    file_hash_hex(data_path), lis_seconds);
  write_iact_table(dir.str() + "/iact_table.csv", result.report);
  write_level_csv(dir.str() + "/levels.csv", result.report, *hierarchy);
  for (const auto& rec : result.base_records) {
    write_trace_csv(dir.str() + "/trace_level" + std::to_string(rec.level) + ".csv", rec);
    write_autocorr_csv(dir.str() + "/autocorr_level" + std::to_string(rec.level) + ".csv",
                       rec.qois, "QoI level " + std::to_string(rec.level));
  }
  for (const auto& rec : result.coupled_records) {
    write_trace_csv(dir.str() + "/trace_level" + std::to_string(rec.level) + ".csv", rec);
    write_autocorr_csv(dir.str() + "/autocorr_level" + std::to_string(rec.level) + ".csv",
                       rec.d, "D level " + std::to_string(rec.level));
  }

  std::cout << "mode " << cfg.mode << ": estimate " << result.report.estimate
            << " (sd " << std::sqrt(result.report.variance_bound)
            << "), total " << result.report.total_seconds << " s\n";
  std::cout << "level  Y_l          var_D        tau_D    tau_params  accept\n";
  for (const auto& st : result.report.levels)
    std::printf("%5d  %11.4e  %11.4e  %7.2f  %10.2f  %5.1f%%\n", st.level,
                st.estimate, st.var_d, st.tau, st.tau_params,
                100 * st.acceptance_rate);
  std::cout << "report written to " << dir.str() << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& files,
               const std::string& output) {
  std::ostringstream csv;
  csv << "method,epsilon,cpu_seconds,lis_build_seconds,total_with_lis\n";
  csv.precision(17);
  for (const auto& f : files) {
    std::ifstream is(f);
    if (!is) throw ConfigError("cannot open report: " + f);
    nlohmann::json j;
    is >> j;
    const double secs = j.at("total_seconds").get<double>();
    const double lis = j.value("lis_build_seconds", 0.0);
    csv << j.at("mode").get<std::string>() << ","
        << j.at("epsilon").get<double>() << "," << secs << "," << lis << ","
        << secs + lis << "\n";
  }
  if (output.empty() || output == "-") {
    std::cout << csv.str();
  } else {
    std::ofstream os(output);
    if (!os) throw ConfigError("cannot open for writing: " + output);
    os << csv.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matrix-free multilevel MCMC with hierarchical "
               "likelihood-informed subspaces"};
  app.require_subcommand(1);

  std::string config_path;
  std::string mode_override, eps_override, seed_override, workers_override;
  bool force = false;
  std::vector<std::string> report_files;
  std::string report_output = "-";

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file")
        ->required();
    sub->add_option("--mode", mode_override, "override the run mode");
    sub->add_option("--eps", eps_override, "override the error tolerance");
    sub->add_option("--seed", seed_override, "override the run seed");
    sub->add_option("--workers", workers_override, "override the worker count");
  };

  auto* gen = app.add_subcommand("generate-data", "synthesise observations");
  add_common(gen);
  gen->add_flag("--force", force, "overwrite an existing data file");
  auto* build = app.add_subcommand("build-lis", "construct the hierarchical subspace");
  add_common(build);
  auto* run = app.add_subcommand("run", "run a sampler and write reports");
  add_common(run);
  auto* report = app.add_subcommand("report", "aggregate run reports to CSV");
  report->add_option("files", report_files, "report.json files")->required();
  report->add_option("--output", report_output, "output CSV (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) return cmd_report(report_files, report_output);

    RunConfig cfg = load_config(config_path);
    if (!mode_override.empty()) cfg.mode = mode_override;
    if (!eps_override.empty()) cfg.epsilon = std::stod(eps_override);
    if (!seed_override.empty()) cfg.seed = std::stoull(seed_override);
    if (!workers_override.empty()) cfg.workers = std::stoi(workers_override);
    validate_config(cfg);

    if (gen->parsed()) return cmd_generate_data(cfg, force);
    if (build->parsed()) return cmd_build_lis(cfg);
    if (run->parsed()) return cmd_run(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
