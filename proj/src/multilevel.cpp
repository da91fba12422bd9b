#include "mldili/multilevel.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mldili/diagnostics.hpp"
#include "mldili/errors.hpp"

namespace mldili {

const char* run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::Pcn: return "pCN";
    case RunMode::Dili: return "DILI";
    case RunMode::MlPcn: return "MLpCN";
    case RunMode::MlDili: return "MLDILI";
    case RunMode::MlMixed: return "MLmixed";
  }
  return "unknown";
}

RunMode parse_run_mode(const std::string& name) {
  if (name == "pCN" || name == "pcn") return RunMode::Pcn;
  if (name == "DILI" || name == "dili") return RunMode::Dili;
  if (name == "MLpCN" || name == "mlpcn") return RunMode::MlPcn;
  if (name == "MLDILI" || name == "mldili") return RunMode::MlDili;
  if (name == "MLmixed" || name == "mlmixed") return RunMode::MlMixed;
  throw ConfigError("unknown run mode: " + name);
}

double telescope(const std::vector<LevelStats>& stats) {
  if (stats.empty()) throw DimensionError("telescope: no level estimates");
  double sum = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (i > 0 && stats[i].level != stats[i - 1].level + 1)
      throw DimensionError("telescope: level estimates are not contiguous");
    sum += stats[i].estimate;
  }
  return sum;
}

std::vector<long> allocate_samples(const std::vector<double>& tau,
                                   const std::vector<double>& var_d,
                                   const std::vector<double>& cost, double eps,
                                   double r_cross, long floor_steps) {
  if (eps <= 0.0) throw ConfigError("allocate_samples: tolerance must be positive");
  if (!(r_cross >= 0.0 && r_cross < 1.0))
    throw ConfigError("allocate_samples: cross-level ratio must lie in [0, 1)");
  const std::size_t levels = tau.size();
  if (var_d.size() != levels || cost.size() != levels || levels == 0)
    throw DimensionError("allocate_samples: per-level arrays must align");

  double total = 0.0;
  for (std::size_t l = 0; l < levels; ++l) {
    if (tau[l] < 1.0 || var_d[l] < 0.0 || cost[l] <= 0.0)
      throw ConfigError("allocate_samples: invalid per-level statistics");
    total += std::sqrt(tau[l] * var_d[l] * cost[l]);
  }
  const double lambda =
      2.0 * (1.0 + r_cross) / (1.0 - r_cross) * total / (eps * eps);

  std::vector<long> out(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    const double n = lambda * std::sqrt(tau[l] * var_d[l] / cost[l]);
    out[l] = std::max<long>(floor_steps, static_cast<long>(std::ceil(n)));
  }
  return out;
}

namespace {

double loglog_slope(const std::vector<double>& y, const std::vector<double>& x) {
  const int n = static_cast<int>(y.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(std::max(y[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

RateEstimates estimate_rates(const std::vector<double>& bias_proxy,
                             const std::vector<double>& var_d,
                             const std::vector<double>& cost,
                             const std::vector<double>& fem_dofs) {
  RateEstimates out;
  const std::size_t levels = fem_dofs.size();
  if (levels < 3 || bias_proxy.size() + 1 != levels ||
      var_d.size() + 1 != levels || cost.size() != levels)
    return out;  // rates unavailable below three levels

  std::vector<double> dofs_fine(fem_dofs.begin() + 1, fem_dofs.end());
  out.theta_b = -loglog_slope(bias_proxy, dofs_fine);
  out.theta_v = -loglog_slope(var_d, dofs_fine);
  out.theta_c = loglog_slope(cost, fem_dofs);
  out.available = true;

  const double gap = out.theta_v - out.theta_c;
  if (gap > 1e-12) {
    out.regime = 1;
    out.predicted_exponent = 2.0;
  } else if (gap >= -1e-12) {
    out.regime = 0;
    out.predicted_exponent = 2.0;  // up to log factors
  } else {
    out.regime = -1;
    out.predicted_exponent =
        out.theta_b > 0 ? 2.0 + (out.theta_c - out.theta_v) / out.theta_b
                        : std::numeric_limits<double>::infinity();
  }
  return out;
}

DiliOperators operators_from_reference(const HierarchicalLisBasis& basis,
                                       int level, const LaplaceReference& ref,
                                       double dt, double dt_perp, int draws,
                                       std::uint64_t seed, int inherited_rank) {
  const int r = basis.rank(level);
  if (r == 0) return build_dili_operators(Eigen::MatrixXd(0, 0), dt, dt_perp, level);
  if (draws <= 0) draws = std::max(256, 4 * r);
  Rng rng(seed, 0x51u + static_cast<std::uint64_t>(level));
  OnlineCovariance acc(r);
  for (int k = 0; k < draws; ++k)
    acc.add(basis.apply_transpose(level, laplace_sample(ref, rng)));
  if (inherited_rank >= 0)
    return build_dili_operators_split(acc.covariance(), inherited_rank, dt,
                                      dt_perp, level);
  return build_dili_operators(acc.covariance(), dt, dt_perp, level);
}

namespace {

struct LevelPlan {
  ProposalKind kind;
  DiliOperators ops;
  ConditionalFactors factors;  // levels >= 1 with the Dili kind
};

LevelStats stats_from_base(const ChainRecord& rec, double burnin_fraction) {
  LevelStats st;
  st.level = rec.level;
  st.steps = rec.steps;
  const long burn = static_cast<long>(std::floor(burnin_fraction * rec.steps));
  const long n = rec.steps - burn;
  st.post_burnin = n;
  const Eigen::VectorXd q = rec.qois.tail(n);
  st.estimate = q.mean();
  st.var_d = (q.array() - st.estimate).square().sum() / std::max<long>(1, n - 1);
  st.tau = n >= 100 ? iact(q).tau : 1.0;
  st.cost_per_step = rec.seconds / std::max<long>(1, rec.steps);
  st.ess = effective_sample_size(st.tau, n);
  st.acceptance_rate = static_cast<double>(rec.accepted) / rec.steps;
  st.solver_failures = rec.solver_failures;
  if (rec.tracked_coords.cols() > 0 && n >= 100) {
    double acc_tau = 0.0;
    for (Eigen::Index c = 0; c < rec.tracked_coords.cols(); ++c)
      acc_tau += iact(rec.tracked_coords.col(c).tail(n)).tau;
    st.tau_params = acc_tau / static_cast<double>(rec.tracked_coords.cols());
  }
  return st;
}

LevelStats stats_from_coupled(const CoupledChainRecord& rec,
                              double burnin_fraction) {
  LevelStats st;
  st.level = rec.level;
  st.steps = rec.steps;
  const long burn = static_cast<long>(std::floor(burnin_fraction * rec.steps));
  const long n = rec.steps - burn;
  st.post_burnin = n;
  const Eigen::VectorXd d = rec.d.tail(n);
  st.estimate = d.mean();
  st.var_d = variance_of_d(rec.q_fine.tail(n), rec.q_coarse.tail(n)).var_d;
  st.tau = n >= 100 ? iact(d).tau : 1.0;
  st.cost_per_step = rec.seconds / std::max<long>(1, rec.steps);
  st.ess = effective_sample_size(st.tau, n);
  st.acceptance_rate = static_cast<double>(rec.accepted) / rec.steps;
  st.solver_failures = rec.solver_failures;
  if (rec.tracked_coords.cols() > 0 && n >= 100) {
    double acc_tau = 0.0;
    for (Eigen::Index c = 0; c < rec.tracked_coords.cols(); ++c)
      acc_tau += iact(rec.tracked_coords.col(c).tail(n)).tau;
    st.tau_params = acc_tau / static_cast<double>(rec.tracked_coords.cols());
  }
  return st;
}

}  // namespace

MultilevelResult run_multilevel(ForwardModel& model, const LisArtifact* lis,
                                const MultilevelOptions& opt) {
  const auto& h = model.hierarchy();
  const int top =
      opt.max_level < 0 ? h.finest() : std::min(opt.max_level, h.finest());
  const bool single =
      opt.mode == RunMode::Pcn || opt.mode == RunMode::Dili;
  const int num_chains = single ? 1 : top + 1;

  // Proposal plan per chain level.
  std::vector<LevelPlan> plan(num_chains);
  auto needs_dili = [&](int chain_level) {
    if (opt.mode == RunMode::Pcn || opt.mode == RunMode::MlPcn) return false;
    if (opt.mode == RunMode::MlMixed) return chain_level == 0;
    return true;  // Dili, MlDili
  };
  for (int i = 0; i < num_chains; ++i) {
    const int level = single ? top : i;
    if (!needs_dili(i)) {
      plan[i].kind = ProposalKind::Pcn;
      continue;
    }
    if (lis == nullptr)
      throw ConfigError("run: this mode needs a subspace artifact");
    if (lis->basis.num_levels() <= level)
      throw ConfigError("run: subspace artifact does not cover level " +
                        std::to_string(level));
    plan[i].kind = ProposalKind::Dili;
    const int inherited =
        (!single && i >= 1) ? lis->basis.rank(level - 1) : -1;
    plan[i].ops = operators_from_reference(
        lis->basis, level, lis->references.at(level), opt.dt, opt.dt_perp,
        opt.sigma_init_draws, opt.seed ^ 0xc0ffee, inherited);
    if (!single && i >= 1)
      plan[i].factors = precompute_conditional(lis->basis, level, plan[i].ops);
  }

  auto initial_state = [&](int level) -> Eigen::VectorXd {
    if (lis != nullptr && lis->references.size() > static_cast<std::size_t>(level) &&
        lis->references[level].map_point.size() == h.param_dim(level))
      return lis->references[level].map_point;
    return Eigen::VectorXd::Zero(h.param_dim(level));
  };

  // One bottom-up ladder pass with the given step counts.
  auto run_ladder = [&](const std::vector<long>& steps, std::uint64_t seed,
                        MultilevelResult& out) {
    out.base_records.clear();
    out.coupled_records.clear();
    if (single) {
      BaseChainOptions bopt;
      bopt.steps = steps.at(0);
      bopt.seed = seed;
      bopt.thin = opt.thin;
      bopt.store_states = opt.keep_states;
      bopt.kind = plan[0].kind;
      bopt.pcn_a = opt.pcn_a;
      bopt.dt = opt.dt;
      bopt.dt_perp = opt.dt_perp;
      bopt.tracked = opt.tracked;
      bopt.adapt.enabled = opt.adapt && plan[0].kind == ProposalKind::Dili;
      bopt.adapt.interval_accepts = opt.adapt_interval;
      bopt.adapt.freeze_after_step =
          static_cast<long>(opt.burnin_fraction * bopt.steps);
      out.base_records.push_back(run_base_chain(
          model, top, plan[0].kind == ProposalKind::Dili ? &lis->basis : nullptr,
          plan[0].kind == ProposalKind::Dili ? &plan[0].ops : nullptr,
          initial_state(top), bopt));
      return;
    }

    BaseChainOptions bopt;
    bopt.steps = steps.at(0);
    bopt.seed = seed;
    bopt.thin = opt.thin;
    bopt.store_states = true;  // needed for the level-1 pool
    bopt.kind = plan[0].kind;
    bopt.pcn_a = opt.pcn_a;
    bopt.dt = opt.dt;
    bopt.dt_perp = opt.dt_perp;
    bopt.tracked = opt.tracked;
    bopt.adapt.enabled = opt.adapt && plan[0].kind == ProposalKind::Dili;
    bopt.adapt.interval_accepts = opt.adapt_interval;
    bopt.adapt.freeze_after_step =
        static_cast<long>(opt.burnin_fraction * bopt.steps);
    out.base_records.push_back(run_base_chain(
        model, 0, plan[0].kind == ProposalKind::Dili ? &lis->basis : nullptr,
        plan[0].kind == ProposalKind::Dili ? &plan[0].ops : nullptr,
        initial_state(0), bopt));

    CoarsePool pool =
        pool_from_chain(out.base_records[0], opt.burnin_fraction,
                        opt.pool_stride);
    if (!opt.keep_states) out.base_records[0].states.clear();

    for (int level = 1; level <= top; ++level) {
      CoupledChainOptions copt;
      copt.steps = steps.at(level);
      copt.seed = seed + 1000003ull * static_cast<std::uint64_t>(level);
      copt.thin = opt.thin;
      copt.store_states = true;  // next pool
      copt.fine_kind = plan[level].kind;
      copt.pcn_a = opt.pcn_a;
      copt.dt = opt.dt;
      copt.dt_perp = opt.dt_perp;
      copt.tracked = opt.tracked;
      copt.adapt.enabled = opt.adapt && plan[level].kind == ProposalKind::Dili;
      copt.adapt.interval_accepts = opt.adapt_interval;
      copt.adapt.freeze_after_step =
          static_cast<long>(opt.burnin_fraction * copt.steps);

      Rng init_rng(copt.seed, 0x1417);
      Eigen::VectorXd fine(h.added_dim(level));
      init_rng.fill_normal(fine);
      const Eigen::VectorXd init =
          embed(h, level, pool.states[pool_draw(pool, init_rng)], fine).coeffs;

      out.coupled_records.push_back(run_coupled_chain(
          model, level,
          plan[level].kind == ProposalKind::Dili ? &lis->basis : nullptr,
          plan[level].kind == ProposalKind::Dili ? &plan[level].ops : nullptr,
          plan[level].kind == ProposalKind::Dili ? &plan[level].factors : nullptr,
          pool, init, copt));

      if (level < top) {
        pool = pool_from_coupled(out.coupled_records.back(),
                                 opt.burnin_fraction, opt.pool_stride);
      }
      if (!opt.keep_states) out.coupled_records.back().fine_states.clear();
    }
  };

  // Step counts: fixed, or pilot-estimated for a tolerance.
  std::vector<long> steps;
  if (opt.epsilon > 0.0) {
    std::vector<long> pilot(num_chains, std::max<long>(opt.pilot_steps, 200));
    MultilevelResult pilot_result;
    run_ladder(pilot, opt.seed ^ 0x9e3779b9ull, pilot_result);
    std::vector<double> tau, var_d, cost;
    for (int i = 0; i < num_chains; ++i) {
      const LevelStats st =
          single || i == 0
              ? stats_from_base(pilot_result.base_records[0], opt.burnin_fraction)
              : stats_from_coupled(pilot_result.coupled_records[i - 1],
                                   opt.burnin_fraction);
      tau.push_back(st.tau * opt.pilot_safety);
      var_d.push_back(std::max(st.var_d, 1e-300));
      cost.push_back(std::max(st.cost_per_step, 1e-9));
    }
    const auto post = allocate_samples(tau, var_d, cost, opt.epsilon,
                                       opt.cross_level_guess, opt.floor_steps);
    steps.resize(num_chains);
    for (int i = 0; i < num_chains; ++i)
      steps[i] = static_cast<long>(
          std::ceil(post[i] / (1.0 - opt.burnin_fraction)));
  } else {
    if (static_cast<int>(opt.fixed_steps.size()) != num_chains)
      throw ConfigError("run: fixed step counts must cover every level");
    steps = opt.fixed_steps;
  }

  MultilevelResult result;
  run_ladder(steps, opt.seed, result);

  MultilevelReport& rep = result.report;
  rep.mode = opt.mode;
  rep.epsilon = opt.epsilon;
  rep.seed = opt.seed;
  std::vector<Eigen::VectorXd> d_traces;
  for (int i = 0; i < num_chains; ++i) {
    LevelStats st;
    if (single || i == 0) {
      st = stats_from_base(result.base_records[0], opt.burnin_fraction);
      d_traces.push_back(result.base_records[0].qois.tail(st.post_burnin));
    } else {
      st = stats_from_coupled(result.coupled_records[i - 1], opt.burnin_fraction);
      d_traces.push_back(result.coupled_records[i - 1].d.tail(st.post_burnin));
    }
    rep.levels.push_back(st);
    rep.total_seconds += st.cost_per_step * st.steps;
  }

  rep.estimate = telescope(rep.levels);
  rep.variance = 0.0;
  for (const auto& st : rep.levels)
    rep.variance += st.tau * st.var_d / std::max<long>(1, st.post_burnin);

  if (num_chains >= 2) {
    const auto cross = cross_level_ratio(d_traces, 20);
    rep.cross_level = cross.ratio;
    rep.cross_level_max = cross.max_offdiag;
    rep.premise_ok = cross.max_offdiag < 1.0;
  } else {
    rep.cross_level = Eigen::MatrixXd::Ones(1, 1);
    rep.cross_level_max = 0.0;
  }
  rep.variance_bound = rep.variance * (1.0 + rep.cross_level_max) /
                       std::max(1e-12, 1.0 - rep.cross_level_max);

  // Rate fits and a Richardson-style bias estimate.
  {
    std::vector<double> bias_proxy, var_d, cost, dofs;
    for (const auto& st : rep.levels) {
      cost.push_back(std::max(st.cost_per_step, 1e-12));
      dofs.push_back(h.fem_dof(st.level));
    }
    if (!single) {
      for (std::size_t i = 1; i < rep.levels.size(); ++i) {
        bias_proxy.push_back(std::abs(rep.levels[i].estimate) + 1e-300);
        var_d.push_back(std::max(rep.levels[i].var_d, 1e-300));
      }
      rep.rates = estimate_rates(bias_proxy, var_d, cost, dofs);
    }
    if (rep.rates.available && rep.rates.theta_b > 0 && rep.levels.size() >= 2) {
      const double ratio = h.fem_dof(top) / static_cast<double>(h.fem_dof(top - 1));
      rep.bias_estimate = std::abs(rep.levels.back().estimate) /
                          (std::pow(ratio, rep.rates.theta_b) - 1.0);
    } else if (!single && rep.levels.size() >= 2) {
      rep.bias_estimate = std::abs(rep.levels.back().estimate);
    }
  }
  return result;
}

}  // namespace mldili
