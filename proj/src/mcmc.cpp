#include "mldili/mcmc.hpp"

#include <chrono>
#include <cmath>

#include "mldili/errors.hpp"

namespace mldili {

namespace {

// Rebuilds the proposal operators from accumulated subspace projections;
// returns false (and leaves everything untouched) while the accumulator is
// rank-deficient.
bool try_adapt(const HierarchicalLisBasis& basis, int level,
               const OnlineCovariance& acc, double dt, double dt_perp,
               DiliOperators& ops, ConditionalFactors* factors,
               int inherited_rank) {
  const int r = basis.rank(level);
  if (acc.count() < 2 * r + 4) return false;
  try {
    DiliOperators fresh =
        inherited_rank >= 0
            ? build_dili_operators_split(acc.covariance(), inherited_rank, dt,
                                         dt_perp, level)
            : build_dili_operators(acc.covariance(), dt, dt_perp, level);
    if (factors != nullptr)
      *factors = precompute_conditional(basis, level, fresh);
    ops = std::move(fresh);
    return true;
  } catch (const ConfigError&) {
    return false;
  } catch (const NumericalError&) {
    return false;
  }
}

}  // namespace

ChainRecord run_base_chain(ForwardModel& model, int level,
                           const HierarchicalLisBasis* basis,
                           const DiliOperators* ops,
                           const Eigen::VectorXd& init,
                           const BaseChainOptions& opt) {
  const int dim = model.hierarchy().param_dim(level);
  if (init.size() != dim)
    throw DimensionError("base chain: initial state length does not match level");
  if (opt.kind == ProposalKind::Dili && (basis == nullptr || ops == nullptr))
    throw ConfigError("base chain: the dili kind needs a basis and operators");
  if (opt.steps < 1) throw ConfigError("base chain: need at least one step");

  DiliOperators local_ops;
  if (opt.kind == ProposalKind::Dili) local_ops = *ops;
  std::optional<OnlineCovariance> adapt_acc;
  if (opt.kind == ProposalKind::Dili && opt.adapt.enabled &&
      basis->rank(level) > 0)
    adapt_acc.emplace(basis->rank(level));
  int accepts_since_adapt = 0;

  ChainRecord rec;
  rec.level = level;
  rec.thin = opt.thin;
  rec.steps = opt.steps;
  rec.misfits.resize(opt.steps);
  rec.qois.resize(opt.steps);
  const int tracked = std::min<int>(opt.tracked, dim);
  std::vector<int> tracked_idx(tracked);
  for (int c = 0; c < tracked; ++c)
    tracked_idx[c] = static_cast<int>((static_cast<long>(c) * dim) / tracked);
  rec.tracked_coords.resize(opt.steps, tracked);
  rec.accepted_steps.assign(opt.steps, 0);

  Rng rng(opt.seed);
  Eigen::VectorXd v = init;
  Evaluation cur = model.evaluate(level, v);

  const auto t0 = std::chrono::steady_clock::now();
  for (long j = 0; j < opt.steps; ++j) {
    Eigen::VectorXd cand = opt.kind == ProposalKind::Pcn
                               ? pcn_propose(v, opt.pcn_a, rng)
                               : dili_propose(*basis, local_ops, v, rng);
    Evaluation prop;
    double alpha = 0.0;
    try {
      prop = model.evaluate(level, cand);
      alpha = accept_base(cur.misfit, prop.misfit);
    } catch (const NumericalError&) {
      ++rec.solver_failures;
    }
    if (rng.uniform() < alpha) {
      v = std::move(cand);
      cur = prop;
      ++rec.accepted;
      ++accepts_since_adapt;
      rec.accepted_steps[j] = 1;
    }

    if (adapt_acc && j < opt.adapt.freeze_after_step) {
      adapt_acc->add(basis->apply_transpose(level, v));
      if (accepts_since_adapt >= opt.adapt.interval_accepts) {
        if (try_adapt(*basis, level, *adapt_acc, opt.dt, opt.dt_perp,
                      local_ops, nullptr, -1))
          accepts_since_adapt = 0;
      }
    }

    rec.misfits[j] = cur.misfit;
    rec.qois[j] = cur.qoi;
    for (int c = 0; c < tracked; ++c)
      rec.tracked_coords(j, c) = v[tracked_idx[c]];
    if (opt.store_states && j % opt.thin == 0) rec.states.push_back(v);
  }
  rec.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rec;
}

std::size_t pool_draw(const CoarsePool& pool, Rng& rng) {
  if (pool.states.empty()) throw DimensionError("pool_draw: pool is empty");
  return static_cast<std::size_t>(rng.uniform_index(pool.states.size()));
}

CoupledChainRecord run_coupled_chain(ForwardModel& model, int level,
                                     const HierarchicalLisBasis* basis,
                                     const DiliOperators* ops,
                                     const ConditionalFactors* factors,
                                     const CoarsePool& pool,
                                     const Eigen::VectorXd& init,
                                     const CoupledChainOptions& opt) {
  const auto& h = model.hierarchy();
  if (level < 1) throw DimensionError("coupled chain: need level >= 1");
  const int dim = h.param_dim(level);
  const int coarse_dim = h.param_dim(level - 1);
  if (init.size() != dim)
    throw DimensionError("coupled chain: initial state length does not match level");
  if (pool.states.empty())
    throw DimensionError("coupled chain: coarse pool is empty");
  if (pool.level != level - 1)
    throw DimensionError("coupled chain: pool level does not match");
  if (opt.fine_kind == ProposalKind::Dili &&
      (basis == nullptr || ops == nullptr || factors == nullptr))
    throw ConfigError("coupled chain: the dili kind needs basis, operators and factors");

  DiliOperators local_ops;
  ConditionalFactors local_factors;
  if (opt.fine_kind == ProposalKind::Dili) {
    local_ops = *ops;
    local_factors = *factors;
  }
  std::optional<OnlineCovariance> adapt_acc;
  if (opt.fine_kind == ProposalKind::Dili && opt.adapt.enabled &&
      basis->rank(level) > 0)
    adapt_acc.emplace(basis->rank(level));
  int accepts_since_adapt = 0;

  CoupledChainRecord rec;
  rec.level = level;
  rec.thin = opt.thin;
  rec.steps = opt.steps;
  rec.eta_fine.resize(opt.steps);
  rec.eta_coarse.resize(opt.steps);
  rec.q_fine.resize(opt.steps);
  rec.q_coarse.resize(opt.steps);
  rec.d.resize(opt.steps);
  const int fine_dim = h.added_dim(level);
  const int tracked = std::min<int>(opt.tracked, fine_dim);
  std::vector<int> tracked_idx(tracked);
  for (int c = 0; c < tracked; ++c)
    tracked_idx[c] =
        coarse_dim + static_cast<int>((static_cast<long>(c) * fine_dim) / tracked);
  rec.tracked_coords.resize(opt.steps, tracked);
  rec.accepted_steps.assign(opt.steps, 0);

  Rng rng(opt.seed);
  Eigen::VectorXd v = init;
  Evaluation cur = model.evaluate(level, v);
  // Misfit of the fine state's own coarse component, kept current across
  // acceptances so the ratio never re-solves the coarse model.
  Evaluation cur_coarse = model.evaluate(level - 1, v.head(coarse_dim));

  const auto t0 = std::chrono::steady_clock::now();
  for (long j = 0; j < opt.steps; ++j) {
    const std::size_t idx = pool_draw(pool, rng);
    const Eigen::VectorXd& coarse_cand = pool.states[idx];
    const double eta_coarse_cand = pool.misfits[idx];
    const double q_coarse_cand = pool.qois[idx];

    Eigen::VectorXd cand =
        opt.fine_kind == ProposalKind::Pcn
            ? coupled_pcn_propose(v, coarse_cand, opt.pcn_a, rng)
            : coupled_dili_propose(*basis, local_ops, local_factors, v,
                                   coarse_cand, rng);
    Evaluation prop;
    double alpha = 0.0;
    try {
      prop = model.evaluate(level, cand);
      alpha = accept_coupled(cur.misfit, cur_coarse.misfit, prop.misfit,
                             eta_coarse_cand);
    } catch (const NumericalError&) {
      ++rec.solver_failures;
    }
    if (rng.uniform() < alpha) {
      v = std::move(cand);
      cur = prop;
      cur_coarse = {eta_coarse_cand, q_coarse_cand};
      ++rec.accepted;
      ++accepts_since_adapt;
      rec.accepted_steps[j] = 1;
    }

    if (adapt_acc && j < opt.adapt.freeze_after_step) {
      adapt_acc->add(basis->apply_transpose(level, v));
      if (accepts_since_adapt >= opt.adapt.interval_accepts) {
        if (try_adapt(*basis, level, *adapt_acc, opt.dt, opt.dt_perp,
                      local_ops, &local_factors, basis->rank(level - 1)))
          accepts_since_adapt = 0;
      }
    }

    // Recorded pair: the fine state and the always-accepted pooled draw.
    rec.eta_fine[j] = cur.misfit;
    rec.q_fine[j] = cur.qoi;
    rec.eta_coarse[j] = eta_coarse_cand;
    rec.q_coarse[j] = q_coarse_cand;
    rec.d[j] = cur.qoi - q_coarse_cand;
    for (int c = 0; c < tracked; ++c)
      rec.tracked_coords(j, c) = v[tracked_idx[c]];
    if (j % opt.thin == 0) {
      if (opt.store_states) rec.fine_states.push_back(v);
      if (opt.store_coarse_states) rec.coarse_states.push_back(coarse_cand);
    }
  }
  rec.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return rec;
}

namespace {

template <typename Rec>
CoarsePool pool_common(const Rec& rec, const std::vector<Eigen::VectorXd>& states,
                       const Eigen::VectorXd& misfits,
                       const Eigen::VectorXd& qois, int level,
                       double burnin_fraction, int stride) {
  if (burnin_fraction < 0.0 || burnin_fraction >= 1.0)
    throw ConfigError("pool: burn-in fraction must lie in [0, 1)");
  if (stride < 1) throw ConfigError("pool: stride must be positive");
  if (states.empty())
    throw ConfigError("pool: chain was run without state storage");

  CoarsePool pool;
  pool.level = level;
  const auto n = static_cast<long>(states.size());
  const long start = static_cast<long>(std::floor(burnin_fraction * n));
  for (long i = start; i < n; i += stride) {
    pool.states.push_back(states[i]);
    const long step = i * rec.thin;
    pool.misfits.push_back(misfits[step]);
    pool.qois.push_back(qois[step]);
  }
  if (pool.states.empty())
    throw ConfigError("pool: burn-in removed every stored state");
  return pool;
}

}  // namespace

CoarsePool pool_from_chain(const ChainRecord& rec, double burnin_fraction,
                           int stride) {
  return pool_common(rec, rec.states, rec.misfits, rec.qois, rec.level,
                     burnin_fraction, stride);
}

CoarsePool pool_from_coupled(const CoupledChainRecord& rec,
                             double burnin_fraction, int stride) {
  return pool_common(rec, rec.fine_states, rec.eta_fine, rec.q_fine, rec.level,
                     burnin_fraction, stride);
}

}  // namespace mldili
