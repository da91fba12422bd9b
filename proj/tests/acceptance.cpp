// Acceptance suite: one criterion per invocation, one PASS/FAIL line each.
// Criteria 1-6, 8, 9 are self-contained randomized/analytic checks; criterion
// 7 is the desk-scale built-in experiment (levels 0-2) and caches its data,
// KL basis and subspace artefacts under ./acceptance7_cache.

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "mldili/config.hpp"
#include "mldili/diagnostics.hpp"
#include "mldili/elliptic.hpp"
#include "mldili/laplace.hpp"
#include "mldili/lis.hpp"
#include "mldili/mcmc.hpp"
#include "mldili/multilevel.hpp"
#include "mldili/prior_kl.hpp"
#include "mldili/proposal.hpp"
#include "mldili/rng.hpp"
#include "toy_model.hpp"

using namespace mldili;
namespace fs = std::filesystem;

namespace {

Eigen::MatrixXd random_spd(int n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Eigen::MatrixXd b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = rng.normal();
  return scale * (b.transpose() * b) / n +
         0.02 * Eigen::MatrixXd::Identity(n, n);
}

struct BasisFixture {
  std::shared_ptr<const LevelHierarchy> hierarchy;
  std::unique_ptr<HierarchicalLisBasis> basis;
};

BasisFixture make_basis(int r0_dim, int r1_dim, int s0, int s1,
                        std::uint64_t seed) {
  BasisFixture fx;
  fx.hierarchy = std::make_shared<const LevelHierarchy>(LevelHierarchy(
      {0.5, 0.25}, {r0_dim * r0_dim, r1_dim * r1_dim}, {r0_dim, r1_dim}));
  fx.basis = std::make_unique<HierarchicalLisBasis>(fx.hierarchy);
  Rng rng(seed);
  auto fill = [&](int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
  };
  LisLevelBlock base;
  base.z_fine = Eigen::HouseholderQR<Eigen::MatrixXd>(fill(r0_dim, s0))
                    .householderQ() *
                Eigen::MatrixXd::Identity(r0_dim, s0);
  base.eigenvalues = Eigen::VectorXd::LinSpaced(s0, 3.0, 1.0);
  fx.basis->append_level(std::move(base));

  Eigen::MatrixXd lift = Eigen::MatrixXd::Zero(r1_dim, s0);
  lift.topRows(r0_dim) = fx.basis->block(0).z_fine;
  Eigen::MatrixXd cand = fill(r1_dim, s1);
  cand -= lift * (lift.transpose() * cand);
  const Eigen::MatrixXd cols =
      Eigen::HouseholderQR<Eigen::MatrixXd>(cand).householderQ() *
      Eigen::MatrixXd::Identity(r1_dim, s1);
  LisLevelBlock blk;
  blk.z_coarse = cols.topRows(r0_dim);
  blk.z_fine = cols.bottomRows(r1_dim - r0_dim);
  blk.eigenvalues = Eigen::VectorXd::LinSpaced(s1, 0.9, 0.4);
  fx.basis->append_level(std::move(blk));
  return fx;
}

Eigen::MatrixXd dense_precision(const HierarchicalLisBasis& basis, int level,
                                const DiliOperators& ops) {
  const Eigen::MatrixXd psi = basis.densify(level);
  const int n = static_cast<int>(psi.rows());
  return psi * ops.xi * psi.transpose() +
         (Eigen::MatrixXd::Identity(n, n) - psi * psi.transpose()) /
             (ops.b_perp * ops.b_perp);
}

// --- criterion 1 -----------------------------------------------------------

bool criterion_1(std::string& detail) {
  double worst_mean = 0.0, worst_cov = 0.0;
  for (int inst = 0; inst < 3; ++inst) {
    const int r0 = 8 + 6 * inst;
    const int r1 = 24 + 20 * inst;  // up to 64
    const int s0 = 4 + inst, s1 = 3 + inst;
    auto fx = make_basis(r0, r1, s0, s1, 100 + inst);
    const auto ops =
        build_dili_operators(random_spd(s0 + s1, 200 + inst), 0.9, 0.3, 1);
    const auto f = precompute_conditional(*fx.basis, 1, ops);

    const Eigen::MatrixXd p = dense_precision(*fx.basis, 1, ops);
    const int rf = r1 - r0;
    const Eigen::MatrixXd p_ff = p.bottomRightCorner(rf, rf);
    const Eigen::MatrixXd p_fc = p.bottomLeftCorner(rf, r0);
    const Eigen::MatrixXd p_ff_inv =
        p_ff.llt().solve(Eigen::MatrixXd::Identity(rf, rf));
    const Eigen::MatrixXd oracle = -p_ff_inv * p_fc;

    Eigen::MatrixXd mean_map(rf, r0);
    for (int c = 0; c < r0; ++c)
      mean_map.col(c) =
          conditional_mean(*fx.basis, f, Eigen::VectorXd::Unit(r0, c));
    worst_mean = std::max(worst_mean,
                          (mean_map - oracle).cwiseAbs().maxCoeff());

    if (inst == 1) {
      // Sampled conditional covariance over 1e5 draws.
      Rng rng(42);
      Eigen::VectorXd v(r1), coarse(r0);
      rng.fill_normal(v);
      rng.fill_normal(coarse);
      const Eigen::VectorXd av = dili_mean_apply(*fx.basis, ops, v);
      const Eigen::VectorXd mean_expect =
          av.tail(rf) + conditional_mean(*fx.basis, f, coarse - av.head(r0));
      const long n = 100000;
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(rf, rf);
      for (long k = 0; k < n; ++k) {
        const Eigen::VectorXd prop =
            coupled_dili_propose(*fx.basis, ops, f, v, coarse, rng);
        const Eigen::VectorXd d = prop.tail(rf) - mean_expect;
        acc.noalias() += d * d.transpose();
      }
      acc /= n;
      for (int i = 0; i < rf; ++i)
        for (int j = 0; j < rf; ++j) {
          const double se =
              std::sqrt((p_ff_inv(i, i) * p_ff_inv(j, j) +
                         p_ff_inv(i, j) * p_ff_inv(i, j)) /
                        n);
          worst_cov = std::max(
              worst_cov, std::abs(acc(i, j) - p_ff_inv(i, j)) / (5 * se + 1e-12));
        }
    }
  }
  std::ostringstream os;
  os << "max mean gap " << worst_mean << " (tol 1e-8), cov gap "
     << worst_cov << " of 5 SE";
  detail = os.str();
  return worst_mean <= 1e-8 && worst_cov <= 1.0;
}

// --- criterion 2 -----------------------------------------------------------

double gaussian_logpdf_prec(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                            const Eigen::MatrixXd& prec) {
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  const double logdet =
      2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  const Eigen::VectorXd d = x - mu;
  return 0.5 * logdet - 0.5 * d.dot(prec * d) -
         0.5 * x.size() * std::log(2.0 * M_PI);
}

bool criterion_2(std::string& detail) {
  double worst = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    const int r0 = 3 + inst % 3;
    const int r1 = 6 + inst % 7;  // total dimension 6..12
    if (r1 <= r0 + 1) continue;
    const int s0 = 2, s1 = 2;
    auto fx = make_basis(r0, r1, s0, s1, 300 + inst);
    const auto ops = build_dili_operators_split(random_spd(s0 + s1, 400 + inst),
                                                s0, 1.1, 0.4, 1);
    const auto f = precompute_conditional(*fx.basis, 1, ops);

    testing::LinearGaussianModel model({r0, r1}, 5, 0.7, 500 + inst, 0.2);
    const Eigen::MatrixXd p = dense_precision(*fx.basis, 1, ops);
    const int rf = r1 - r0;
    const Eigen::MatrixXd p_ff = p.bottomRightCorner(rf, rf);

    Rng rng(600 + inst);
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::VectorXd v_cur(r1), coarse_cand(r0);
      rng.fill_normal(v_cur);
      rng.fill_normal(coarse_cand);
      const Eigen::VectorXd v_prop =
          coupled_dili_propose(*fx.basis, ops, f, v_cur, coarse_cand, rng);

      // Conditional proposal density q(x_f | state z, coarse candidate w_c).
      auto log_q = [&](const Eigen::VectorXd& x_f, const Eigen::VectorXd& z,
                       const Eigen::VectorXd& w_c) {
        const Eigen::VectorXd az = dili_mean_apply(*fx.basis, ops, z);
        const Eigen::VectorXd mu =
            az.tail(rf) + conditional_mean(*fx.basis, f, w_c - az.head(r0));
        return gaussian_logpdf_prec(x_f, mu, p_ff);
      };

      const double eta_f_cur = model.misfit(1, v_cur);
      const double eta_f_prop = model.misfit(1, v_prop);
      const double eta_c_cur = model.misfit(0, v_cur.head(r0));
      const double eta_c_prop = model.misfit(0, coarse_cand);

      // Full ratio with explicit posterior and proposal densities.
      const double log_full =
          (-eta_f_prop + prior_logpdf(v_prop)) +
          (-eta_c_cur + prior_logpdf(v_cur.head(r0))) +
          log_q(v_cur.tail(rf), v_prop, v_cur.head(r0)) -
          (-eta_f_cur + prior_logpdf(v_cur)) -
          (-eta_c_prop + prior_logpdf(coarse_cand)) -
          log_q(v_prop.tail(rf), v_cur, coarse_cand);

      const double log_simple =
          (eta_f_cur - eta_c_cur) - (eta_f_prop - eta_c_prop);
      worst = std::max(worst, std::abs(log_full - log_simple));
    }
  }
  std::ostringstream os;
  os << "max |log full-ratio - log simplified| = " << worst << " (tol 1e-8)";
  detail = os.str();
  return worst <= 1e-8;
}

// --- criterion 3 -----------------------------------------------------------

bool moments_ok(const Eigen::MatrixXd& traces, double& worst) {
  for (Eigen::Index c = 0; c < traces.cols(); ++c) {
    const Eigen::VectorXd x = traces.col(c);
    const long n = x.size();
    const double tau = iact(x).tau;
    const double mean = x.mean();
    const double var = (x.array() - mean).square().sum() / (n - 1);
    const double se_mean = std::sqrt(tau / n);
    const double se_var = std::sqrt(2.0 * tau / n);
    worst = std::max(worst, std::abs(mean) / (5 * se_mean));
    worst = std::max(worst, std::abs(var - 1.0) / (5 * se_var));
    if (std::abs(mean) > 5 * se_mean || std::abs(var - 1.0) > 5 * se_var)
      return false;
  }
  return true;
}

bool criterion_3(std::string& detail) {
  const long steps = 100000;
  double worst = 0.0;
  bool ok = true;

  // Flat-likelihood model on the two-level fixture.
  auto fx = make_basis(6, 16, 3, 4, 9001);
  std::vector<Eigen::MatrixXd> zeros = {Eigen::MatrixXd::Zero(6, 6),
                                        Eigen::MatrixXd::Zero(16, 16)};
  testing::FixedOperatorModel flat_model(zeros);
  // Operators with an arbitrary SPD subspace covariance.
  const auto ops0 = build_dili_operators(random_spd(3, 7, 0.8), 0.8, 0.3, 0);
  const auto ops1 =
      build_dili_operators_split(random_spd(7, 8, 0.8), 3, 0.8, 0.3, 1);
  const auto factors = precompute_conditional(*fx.basis, 1, ops1);

  {  // pCN
    BaseChainOptions opt;
    opt.kind = ProposalKind::Pcn;
    opt.pcn_a = 0.6;
    opt.steps = steps;
    opt.seed = 11;
    opt.store_states = false;
    opt.tracked = 16;
    Rng init(1);
    Eigen::VectorXd v0(16);
    init.fill_normal(v0);
    const auto rec = run_base_chain(flat_model, 1, nullptr, nullptr, v0, opt);
    ok = ok && rec.accepted == rec.steps;
    ok = moments_ok(rec.tracked_coords, worst) && ok;
  }
  {  // DILI
    BaseChainOptions opt;
    opt.kind = ProposalKind::Dili;
    opt.steps = steps;
    opt.seed = 12;
    opt.store_states = false;
    opt.tracked = 16;
    Rng init(2);
    Eigen::VectorXd v0(16);
    init.fill_normal(v0);
    const auto rec = run_base_chain(flat_model, 1, fx.basis.get(), &ops1, v0, opt);
    ok = ok && rec.accepted == rec.steps;
    ok = moments_ok(rec.tracked_coords, worst) && ok;
  }
  {  // coupled DILI over an exact prior pool
    CoarsePool pool;
    pool.level = 0;
    Rng prior(3);
    for (int k = 0; k < 20000; ++k) {
      Eigen::VectorXd s(6);
      prior.fill_normal(s);
      pool.states.push_back(s);
      pool.misfits.push_back(0.0);
      pool.qois.push_back(s[0]);
    }
    CoupledChainOptions opt;
    opt.steps = steps;
    opt.seed = 13;
    opt.store_states = false;
    opt.tracked = 10;
    Rng init(4);
    Eigen::VectorXd v0(16);
    init.fill_normal(v0);
    const auto rec = run_coupled_chain(flat_model, 1, fx.basis.get(), &ops1,
                                       &factors, pool, v0, opt);
    ok = ok && rec.accepted == rec.steps;
    ok = moments_ok(rec.tracked_coords, worst) && ok;
  }

  std::ostringstream os;
  os << "worst per-coordinate moment deviation " << worst << " of 5 SE";
  detail = os.str();
  return ok;
}

// --- criterion 4 -----------------------------------------------------------

bool criterion_4(std::string& detail) {
  double worst_pair = 0.0, worst_orth = 0.0;
  for (int inst = 0; inst < 3; ++inst) {
    const int r0 = 12 + 4 * inst;
    const int r1 = 40 + 12 * inst;  // up to 64
    const Eigen::MatrixXd h0 = random_spd(r0, 700 + inst, 6.0);
    const Eigen::MatrixXd h1 = random_spd(r1, 800 + inst, 6.0);
    testing::FixedOperatorModel model({h0, h1});
    auto hier = std::make_shared<const LevelHierarchy>(model.hierarchy());

    LisOptions opt;
    opt.threshold = 0.08;
    HierarchicalLisBasis basis(hier);
    AveragedGnh op0(model, 0, Eigen::MatrixXd::Zero(r0, 1));
    basis.append_level(build_base_block(op0, opt));
    AveragedGnh op1(model, 1, Eigen::MatrixXd::Zero(r1, 1));
    const auto blk = enrich_block(basis, op1, opt);
    if (blk.eigenvalues.size() == 0) return false;

    Eigen::MatrixXd lift = Eigen::MatrixXd::Zero(r1, basis.rank(0));
    lift.topRows(r0) = basis.densify(0);
    const Eigen::MatrixXd proj =
        Eigen::MatrixXd::Identity(r1, r1) - lift * lift.transpose();
    const Eigen::MatrixXd deflated = proj * h1 * proj;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dense(deflated);

    Eigen::MatrixXd cols(r1, blk.eigenvalues.size());
    cols.topRows(r0) = blk.z_coarse;
    cols.bottomRows(r1 - r0) = blk.z_fine;
    for (int k = 0; k < blk.eigenvalues.size(); ++k) {
      worst_pair = std::max(
          worst_pair, std::abs(blk.eigenvalues[k] -
                               dense.eigenvalues()[r1 - 1 - k]));
      const double c = std::abs(
          cols.col(k).dot(dense.eigenvectors().col(r1 - 1 - k)));
      worst_pair = std::max(worst_pair, std::abs(1.0 - c));
    }
    HierarchicalLisBasis full(hier);
    full.append_level(basis.block(0));
    full.append_level(blk);
    const Eigen::MatrixXd psi = full.densify(1);
    worst_orth = std::max(
        worst_orth, (psi.transpose() * psi -
                     Eigen::MatrixXd::Identity(psi.cols(), psi.cols()))
                        .cwiseAbs()
                        .maxCoeff());
  }
  std::ostringstream os;
  os << "max eigenpair gap " << worst_pair << " (tol 1e-8), orthonormality "
     << worst_orth << " (tol 1e-10)";
  detail = os.str();
  return worst_pair <= 1e-8 && worst_orth <= 1e-10;
}

// --- criterion 5 -----------------------------------------------------------

bool criterion_5(std::string& detail) {
  // Reference four-level rank profile and the storage reduction factors it
  // is expected to reproduce.
  CostModelInput in;
  in.param_dims = {150, 250, 450, 850};
  in.added_ranks = {80, 19, 21, 12};
  in.fem_dofs = {441, 1681, 6561, 25921};
  in.single_ranks = {80, 91, 97, 100};
  const auto rep = cost_model(in);
  const double expected[4] = {1.00, 0.74, 0.60, 0.43};
  double worst = 0.0;
  for (int l = 0; l < 4; ++l)
    worst = std::max(worst,
                     std::abs(rep.storage_factor_by_level[l] - expected[l]));

  bool bound_ok = true;
  Rng rng(2025);
  for (int k = 0; k < 50; ++k) {
    const double beta_p = 0.2 + rng.uniform();
    const double beta_r = 0.2 + rng.uniform();
    const int levels = 2 + static_cast<int>(rng.uniform_index(4));
    const double r0 = 40 + 40 * rng.uniform();
    const double c = 0.5 + rng.uniform();
    CostModelInput g;
    g.theta_c = 1.0 + 0.5 * rng.uniform();
    for (int l = 0; l < levels; ++l) {
      g.param_dims.push_back(200.0 * std::exp(beta_p * l));
      g.added_ranks.push_back(r0 * std::exp(-beta_r * l));
      g.fem_dofs.push_back(500.0 * std::exp((0.3 + rng.uniform() * 0) * l + 0.8 * l));
      g.single_ranks.push_back(c * r0);
    }
    const auto out = cost_model(g);
    bound_ok = bound_ok &&
               out.zeta_multi / out.zeta_single <= out.storage_bound * (1 + 1e-9) &&
               out.chi_multi / out.chi_single <= out.build_bound * (1 + 1e-9);
  }

  std::ostringstream os;
  os << "max factor gap " << worst << " (tol 0.005), bounds "
     << (bound_ok ? "dominate" : "violated");
  detail = os.str();
  return worst <= 5e-3 && bound_ok;
}

// --- criterion 6 -----------------------------------------------------------

bool criterion_6(std::string& detail) {
  testing::LinearGaussianModel model({4, 7}, 8, 0.45, 99, 0.1);
  LisBuildOptions lopt;
  lopt.threshold = 1e-3;
  lopt.reference_samples = 8;
  lopt.seed = 5;
  auto hierarchy = std::make_shared<const LevelHierarchy>(model.hierarchy());
  auto lis = build_lis_pipeline(model, hierarchy, lopt).artifact;

  const double truth = model.expected_qoi(1);
  const double eps = 0.05;
  const int reps = 50;
  int covered = 0;
  for (int k = 0; k < reps; ++k) {
    MultilevelOptions opt;
    opt.mode = RunMode::MlDili;
    opt.epsilon = eps;
    opt.pilot_steps = 1500;
    opt.seed = 10000 + 37 * k;
    opt.dt = 1.0;
    opt.dt_perp = 0.5;
    const auto res = run_multilevel(model, &lis, opt);
    if (std::abs(res.report.estimate - truth) <= eps) ++covered;
  }
  std::ostringstream os;
  os << covered << "/" << reps << " runs within eps (need >= 80%)";
  detail = os.str();
  return covered >= 40;
}

// --- criterion 7 -----------------------------------------------------------

struct DeskSetup {
  std::shared_ptr<const LevelHierarchy> hierarchy;
  std::shared_ptr<const KlExpansion> kl;
  std::shared_ptr<const ObservationSetup> obs;
  std::unique_ptr<EllipticModel> model;
  LisArtifact lis{0, {}, HierarchicalLisBasis(nullptr), {}};
  std::vector<int> single_ranks;
};

DeskSetup desk_setup() {
  // Built-in experiment (four levels); the study runs on levels 0-2 while
  // the synthetic data come from the level-3 model so no estimation level
  // shares the data-generating discretisation.
  const std::string cache = "acceptance7_cache";
  fs::create_directories(cache);
  DeskSetup s;
  s.hierarchy = std::make_shared<const LevelHierarchy>(
      LevelHierarchy::regular(1.0 / 20.0, {150, 250, 450, 850}));

  const KernelSpec spec{5.0, 1.0};
  const std::string kl_path = cache + "/kl_l3.bin";
  if (fs::exists(kl_path)) {
    s.kl = std::make_shared<const KlExpansion>(
        KlExpansion::load(kl_path, *s.hierarchy, spec));
  } else {
    std::cerr << "[criterion 7] building KL basis on the level-2 grid...\n";
    s.kl = std::make_shared<const KlExpansion>(*s.hierarchy, spec, 2);
    s.kl->save(kl_path);
  }

  const std::string data_path = cache + "/data_l3.json";
  if (!fs::exists(data_path)) {
    std::cerr << "[criterion 7] generating level-3 data...\n";
    const auto gen = generate_data(*s.hierarchy, *s.kl,
                                   default_sensor_layout(), 3, 50.0, 424242,
                                   171717);
    save_observation(data_path, gen.setup, gen.truth);
  }
  auto loaded = load_observation(data_path);
  s.obs = std::make_shared<const ObservationSetup>(std::move(loaded.setup));
  s.model = std::make_unique<EllipticModel>(s.hierarchy, s.kl, s.obs);

  const std::string lis_path = cache + "/lis_l2.bin";
  const std::string ranks_path = cache + "/single_ranks_l2.txt";
  if (fs::exists(lis_path) && fs::exists(ranks_path)) {
    s.lis = load_lis(lis_path, s.hierarchy);
    std::ifstream is(ranks_path);
    int r;
    while (is >> r) s.single_ranks.push_back(r);
  } else {
    std::cerr << "[criterion 7] building hierarchical + single-level subspaces...\n";
    LisBuildOptions opt;
    opt.threshold = 1e-2;
    opt.reference_samples = 40;
    opt.rank_cap = 142;
    opt.seed = 1;
    opt.single_level_too = true;
    opt.max_level = 2;
    auto outcome = build_lis_pipeline(*s.model, s.hierarchy, opt);
    s.lis = std::move(outcome.artifact);
    s.single_ranks = outcome.single_ranks;
    save_lis(lis_path, s.lis);
    std::ofstream os(ranks_path);
    for (int r : outcome.single_ranks) os << r << "\n";
  }
  return s;
}

bool criterion_7(std::string& detail) {
  DeskSetup s = desk_setup();
  std::ostringstream os;
  bool ok = true;

  // (a) recursively added dimensions strictly decreasing.
  const int s0 = s.lis.basis.added(0);
  const int s1 = s.lis.basis.added(1);
  const int s2 = s.lis.basis.added(2);
  os << "(a) added " << s0 << "," << s1 << "," << s2;
  ok = ok && s0 > s1 && s1 > s2;

  // (b) recursive totals within [single, 1.5 single] per level.
  os << "; (b) totals";
  for (int l = 0; l < 3; ++l) {
    const int total = s.lis.basis.rank(l);
    os << " " << total << "/" << s.single_ranks[l];
    ok = ok && total >= s.single_ranks[l] &&
         total <= static_cast<int>(1.5 * s.single_ranks[l]);
  }

  // (c) level-0 QoI IACT: pCN versus DILI.
  std::cerr << "[criterion 7] level-0 DILI chain...\n";
  const auto ops0 = operators_from_reference(s.lis.basis, 0,
                                             s.lis.references[0], 0.05, 0.1,
                                             0, 77);
  BaseChainOptions dopt;
  dopt.kind = ProposalKind::Dili;
  dopt.steps = 100000;
  dopt.seed = 301;
  dopt.store_states = false;
  dopt.adapt.enabled = true;
  dopt.adapt.interval_accepts = 50;
  dopt.adapt.freeze_after_step = 25000;
  dopt.dt = 0.05;
  const auto dili_rec = run_base_chain(*s.model, 0, &s.lis.basis, &ops0,
                                       s.lis.references[0].map_point, dopt);
  const double tau_dili = iact(dili_rec.qois.tail(75000)).tau;

  std::cerr << "[criterion 7] level-0 pCN chain...\n";
  // Step size from a short acceptance scan, then a long run.
  double pcn_a = 0.98;
  {
    double best_gap = 1e9;
    for (double a : {0.98, 0.995, 0.999, 0.9995, 0.9999}) {
      BaseChainOptions trial;
      trial.kind = ProposalKind::Pcn;
      trial.pcn_a = a;
      trial.steps = 3000;
      trial.seed = 401;
      trial.store_states = false;
      const auto rec = run_base_chain(*s.model, 0, nullptr, nullptr,
                                      s.lis.references[0].map_point, trial);
      const double acc = static_cast<double>(rec.accepted) / rec.steps;
      const double gap = std::abs(acc - 0.234);
      if (gap < best_gap) {
        best_gap = gap;
        pcn_a = a;
      }
    }
  }
  BaseChainOptions popt;
  popt.kind = ProposalKind::Pcn;
  popt.pcn_a = pcn_a;
  popt.steps = 200000;
  popt.seed = 402;
  popt.store_states = false;
  const auto pcn_rec = run_base_chain(*s.model, 0, nullptr, nullptr,
                                      s.lis.references[0].map_point, popt);
  const double tau_pcn = iact(pcn_rec.qois.tail(160000)).tau;
  os << "; (c) tau_qoi pCN(a=" << pcn_a << ") " << tau_pcn << " vs DILI "
     << tau_dili << " (ratio " << tau_pcn / tau_dili << ", need >= 20)";
  ok = ok && tau_pcn / tau_dili >= 20.0;

  // (d) rate fits from the multilevel ladder; generous chain lengths and a
  // thinned pool keep the small per-level corrections resolvable.
  std::cerr << "[criterion 7] MLDILI ladder...\n";
  MultilevelOptions mopt;
  mopt.mode = RunMode::MlDili;
  mopt.fixed_steps = {150000, 50000, 20000};
  mopt.seed = 17;
  mopt.dt = 0.05;
  mopt.dt_perp = 0.1;
  mopt.adapt = true;
  mopt.adapt_interval = 50;
  mopt.thin = 2;
  mopt.pool_stride = 2;
  mopt.max_level = 2;
  const auto res = run_multilevel(*s.model, &s.lis, mopt);
  std::cerr << "[criterion 7] ladder estimates:";
  for (const auto& st : res.report.levels)
    std::cerr << " Y" << st.level << "=" << st.estimate << "(var " << st.var_d
              << ", tau " << st.tau << ", acc " << st.acceptance_rate << ")";
  std::cerr << "\n";
  os << "; (d) theta_b " << res.report.rates.theta_b << ", theta_v "
     << res.report.rates.theta_v << " (need [0.3, 0.8])";
  ok = ok && res.report.rates.available;
  ok = ok && res.report.rates.theta_b >= 0.3 && res.report.rates.theta_b <= 0.8;
  ok = ok && res.report.rates.theta_v >= 0.3 && res.report.rates.theta_v <= 0.8;

  detail = os.str();
  return ok;
}

// --- criterion 8 -----------------------------------------------------------

bool criterion_8(std::string& detail) {
  // Exact linear solution and unit flux.
  auto lvl = std::make_shared<const EllipticLevel>(UnitSquareGrid(16),
                                                   default_sensor_layout());
  EllipticSolver solver(lvl);
  const auto& st = solver.solve_observe(Eigen::VectorXd::Zero(17 * 17));
  double worst_p = 0.0;
  for (int k = 0; k < 17 * 17; ++k)
    worst_p = std::max(worst_p,
                       std::abs(st.pressure[k] - lvl->grid().node_x(k)));
  const double q_gap = std::abs(solver.qoi() - 1.0);

  // GNH actions against central finite differences of the observables.
  const auto h = LevelHierarchy::regular(1.0 / 16.0, {20});
  const KlExpansion kl(h, {5.0, 1.0}, 0);
  const auto gen =
      generate_data(h, kl, default_sensor_layout(), 0, 50.0, 11, 12);
  auto hierarchy = std::make_shared<const LevelHierarchy>(h);
  auto klp = std::make_shared<const KlExpansion>(kl);
  auto obs = std::make_shared<const ObservationSetup>(gen.setup);
  EllipticModel model(hierarchy, klp, obs);

  Rng rng(3);
  double worst_fd = 0.0;
  for (int rep = 0; rep < 3; ++rep) {
    Eigen::VectorXd v(20), dv(20);
    rng.fill_normal(v);
    rng.fill_normal(dv);
    const auto& basis = klp->level_basis(0);
    EllipticSolver& sv = model.solver(0);
    const double eps = 1e-5;
    WhitenedVector vp{0, v + eps * dv}, vm{0, v - eps * dv};
    const Eigen::VectorXd fp =
        sv.solve_observe(synthesize_field(vp, basis)).observables;
    const Eigen::VectorXd fm =
        sv.solve_observe(synthesize_field(vm, basis)).observables;
    const Eigen::VectorXd fd = (fp - fm) / (2 * eps);

    WhitenedVector wv{0, v};
    sv.solve_observe(synthesize_field(wv, basis));
    const Eigen::VectorXd du =
        basis.modes * basis.eigenvalues.cwiseSqrt().cwiseProduct(dv).matrix();
    const Eigen::VectorXd jdv = sv.tangent(du);
    worst_fd = std::max(worst_fd, (jdv - fd).norm() / fd.norm());
  }

  std::ostringstream os;
  os << "p=x gap " << worst_p << ", |Q-1| " << q_gap << ", FD jacobian rel "
     << worst_fd << " (tol 1e-4)";
  detail = os.str();
  return worst_p <= 1e-11 && q_gap <= 1e-11 && worst_fd <= 1e-4;
}

// --- criterion 9 -----------------------------------------------------------

bool criterion_9(std::string& detail) {
  std::ostringstream os;
  bool ok = true;
  for (double rho : {0.5, 0.9, 0.99}) {
    const long n = rho > 0.95 ? 4000000 : 1000000;
    Rng rng(static_cast<std::uint64_t>(1000 * rho));
    Eigen::VectorXd x(n);
    x[0] = rng.normal();
    const double s = std::sqrt(1 - rho * rho);
    for (long i = 1; i < n; ++i) x[i] = rho * x[i - 1] + s * rng.normal();
    const double tau = iact(x).tau;
    const double expect = (1 + rho) / (1 - rho);
    os << "rho " << rho << ": tau " << tau << " vs " << expect << "; ";
    ok = ok && std::abs(tau - expect) <= 0.10 * expect;
  }
  detail = os.str();
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <criterion 1..9 | all>\n";
    return 2;
  }
  struct Entry {
    int id;
    const char* title;
    std::function<bool(std::string&)> fn;
  };
  const Entry entries[] = {
      {1, "low-rank conditional sampling matches dense block inversion", criterion_1},
      {2, "factorised-proposal acceptance ratio simplification is exact", criterion_2},
      {3, "pCN/DILI/coupled proposals preserve the prior", criterion_3},
      {4, "subspace enrichment solves the deflated eigenproblem", criterion_4},
      {5, "cost model reproduces the reference reduction factors and bounds", criterion_5},
      {6, "tolerance-driven multilevel estimate covers the analytic truth", criterion_6},
      {7, "desk-scale experiment: dimensions, IACT gain and rate fits", criterion_7},
      {8, "forward model: exact linear solution and FD-verified GNH", criterion_8},
      {9, "AR(1) autocorrelation times recovered within 10%", criterion_9},
  };

  const std::string which = argv[1];
  int failures = 0;
  for (const auto& e : entries) {
    if (which != "all" && which != std::to_string(e.id)) continue;
    std::string detail;
    bool pass = false;
    try {
      pass = e.fn(detail);
    } catch (const std::exception& ex) {
      detail = std::string("exception: ") + ex.what();
    }
    std::printf("%s criterion %d: %s [%s]\n", pass ? "PASS" : "FAIL", e.id,
                e.title, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
