#include <doctest.h>

#include <Eigen/Dense>
#include <memory>

#include "mldili/errors.hpp"
#include "mldili/proposal.hpp"
#include "mldili/rng.hpp"

using namespace mldili;

namespace {

Eigen::MatrixXd random_spd(int n, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Eigen::MatrixXd b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = rng.normal();
  return scale * (b.transpose() * b) / n +
         0.05 * Eigen::MatrixXd::Identity(n, n);
}

Eigen::MatrixXd random_orthonormal(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ() *
         Eigen::MatrixXd::Identity(rows, cols);
}

struct BasisFixture {
  std::shared_ptr<const LevelHierarchy> hierarchy;
  std::unique_ptr<HierarchicalLisBasis> basis;
};

// Two-level hierarchical basis with orthonormal combined columns.
BasisFixture make_basis(int r0_dim, int r1_dim, int s0, int s1,
                        std::uint64_t seed) {
  BasisFixture fx;
  fx.hierarchy = std::make_shared<const LevelHierarchy>(LevelHierarchy(
      {0.5, 0.25}, {r0_dim * r0_dim, r1_dim * r1_dim}, {r0_dim, r1_dim}));
  fx.basis = std::make_unique<HierarchicalLisBasis>(fx.hierarchy);
  Rng rng(seed);

  LisLevelBlock base;
  base.z_fine = random_orthonormal(r0_dim, s0, rng);
  base.eigenvalues = Eigen::VectorXd::LinSpaced(s0, 3.0, 1.0);
  fx.basis->append_level(std::move(base));

  // New columns orthogonal to the lifted base.
  Eigen::MatrixXd lift = Eigen::MatrixXd::Zero(r1_dim, s0);
  lift.topRows(r0_dim) = fx.basis->block(0).z_fine;
  Eigen::MatrixXd cand(r1_dim, s1);
  for (int i = 0; i < r1_dim; ++i)
    for (int j = 0; j < s1; ++j) cand(i, j) = rng.normal();
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

// Dense precision P = Psi Xi Psi^T + b_perp^-2 (I - Psi Psi^T).
Eigen::MatrixXd dense_precision(const HierarchicalLisBasis& basis, int level,
                                const DiliOperators& ops) {
  const Eigen::MatrixXd psi = basis.densify(level);
  const int n = static_cast<int>(psi.rows());
  const Eigen::MatrixXd proj = psi * psi.transpose();
  return psi * ops.xi * psi.transpose() +
         (Eigen::MatrixXd::Identity(n, n) - proj) /
             (ops.b_perp * ops.b_perp);
}

}  // namespace

TEST_CASE("dili operator construction") {
  CHECK_THROWS_AS(build_dili_operators(Eigen::MatrixXd::Identity(3, 3), 0.0, 0.1),
                  ConfigError);
  CHECK_THROWS_AS(
      build_dili_operators(-Eigen::MatrixXd::Identity(3, 3), 1.0, 0.1),
      ConfigError);

  // Unit covariance with dt = 2 is the independence move inside the span.
  const auto indep =
      build_dili_operators(Eigen::MatrixXd::Identity(4, 4), 2.0, 0.1);
  CHECK(indep.a_r.cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((indep.b_r - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <=
        1e-14);

  const auto ops = build_dili_operators(random_spd(6, 9), 1.3, 0.2);
  const Eigen::MatrixXd should_be_id =
      ops.a_r * ops.a_r + ops.b_r * ops.b_r;
  CHECK((should_be_id - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <=
        1e-10);
  CHECK((ops.a_r * ops.b_r - ops.b_r * ops.a_r).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((ops.xi * ops.b_r * ops.b_r -
         Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(ops.a_perp * ops.a_perp + ops.b_perp * ops.b_perp ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("whole-space operators satisfy the commuting contract") {
  auto fx = make_basis(6, 10, 3, 2, 17);
  const auto ops = build_dili_operators(random_spd(5, 23), 0.8, 0.15, 1);

  const Eigen::MatrixXd psi = fx.basis->densify(1);
  const Eigen::MatrixXd proj = psi * psi.transpose();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(10, 10);
  const Eigen::MatrixXd a_full =
      psi * ops.a_r * psi.transpose() + ops.a_perp * (eye - proj);
  const Eigen::MatrixXd b2_full =
      psi * ops.b_r * ops.b_r * psi.transpose() +
      ops.b_perp * ops.b_perp * (eye - proj);

  CHECK((a_full * b2_full - b2_full * a_full).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((a_full * a_full + b2_full - eye).cwiseAbs().maxCoeff() <= 1e-10);

  // Mean application through the block structure matches the dense operator.
  Rng rng(4);
  Eigen::VectorXd v(10);
  rng.fill_normal(v);
  CHECK((dili_mean_apply(*fx.basis, ops, v) - a_full * v).cwiseAbs().maxCoeff() <=
        1e-12);
}

TEST_CASE("pcn proposal basics") {
  Rng r1(5), r2(5);
  Eigen::VectorXd v(6);
  v << 1, -2, 3, 0.5, 0, 4;

  // a = 0 is a fresh standard-normal draw from the same stream.
  const auto prop = pcn_propose(v, 0.0, r1);
  Eigen::VectorXd fresh(6);
  r2.fill_normal(fresh);
  CHECK(prop == fresh);

  Rng r3(6);
  const auto nearly = pcn_propose(v, 1.0 - 1e-12, r3);
  CHECK((nearly - v).cwiseAbs().maxCoeff() <= 1e-5);

  CHECK_THROWS_AS(pcn_propose(v, 1.0, r3), ConfigError);
}

TEST_CASE("pcn preserves the standard normal law") {
  const int dim = 5;
  const long n = 100000;
  Rng rng(811);
  Eigen::VectorXd v(dim);
  rng.fill_normal(v);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
  const double a = 0.5;
  for (long i = 0; i < n; ++i) {
    v = pcn_propose(v, a, rng);  // eta == 0: every proposal accepted
    mean += v;
    sq += v.cwiseAbs2();
  }
  mean /= n;
  sq /= n;
  // IACT of the AR(1) chain is (1+a)/(1-a) = 3.
  const double se_mean = std::sqrt(3.0 / n);
  const double se_var = std::sqrt(2.0 * 3.0 / n);
  for (int d = 0; d < dim; ++d) {
    CHECK(std::abs(mean[d]) <= 5 * se_mean);
    CHECK(std::abs(sq[d] - mean[d] * mean[d] - 1.0) <= 5 * se_var);
  }
}

TEST_CASE("dili proposal with an empty subspace is pcn") {
  auto h = std::make_shared<const LevelHierarchy>(
      LevelHierarchy({0.5}, {16}, {7}));
  HierarchicalLisBasis basis(h);
  LisLevelBlock empty;
  empty.z_fine.resize(7, 0);
  empty.eigenvalues.resize(0);
  basis.append_level(std::move(empty));

  auto ops = build_dili_operators(Eigen::MatrixXd(0, 0), 1.0, 0.3);
  Rng r1(9), r2(9);
  Eigen::VectorXd v(7);
  v << 1, 2, 3, 4, 5, 6, 7;
  const auto a = dili_propose(basis, ops, v, r1);
  const auto b = pcn_propose(v, ops.a_perp, r2);
  CHECK(a == b);
}

TEST_CASE("dili proposal noise covariance matches the dense operator") {
  auto fx = make_basis(5, 8, 2, 2, 31);
  const auto ops = build_dili_operators(random_spd(4, 12), 1.1, 0.4, 1);

  const Eigen::MatrixXd psi = fx.basis->densify(1);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(8, 8);
  const Eigen::MatrixXd proj = psi * psi.transpose();
  const Eigen::MatrixXd b2_full =
      psi * ops.b_r * ops.b_r * psi.transpose() +
      ops.b_perp * ops.b_perp * (eye - proj);

  Rng rng(77);
  Eigen::VectorXd v(8);
  rng.fill_normal(v);
  const Eigen::VectorXd mean = dili_mean_apply(*fx.basis, ops, v);

  const long n = 60000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(8, 8);
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd d = dili_propose(*fx.basis, ops, v, rng) - mean;
    acc.noalias() += d * d.transpose();
  }
  acc /= n;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      const double se = std::sqrt(
          (b2_full(i, i) * b2_full(j, j) + b2_full(i, j) * b2_full(i, j)) / n);
      CHECK(std::abs(acc(i, j) - b2_full(i, j)) <= 5 * se + 1e-12);
    }
}

TEST_CASE("acceptance probabilities") {
  CHECK(accept_base(1.0, 1.0) == 1.0);
  CHECK(accept_base(1.0, 0.0) == 1.0);
  CHECK(accept_base(0.0, 2.0) == doctest::Approx(std::exp(-2.0)));
  CHECK(accept_base(0.0, std::nan("")) == 0.0);

  CHECK(accept_coupled(3.0, 3.0, 5.0, 5.0) == 1.0);
  CHECK(accept_coupled(2.0, 2.0, 7.0, 7.0) == 1.0);
  CHECK(accept_coupled(1.0, 0.5, 2.0, 0.5) == doctest::Approx(std::exp(-1.0)));
  CHECK(accept_coupled(1.0, 0.5, std::nan(""), 0.5) == 0.0);
}

TEST_CASE("conditional factors: complement-matched block is the identity") {
  auto fx = make_basis(5, 9, 3, 2, 41);
  DiliOperators ops;
  ops.level = 1;
  ops.a_perp = 0.6;
  ops.b_perp = 0.8;
  ops.xi = Eigen::MatrixXd::Zero(5, 5);
  ops.xi.topLeftCorner(3, 3) = random_spd(3, 3) * 2.0;
  ops.xi.bottomRightCorner(2, 2) =
      Eigen::MatrixXd::Identity(2, 2) / (0.8 * 0.8);

  const auto f = precompute_conditional(*fx.basis, 1, ops);
  CHECK(f.d.cwiseAbs().maxCoeff() <= 1e-12);

  Rng rng(2);
  Eigen::VectorXd xi(4), r_c(5);
  rng.fill_normal(xi);
  rng.fill_normal(r_c);
  CHECK((conditional_noise(f, xi) - 0.8 * xi).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(conditional_mean(*fx.basis, f, r_c).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("conditional factors match dense block inversion") {
  auto fx = make_basis(5, 12, 3, 3, 53);
  const auto ops = build_dili_operators(random_spd(6, 29), 0.9, 0.25, 1);
  const auto f = precompute_conditional(*fx.basis, 1, ops);

  const Eigen::MatrixXd p = dense_precision(*fx.basis, 1, ops);
  const int rc = 5, rf = 7;
  const Eigen::MatrixXd p_ff = p.bottomRightCorner(rf, rf);
  const Eigen::MatrixXd p_fc = p.bottomLeftCorner(rf, rc);
  const Eigen::MatrixXd p_ff_inv = p_ff.llt().solve(Eigen::MatrixXd::Identity(rf, rf));

  // Conditional mean map.
  Eigen::MatrixXd mean_map(rf, rc);
  for (int c = 0; c < rc; ++c)
    mean_map.col(c) = conditional_mean(*fx.basis, f, Eigen::VectorXd::Unit(rc, c));
  const Eigen::MatrixXd oracle_mean = -p_ff_inv * p_fc;
  CHECK((mean_map - oracle_mean).cwiseAbs().maxCoeff() <= 1e-8);

  // Square root of the conditional covariance.
  Eigen::MatrixXd root(rf, rf);
  for (int c = 0; c < rf; ++c)
    root.col(c) = conditional_noise(f, Eigen::VectorXd::Unit(rf, c));
  CHECK((root * root.transpose() * p_ff -
         Eigen::MatrixXd::Identity(rf, rf)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("scalar fine block reduces to scalar formulas") {
  auto fx = make_basis(4, 5, 2, 1, 71);
  const auto ops = build_dili_operators(random_spd(3, 5), 1.2, 0.3, 1);
  const auto f = precompute_conditional(*fx.basis, 1, ops);
  REQUIRE(f.d.size() == 1);

  const Eigen::VectorXd z_f = fx.basis->block(1).z_fine.col(0);
  const double t = z_f.norm();
  const double xi_ff = ops.xi(2, 2);
  const double b2 = ops.b_perp * ops.b_perp;
  CHECK(f.d[0] == doctest::Approx(t * t * (b2 * xi_ff - 1.0)).epsilon(1e-10));
  CHECK(std::abs(f.phi(0, 0)) == doctest::Approx(std::abs(z_f[0] / t)).epsilon(1e-10));
}

TEST_CASE("coupled proposal: conditional sampling statistics") {
  auto fx = make_basis(4, 8, 2, 2, 97);
  const auto ops = build_dili_operators(random_spd(4, 15), 1.0, 0.35, 1);
  const auto f = precompute_conditional(*fx.basis, 1, ops);

  const Eigen::MatrixXd p = dense_precision(*fx.basis, 1, ops);
  const Eigen::MatrixXd p_ff_inv =
      p.bottomRightCorner(4, 4).llt().solve(Eigen::MatrixXd::Identity(4, 4));

  Rng rng(123);
  Eigen::VectorXd v(8), coarse(4);
  rng.fill_normal(v);
  rng.fill_normal(coarse);
  const Eigen::VectorXd av = dili_mean_apply(*fx.basis, ops, v);
  const Eigen::VectorXd expect_mean =
      av.tail(4) + conditional_mean(*fx.basis, f, coarse - av.head(4));

  const long n = 100000;
  Eigen::VectorXd mean_acc = Eigen::VectorXd::Zero(4);
  Eigen::MatrixXd cov_acc = Eigen::MatrixXd::Zero(4, 4);
  for (long i = 0; i < n; ++i) {
    const Eigen::VectorXd prop =
        coupled_dili_propose(*fx.basis, ops, f, v, coarse, rng);
    CHECK(prop.head(4) == coarse);
    const Eigen::VectorXd d = prop.tail(4) - expect_mean;
    mean_acc += d;
    cov_acc.noalias() += d * d.transpose();
  }
  mean_acc /= n;
  cov_acc /= n;
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(mean_acc[i]) <= 5 * std::sqrt(p_ff_inv(i, i) / n));
    for (int j = 0; j < 4; ++j) {
      const double se = std::sqrt((p_ff_inv(i, i) * p_ff_inv(j, j) +
                                   p_ff_inv(i, j) * p_ff_inv(i, j)) /
                                  n);
      CHECK(std::abs(cov_acc(i, j) - p_ff_inv(i, j)) <= 5 * se + 1e-12);
    }
  }
}

TEST_CASE("online covariance accumulator") {
  Rng rng(6);
  const int dim = 3;
  OnlineCovariance acc(dim);
  Eigen::MatrixXd data(dim, 500);
  for (int i = 0; i < 500; ++i) {
    Eigen::VectorXd x(dim);
    rng.fill_normal(x);
    x[1] += 0.5 * x[0];
    data.col(i) = x;
    acc.add(x);
  }
  const Eigen::VectorXd mean = data.rowwise().mean();
  const Eigen::MatrixXd centered = data.colwise() - mean;
  const Eigen::MatrixXd expect = centered * centered.transpose() / 499.0;
  CHECK((acc.covariance() - expect).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("split operators zero the coarse-fine block of the full operator") {
  auto fx = make_basis(6, 11, 3, 3, 121);
  const auto ops =
      build_dili_operators_split(random_spd(6, 55), 3, 1.2, 0.3, 1);

  // Whole-space A has no coarse/fine coupling, which is what makes the
  // simplified coupled acceptance ratio exact.
  const Eigen::MatrixXd psi = fx.basis->densify(1);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(11, 11);
  const Eigen::MatrixXd a_full =
      psi * ops.a_r * psi.transpose() +
      ops.a_perp * (eye - psi * psi.transpose());
  CHECK(a_full.topRightCorner(6, 5).cwiseAbs().maxCoeff() <= 1e-13);

  // Contracts still hold.
  CHECK((ops.a_r * ops.a_r + ops.b_r * ops.b_r -
         Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((ops.a_r * ops.b_r - ops.b_r * ops.a_r).cwiseAbs().maxCoeff() <= 1e-10);

  // The conditional factors collapse to the complement scalars.
  const auto f = precompute_conditional(*fx.basis, 1, ops);
  CHECK(f.d.cwiseAbs().maxCoeff() <= 1e-10);
}
