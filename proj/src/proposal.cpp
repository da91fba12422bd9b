#include "mldili/proposal.hpp"

#include <cmath>
#include <string>

#include "mldili/errors.hpp"

namespace mldili {

DiliOperators build_dili_operators(const Eigen::MatrixXd& sigma_r, double dt,
                                   double dt_perp, int level) {
  if (dt <= 0.0 || dt_perp <= 0.0)
    throw ConfigError("dili operators: jump sizes must be positive (B would be singular)");
  if (sigma_r.rows() != sigma_r.cols())
    throw DimensionError("dili operators: covariance must be square");

  DiliOperators ops;
  ops.level = level;
  ops.dt = dt;
  ops.dt_perp = dt_perp;
  ops.a_perp = (2.0 - dt_perp) / (2.0 + dt_perp);
  ops.b_perp = std::sqrt(1.0 - ops.a_perp * ops.a_perp);
  ops.sigma_r = sigma_r;

  const auto r = sigma_r.rows();
  if (r == 0) {
    ops.a_r.resize(0, 0);
    ops.b_r.resize(0, 0);
    ops.xi.resize(0, 0);
    return ops;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_r);
  if (es.info() != Eigen::Success)
    throw NumericalError("dili operators: eigensolve of the covariance failed");
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig <= 0.0)
    throw ConfigError(
        "dili operators: covariance is not positive definite (eigenvalue " +
        std::to_string(min_eig) + ")");

  Eigen::VectorXd a_eigs(r), b_eigs(r), xi_eigs(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const double lam = es.eigenvalues()[i];
    a_eigs[i] = (2.0 - dt * lam) / (2.0 + dt * lam);
    const double b2 = 1.0 - a_eigs[i] * a_eigs[i];
    b_eigs[i] = std::sqrt(b2);
    xi_eigs[i] = 1.0 / b2;
  }
  const auto& q = es.eigenvectors();
  ops.a_r = q * a_eigs.asDiagonal() * q.transpose();
  ops.b_r = q * b_eigs.asDiagonal() * q.transpose();
  ops.xi = q * xi_eigs.asDiagonal() * q.transpose();
  return ops;
}

DiliOperators build_dili_operators_split(const Eigen::MatrixXd& sigma_r,
                                         int inherited_rank, double dt,
                                         double dt_perp, int level) {
  const auto r = sigma_r.rows();
  if (inherited_rank < 0 || inherited_rank > r)
    throw DimensionError("dili operators: inherited rank out of range");
  DiliOperators inner = build_dili_operators(
      sigma_r.topLeftCorner(inherited_rank, inherited_rank), dt, dt_perp,
      level);
  const auto s = r - inherited_rank;
  DiliOperators ops;
  ops.level = level;
  ops.dt = dt;
  ops.dt_perp = dt_perp;
  ops.a_perp = inner.a_perp;
  ops.b_perp = inner.b_perp;
  ops.sigma_r = sigma_r;
  ops.a_r = Eigen::MatrixXd::Zero(r, r);
  ops.b_r = Eigen::MatrixXd::Zero(r, r);
  ops.xi = Eigen::MatrixXd::Zero(r, r);
  ops.a_r.topLeftCorner(inherited_rank, inherited_rank) = inner.a_r;
  ops.b_r.topLeftCorner(inherited_rank, inherited_rank) = inner.b_r;
  ops.xi.topLeftCorner(inherited_rank, inherited_rank) = inner.xi;
  ops.a_r.bottomRightCorner(s, s) =
      ops.a_perp * Eigen::MatrixXd::Identity(s, s);
  ops.b_r.bottomRightCorner(s, s) =
      ops.b_perp * Eigen::MatrixXd::Identity(s, s);
  ops.xi.bottomRightCorner(s, s) =
      Eigen::MatrixXd::Identity(s, s) / (ops.b_perp * ops.b_perp);
  return ops;
}

Eigen::VectorXd pcn_propose(const Eigen::VectorXd& v, double a, Rng& rng) {
  if (!(a > -1.0 && a < 1.0))
    throw ConfigError("pcn: coefficient must lie in (-1, 1)");
  const double b = std::sqrt(1.0 - a * a);
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = a * v[i] + b * rng.normal();
  return out;
}

double accept_base(double eta_cur, double eta_prop) {
  if (!std::isfinite(eta_prop)) return 0.0;
  return std::min(1.0, std::exp(eta_cur - eta_prop));
}

double accept_coupled(double eta_f_cur, double eta_c_cur, double eta_f_prop,
                      double eta_c_prop) {
  if (!std::isfinite(eta_f_prop) || !std::isfinite(eta_c_prop)) return 0.0;
  return std::min(
      1.0, std::exp((eta_f_cur - eta_c_cur) - (eta_f_prop - eta_c_prop)));
}

Eigen::VectorXd dili_mean_apply(const HierarchicalLisBasis& basis,
                                const DiliOperators& ops,
                                const Eigen::VectorXd& v) {
  const int level = ops.level;
  if (basis.rank(level) == 0) return ops.a_perp * v;
  const Eigen::VectorXd w = basis.apply_transpose(level, v);
  const Eigen::VectorXd t = ops.a_r * w - ops.a_perp * w;
  return basis.apply(level, t) + ops.a_perp * v;
}

Eigen::VectorXd dili_propose(const HierarchicalLisBasis& basis,
                             const DiliOperators& ops,
                             const Eigen::VectorXd& v, Rng& rng) {
  const int level = ops.level;
  const int r = basis.num_levels() > level ? basis.rank(level) : 0;
  if (r == 0) return pcn_propose(v, ops.a_perp, rng);

  Eigen::VectorXd xi_r(r);
  rng.fill_normal(xi_r);
  Eigen::VectorXd xi(v.size());
  rng.fill_normal(xi);

  const Eigen::VectorXd w = basis.apply_transpose(level, v);
  const Eigen::VectorXd wxi = basis.apply_transpose(level, xi);
  const Eigen::VectorXd t =
      ops.a_r * w - ops.a_perp * w + ops.b_r * xi_r - ops.b_perp * wxi;
  return basis.apply(level, t) + ops.a_perp * v + ops.b_perp * xi;
}

ConditionalFactors precompute_conditional(const HierarchicalLisBasis& basis,
                                          int level,
                                          const DiliOperators& ops) {
  if (level < 1) throw DimensionError("conditional factors: need level >= 1");
  if (ops.level != level)
    throw DimensionError("conditional factors: operator level mismatch");
  const int r = basis.rank(level);
  const int r_prev = basis.rank(level - 1);
  const int s = basis.added(level);
  const int fine_dim = basis.hierarchy().added_dim(level);
  if (ops.xi.rows() != r)
    throw DimensionError("conditional factors: operator rank does not match basis");

  ConditionalFactors f;
  f.level = level;
  f.b_perp = ops.b_perp;
  if (s == 0) {
    f.phi.resize(fine_dim, 0);
    f.d.resize(0);
    f.mean_core.resize(0, 0);
    f.xi_fc.resize(0, r_prev);
    f.xi_ff.resize(0, 0);
    return f;
  }

  f.xi_fc = ops.xi.bottomLeftCorner(s, r_prev);
  f.xi_ff = ops.xi.bottomRightCorner(s, s);

  const Eigen::MatrixXd& z_fine = basis.block(level).z_fine;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(z_fine);
  const Eigen::MatrixXd u =
      qr.householderQ() * Eigen::MatrixXd::Identity(fine_dim, s);
  const Eigen::MatrixXd t =
      qr.matrixQR().topRows(s).triangularView<Eigen::Upper>();

  const double b2 = f.b_perp * f.b_perp;
  const Eigen::MatrixXd core =
      t * (b2 * f.xi_ff - Eigen::MatrixXd::Identity(s, s)) * t.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(core);
  if (es.info() != Eigen::Success)
    throw NumericalError("conditional factors: eigensolve failed");
  f.d = es.eigenvalues();
  if (f.d.minCoeff() <= -1.0 + 1e-12)
    throw NumericalError(
        "conditional factors: fine-block precision not positive definite; "
        "operators and complement scalar are inconsistent");
  f.phi = u * es.eigenvectors();
  f.mean_core = (f.d.array() + 1.0).inverse().matrix().asDiagonal() *
                es.eigenvectors().transpose() * t;
  return f;
}

Eigen::VectorXd conditional_mean(const HierarchicalLisBasis& basis,
                                 const ConditionalFactors& f,
                                 const Eigen::VectorXd& r_c) {
  const int level = f.level;
  const int fine_dim = basis.hierarchy().added_dim(level);
  const int s = static_cast<int>(f.d.size());
  if (r_c.size() != basis.hierarchy().param_dim(level - 1))
    throw DimensionError("conditional mean: coarse residual length mismatch");
  if (s == 0) return Eigen::VectorXd::Zero(fine_dim);

  const Eigen::MatrixXd& z_coarse = basis.block(level).z_coarse;
  const double b2 = f.b_perp * f.b_perp;
  Eigen::VectorXd g = f.xi_fc * basis.apply_transpose(level - 1, r_c);
  g.noalias() += f.xi_ff * (z_coarse.transpose() * r_c);
  g.noalias() -= (z_coarse.transpose() * r_c) / b2;
  return -b2 * (f.phi * (f.mean_core * g));
}

Eigen::VectorXd conditional_noise(const ConditionalFactors& f,
                                  const Eigen::VectorXd& xi) {
  if (f.d.size() == 0) return f.b_perp * xi;
  const Eigen::VectorXd proj = f.phi.transpose() * xi;
  const Eigen::ArrayXd scale = (f.d.array() + 1.0).rsqrt() - 1.0;
  return f.b_perp * (xi + f.phi * (scale * proj.array()).matrix());
}

Eigen::VectorXd coupled_dili_propose(const HierarchicalLisBasis& basis,
                                     const DiliOperators& ops,
                                     const ConditionalFactors& f,
                                     const Eigen::VectorXd& v_cur,
                                     const Eigen::VectorXd& coarse_candidate,
                                     Rng& rng) {
  const int level = ops.level;
  const auto& h = basis.hierarchy();
  const int coarse_dim = h.param_dim(level - 1);
  const int fine_dim = h.added_dim(level);
  if (v_cur.size() != h.param_dim(level) ||
      coarse_candidate.size() != coarse_dim)
    throw DimensionError("coupled proposal: state lengths do not match level");

  const Eigen::VectorXd av = dili_mean_apply(basis, ops, v_cur);
  const Eigen::VectorXd r_c = coarse_candidate - av.head(coarse_dim);

  Eigen::VectorXd xi(fine_dim);
  rng.fill_normal(xi);
  const Eigen::VectorXd r_f =
      conditional_mean(basis, f, r_c) + conditional_noise(f, xi);

  Eigen::VectorXd out(v_cur.size());
  out.head(coarse_dim) = coarse_candidate;
  out.tail(fine_dim) = av.tail(fine_dim) + r_f;
  return out;
}

Eigen::VectorXd coupled_pcn_propose(const Eigen::VectorXd& v_cur,
                                    const Eigen::VectorXd& coarse_candidate,
                                    double a, Rng& rng) {
  if (!(a > -1.0 && a < 1.0))
    throw ConfigError("pcn: coefficient must lie in (-1, 1)");
  const auto coarse_dim = coarse_candidate.size();
  const auto fine_dim = v_cur.size() - coarse_dim;
  if (fine_dim < 0)
    throw DimensionError("coupled pcn: coarse candidate longer than the state");
  Eigen::VectorXd out(v_cur.size());
  out.head(coarse_dim) = coarse_candidate;
  const double b = std::sqrt(1.0 - a * a);
  for (Eigen::Index i = 0; i < fine_dim; ++i)
    out[coarse_dim + i] = a * v_cur[coarse_dim + i] + b * rng.normal();
  return out;
}

void OnlineCovariance::add(const Eigen::VectorXd& x) {
  if (x.size() != mean_.size())
    throw DimensionError("online covariance: dimension changed");
  ++count_;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_.noalias() += delta * (x - mean_).transpose();
}

Eigen::MatrixXd OnlineCovariance::covariance() const {
  if (count_ < 2)
    throw NumericalError("online covariance: need at least two samples");
  return (m2_ + m2_.transpose()) / (2.0 * (count_ - 1));
}

}  // namespace mldili
