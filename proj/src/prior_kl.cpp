#include "mldili/prior_kl.hpp"

#include <cmath>
#include <numbers>

#include "mldili/errors.hpp"
#include "mldili/io.hpp"
#include "mldili/simd_kernels.hpp"

namespace mldili {

Eigen::MatrixXd kernel_gram(const Eigen::VectorXd& xs,
                            const Eigen::VectorXd& ys,
                            const KernelSpec& spec) {
  const auto n = xs.size();
  if (ys.size() != n) throw DimensionError("kernel_gram: coordinate arrays differ in length");
  Eigen::MatrixXd gram(n, n);
  Eigen::VectorXd d2(n);
  const auto& kern = kernels::active();
  for (Eigen::Index i = 0; i < n; ++i) {
    kern.sq_dist_2d(xs[i], ys[i], xs.data(), ys.data(), d2.data(), n);
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = spec.variance *
                       std::exp(-spec.correlation_rate * std::sqrt(d2[j]));
      gram(i, j) = v;
      gram(j, i) = v;
    }
  }
  return gram;
}

namespace {

// First component whose magnitude is non-negligible decides the sign.
void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12 * scale) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

// a strictly before b at the first component where they differ.
bool lex_before(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > 1e-10) return a[i] > b[i];
  }
  return false;
}

}  // namespace

KlBasis kl_decompose(const UnitSquareGrid& grid, const KernelSpec& spec,
                     int num_modes) {
  const int n = grid.num_nodes();
  if (num_modes < 1 || num_modes > n)
    throw DimensionError("kl_decompose: mode count must be in [1, num_nodes]");

  Eigen::VectorXd xs, ys;
  grid.node_coords(xs, ys);
  const Eigen::VectorXd w = grid.trapezoid_weights();
  const Eigen::VectorXd sqw = w.cwiseSqrt();

  Eigen::MatrixXd op = kernel_gram(xs, ys, spec);
  for (Eigen::Index i = 0; i < op.rows(); ++i)
    for (Eigen::Index j = 0; j < op.cols(); ++j) op(i, j) *= sqw[i] * sqw[j];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op);
  if (es.info() != Eigen::Success)
    throw NumericalError("kl_decompose: dense symmetric eigensolver failed");

  KlBasis basis;
  basis.eigenvalues.resize(num_modes);
  basis.modes.resize(n, num_modes);
  basis.mean = Eigen::VectorXd::Zero(n);

  const double lam_max = std::max(1.0, es.eigenvalues().maxCoeff());
  for (int k = 0; k < num_modes; ++k) {
    const Eigen::Index src = n - 1 - k;  // Eigen returns ascending order
    double lam = es.eigenvalues()[src];
    if (lam < -1e-10 * lam_max)
      throw NumericalError("kl_decompose: covariance operator has a significantly negative eigenvalue");
    basis.eigenvalues[k] = std::max(lam, 0.0);
    basis.modes.col(k) = es.eigenvectors().col(src).cwiseQuotient(sqw);
    fix_sign(basis.modes.col(k));
  }

  // Deterministic order inside (numerically) degenerate clusters.
  for (int k = 0; k + 1 < num_modes; ++k) {
    if (std::abs(basis.eigenvalues[k] - basis.eigenvalues[k + 1]) <=
        1e-12 * lam_max) {
      basis.degenerate_pairs = true;
      if (lex_before(basis.modes.col(k + 1), basis.modes.col(k))) {
        basis.modes.col(k).swap(basis.modes.col(k + 1));
        std::swap(basis.eigenvalues[k], basis.eigenvalues[k + 1]);
      }
    }
  }
  return basis;
}

KlExpansion::KlExpansion(const LevelHierarchy& hierarchy,
                         const KernelSpec& spec, int reference_level)
    : spec_(spec), reference_level_(reference_level) {
  if (reference_level < 0 || reference_level >= hierarchy.num_levels())
    throw ConfigError("kl: reference level out of range");

  const UnitSquareGrid ref_grid =
      UnitSquareGrid::from_mesh_size(hierarchy.mesh_size(reference_level));
  const int r_max = hierarchy.param_dim(hierarchy.finest());
  const KlBasis ref = kl_decompose(ref_grid, spec, r_max);

  bases_.resize(hierarchy.num_levels());
  for (int level = 0; level < hierarchy.num_levels(); ++level) {
    const UnitSquareGrid lg =
        UnitSquareGrid::from_mesh_size(hierarchy.mesh_size(level));
    const int r = hierarchy.param_dim(level);
    KlBasis& b = bases_[level];
    b.level = level;
    b.degenerate_pairs = ref.degenerate_pairs;
    b.eigenvalues = ref.eigenvalues.head(r);
    b.mean = Eigen::VectorXd::Zero(lg.num_nodes());
    b.modes.resize(lg.num_nodes(), r);

    if (level <= reference_level) {
      const int stride = ref_grid.cells_per_side() / lg.cells_per_side();
      if (stride * lg.cells_per_side() != ref_grid.cells_per_side())
        throw ConfigError("kl: level grids must nest into the reference grid");
      for (int j = 0; j < lg.nodes_per_side(); ++j)
        for (int i = 0; i < lg.nodes_per_side(); ++i)
          b.modes.row(lg.node_index(i, j)) =
              ref.modes.row(ref_grid.node_index(i * stride, j * stride))
                  .head(r);
    } else {
      for (int k = 0; k < lg.num_nodes(); ++k) {
        const auto interp = ref_grid.interpolate(lg.node_x(k), lg.node_y(k));
        b.modes.row(k).setZero();
        for (int t = 0; t < 4; ++t)
          b.modes.row(k) +=
              interp.weight[t] * ref.modes.row(interp.node[t]).head(r);
      }
    }
  }
}

Eigen::VectorXd synthesize_field(const WhitenedVector& v,
                                 const KlBasis& basis) {
  if (v.level != basis.level)
    throw DimensionError("synthesize_field: vector level does not match basis level");
  if (v.coeffs.size() != basis.eigenvalues.size())
    throw DimensionError("synthesize_field: coefficient length does not match basis rank");
  return basis.mean +
         basis.modes *
             basis.eigenvalues.cwiseSqrt().cwiseProduct(v.coeffs).matrix();
}

double prior_logpdf(const Eigen::VectorXd& v) {
  constexpr double log_two_pi = 1.8378770664093454836;
  return -0.5 * v.squaredNorm() -
         0.5 * static_cast<double>(v.size()) * log_two_pi;
}

namespace {
constexpr char kKlMagic[8] = {'M', 'L', 'K', 'L', 'B', 'A', 'S', '1'};
}

void KlExpansion::save(const std::string& path) const {
  auto os = io::open_out(path);
  io::write_magic(os, kKlMagic);
  io::put_u64(os, bases_.size());
  io::put_u64(os, static_cast<std::uint64_t>(reference_level_));
  io::put_f64(os, spec_.correlation_rate);
  io::put_f64(os, spec_.variance);
  for (const KlBasis& b : bases_) {
    io::put_u64(os, static_cast<std::uint64_t>(b.level));
    io::put_u64(os, static_cast<std::uint64_t>(b.eigenvalues.size()));
    io::put_u64(os, static_cast<std::uint64_t>(b.modes.rows()));
    io::put_vector(os, b.eigenvalues);
    io::put_matrix(os, b.modes);
  }
  if (!os) throw NumericalError("kl: failed writing " + path);
}

KlExpansion KlExpansion::load(const std::string& path,
                              const LevelHierarchy& hierarchy,
                              const KernelSpec& spec) {
  auto is = io::open_in(path);
  io::check_magic(is, kKlMagic, "kl basis file");
  const auto num_levels = static_cast<int>(io::get_u64(is));
  if (num_levels != hierarchy.num_levels())
    throw ConfigError("kl file does not match the configured hierarchy");
  KlExpansion out;
  out.spec_ = spec;
  out.reference_level_ = static_cast<int>(io::get_u64(is));
  const double rate = io::get_f64(is);
  const double var = io::get_f64(is);
  if (std::abs(rate - spec.correlation_rate) > 1e-12 ||
      std::abs(var - spec.variance) > 1e-12)
    throw ConfigError("kl file was built for a different kernel");
  out.bases_.resize(num_levels);
  for (int level = 0; level < num_levels; ++level) {
    KlBasis& b = out.bases_[level];
    b.level = static_cast<int>(io::get_u64(is));
    const auto r = static_cast<Eigen::Index>(io::get_u64(is));
    const auto nodes = static_cast<Eigen::Index>(io::get_u64(is));
    if (b.level != level || r != hierarchy.param_dim(level) ||
        nodes != hierarchy.fem_dof(level))
      throw ConfigError("kl file does not match the configured hierarchy");
    b.eigenvalues.resize(r);
    io::get_vector(is, b.eigenvalues);
    b.modes.resize(nodes, r);
    io::get_matrix(is, b.modes);
    b.mean = Eigen::VectorXd::Zero(nodes);
  }
  return out;
}

}  // namespace mldili
