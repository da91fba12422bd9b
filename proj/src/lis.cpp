#include "mldili/lis.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "mldili/errors.hpp"
#include "mldili/io.hpp"

namespace mldili {

AveragedGnh::AveragedGnh(ForwardModel& model, int level,
                         const Eigen::MatrixXd& samples, int workers)
    : dim_(model.hierarchy().param_dim(level)),
      workers_(std::max(1, workers)) {
  if (samples.rows() != dim_)
    throw DimensionError("averaged gnh: sample dimension does not match level");
  if (samples.cols() < 1)
    throw DimensionError("averaged gnh: need at least one reference sample");
  ops_.reserve(samples.cols());
  for (Eigen::Index k = 0; k < samples.cols(); ++k)
    ops_.push_back(model.linearize(level, samples.col(k)));
}

Eigen::VectorXd AveragedGnh::apply(const Eigen::VectorXd& dv) const {
  if (dv.size() != dim_)
    throw DimensionError("averaged gnh: direction length does not match level");
  const int k = num_samples();
  Eigen::MatrixXd partial(dim_, k);
  if (workers_ <= 1 || k == 1) {
    for (int i = 0; i < k; ++i) partial.col(i) = ops_[i]->gnh_apply(dv);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    const int nthreads = std::min(workers_, k);
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < k; i = next.fetch_add(1))
          partial.col(i) = ops_[i]->gnh_apply(dv);
      });
    for (auto& th : pool) th.join();
  }
  // Fixed-order reduction keeps the result independent of scheduling.
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim_);
  for (int i = 0; i < k; ++i) acc += partial.col(i);
  return acc / static_cast<double>(k);
}

void HierarchicalLisBasis::append_level(LisLevelBlock block) {
  const int level = num_levels();
  if (level >= hierarchy_->num_levels())
    throw DimensionError("lis basis: more blocks than hierarchy levels");
  const int fine_dim = hierarchy_->added_dim(level);
  const int coarse_dim = level == 0 ? 0 : hierarchy_->param_dim(level - 1);
  if (block.z_fine.rows() != fine_dim ||
      (block.z_coarse.size() > 0 && block.z_coarse.rows() != coarse_dim) ||
      (level > 0 && block.z_coarse.cols() != block.z_fine.cols()))
    throw DimensionError("lis basis: block shapes do not match the hierarchy");
  if (level == 0 && block.z_coarse.size() != 0)
    throw DimensionError("lis basis: base block cannot have a coarse part");
  if (block.z_coarse.size() == 0)
    block.z_coarse.resize(coarse_dim, block.z_fine.cols());
  blocks_.push_back(std::move(block));
}

int HierarchicalLisBasis::rank(int level) const {
  int r = 0;
  for (int j = 0; j <= level; ++j) r += added(j);
  return r;
}

Eigen::VectorXd HierarchicalLisBasis::apply(int level, const Eigen::VectorXd& w,
                                            std::uint64_t* flops) const {
  if (level < 0 || level >= num_levels())
    throw DimensionError("lis apply: level out of range");
  if (w.size() != rank(level))
    throw DimensionError("lis apply: coefficient length does not match rank");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(hierarchy_->param_dim(level));
  int offset = 0;
  for (int j = 0; j <= level; ++j) {
    const auto& blk = blocks_[j];
    const int s = added(j);
    if (s > 0) {
      const auto wj = w.segment(offset, s);
      const int coarse_dim = j == 0 ? 0 : hierarchy_->param_dim(j - 1);
      if (coarse_dim > 0) x.head(coarse_dim).noalias() += blk.z_coarse * wj;
      x.segment(coarse_dim, hierarchy_->added_dim(j)).noalias() +=
          blk.z_fine * wj;
      if (flops)
        *flops += static_cast<std::uint64_t>(hierarchy_->param_dim(j)) * s;
    }
    offset += s;
  }
  return x;
}

Eigen::VectorXd HierarchicalLisBasis::apply_transpose(
    int level, const Eigen::VectorXd& x, std::uint64_t* flops) const {
  if (level < 0 || level >= num_levels())
    throw DimensionError("lis apply_transpose: level out of range");
  if (x.size() != hierarchy_->param_dim(level))
    throw DimensionError("lis apply_transpose: vector length does not match level");
  Eigen::VectorXd w(rank(level));
  int offset = 0;
  for (int j = 0; j <= level; ++j) {
    const auto& blk = blocks_[j];
    const int s = added(j);
    if (s > 0) {
      const int coarse_dim = j == 0 ? 0 : hierarchy_->param_dim(j - 1);
      Eigen::VectorXd wj =
          blk.z_fine.transpose() * x.segment(coarse_dim, hierarchy_->added_dim(j));
      if (coarse_dim > 0)
        wj.noalias() += blk.z_coarse.transpose() * x.head(coarse_dim);
      w.segment(offset, s) = wj;
      if (flops)
        *flops += static_cast<std::uint64_t>(hierarchy_->param_dim(j)) * s;
    }
    offset += s;
  }
  return w;
}

Eigen::MatrixXd HierarchicalLisBasis::densify(int level) const {
  const int r = rank(level);
  Eigen::MatrixXd out(hierarchy_->param_dim(level), r);
  for (int c = 0; c < r; ++c)
    out.col(c) = apply(level, Eigen::VectorXd::Unit(r, c));
  return out;
}

LisLevelBlock build_base_block(const AveragedGnh& op, const LisOptions& opt) {
  if (opt.threshold <= 0.0)
    throw ConfigError("lis: truncation threshold must be positive");
  const auto eig = lanczos_leading(
      [&](const Eigen::VectorXd& x) { return op.apply(x); }, op.dim(),
      std::min(opt.rank_cap, op.dim()), opt.threshold, opt.lanczos);
  LisLevelBlock blk;
  blk.z_fine = eig.vectors;
  blk.eigenvalues = eig.values;
  return blk;
}

LisLevelBlock enrich_block(const HierarchicalLisBasis& basis,
                           const AveragedGnh& op, const LisOptions& opt) {
  const int level = basis.num_levels();
  if (level < 1)
    throw DimensionError("lis enrich: build the base block first");
  const auto& h = basis.hierarchy();
  const int dim = h.param_dim(level);
  if (op.dim() != dim)
    throw DimensionError("lis enrich: operator level does not match basis");
  const int coarse_dim = h.param_dim(level - 1);

  // Orthogonal complement of the lifted basis [Psi_{l-1,r}; 0].
  auto deflate = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd out = x;
    const Eigen::VectorXd w =
        basis.apply_transpose(level - 1, x.head(coarse_dim));
    out.head(coarse_dim) -= basis.apply(level - 1, w);
    return out;
  };
  auto deflated_op = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return deflate(op.apply(deflate(x)));
  };

  LanczosOptions lopt = opt.lanczos;
  lopt.project = deflate;
  const int cap = std::min(opt.rank_cap, dim - basis.rank(level - 1));
  LisLevelBlock blk;
  if (cap <= 0) {
    blk.z_coarse.resize(coarse_dim, 0);
    blk.z_fine.resize(dim - coarse_dim, 0);
    blk.eigenvalues.resize(0);
    return blk;
  }
  const auto eig = lanczos_leading(deflated_op, dim, cap, opt.threshold, lopt);

  // One exact re-projection pass keeps the combined basis orthonormal to
  // machine precision without moving the Ritz values.
  Eigen::MatrixXd cols = eig.vectors;
  for (Eigen::Index c = 0; c < cols.cols(); ++c) {
    cols.col(c) = deflate(cols.col(c));
    for (Eigen::Index p = 0; p < c; ++p)
      cols.col(c) -= cols.col(p).dot(cols.col(c)) * cols.col(p);
    cols.col(c).normalize();
  }

  blk.z_coarse = cols.topRows(coarse_dim);
  blk.z_fine = cols.bottomRows(dim - coarse_dim);
  blk.eigenvalues = eig.values;
  return blk;
}

namespace {

// Least-squares slope of log(values) against the level index.
double log_slope(const std::vector<double>& values) {
  const int n = static_cast<int>(values.size());
  if (n < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double y = std::log(std::max(values[i], 1e-300));
    sx += i;
    sy += y;
    sxx += static_cast<double>(i) * i;
    sxy += i * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double reduction_bound(double c, double growth, double decay, int levels) {
  const int big_l = levels - 1;
  double series;
  if (std::abs(growth - decay) < 1e-14) {
    series = big_l + 1;
  } else {
    const double a = std::exp(-std::abs(growth - decay));
    series = std::min(static_cast<double>(big_l + 1), 1.0 / (1.0 - a));
  }
  return series * std::exp(-std::min(growth, decay) * big_l) / c;
}

}  // namespace

CostModelReport cost_model(const CostModelInput& in) {
  const int levels = static_cast<int>(in.param_dims.size());
  if (levels < 1 || in.added_ranks.size() != in.param_dims.size() ||
      in.fem_dofs.size() != in.param_dims.size() ||
      in.single_ranks.size() != in.param_dims.size())
    throw DimensionError("cost_model: per-level arrays must align");
  for (double s : in.added_ranks)
    if (s < 0) throw ConfigError("cost_model: ranks must be non-negative");

  CostModelReport out;
  double zeta = 0.0, chi = 0.0;
  out.storage_factor_by_level.resize(levels);
  for (int l = 0; l < levels; ++l) {
    zeta += in.param_dims[l] * in.added_ranks[l];
    chi += in.added_ranks[l] * std::pow(in.fem_dofs[l], in.theta_c);
    const double single = in.param_dims[l] * in.single_ranks[l];
    out.storage_factor_by_level[l] = single > 0 ? zeta / single : 0.0;
  }
  out.zeta_multi = zeta;
  out.chi_multi = chi;
  out.zeta_single = in.param_dims[levels - 1] * in.single_ranks[levels - 1];
  out.chi_single = in.single_ranks[levels - 1] *
                   std::pow(in.fem_dofs[levels - 1], in.theta_c);

  out.beta_p = log_slope(in.param_dims);
  out.beta_r = -log_slope(in.added_ranks);
  out.beta_m = log_slope(in.fem_dofs);
  out.c_empirical =
      in.added_ranks[0] > 0 ? in.single_ranks[levels - 1] / in.added_ranks[0]
                            : 0.0;

  if (out.c_empirical > 0) {
    out.storage_bound =
        reduction_bound(out.c_empirical, out.beta_p, out.beta_r, levels);
    out.build_bound = reduction_bound(out.c_empirical,
                                      out.beta_m * in.theta_c, out.beta_r,
                                      levels);
  }
  return out;
}

LisBuildOutcome build_lis_pipeline(
    ForwardModel& model, std::shared_ptr<const LevelHierarchy> hierarchy,
    const LisBuildOptions& opt) {
  LisBuildOutcome out{
      {opt.threshold, {}, HierarchicalLisBasis(hierarchy), {}}, {}, {}, {}};
  const int levels = opt.max_level < 0
                         ? hierarchy->num_levels()
                         : std::min(opt.max_level + 1, hierarchy->num_levels());

  for (int level = 0; level < levels; ++level) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto map = find_map(model, level, opt.map);

    LanczosOptions lopt = opt.lanczos;
    lopt.seed = opt.seed ^ (0xa11ceull + level);
    const auto ref = build_laplace_reference(model, level, map.point,
                                             opt.threshold, opt.rank_cap, lopt);
    const Eigen::MatrixXd samples = laplace_sample_matrix(
        ref, opt.reference_samples, opt.seed + 7919ull * level);
    AveragedGnh averaged(model, level, samples, opt.workers);

    LisOptions lis_opt;
    lis_opt.threshold = opt.threshold;
    lis_opt.rank_cap = opt.rank_cap;
    lis_opt.lanczos = lopt;
    if (level == 0)
      out.artifact.basis.append_level(build_base_block(averaged, lis_opt));
    else
      out.artifact.basis.append_level(
          enrich_block(out.artifact.basis, averaged, lis_opt));
    out.artifact.references.push_back(ref);
    out.artifact.reference_samples.push_back(opt.reference_samples);
    out.level_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count());

    if (opt.single_level_too) {
      const auto s0 = std::chrono::steady_clock::now();
      const auto single = lanczos_leading(
          [&](const Eigen::VectorXd& x) { return averaged.apply(x); },
          averaged.dim(), std::min(opt.rank_cap, averaged.dim()),
          opt.threshold, lopt);
      out.single_ranks.push_back(static_cast<int>(single.values.size()));
      out.single_seconds.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - s0)
              .count());
    }
  }
  return out;
}

namespace {
constexpr char kLisMagic[8] = {'M', 'L', 'L', 'I', 'S', 'B', 'A', '1'};
}

void save_lis(const std::string& path, const LisArtifact& artifact) {
  const auto& basis = artifact.basis;
  const auto& h = basis.hierarchy();
  const int levels = basis.num_levels();
  if (static_cast<int>(artifact.references.size()) != levels ||
      static_cast<int>(artifact.reference_samples.size()) != levels)
    throw DimensionError("save_lis: per-level metadata must align with basis");

  auto os = io::open_out(path);
  io::write_magic(os, kLisMagic);
  io::put_u64(os, static_cast<std::uint64_t>(levels));
  io::put_f64(os, artifact.threshold);
  for (int l = 0; l < levels; ++l) {
    io::put_u64(os, static_cast<std::uint64_t>(h.param_dim(l)));
    io::put_u64(os, static_cast<std::uint64_t>(basis.added(l)));
    io::put_u64(os, static_cast<std::uint64_t>(artifact.reference_samples[l]));
  }
  for (int l = 0; l < levels; ++l) {
    const auto& blk = basis.block(l);
    io::put_vector(os, blk.eigenvalues);
    io::put_matrix(os, blk.z_coarse);
    io::put_matrix(os, blk.z_fine);
    const auto& ref = artifact.references[l];
    io::put_vector(os, ref.map_point);
    io::put_u64(os, static_cast<std::uint64_t>(ref.eigenvalues.size()));
    io::put_vector(os, ref.eigenvalues);
    io::put_matrix(os, ref.eigenvectors);
  }
  if (!os) throw NumericalError("save_lis: failed writing " + path);
}

LisArtifact load_lis(const std::string& path,
                     std::shared_ptr<const LevelHierarchy> hierarchy) {
  auto is = io::open_in(path);
  io::check_magic(is, kLisMagic, "lis file");
  const int levels = static_cast<int>(io::get_u64(is));
  if (levels > hierarchy->num_levels())
    throw ConfigError("lis file has more levels than the configured hierarchy");

  LisArtifact out{0.0, {}, HierarchicalLisBasis(hierarchy), {}};
  out.threshold = io::get_f64(is);
  std::vector<int> added(levels);
  for (int l = 0; l < levels; ++l) {
    const auto r = static_cast<int>(io::get_u64(is));
    added[l] = static_cast<int>(io::get_u64(is));
    out.reference_samples.push_back(static_cast<int>(io::get_u64(is)));
    if (r != hierarchy->param_dim(l))
      throw ConfigError("lis file does not match the configured hierarchy");
  }
  for (int l = 0; l < levels; ++l) {
    LisLevelBlock blk;
    const int coarse_dim = l == 0 ? 0 : hierarchy->param_dim(l - 1);
    blk.eigenvalues.resize(added[l]);
    io::get_vector(is, blk.eigenvalues);
    blk.z_coarse.resize(coarse_dim, added[l]);
    io::get_matrix(is, blk.z_coarse);
    blk.z_fine.resize(hierarchy->added_dim(l), added[l]);
    io::get_matrix(is, blk.z_fine);
    out.basis.append_level(std::move(blk));

    LaplaceReference ref;
    ref.level = l;
    ref.map_point.resize(hierarchy->param_dim(l));
    io::get_vector(is, ref.map_point);
    const auto m = static_cast<Eigen::Index>(io::get_u64(is));
    ref.eigenvalues.resize(m);
    io::get_vector(is, ref.eigenvalues);
    ref.eigenvectors.resize(hierarchy->param_dim(l), m);
    io::get_matrix(is, ref.eigenvectors);
    out.references.push_back(std::move(ref));
  }
  return out;
}

}  // namespace mldili
