#include "mldili/hierarchy.hpp"

#include <cmath>

#include "mldili/errors.hpp"

namespace mldili {

LevelHierarchy::LevelHierarchy(std::vector<double> mesh_size,
                               std::vector<int> fem_dof,
                               std::vector<int> param_dim)
    : mesh_size_(std::move(mesh_size)),
      fem_dof_(std::move(fem_dof)),
      param_dim_(std::move(param_dim)) {
  if (param_dim_.empty() || fem_dof_.size() != param_dim_.size() ||
      mesh_size_.size() != param_dim_.size())
    throw ConfigError("hierarchy: per-level arrays must be nonempty and equal length");
  for (std::size_t l = 1; l < param_dim_.size(); ++l) {
    if (param_dim_[l] < param_dim_[l - 1])
      throw ConfigError("hierarchy: parameter dimensions must be non-decreasing");
    if (fem_dof_[l] < fem_dof_[l - 1])
      throw ConfigError("hierarchy: forward-model dofs must be non-decreasing");
  }
}

LevelHierarchy LevelHierarchy::regular(double h0, std::vector<int> param_dim) {
  if (h0 <= 0.0) throw ConfigError("hierarchy: h0 must be positive");
  std::vector<double> h;
  std::vector<int> dofs;
  for (std::size_t l = 0; l < param_dim.size(); ++l) {
    const double hl = h0 * std::pow(2.0, -static_cast<double>(l));
    const int n = static_cast<int>(std::lround(1.0 / hl));
    h.push_back(hl);
    dofs.push_back((n + 1) * (n + 1));
  }
  return LevelHierarchy(std::move(h), std::move(dofs), std::move(param_dim));
}

int LevelHierarchy::added_dim(int level) const {
  return level == 0 ? param_dim_.at(0)
                    : param_dim_.at(level) - param_dim_.at(level - 1);
}

CoarseFineSplit split(const LevelHierarchy& h, const WhitenedVector& v) {
  if (v.level < 1)
    throw DimensionError("split: level-0 vectors have no coarser level");
  if (v.coeffs.size() != h.param_dim(v.level))
    throw DimensionError("split: vector length does not match its level");
  const int rc = h.param_dim(v.level - 1);
  return {v.coeffs.head(rc), v.coeffs.tail(v.coeffs.size() - rc)};
}

WhitenedVector embed(const LevelHierarchy& h, int level,
                     const Eigen::VectorXd& coarse,
                     const Eigen::VectorXd& fine) {
  if (level < 1 || level >= h.num_levels())
    throw DimensionError("embed: level out of range");
  if (coarse.size() != h.param_dim(level - 1) ||
      fine.size() != h.param_dim(level) - h.param_dim(level - 1))
    throw DimensionError("embed: block lengths do not match the hierarchy");
  WhitenedVector out;
  out.level = level;
  out.coeffs.resize(h.param_dim(level));
  out.coeffs.head(coarse.size()) = coarse;
  out.coeffs.tail(fine.size()) = fine;
  return out;
}

WhitenedVector restrict_to_coarse(const LevelHierarchy& h,
                                  const WhitenedVector& v) {
  if (v.level < 1)
    throw DimensionError("restrict: level-0 vectors have no coarser level");
  if (v.coeffs.size() != h.param_dim(v.level))
    throw DimensionError("restrict: vector length does not match its level");
  return {v.level - 1, v.coeffs.head(h.param_dim(v.level - 1))};
}

}  // namespace mldili
