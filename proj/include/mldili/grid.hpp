#pragma once

#include <Eigen/Dense>

#include "mldili/errors.hpp"

namespace mldili {

// Uniform Cartesian grid on [0,1]^2 with n cells per side. Node (i,j) sits
// at (i*h, j*h) and has linear index j*(n+1)+i.
class UnitSquareGrid {
 public:
  explicit UnitSquareGrid(int cells_per_side) : n_(cells_per_side) {
    if (n_ < 1) throw ConfigError("grid: need at least one cell per side");
  }

  static UnitSquareGrid from_mesh_size(double h) {
    const int n = static_cast<int>(std::lround(1.0 / h));
    if (std::abs(n * h - 1.0) > 1e-9)
      throw ConfigError("grid: 1/h must be an integer");
    return UnitSquareGrid(n);
  }

  int cells_per_side() const { return n_; }
  int nodes_per_side() const { return n_ + 1; }
  int num_nodes() const { return (n_ + 1) * (n_ + 1); }
  int num_cells() const { return n_ * n_; }
  double h() const { return 1.0 / n_; }

  int node_index(int i, int j) const { return j * (n_ + 1) + i; }
  double node_x(int index) const { return (index % (n_ + 1)) * h(); }
  double node_y(int index) const { return (index / (n_ + 1)) * h(); }

  // Node coordinates as two flat arrays (x then y), index-aligned.
  void node_coords(Eigen::VectorXd& xs, Eigen::VectorXd& ys) const {
    xs.resize(num_nodes());
    ys.resize(num_nodes());
    for (int k = 0; k < num_nodes(); ++k) {
      xs[k] = node_x(k);
      ys[k] = node_y(k);
    }
  }

  // Trapezoidal quadrature weights: h^2 scaled by 1/4 at corners, 1/2 on
  // edges, 1 in the interior. They sum to the domain area.
  Eigen::VectorXd trapezoid_weights() const {
    Eigen::VectorXd w(num_nodes());
    const double h2 = h() * h();
    for (int j = 0; j <= n_; ++j) {
      const double wy = (j == 0 || j == n_) ? 0.5 : 1.0;
      for (int i = 0; i <= n_; ++i) {
        const double wx = (i == 0 || i == n_) ? 0.5 : 1.0;
        w[node_index(i, j)] = h2 * wx * wy;
      }
    }
    return w;
  }

  // Bilinear interpolation weights of point (x,y): four (node, weight)
  // pairs of the containing cell.
  struct Interp {
    int node[4];
    double weight[4];
  };

  Interp interpolate(double x, double y) const {
    if (x < -1e-12 || x > 1.0 + 1e-12 || y < -1e-12 || y > 1.0 + 1e-12)
      throw DimensionError("grid: interpolation point outside [0,1]^2");
    const double hx = h();
    int ci = std::min(static_cast<int>(x / hx), n_ - 1);
    int cj = std::min(static_cast<int>(y / hx), n_ - 1);
    const double sx = x / hx - ci;
    const double sy = y / hx - cj;
    Interp out;
    out.node[0] = node_index(ci, cj);
    out.node[1] = node_index(ci + 1, cj);
    out.node[2] = node_index(ci, cj + 1);
    out.node[3] = node_index(ci + 1, cj + 1);
    out.weight[0] = (1 - sx) * (1 - sy);
    out.weight[1] = sx * (1 - sy);
    out.weight[2] = (1 - sx) * sy;
    out.weight[3] = sx * sy;
    return out;
  }

 private:
  int n_;
};

}  // namespace mldili
