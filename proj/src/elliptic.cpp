#include "mldili/elliptic.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mldili/errors.hpp"
#include "mldili/io.hpp"
#include "mldili/rng.hpp"

namespace mldili {

namespace {

// Bilinear shape functions on the reference square [-1,1]^2 tabulated at the
// 2x2 Gauss points. Local corner order (0,0),(1,0),(0,1),(1,1). With unit
// Gauss weights and |J| = h^2/4 the (2/h)^2 gradient scaling cancels, so
// stiffness contributions are kappa * (dxi_a*dxi_b + deta_a*deta_b).
struct ElementTables {
  double N[4][4];
  double dxi[4][4];
  double deta[4][4];
};

const ElementTables& tables() {
  static const ElementTables t = [] {
    ElementTables tt{};
    const double s = 1.0 / std::sqrt(3.0);
    const double gx[4] = {-s, s, -s, s};
    const double gy[4] = {-s, -s, s, s};
    const double cx[4] = {-1, 1, -1, 1};
    const double cy[4] = {-1, -1, 1, 1};
    for (int q = 0; q < 4; ++q) {
      for (int a = 0; a < 4; ++a) {
        tt.N[q][a] = 0.25 * (1 + cx[a] * gx[q]) * (1 + cy[a] * gy[q]);
        tt.dxi[q][a] = 0.25 * cx[a] * (1 + cy[a] * gy[q]);
        tt.deta[q][a] = 0.25 * cy[a] * (1 + cx[a] * gx[q]);
      }
    }
    return tt;
  }();
  return t;
}

}  // namespace

Eigen::MatrixX2d default_sensor_layout() {
  std::vector<std::pair<double, double>> pts;
  for (int i = 1; i <= 9; ++i)
    for (int j = 1; j <= 8; ++j)
      pts.emplace_back(i / 10.0, j / 9.0);
  std::size_t drop = 0;
  double best = 1e30;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double dx = pts[k].first - 0.5;
    const double dy = pts[k].second - 0.5;
    const double d2 = dx * dx + dy * dy;
    if (d2 < best) {
      best = d2;
      drop = k;
    }
  }
  Eigen::MatrixX2d out(pts.size() - 1, 2);
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (k == drop) continue;
    out(r, 0) = pts[k].first;
    out(r, 1) = pts[k].second;
    ++r;
  }
  return out;
}

EllipticLevel::EllipticLevel(const UnitSquareGrid& grid,
                             const Eigen::MatrixX2d& sensors)
    : grid_(grid) {
  const int n = grid_.cells_per_side();
  const int nn = grid_.num_nodes();

  node_to_free_.assign(nn, -1);
  dirichlet_values_.resize(nn);
  qoi_weight_.resize(nn);
  for (int k = 0; k < nn; ++k) {
    dirichlet_values_[k] = grid_.node_x(k);
    qoi_weight_[k] = 1.0 - grid_.node_x(k);
  }
  for (int j = 0; j <= n; ++j)
    for (int i = 1; i < n; ++i) {
      node_to_free_[grid_.node_index(i, j)] =
          static_cast<int>(free_to_node_.size());
      free_to_node_.push_back(grid_.node_index(i, j));
    }

  for (Eigen::Index s = 0; s < sensors.rows(); ++s) {
    const double x = sensors(s, 0);
    const double y = sensors(s, 1);
    if (x <= 0.0 || x >= 1.0 || y <= 0.0 || y >= 1.0)
      throw ConfigError("sensors must be strictly interior to the domain");
    sensor_interp_.push_back(grid_.interpolate(x, y));
  }

  // Sparsity pattern of the free-node stiffness plus per-element scatter
  // slots into its value array.
  const int nfree = num_free();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(grid_.num_cells()) * 16);
  auto cell_nodes = [&](int cell, int out[4]) {
    const int ci = cell % n;
    const int cj = cell / n;
    out[0] = grid_.node_index(ci, cj);
    out[1] = grid_.node_index(ci + 1, cj);
    out[2] = grid_.node_index(ci, cj + 1);
    out[3] = grid_.node_index(ci + 1, cj + 1);
  };
  for (int cell = 0; cell < grid_.num_cells(); ++cell) {
    int nodes[4];
    cell_nodes(cell, nodes);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const int fa = node_to_free_[nodes[a]];
        const int fb = node_to_free_[nodes[b]];
        if (fa >= 0 && fb >= 0) trips.emplace_back(fa, fb, 1.0);
      }
  }
  pattern_.resize(nfree, nfree);
  pattern_.setFromTriplets(trips.begin(), trips.end());
  pattern_.makeCompressed();

  auto slot_of = [&](int row, int col) {
    for (int idx = pattern_.outerIndexPtr()[col];
         idx < pattern_.outerIndexPtr()[col + 1]; ++idx)
      if (pattern_.innerIndexPtr()[idx] == row) return idx;
    throw NumericalError("elliptic: pattern slot lookup failed");
  };
  cell_slots_.resize(grid_.num_cells());
  for (int cell = 0; cell < grid_.num_cells(); ++cell) {
    int nodes[4];
    cell_nodes(cell, nodes);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const int fa = node_to_free_[nodes[a]];
        const int fb = node_to_free_[nodes[b]];
        int slot;
        if (fa < 0)
          slot = -2;  // Dirichlet test function: no equation
        else if (fb < 0)
          slot = -1;  // contributes to the lifted right-hand side
        else
          slot = slot_of(fa, fb);
        cell_slots_[cell][a * 4 + b] = slot;
      }
  }
}

EllipticSolver::EllipticSolver(std::shared_ptr<const EllipticLevel> level)
    : level_(std::move(level)) {
  matrix_ = level_->pattern_;
  rhs_free_.resize(level_->num_free());
  state_.kappa_gauss.resize(level_->grid_.num_cells(), 4);
  state_.pressure.resize(level_->grid_.num_nodes());
  state_.observables.resize(level_->num_sensors());
}

void EllipticSolver::assemble(const Eigen::VectorXd& u_nodal) {
  const auto& lvl = *level_;
  const auto& t = tables();
  const int n = lvl.grid_.cells_per_side();
  if (u_nodal.size() != lvl.grid_.num_nodes())
    throw DimensionError("elliptic: nodal field length does not match grid");
  for (Eigen::Index k = 0; k < u_nodal.size(); ++k)
    if (!std::isfinite(u_nodal[k]))
      throw NumericalError(
          "elliptic: non-finite coefficient field at node " +
          std::to_string(k) + " (" + std::to_string(lvl.grid_.node_x(k)) +
          ", " + std::to_string(lvl.grid_.node_y(k)) + ")");

  double* values = matrix_.valuePtr();
  std::fill(values, values + matrix_.nonZeros(), 0.0);
  rhs_free_.setZero();

  for (int cell = 0; cell < lvl.grid_.num_cells(); ++cell) {
    const int ci = cell % n;
    const int cj = cell / n;
    const int g0 = lvl.grid_.node_index(ci, cj);
    const int g1 = lvl.grid_.node_index(ci + 1, cj);
    const int g2 = lvl.grid_.node_index(ci, cj + 1);
    const int g3 = lvl.grid_.node_index(ci + 1, cj + 1);
    const double u[4] = {u_nodal[g0], u_nodal[g1], u_nodal[g2], u_nodal[g3]};
    const int nodes[4] = {g0, g1, g2, g3};

    double kappa[4];
    for (int q = 0; q < 4; ++q) {
      double uq = 0.0;
      for (int a = 0; a < 4; ++a) uq += t.N[q][a] * u[a];
      kappa[q] = std::exp(uq);
      state_.kappa_gauss(cell, q) = kappa[q];
    }

    double ke[4][4];
    for (int a = 0; a < 4; ++a)
      for (int b = a; b < 4; ++b) {
        double s = 0.0;
        for (int q = 0; q < 4; ++q)
          s += kappa[q] *
               (t.dxi[q][a] * t.dxi[q][b] + t.deta[q][a] * t.deta[q][b]);
        ke[a][b] = s;
        ke[b][a] = s;
      }

    const auto& slots = lvl.cell_slots_[cell];
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const int slot = slots[a * 4 + b];
        if (slot >= 0)
          values[slot] += ke[a][b];
        else if (slot == -1)
          rhs_free_[lvl.node_to_free_[nodes[a]]] -=
              ke[a][b] * lvl.dirichlet_values_[nodes[b]];
      }
  }
}

Eigen::VectorXd EllipticSolver::solve_free(const Eigen::VectorXd& rhs) {
  Eigen::VectorXd x = cholesky_.solve(rhs);
  if (cholesky_.info() != Eigen::Success)
    throw NumericalError("elliptic: triangular solve failed");
  return x;
}

const ForwardState& EllipticSolver::solve_observe(
    const Eigen::VectorXd& u_nodal) {
  const auto& lvl = *level_;
  assemble(u_nodal);
  if (!pattern_analyzed_) {
    cholesky_.analyzePattern(matrix_);
    pattern_analyzed_ = true;
  }
  cholesky_.factorize(matrix_);
  if (cholesky_.info() != Eigen::Success)
    throw NumericalError("elliptic: stiffness factorization failed");
  const Eigen::VectorXd pf = solve_free(rhs_free_);

  const double rhs_norm = rhs_free_.norm();
  if (rhs_norm > 0.0 &&
      (matrix_ * pf - rhs_free_).norm() > 1e-10 * rhs_norm)
    throw NumericalError("elliptic: linear solve residual above tolerance");

  for (int k = 0; k < lvl.grid_.num_nodes(); ++k) {
    const int f = lvl.node_to_free_[k];
    state_.pressure[k] = f >= 0 ? pf[f] : lvl.dirichlet_values_[k];
  }
  for (int s = 0; s < lvl.num_sensors(); ++s) {
    const auto& in = lvl.sensor_interp_[s];
    double v = 0.0;
    for (int corner = 0; corner < 4; ++corner) v += in.weight[corner] * state_.pressure[in.node[corner]];
    state_.observables[s] = v;
  }
  state_.token = ++epoch_;
  return state_;
}

double EllipticSolver::qoi() const {
  const auto& lvl = *level_;
  const auto& t = tables();
  const int n = lvl.grid_.cells_per_side();
  double q_total = 0.0;
  for (int cell = 0; cell < lvl.grid_.num_cells(); ++cell) {
    const int ci = cell % n;
    const int cj = cell / n;
    const int g[4] = {lvl.grid_.node_index(ci, cj),
                      lvl.grid_.node_index(ci + 1, cj),
                      lvl.grid_.node_index(ci, cj + 1),
                      lvl.grid_.node_index(ci + 1, cj + 1)};
    for (int q = 0; q < 4; ++q) {
      double px = 0, py = 0, wx = 0, wy = 0;
      for (int a = 0; a < 4; ++a) {
        px += t.dxi[q][a] * state_.pressure[g[a]];
        py += t.deta[q][a] * state_.pressure[g[a]];
        wx += t.dxi[q][a] * lvl.qoi_weight_[g[a]];
        wy += t.deta[q][a] * lvl.qoi_weight_[g[a]];
      }
      q_total -= state_.kappa_gauss(cell, q) * (px * wx + py * wy);
    }
  }
  return q_total;
}

double EllipticSolver::qoi_boundary_flux() const {
  const auto& lvl = *level_;
  const int n = lvl.grid_.cells_per_side();
  double flux = 0.0;
  for (int cj = 0; cj < n; ++cj) {
    const int cell = cj * n;  // leftmost column
    const int g[4] = {lvl.grid_.node_index(0, cj), lvl.grid_.node_index(1, cj),
                      lvl.grid_.node_index(0, cj + 1),
                      lvl.grid_.node_index(1, cj + 1)};
    // kappa at the cell centre equals exp of the mean of log kappa over the
    // symmetric Gauss points for bilinear fields.
    double logk = 0.0;
    for (int q = 0; q < 4; ++q) logk += std::log(state_.kappa_gauss(cell, q));
    const double kappa_c = std::exp(0.25 * logk);
    // centred dp/dx times h: (p1 - p0 + p3 - p2)/2
    flux += kappa_c * 0.5 *
            (state_.pressure[g[1]] - state_.pressure[g[0]] +
             state_.pressure[g[3]] - state_.pressure[g[2]]);
  }
  return flux;
}

void EllipticSolver::refactorize() {
  cholesky_.factorize(matrix_);
  if (cholesky_.info() != Eigen::Success)
    throw NumericalError("elliptic: stiffness factorization failed");
}

Eigen::VectorXd EllipticSolver::apply_moved_stiffness(
    const Eigen::VectorXd& du_nodal, const Eigen::VectorXd& p_full) const {
  const auto& lvl = *level_;
  const auto& t = tables();
  const int n = lvl.grid_.cells_per_side();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(lvl.grid_.num_nodes());
  for (int cell = 0; cell < lvl.grid_.num_cells(); ++cell) {
    const int ci = cell % n;
    const int cj = cell / n;
    const int g[4] = {lvl.grid_.node_index(ci, cj),
                      lvl.grid_.node_index(ci + 1, cj),
                      lvl.grid_.node_index(ci, cj + 1),
                      lvl.grid_.node_index(ci + 1, cj + 1)};
    for (int q = 0; q < 4; ++q) {
      double duq = 0, px = 0, py = 0;
      for (int a = 0; a < 4; ++a) {
        duq += t.N[q][a] * du_nodal[g[a]];
        px += t.dxi[q][a] * p_full[g[a]];
        py += t.deta[q][a] * p_full[g[a]];
      }
      const double c = state_.kappa_gauss(cell, q) * duq;
      for (int a = 0; a < 4; ++a)
        r[g[a]] += c * (t.dxi[q][a] * px + t.deta[q][a] * py);
    }
  }
  return r;
}

Eigen::VectorXd EllipticSolver::tangent(const Eigen::VectorXd& du_nodal) {
  const auto& lvl = *level_;
  const Eigen::VectorXd r = apply_moved_stiffness(du_nodal, state_.pressure);
  Eigen::VectorXd rf(lvl.num_free());
  for (int f = 0; f < lvl.num_free(); ++f) rf[f] = -r[lvl.free_to_node_[f]];
  const Eigen::VectorXd dpf = solve_free(rf);
  Eigen::VectorXd out(lvl.num_sensors());
  for (int s = 0; s < lvl.num_sensors(); ++s) {
    const auto& in = lvl.sensor_interp_[s];
    double v = 0.0;
    for (int corner = 0; corner < 4; ++corner) {
      const int f = lvl.node_to_free_[in.node[corner]];
      if (f >= 0) v += in.weight[corner] * dpf[f];
    }
    out[s] = v;
  }
  return out;
}

Eigen::VectorXd EllipticSolver::adjoint(const Eigen::VectorXd& w) {
  const auto& lvl = *level_;
  const auto& t = tables();
  if (w.size() != lvl.num_sensors())
    throw DimensionError("elliptic: adjoint input length does not match sensors");
  Eigen::VectorXd rf = Eigen::VectorXd::Zero(lvl.num_free());
  for (int s = 0; s < lvl.num_sensors(); ++s) {
    const auto& in = lvl.sensor_interp_[s];
    for (int corner = 0; corner < 4; ++corner) {
      const int f = lvl.node_to_free_[in.node[corner]];
      if (f >= 0) rf[f] += in.weight[corner] * w[s];
    }
  }
  const Eigen::VectorXd lf = solve_free(rf);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(lvl.grid_.num_nodes());
  for (int f = 0; f < lvl.num_free(); ++f) lambda[lvl.free_to_node_[f]] = lf[f];

  const int n = lvl.grid_.cells_per_side();
  Eigen::VectorXd g_nodal = Eigen::VectorXd::Zero(lvl.grid_.num_nodes());
  for (int cell = 0; cell < lvl.grid_.num_cells(); ++cell) {
    const int ci = cell % n;
    const int cj = cell / n;
    const int g[4] = {lvl.grid_.node_index(ci, cj),
                      lvl.grid_.node_index(ci + 1, cj),
                      lvl.grid_.node_index(ci, cj + 1),
                      lvl.grid_.node_index(ci + 1, cj + 1)};
    for (int q = 0; q < 4; ++q) {
      double px = 0, py = 0, lx = 0, ly = 0;
      for (int a = 0; a < 4; ++a) {
        px += t.dxi[q][a] * state_.pressure[g[a]];
        py += t.deta[q][a] * state_.pressure[g[a]];
        lx += t.dxi[q][a] * lambda[g[a]];
        ly += t.deta[q][a] * lambda[g[a]];
      }
      const double c = -state_.kappa_gauss(cell, q) * (px * lx + py * ly);
      for (int a = 0; a < 4; ++a) g_nodal[g[a]] += c * t.N[q][a];
    }
  }
  return g_nodal;
}

namespace {

// GNH and gradient actions through the KL chain du = modes * sqrt(w) dv.
class EllipticLinearizedOp : public LinearizedOp {
 public:
  EllipticLinearizedOp(std::shared_ptr<const EllipticLevel> level,
                       std::shared_ptr<const KlExpansion> kl, int level_index,
                       std::shared_ptr<const ObservationSetup> obs,
                       const Eigen::VectorXd& v, bool recycle)
      : kl_(std::move(kl)),
        obs_ptr_(std::move(obs)),
        basis_(kl_->level_basis(level_index)),
        obs_(*obs_ptr_),
        recycle_(recycle),
        solver_(std::make_unique<EllipticSolver>(std::move(level))) {
    sqrt_w_ = basis_.eigenvalues.cwiseSqrt();
    const Eigen::VectorXd u =
        basis_.mean + basis_.modes * sqrt_w_.cwiseProduct(v).matrix();
    const ForwardState& st = solver_->solve_observe(u);
    residual_ = st.observables - obs_.y;
    misfit_ = 0.5 * residual_.squaredNorm() / (obs_.sigma * obs_.sigma);
    qoi_ = solver_->qoi();
  }

  int dim() const override { return static_cast<int>(sqrt_w_.size()); }
  double misfit() const override { return misfit_; }
  double qoi() const override { return qoi_; }

  Eigen::VectorXd gnh_apply(const Eigen::VectorXd& dv) const override {
    if (dv.size() != sqrt_w_.size())
      throw DimensionError("gnh_apply: direction length does not match level");
    if (!recycle_) solver_->refactorize();
    const Eigen::VectorXd du = basis_.modes * sqrt_w_.cwiseProduct(dv).matrix();
    const Eigen::VectorXd df = solver_->tangent(du);
    const Eigen::VectorXd g =
        solver_->adjoint(df / (obs_.sigma * obs_.sigma));
    return sqrt_w_.cwiseProduct(basis_.modes.transpose() * g);
  }

  Eigen::VectorXd misfit_gradient() const override {
    const Eigen::VectorXd g =
        solver_->adjoint(residual_ / (obs_.sigma * obs_.sigma));
    return sqrt_w_.cwiseProduct(basis_.modes.transpose() * g);
  }

 private:
  std::shared_ptr<const KlExpansion> kl_;
  std::shared_ptr<const ObservationSetup> obs_ptr_;
  const KlBasis& basis_;
  const ObservationSetup& obs_;
  bool recycle_;
  std::unique_ptr<EllipticSolver> solver_;
  Eigen::VectorXd sqrt_w_;
  Eigen::VectorXd residual_;
  double misfit_ = 0.0;
  double qoi_ = 0.0;
};

}  // namespace

EllipticModel::EllipticModel(std::shared_ptr<const LevelHierarchy> hierarchy,
                             std::shared_ptr<const KlExpansion> kl,
                             std::shared_ptr<const ObservationSetup> obs,
                             EllipticOptions options)
    : hierarchy_(std::move(hierarchy)),
      kl_(std::move(kl)),
      obs_(std::move(obs)),
      options_(options) {
  levels_.resize(hierarchy_->num_levels());
  solvers_.resize(hierarchy_->num_levels());
  for (int l = 0; l < hierarchy_->num_levels(); ++l)
    levels_[l] = std::make_shared<const EllipticLevel>(
        UnitSquareGrid::from_mesh_size(hierarchy_->mesh_size(l)),
        obs_->sensors);
}

EllipticSolver& EllipticModel::solver(int level) {
  if (!solvers_.at(level))
    solvers_[level] = std::make_unique<EllipticSolver>(levels_[level]);
  return *solvers_[level];
}

Eigen::VectorXd EllipticModel::field(int level, const Eigen::VectorXd& v) const {
  WhitenedVector wv{level, v};
  return synthesize_field(wv, kl_->level_basis(level));
}

Evaluation EllipticModel::evaluate(int level, const Eigen::VectorXd& v) {
  if (v.size() != hierarchy_->param_dim(level))
    throw DimensionError("evaluate: parameter length does not match level");
  EllipticSolver& s = solver(level);
  const ForwardState& st = s.solve_observe(field(level, v));
  const Eigen::VectorXd r = st.observables - obs_->y;
  Evaluation out;
  out.misfit = 0.5 * r.squaredNorm() / (obs_->sigma * obs_->sigma);
  out.qoi = s.qoi();
  return out;
}

std::unique_ptr<LinearizedOp> EllipticModel::linearize(
    int level, const Eigen::VectorXd& v) {
  if (v.size() != hierarchy_->param_dim(level))
    throw DimensionError("linearize: parameter length does not match level");
  return std::make_unique<EllipticLinearizedOp>(levels_[level], kl_, level,
                                                obs_, v,
                                                options_.recycle_factors);
}

std::unique_ptr<ForwardModel> EllipticModel::clone_for_worker() const {
  return std::make_unique<EllipticModel>(hierarchy_, kl_, obs_, options_);
}

GeneratedData generate_data(const LevelHierarchy& hierarchy,
                            const KlExpansion& kl,
                            const Eigen::MatrixX2d& sensors, int level,
                            double snr, std::uint64_t truth_seed,
                            std::uint64_t noise_seed) {
  if (snr <= 0.0) throw ConfigError("generate_data: snr must be positive");
  Rng truth_rng(truth_seed);
  Eigen::VectorXd v(hierarchy.param_dim(level));
  truth_rng.fill_normal(v);

  auto lvl = std::make_shared<const EllipticLevel>(
      UnitSquareGrid::from_mesh_size(hierarchy.mesh_size(level)), sensors);
  EllipticSolver solver(lvl);
  WhitenedVector wv{level, v};
  const ForwardState& st =
      solver.solve_observe(synthesize_field(wv, kl.level_basis(level)));

  GeneratedData out;
  out.truth = v;
  out.setup.level = level;
  out.setup.sensors = sensors;
  out.setup.snr = snr;
  out.setup.truth_seed = truth_seed;
  out.setup.noise_seed = noise_seed;
  out.setup.sigma = st.observables.cwiseAbs().maxCoeff() / snr;
  Rng noise_rng(noise_seed);
  out.setup.y = st.observables;
  for (Eigen::Index i = 0; i < out.setup.y.size(); ++i)
    out.setup.y[i] += out.setup.sigma * noise_rng.normal();
  return out;
}

namespace {
constexpr char kTruthMagic[8] = {'M', 'L', 'T', 'R', 'U', 'T', 'H', '1'};
}

void save_observation(const std::string& path, const ObservationSetup& setup,
                      const Eigen::VectorXd& truth) {
  nlohmann::json j;
  j["level"] = setup.level;
  j["sigma"] = setup.sigma;
  j["snr"] = setup.snr;
  j["snr_convention"] = "max_abs";
  j["truth_seed"] = setup.truth_seed;
  j["noise_seed"] = setup.noise_seed;
  j["sensors"] = nlohmann::json::array();
  for (Eigen::Index s = 0; s < setup.sensors.rows(); ++s)
    j["sensors"].push_back({setup.sensors(s, 0), setup.sensors(s, 1)});
  j["y"] = std::vector<double>(setup.y.data(), setup.y.data() + setup.y.size());

  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os << j.dump(2) << "\n";

  auto bs = io::open_out(path + ".truth");
  io::write_magic(bs, kTruthMagic);
  io::put_u64(bs, static_cast<std::uint64_t>(truth.size()));
  io::put_vector(bs, truth);
}

GeneratedData load_observation(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open for reading: " + path);
  nlohmann::json j;
  is >> j;

  GeneratedData out;
  out.setup.level = j.at("level").get<int>();
  out.setup.sigma = j.at("sigma").get<double>();
  out.setup.snr = j.at("snr").get<double>();
  out.setup.truth_seed = j.at("truth_seed").get<std::uint64_t>();
  out.setup.noise_seed = j.at("noise_seed").get<std::uint64_t>();
  const auto& sens = j.at("sensors");
  out.setup.sensors.resize(sens.size(), 2);
  for (std::size_t s = 0; s < sens.size(); ++s) {
    out.setup.sensors(static_cast<Eigen::Index>(s), 0) = sens[s][0].get<double>();
    out.setup.sensors(static_cast<Eigen::Index>(s), 1) = sens[s][1].get<double>();
  }
  const auto yv = j.at("y").get<std::vector<double>>();
  out.setup.y = Eigen::Map<const Eigen::VectorXd>(yv.data(),
                                                  static_cast<Eigen::Index>(yv.size()));

  auto bs = io::open_in(path + ".truth");
  io::check_magic(bs, kTruthMagic, "truth file");
  out.truth.resize(static_cast<Eigen::Index>(io::get_u64(bs)));
  io::get_vector(bs, out.truth);
  return out;
}

}  // namespace mldili
