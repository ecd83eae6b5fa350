#include "homwave/elliptic.hpp"

#include <cmath>
#include <limits>

#include "homwave/error.hpp"
#include "homwave/kernels.hpp"

namespace homwave {

namespace {

void check_grid(const Grid& a, const Grid& b) {
  if (!a.same_layout(b)) throw InvalidArgument("fields live on different grids");
}

std::vector<double> interior_load(const DirichletOperator& op, std::span<const double> nodal) {
  const auto m = lumped_mass(op.grid());
  std::vector<double> load(op.interior_size());
  for (std::size_t i = 0; i < load.size(); ++i) {
    const int n = op.interior()[i];
    load[i] = m[n] * nodal[n];
  }
  return load;
}

}  // namespace

ScalarField solve_dirichlet(const TensorField& a, const ScalarField& F, std::span<const double> g, double tol,
                            SolverKind kind) {
  if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  check_grid(a.grid, F.grid);
  if (F.values.size() != F.grid.node_count()) throw InvalidArgument("forcing does not match the grid");
  if (!g.empty() && g.size() != a.grid.node_count()) throw InvalidArgument("boundary data does not match the grid");
  const DirichletOperator op(a);
  ScalarField u;
  u.grid = a.grid;
  u.bc = g.empty() ? BoundaryTag::dirichlet_zero : BoundaryTag::dirichlet_given;
  u.values = op.solve(interior_load(op, F.values), g, tol, kind);
  return u;
}

DirichletCorrector dirichlet_correctors(const TensorField& a_eps, double eps, double tol, SolverKind kind) {
  const Grid& grid = a_eps.grid;
  const DirichletOperator op(a_eps);
  DirichletCorrector dc;
  dc.grid = grid;
  dc.eps = eps;
  const std::size_t n = grid.node_count();
  const std::vector<double> zero(op.interior_size(), 0.0);
  for (int j = 0; j < 2; ++j) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = grid.node_coord(i)[j];
    if (j >= grid.dim()) {
      dc.phi[j] = x;
      continue;
    }
    double res = 0.0;
    dc.phi[j] = op.solve(zero, x, tol, kind, &res);
    dc.residual = std::max(dc.residual, res);
    for (std::size_t i = 0; i < n; ++i) dc.deviation[j] = std::max(dc.deviation[j], std::fabs(dc.phi[j][i] - x[i]));
  }
  dc.boundary_nodes = grid.boundary_nodes();
  dc.min_abs_det = std::numeric_limits<double>::infinity();
  dc.min_det = dc.min_abs_det;
  for (int b : dc.boundary_nodes) {
    Mat2 jac{};
    for (int j = 0; j < grid.dim(); ++j) {
      const Point gj = nodal_gradient(grid, dc.phi[j], b);
      jac[j][0] = gj[0];
      jac[j][1] = gj[1];
    }
    const double det = grid.dim() == 1 ? jac[0][0] : jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    dc.boundary_jacobian.push_back(jac);
    dc.det.push_back(det);
    dc.min_abs_det = std::min(dc.min_abs_det, std::fabs(det));
    dc.min_det = std::min(dc.min_det, det);
  }
  if (dc.min_det <= 0.0) warn("det(grad Phi) is not positive at some boundary node");
  return dc;
}

DirichletCorrector dirichlet_correctors(const PeriodicCoefficientField& field, double eps, const Grid& grid, double tol,
                                        SolverKind kind) {
  if (!(eps > 0.0)) throw InvalidArgument("epsilon must be positive");
  return dirichlet_correctors(sample_epsilon(field, eps, grid), eps, tol, kind);
}

std::vector<double> apply_operator(const DirichletOperator& op, std::span<const double> u) {
  const auto ku = op.full().apply(u);
  return op.restrict_interior(ku);
}

ScalarField match_initial_data(const ScalarField& phi_eps0, const TensorField& a_eps, const HomogenizedTensor& ahat,
                               double tol, SolverKind kind) {
  check_grid(phi_eps0.grid, a_eps.grid);
  const Grid& grid = a_eps.grid;
  for (int b : grid.boundary_nodes())
    if (phi_eps0.values[b] != 0.0) throw InvalidArgument("initial data must vanish on the boundary");
  const DirichletOperator le(a_eps);
  const DirichletOperator l0(homogenized_field(ahat, grid));
  const auto load = apply_operator(le, phi_eps0.values);
  ScalarField out;
  out.grid = grid;
  out.values = l0.solve(load, {}, tol, kind);
  return out;
}

ScalarField match_initial_data(const ScalarField& phi_eps0, const PeriodicCoefficientField& field, double eps,
                               const HomogenizedTensor& ahat, double tol, SolverKind kind) {
  return match_initial_data(phi_eps0, sample_epsilon(field, eps, phi_eps0.grid), ahat, tol, kind);
}

DirichletOperator dirichlet_laplacian(const Grid& grid) {
  return DirichletOperator(constant_tensor_field(grid, identity_tensor()));
}

double h_minus1_norm_load(const DirichletOperator& laplacian, std::span<const double> load, double tol, SolverKind kind) {
  double s = 0.0;
  for (double v : load) s += v * v;
  if (s == 0.0) return 0.0;
  const auto z = laplacian.solve_interior(load, tol, kind);
  return std::sqrt(std::max(0.0, kernels::dot(z, load)));
}

double h_minus1_norm(const ScalarField& f, double tol, SolverKind kind) {
  if (f.values.size() != f.grid.node_count()) throw InvalidArgument("field does not match the grid");
  const DirichletOperator lap = dirichlet_laplacian(f.grid);
  return h_minus1_norm_load(lap, interior_load(lap, f.values), tol, kind);
}

}  // namespace homwave
