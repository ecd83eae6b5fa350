#pragma once

#include <array>
#include <span>
#include <vector>

#include "homwave/cell.hpp"
#include "homwave/coefficient.hpp"
#include "homwave/fem.hpp"
#include "homwave/grid.hpp"

namespace homwave {

/// Solves -div(a grad u) = F, u = g on the boundary. `F` holds nodal values
/// (lumped load); `g` is a full nodal vector of which only boundary entries
/// are read (empty means zero).
ScalarField solve_dirichlet(const TensorField& a, const ScalarField& F, std::span<const double> g, double tol = 1e-10,
                            SolverKind kind = SolverKind::cg);

/// Phi_eps,j solving L_eps Phi = 0 with Phi = x_j on the boundary.
struct DirichletCorrector {
  Grid grid;
  double eps = 0.0;
  std::array<std::vector<double>, 2> phi;
  /// sup |Phi_j - x_j| over the nodes.
  std::array<double, 2> deviation{0.0, 0.0};
  /// Boundary nodes, the Jacobian rows grad Phi_j at them, and its determinant.
  std::vector<int> boundary_nodes;
  std::vector<Mat2> boundary_jacobian;
  std::vector<double> det;
  double min_abs_det = 0.0;
  double min_det = 0.0;
  double residual = 0.0;
};

DirichletCorrector dirichlet_correctors(const PeriodicCoefficientField& field, double eps, const Grid& grid,
                                        double tol = 1e-10, SolverKind kind = SolverKind::cg);
/// Same with a pre-sampled coefficient.
DirichletCorrector dirichlet_correctors(const TensorField& a_eps, double eps, double tol = 1e-10,
                                        SolverKind kind = SolverKind::cg);

/// phi_0 in H^1_0 with L_0 phi_0 = L_eps phi_eps0 (discrete operators on the same grid).
ScalarField match_initial_data(const ScalarField& phi_eps0, const TensorField& a_eps, const HomogenizedTensor& ahat,
                               double tol = 1e-10, SolverKind kind = SolverKind::cg);
ScalarField match_initial_data(const ScalarField& phi_eps0, const PeriodicCoefficientField& field, double eps,
                               const HomogenizedTensor& ahat, double tol = 1e-10, SolverKind kind = SolverKind::cg);

/// Interior rows of K u for a full nodal vector u (the discrete functional L u).
std::vector<double> apply_operator(const DirichletOperator& op, std::span<const double> u);

/// |grad z|_L2 with -Laplace z = f, z = 0 on the boundary. `f` holds nodal values.
double h_minus1_norm(const ScalarField& f, double tol = 1e-10, SolverKind kind = SolverKind::cg);
/// Same for a functional given by its interior load vector, with a reusable Laplacian.
double h_minus1_norm_load(const DirichletOperator& laplacian, std::span<const double> load, double tol = 1e-10,
                          SolverKind kind = SolverKind::cg);
DirichletOperator dirichlet_laplacian(const Grid& grid);

}  // namespace homwave
