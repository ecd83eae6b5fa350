#pragma once

#include <Eigen/SparseCholesky>
#include <array>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "homwave/grid.hpp"
#include "homwave/sparse.hpp"

namespace homwave {

/// Two-point Gauss rule on [0,1]; 1D elements use the midpoint only.
inline constexpr std::array<double, 2> kGauss{0.21132486540518711775, 0.78867513459481288225};

/// Reference gradients of the Q1 (1D: P1) shape functions at local (xi, eta),
/// already scaled by the element spacing.
std::array<Point, 4> shape_gradients(const Grid& grid, double xi, double eta);

/// Number of quadrature points per element (1 in 1D, 4 in 2D) and their
/// local coordinates and weights (weights sum to 1).
int quadrature_size(const Grid& grid);
std::array<double, 3> quadrature_point(const Grid& grid, int q);

/// Stiffness matrix of -div(a grad) with `a` constant on each element.
CsrMatrix assemble_stiffness(const TensorField& a);

/// Trapezoid (lumped) nodal weights.
std::vector<double> lumped_mass(const Grid& grid);

/// Gradient at element-local (xi, eta) of the nodal interpolant.
Point element_gradient(const Grid& grid, std::span<const double> u, std::size_t e, double xi, double eta);

/// Nodal gradient: central differences inside, one-sided second order on
/// the first and last layer of each axis (wrap-around on periodic grids).
Point nodal_gradient(const Grid& grid, std::span<const double> u, std::size_t node);
std::array<std::vector<double>, 2> nodal_gradients(const Grid& grid, std::span<const double> u);

/// One boundary sample: node, face, outward normal, trapezoid weight.
/// Corner nodes appear once per face they belong to.
struct BoundaryPoint {
  int node;
  int face;
  Point normal;
  double weight;
};

/// Boundary quadrature restricted to `faces` (empty = all faces).
std::vector<BoundaryPoint> boundary_quadrature(const Grid& grid, const std::vector<int>& faces = {});

/// Tensor at each boundary point: average of the element values touching it.
std::vector<Mat2> boundary_tensors(const TensorField& a, const std::vector<BoundaryPoint>& quad);

enum class SolverKind { cg, direct };

/// Dirichlet problem data: full stiffness, interior block and coupling.
class DirichletOperator {
 public:
  explicit DirichletOperator(const TensorField& a);

  const Grid& grid() const { return s_->grid; }
  const CsrMatrix& full() const { return s_->k; }
  const CsrMatrix& interior_block() const { return s_->kii; }
  const std::vector<int>& interior() const { return s_->interior; }
  const std::vector<int>& boundary() const { return s_->boundary; }
  std::size_t interior_size() const { return s_->interior.size(); }

  std::vector<double> restrict_interior(std::span<const double> full) const;
  /// Interior values into a full vector, boundary entries from `boundary_full` (zero when empty).
  std::vector<double> extend(std::span<const double> interior, std::span<const double> boundary_full = {}) const;

  /// Solves K_II x = b.
  std::vector<double> solve_interior(std::span<const double> b, double tol, SolverKind kind, double* residual = nullptr) const;
  /// Solves K u = load on interior rows with u = g on the boundary.
  /// `load` is indexed by interior unknowns; `g` is a full nodal vector.
  std::vector<double> solve(std::span<const double> load, std::span<const double> g, double tol, SolverKind kind,
                            double* residual = nullptr) const;

  const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& factor() const;

 private:
  struct State {
    Grid grid;
    CsrMatrix k, kii, kib;
    std::vector<int> interior, boundary, interior_index;
    std::vector<double> inv_diag;
    std::once_flag once;
    std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt;
  };
  std::shared_ptr<State> s_;
};

}  // namespace homwave
