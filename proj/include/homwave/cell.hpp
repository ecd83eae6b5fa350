#pragma once

#include <array>
#include <vector>

#include "homwave/coefficient.hpp"
#include "homwave/grid.hpp"

namespace homwave {

/// Periodic correctors chi_j on a cell grid (zero mean).
struct CorrectorSet {
  Grid grid;
  /// A at the cell-grid element midpoints.
  TensorField a;
  std::array<std::vector<double>, 2> chi;
  std::array<double, 2> sup_norm{0.0, 0.0};
  double residual = 0.0;
  int iterations = 0;
};

struct HomogenizedTensor {
  int dim = 1;
  Mat2 a{};
  std::array<double, 2> eigenvalues() const { return symmetric_eigenvalues(a, dim); }
};

/// Mean-free flux b_ij = a_ij + a_ik d_k chi_j - ahat_ij at element quadrature
/// points (index e * points_per_element + q).
struct FluxField {
  Grid grid;
  int points_per_element = 1;
  std::array<std::array<std::vector<double>, 2>, 2> b;
  /// FE weak divergence d_i b_ij relative to the cell load scale.
  double divergence_residual = 0.0;
};

/// phi[k][i][j] at cell-grid nodes.
struct FluxCorrector {
  Grid grid;
  std::array<std::array<std::array<std::vector<double>, 2>, 2>, 2> phi;
  double sup_norm = 0.0;
  double antisymmetry_defect = 0.0;
  /// L2 norm of d_k phi_kij - b_ij over all (i,j), absolute and relative to |b|.
  double reconstruction_residual = 0.0;
  double relative_residual = 0.0;
  double b_norm = 0.0;
};

CorrectorSet solve_correctors(const PeriodicCoefficientField& field, const Grid& cell_grid, double tol = 1e-10);
HomogenizedTensor homogenize(const PeriodicCoefficientField& field, const CorrectorSet& correctors, double tol = 1e-6);
FluxField flux_field(const PeriodicCoefficientField& field, const CorrectorSet& correctors);
FluxCorrector flux_corrector(const FluxField& b, double tol = 1e-10);

/// Constant-coefficient tensor field with A = ahat on element midpoints.
TensorField homogenized_field(const HomogenizedTensor& ahat, const Grid& grid);

}  // namespace homwave
