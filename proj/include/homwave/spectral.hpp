#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "homwave/fem.hpp"
#include "homwave/grid.hpp"

namespace homwave {

/// Discrete Dirichlet eigenpairs K psi = lambda M psi (lumped M), ascending.
/// The eigenvalues are those of the discrete operator.
struct EigenBasis {
  Grid grid;
  std::vector<double> lambda;
  /// Full nodal vectors, zero at boundary nodes, M-orthonormal.
  std::vector<std::vector<double>> psi;
  std::vector<double> mass;
  double orthonormality_defect = 0.0;
  double max_residual = 0.0;
  /// Boundary quadrature of |grad psi_k|^2.
  std::vector<double> boundary_grad_sq;
  int iterations = 0;

  std::size_t size() const { return lambda.size(); }
  double inner(std::span<const double> u, std::span<const double> v) const;
  /// Number of modes with lambda <= N.
  std::size_t count_at_most(double N) const;
};

struct EigenRequest {
  /// Number of modes, or (when `threshold` > 0) every mode with lambda <= threshold
  /// plus at least one above it.
  int count = 0;
  double threshold = 0.0;
  double tol = 1e-9;
  int max_iterations = 1000;
  /// Interior sizes up to this use a dense solver.
  std::size_t dense_limit = 600;
};

/// Shift-invert block subspace iteration with Rayleigh-Ritz (sparse LDLT inner
/// solves); dense eigensolver for small grids.
EigenBasis eigenpairs(const TensorField& a, const EigenRequest& request);
EigenBasis eigenpairs(const DirichletOperator& op, const EigenRequest& request);

/// Coefficients of (u, v) against the modes with lambda <= N.
struct FilteredData {
  double N = 0.0;
  std::vector<double> a;
  std::vector<double> b;
  std::shared_ptr<const EigenBasis> basis;
  std::size_t modes() const { return a.size(); }
};

FilteredData project(std::span<const double> u, std::span<const double> v, std::shared_ptr<const EigenBasis> basis,
                     double N);
std::pair<ScalarField, ScalarField> synthesize(const FilteredData& fd);
/// Sum_k c_k psi_k over the first c.size() modes.
std::vector<double> combine(const EigenBasis& basis, std::span<const double> c);

/// N = C0 T^(-2/3) eps^(-2/3).
double frequency_threshold(double eps, double T, double C0);

/// Spectral H^-1 norm sqrt(sum c_k^2 / lambda_k) of coefficients.
double spectral_h_minus1(const EigenBasis& basis, std::span<const double> c);

/// Rows (k, lambda, boundary_grad_sq, eps_lambda).
void write_eigen_table(const std::string& path, const EigenBasis& basis, double eps);

}  // namespace homwave
