#pragma once

#include <functional>
#include <span>

namespace homwave {

using LinearMap = std::function<void(std::span<const double>, std::span<double>)>;

struct CgResult {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// (semi)definite map. `x` holds the initial guess. When `project` is given it
/// is applied to the preconditioned residual, which keeps the iterates in a
/// complement of a known kernel. Throws NumericalFailure on non-convergence.
CgResult pcg(const LinearMap& apply, std::span<const double> inv_diag, std::span<const double> b, std::span<double> x,
             double tol, int max_iter, const std::function<void(std::span<double>)>& project = {});

}  // namespace homwave
