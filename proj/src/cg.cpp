#include "homwave/cg.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "homwave/error.hpp"
#include "homwave/kernels.hpp"

namespace homwave {

CgResult pcg(const LinearMap& apply, std::span<const double> inv_diag, std::span<const double> b, std::span<double> x,
             double tol, int max_iter, const std::function<void(std::span<double>)>& project) {
  namespace k = kernels;
  const std::size_t n = b.size();
  CgResult res;
  const double bnorm = std::sqrt(k::dot(b, b));
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return res;
  }
  std::vector<double> r(n), z(n), p(n), q(n);
  apply(x, r);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
  auto precondition = [&] {
    k::hadamard(inv_diag, r, z);
    if (project) project(z);
  };
  precondition();
  p = z;
  double rz = k::dot(r, z);
  double rnorm = std::sqrt(k::dot(r, r));
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it;
    res.relative_residual = rnorm / bnorm;
    if (res.relative_residual <= tol) return res;
    apply(p, q);
    const double pq = k::dot(p, q);
    if (!(pq > 0.0)) throw NumericalFailure("conjugate gradients broke down (non-positive curvature)", res.relative_residual);
    const double alpha = rz / pq;
    k::axpy(alpha, p, x);
    k::axpy(-alpha, q, r);
    precondition();
    const double rz_new = k::dot(r, z);
    k::xpby(z, rz_new / rz, p);
    rz = rz_new;
    rnorm = std::sqrt(k::dot(r, r));
  }
  res.iterations = max_iter;
  res.relative_residual = rnorm / bnorm;
  if (res.relative_residual <= tol) return res;
  throw NumericalFailure("conjugate gradients did not converge in " + std::to_string(max_iter) + " iterations",
                         res.relative_residual);
}

}  // namespace homwave
