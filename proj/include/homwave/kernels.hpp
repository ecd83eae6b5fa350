#pragma once

// Data-parallel inner loops used by the solvers and the time integrator.
//
// Every kernel exists twice: an OpenMP version in `parallel` and a plain loop
// in `serial`. The serial versions are the reference the tests compare
// against; the unqualified names forward to the parallel ones.

#include <cstddef>
#include <span>

namespace homwave::kernels {

/// Borrowed compressed-sparse-row matrix.
struct CsrView {
  std::size_t rows = 0;
  std::span<const int> row_ptr;
  std::span<const int> col;
  std::span<const double> val;
};

namespace serial {
void spmv(const CsrView& a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> x, std::span<const double> y);
double weighted_dot(std::span<const double> w, std::span<const double> x, std::span<const double> y);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void xpby(std::span<const double> x, double beta, std::span<double> y);
void hadamard(std::span<const double> x, std::span<const double> y, std::span<double> out);
/// Velocity-Verlet drift/kick pair on interior nodes:
///   v += 0.5*dt*acc;  u += dt*v.
void kick_drift(double dt, std::span<const double> acc, std::span<double> v, std::span<double> u);
}  // namespace serial

namespace parallel {
void spmv(const CsrView& a, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> x, std::span<const double> y);
double weighted_dot(std::span<const double> w, std::span<const double> x, std::span<const double> y);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void xpby(std::span<const double> x, double beta, std::span<double> y);
void hadamard(std::span<const double> x, std::span<const double> y, std::span<double> out);
void kick_drift(double dt, std::span<const double> acc, std::span<double> v, std::span<double> u);
}  // namespace parallel

using parallel::axpy;
using parallel::dot;
using parallel::hadamard;
using parallel::kick_drift;
using parallel::spmv;
using parallel::weighted_dot;
using parallel::xpby;

/// Threads used by the parallel kernels (wraps omp_set_num_threads).
void set_threads(int n);
int threads();

}  // namespace homwave::kernels
