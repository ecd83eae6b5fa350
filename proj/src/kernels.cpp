#include "homwave/kernels.hpp"

#include <omp.h>

namespace homwave::kernels {

namespace serial {

void spmv(const CsrView& a, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < a.rows; ++r) {
    double s = 0.0;
    for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) s += a.val[k] * x[a.col[k]];
    y[r] = s;
  }
}

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double weighted_dot(std::span<const double> w, std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * x[i] * y[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void xpby(std::span<const double> x, double beta, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + beta * y[i];
}

void hadamard(std::span<const double> x, std::span<const double> y, std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
}

void kick_drift(double dt, std::span<const double> acc, std::span<double> v, std::span<double> u) {
  const double half = 0.5 * dt;
  for (std::size_t i = 0; i < u.size(); ++i) {
    v[i] += half * acc[i];
    u[i] += dt * v[i];
  }
}

}  // namespace serial

namespace parallel {

void spmv(const CsrView& a, std::span<const double> x, std::span<double> y) {
  const auto rows = static_cast<long>(a.rows);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) s += a.val[k] * x[a.col[k]];
    y[r] = s;
  }
}

double dot(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<long>(x.size());
  double s = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : s)
  for (long i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double weighted_dot(std::span<const double> w, std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<long>(x.size());
  double s = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : s)
  for (long i = 0; i < n; ++i) s += w[i] * x[i] * y[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  const auto n = static_cast<long>(x.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void xpby(std::span<const double> x, double beta, std::span<double> y) {
  const auto n = static_cast<long>(x.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) y[i] = x[i] + beta * y[i];
}

void hadamard(std::span<const double> x, std::span<const double> y, std::span<double> out) {
  const auto n = static_cast<long>(x.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void kick_drift(double dt, std::span<const double> acc, std::span<double> v, std::span<double> u) {
  const auto n = static_cast<long>(u.size());
  const double half = 0.5 * dt;
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    v[i] += half * acc[i];
    u[i] += dt * v[i];
  }
}

}  // namespace parallel

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

int threads() { return omp_get_max_threads(); }

}  // namespace homwave::kernels
