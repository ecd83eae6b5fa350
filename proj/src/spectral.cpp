#include "homwave/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "homwave/csv.hpp"
#include "homwave/error.hpp"
#include "homwave/kernels.hpp"

namespace homwave {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Fixed weight used to pick the sign of each eigenvector; positive overlap
/// with every product-sine mode.
double sign_weight(const Grid& g, std::size_t n) {
  const Point x = g.node_coord(n);
  const double s1 = x[0] / g.domain().extent(0);
  const double s2 = g.dim() == 2 ? x[1] / g.domain().extent(1) : 0.0;
  return (1.0 - s1) * (1.0 - s2);
}

struct RawPairs {
  VectorXd theta;
  MatrixXd x;  // interior vectors, Euclidean orthonormal
  int iterations = 0;
};

RawPairs dense_pairs(const CsrMatrix& kii, int want) {
  const MatrixXd k = MatrixXd(kii.to_eigen());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(k);
  if (es.info() != Eigen::Success) throw NumericalFailure("dense eigensolver failed");
  RawPairs r;
  r.theta = es.eigenvalues().head(want);
  r.x = es.eigenvectors().leftCols(want);
  return r;
}

RawPairs subspace_pairs(const DirichletOperator& op, int want, double tol, int max_iter, const MatrixXd* start) {
  const Eigen::SparseMatrix<double> k = op.interior_block().to_eigen();
  const auto& ldlt = op.factor();
  const Index n = k.rows();
  const Index p = std::min<Index>(n, std::max(2 * want, want + 4));
  MatrixXd x(n, p);
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> nd;
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i) x(i, j) = nd(rng);
  if (start) x.leftCols(std::min<Index>(p, start->cols())) = start->leftCols(std::min<Index>(p, start->cols()));
  // Roundoff floor of the residual, from the 1-norm of K.
  double knorm = 0.0;
  {
    VectorXd colsum = VectorXd::Zero(n);
    for (Index c = 0; c < k.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator itk(k, c); itk; ++itk) colsum(c) += std::fabs(itk.value());
    knorm = colsum.maxCoeff();
  }
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * knorm;
  RawPairs r;
  double worst = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    MatrixXd y = ldlt.solve(x);
    Eigen::HouseholderQR<MatrixXd> qr(y);
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, p);
    MatrixXd kq = k * q;
    MatrixXd small = q.transpose() * kq;
    small = 0.5 * (small + small.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(small);
    x = q * es.eigenvectors();
    MatrixXd kx = kq * es.eigenvectors();
    worst = 0.0;
    for (int j = 0; j < want; ++j) {
      const double th = es.eigenvalues()(j);
      worst = std::max(worst, (kx.col(j) - th * x.col(j)).norm() / ((std::fabs(th) * tol + floor) * x.col(j).norm()));
    }
    if (worst <= 1.0) {
      r.theta = es.eigenvalues().head(want);
      r.x = x.leftCols(want);
      r.iterations = it;
      return r;
    }
  }
  throw NumericalFailure("subspace iteration did not converge", worst * tol);
}

EigenBasis finish(const DirichletOperator& op, const RawPairs& raw) {
  const Grid& g = op.grid();
  EigenBasis b;
  b.grid = g;
  b.mass = lumped_mass(g);
  b.iterations = raw.iterations;
  const std::size_t nint = op.interior_size();
  // Interior weights are all h^d on a uniform grid.
  const double w = b.mass[op.interior()[0]];
  const auto quad = boundary_quadrature(g);
  for (Index j = 0; j < raw.theta.size(); ++j) {
    std::vector<double> interior(nint);
    for (std::size_t i = 0; i < nint; ++i) interior[i] = raw.x(static_cast<Index>(i), j);
    double nrm = 0.0, sgn = 0.0;
    for (std::size_t i = 0; i < nint; ++i) {
      nrm += w * interior[i] * interior[i];
      sgn += interior[i] * sign_weight(g, op.interior()[i]);
    }
    const double scale = (sgn < 0 ? -1.0 : 1.0) / std::sqrt(nrm);
    for (double& v : interior) v *= scale;
    b.lambda.push_back(raw.theta(j) / w);
    b.psi.push_back(op.extend(interior));
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    const auto& u = b.psi[j];
    const auto ku = op.full().apply(u);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < nint; ++i) {
      const int n = op.interior()[i];
      const double r = ku[n] - b.lambda[j] * b.mass[n] * u[n];
      num += r * r;
      den += (b.lambda[j] * b.mass[n] * u[n]) * (b.lambda[j] * b.mass[n] * u[n]);
    }
    b.max_residual = std::max(b.max_residual, std::sqrt(num / den));
    for (std::size_t k = 0; k <= j; ++k) {
      const double ip = b.inner(b.psi[j], b.psi[k]);
      b.orthonormality_defect = std::max(b.orthonormality_defect, std::fabs(ip - (j == k ? 1.0 : 0.0)));
    }
    double bg = 0.0;
    for (const auto& bp : quad) {
      const Point gr = nodal_gradient(g, u, bp.node);
      bg += bp.weight * (gr[0] * gr[0] + gr[1] * gr[1]);
    }
    b.boundary_grad_sq.push_back(bg);
  }
  return b;
}

}  // namespace

double EigenBasis::inner(std::span<const double> u, std::span<const double> v) const {
  return kernels::weighted_dot(mass, u, v);
}

std::size_t EigenBasis::count_at_most(double N) const {
  return static_cast<std::size_t>(std::upper_bound(lambda.begin(), lambda.end(), N) - lambda.begin());
}

EigenBasis eigenpairs(const DirichletOperator& op, const EigenRequest& req) {
  const std::size_t nint = op.interior_size();
  const auto limit = static_cast<int>(nint / 4);
  if (req.count <= 0 && req.threshold <= 0.0) throw InvalidArgument("eigenpairs needs a count or a threshold");
  if (!(req.tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  auto solve = [&](int want, const MatrixXd* start) {
    if (want > limit)
      throw InvalidArgument("requested " + std::to_string(want) + " modes but at most a quarter of the " +
                            std::to_string(nint) + " interior nodes may be used");
    if (nint <= req.dense_limit) return dense_pairs(op.interior_block(), want);
    return subspace_pairs(op, want, req.tol, req.max_iterations, start);
  };
  if (req.threshold <= 0.0) return finish(op, solve(req.count, nullptr));

  const double w = lumped_mass(op.grid())[op.interior()[0]];
  int want = std::max(req.count, 4);
  RawPairs raw;
  for (;;) {
    want = std::min(want, limit);
    raw = solve(want, raw.x.size() ? &raw.x : nullptr);
    if (raw.theta(raw.theta.size() - 1) / w > req.threshold) break;
    if (want == limit) throw InvalidArgument("threshold exceeds the resolvable part of the discrete spectrum");
    want *= 2;
  }
  return finish(op, raw);
}

EigenBasis eigenpairs(const TensorField& a, const EigenRequest& req) { return eigenpairs(DirichletOperator(a), req); }

FilteredData project(std::span<const double> u, std::span<const double> v, std::shared_ptr<const EigenBasis> basis,
                     double N) {
  if (!basis || basis->size() == 0) throw InvalidArgument("empty eigenbasis");
  if (N >= basis->lambda.back())
    throw InvalidArgument("threshold N reaches the largest computed eigenvalue; recompute a larger basis");
  const std::size_t nn = basis->grid.node_count();
  if ((!u.empty() && u.size() != nn) || (!v.empty() && v.size() != nn))
    throw InvalidArgument("data do not live on the basis grid");
  FilteredData fd;
  fd.N = N;
  const std::size_t k = basis->count_at_most(N);
  fd.a.assign(k, 0.0);
  fd.b.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    if (!u.empty()) fd.a[j] = basis->inner(u, basis->psi[j]);
    if (!v.empty()) fd.b[j] = basis->inner(v, basis->psi[j]);
  }
  fd.basis = std::move(basis);
  return fd;
}

std::vector<double> combine(const EigenBasis& basis, std::span<const double> c) {
  if (c.size() > basis.size()) throw InvalidArgument("more coefficients than modes");
  std::vector<double> out(basis.grid.node_count(), 0.0);
  for (std::size_t k = 0; k < c.size(); ++k)
    if (c[k] != 0.0) kernels::axpy(c[k], basis.psi[k], out);
  return out;
}

std::pair<ScalarField, ScalarField> synthesize(const FilteredData& fd) {
  if (!fd.basis) throw InvalidArgument("filtered data without a basis");
  ScalarField u, v;
  u.grid = v.grid = fd.basis->grid;
  u.values = combine(*fd.basis, fd.a);
  v.values = combine(*fd.basis, fd.b);
  return {std::move(u), std::move(v)};
}

double frequency_threshold(double eps, double T, double C0) {
  if (!(eps > 0.0) || !(T > 0.0) || !(C0 > 0.0)) throw InvalidArgument("eps, T and C0 must be positive");
  return C0 * std::pow(T, -2.0 / 3.0) * std::pow(eps, -2.0 / 3.0);
}

double spectral_h_minus1(const EigenBasis& basis, std::span<const double> c) {
  double s = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * c[k] / basis.lambda[k];
  return std::sqrt(s);
}

void write_eigen_table(const std::string& path, const EigenBasis& basis, double eps) {
  CsvWriter w(path, {"k", "lambda", "boundary_grad_sq", "eps_lambda"});
  for (std::size_t k = 0; k < basis.size(); ++k)
    w.row({CsvWriter::integer(static_cast<long>(k + 1)), CsvWriter::number(basis.lambda[k]),
           CsvWriter::number(basis.boundary_grad_sq[k]), CsvWriter::number(eps * basis.lambda[k])});
}

}  // namespace homwave
