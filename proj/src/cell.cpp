#include "homwave/cell.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "homwave/cg.hpp"
#include "homwave/error.hpp"
#include "homwave/fem.hpp"
#include "homwave/kernels.hpp"

namespace homwave {

namespace {

void remove_mean(std::span<double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  const double m = s / static_cast<double>(v.size());
  for (double& x : v) x -= m;
}

double l2(std::span<const double> v) { return std::sqrt(kernels::dot(v, v)); }

TensorField cell_tensor(const PeriodicCoefficientField& field, const Grid& grid) {
  TensorField t;
  t.grid = grid;
  t.location = Location::element_midpoints;
  t.values.resize(grid.element_count());
  for (std::size_t e = 0; e < grid.element_count(); ++e) t.values[e] = field(grid.element_center(e));
  return t;
}

/// r_j[n] = sum_e int_e (A e_j) . grad N_n.
std::vector<double> cell_load(const TensorField& a, int j) {
  const Grid& g = a.grid;
  std::vector<double> r(g.node_count(), 0.0);
  const int nq = quadrature_size(g);
  for (std::size_t e = 0; e < g.element_count(); ++e) {
    const auto nodes = g.element_nodes(e);
    const Mat2& A = a.values[e];
    for (int q = 0; q < nq; ++q) {
      const auto p = quadrature_point(g, q);
      const auto gr = shape_gradients(g, p[0], p[1]);
      const double w = p[2] * g.element_volume();
      for (int n = 0; n < g.nodes_per_element(); ++n) r[nodes[n]] += w * (A[0][j] * gr[n][0] + A[1][j] * gr[n][1]);
    }
  }
  return r;
}

}  // namespace

CorrectorSet solve_correctors(const PeriodicCoefficientField& field, const Grid& cell_grid, double tol) {
  if (!cell_grid.periodic()) throw InvalidArgument("correctors need a periodic cell grid");
  if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  if (field.dim() != cell_grid.dim()) throw InvalidArgument("coefficient and cell grid dimensions differ");
  CorrectorSet c;
  c.grid = cell_grid;
  c.a = cell_tensor(field, cell_grid);
  const CsrMatrix k = assemble_stiffness(c.a);
  const auto d = k.diagonal();
  std::vector<double> inv(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) inv[i] = 1.0 / d[i];
  const std::size_t n = cell_grid.node_count();
  for (int j = 0; j < 2; ++j) c.chi[j].assign(n, 0.0);
  for (int j = 0; j < cell_grid.dim(); ++j) {
    auto rhs = cell_load(c.a, j);
    for (double& v : rhs) v = -v;
    remove_mean(rhs);
    const auto res = pcg([&k](std::span<const double> x, std::span<double> y) { k.apply(x, y); }, inv, rhs, c.chi[j], tol,
                         static_cast<int>(std::max<std::size_t>(2000, 20 * n)), [](std::span<double> z) { remove_mean(z); });
    remove_mean(c.chi[j]);
    c.residual = std::max(c.residual, res.relative_residual);
    c.iterations = std::max(c.iterations, res.iterations);
    double sup = 0.0;
    for (double v : c.chi[j]) sup = std::max(sup, std::fabs(v));
    c.sup_norm[j] = sup;
  }
  return c;
}

HomogenizedTensor homogenize(const PeriodicCoefficientField& field, const CorrectorSet& cs, double tol) {
  const Grid& g = cs.grid;
  if (field.dim() != g.dim()) throw InvalidArgument("correctors and coefficient dimensions differ");
  HomogenizedTensor h;
  h.dim = g.dim();
  const int nq = quadrature_size(g);
  const double total = static_cast<double>(g.element_count());
  for (std::size_t e = 0; e < g.element_count(); ++e) {
    const Mat2& A = cs.a.values[e];
    for (int q = 0; q < nq; ++q) {
      const auto p = quadrature_point(g, q);
      for (int j = 0; j < g.dim(); ++j) {
        const Point gc = element_gradient(g, cs.chi[j], e, p[0], p[1]);
        for (int i = 0; i < g.dim(); ++i) {
          const double flux = A[i][j] + A[i][0] * gc[0] + A[i][1] * gc[1];
          h.a[i][j] += p[2] * flux / total;
        }
      }
    }
  }
  const double off = 0.5 * (h.a[0][1] + h.a[1][0]);
  h.a[0][1] = h.a[1][0] = off;
  const auto ev = h.eigenvalues();
  const double mu = field.mu();
  if (ev[0] < mu - tol || ev[1] > 1 / mu + tol) {
    std::ostringstream os;
    os << "homogenized tensor eigenvalues [" << ev[0] << ", " << ev[1] << "] leave [mu, 1/mu]; refine the cell grid";
    throw NumericalFailure(os.str(), ev[0]);
  }
  return h;
}

FluxField flux_field(const PeriodicCoefficientField& field, const CorrectorSet& cs) {
  const HomogenizedTensor ahat = homogenize(field, cs);
  const Grid& g = cs.grid;
  FluxField f;
  f.grid = g;
  f.points_per_element = quadrature_size(g);
  const std::size_t np = g.element_count() * f.points_per_element;
  for (auto& row : f.b)
    for (auto& v : row) v.assign(np, 0.0);
  for (std::size_t e = 0; e < g.element_count(); ++e) {
    const Mat2& A = cs.a.values[e];
    for (int q = 0; q < f.points_per_element; ++q) {
      const auto p = quadrature_point(g, q);
      for (int j = 0; j < g.dim(); ++j) {
        const Point gc = element_gradient(g, cs.chi[j], e, p[0], p[1]);
        for (int i = 0; i < g.dim(); ++i)
          f.b[i][j][e * f.points_per_element + q] = A[i][j] + A[i][0] * gc[0] + A[i][1] * gc[1] - ahat.a[i][j];
      }
    }
  }
  // Quadrature weights are uniform, so the exact mean is the plain average.
  for (int i = 0; i < g.dim(); ++i)
    for (int j = 0; j < g.dim(); ++j) remove_mean(f.b[i][j]);

  double scale = 0.0;
  double worst = 0.0;
  for (int j = 0; j < g.dim(); ++j) {
    std::vector<double> div(g.node_count(), 0.0);
    for (std::size_t e = 0; e < g.element_count(); ++e) {
      const auto nodes = g.element_nodes(e);
      for (int q = 0; q < f.points_per_element; ++q) {
        const auto p = quadrature_point(g, q);
        const auto gr = shape_gradients(g, p[0], p[1]);
        const double w = p[2] * g.element_volume();
        const std::size_t idx = e * f.points_per_element + q;
        for (int n = 0; n < g.nodes_per_element(); ++n)
          div[nodes[n]] += w * (f.b[0][j][idx] * gr[n][0] + f.b[1][j][idx] * gr[n][1]);
      }
    }
    worst = std::max(worst, l2(div));
    scale = std::max(scale, l2(cell_load(cs.a, j)));
  }
  f.divergence_residual = scale > 0.0 ? worst / scale : worst;
  return f;
}

FluxCorrector flux_corrector(const FluxField& b, double tol) {
  const Grid& g = b.grid;
  const int d = g.dim();
  const std::size_t nn = g.node_count();
  FluxCorrector fc;
  fc.grid = g;
  for (auto& a : fc.phi)
    for (auto& row : a)
      for (auto& v : row) v.assign(nn, 0.0);

  // Nodal flux: average of the element means around each node.
  std::array<std::array<std::vector<double>, 2>, 2> bn;
  for (auto& row : bn)
    for (auto& v : row) v.assign(nn, 0.0);
  const int per = b.points_per_element;
  const double share = 1.0 / g.nodes_per_element();
  for (std::size_t e = 0; e < g.element_count(); ++e) {
    const auto nodes = g.element_nodes(e);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double m = 0.0;
        for (int q = 0; q < per; ++q) m += b.b[i][j][e * per + q];
        m /= per;
        for (int n = 0; n < g.nodes_per_element(); ++n) bn[i][j][nodes[n]] += share * m;
      }
  }

  TensorField lap = constant_tensor_field(g, identity_tensor());
  const CsrMatrix k = assemble_stiffness(lap);
  const auto diag = k.diagonal();
  std::vector<double> inv(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) inv[i] = 1.0 / diag[i];
  const double w = g.element_volume();

  std::array<std::array<std::vector<double>, 2>, 2> f;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      f[i][j].assign(nn, 0.0);
      std::vector<double> rhs(nn);
      for (std::size_t n = 0; n < nn; ++n) rhs[n] = -w * bn[i][j][n];
      remove_mean(rhs);
      pcg([&k](std::span<const double> x, std::span<double> y) { k.apply(x, y); }, inv, rhs, f[i][j], tol,
          static_cast<int>(std::max<std::size_t>(2000, 20 * nn)), [](std::span<double> z) { remove_mean(z); });
      remove_mean(f[i][j]);
    }

  auto diff = [&](const std::vector<double>& u, int axis, std::size_t n) {
    if (axis >= d) return 0.0;
    return nodal_gradient(g, u, n)[axis];
  };
  for (int kk = 0; kk < d; ++kk)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (std::size_t n = 0; n < nn; ++n)
          fc.phi[kk][i][j][n] = diff(f[i][j], kk, n) - diff(f[kk][j], i, n);
  for (int kk = 0; kk < d; ++kk)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) remove_mean(fc.phi[kk][i][j]);

  double res2 = 0.0, b2 = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (std::size_t n = 0; n < nn; ++n) {
        double s = 0.0;
        for (int kk = 0; kk < d; ++kk) s += diff(fc.phi[kk][i][j], kk, n);
        const double r = s - bn[i][j][n];
        res2 += w * r * r;
        b2 += w * bn[i][j][n] * bn[i][j][n];
      }
  for (int kk = 0; kk < d; ++kk)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (std::size_t n = 0; n < nn; ++n) {
          fc.sup_norm = std::max(fc.sup_norm, std::fabs(fc.phi[kk][i][j][n]));
          fc.antisymmetry_defect = std::max(fc.antisymmetry_defect, std::fabs(fc.phi[kk][i][j][n] + fc.phi[i][kk][j][n]));
        }
  fc.reconstruction_residual = std::sqrt(res2);
  fc.b_norm = std::sqrt(b2);
  fc.relative_residual = fc.b_norm > 0.0 ? fc.reconstruction_residual / fc.b_norm : fc.reconstruction_residual;
  return fc;
}

TensorField homogenized_field(const HomogenizedTensor& ahat, const Grid& grid) {
  return constant_tensor_field(grid, ahat.a);
}

}  // namespace homwave
