#include "homwave/fem.hpp"

#include <algorithm>
#include <cmath>

#include "homwave/cg.hpp"
#include "homwave/error.hpp"

namespace homwave {

std::array<Point, 4> shape_gradients(const Grid& grid, double xi, double eta) {
  const double hx = grid.spacing(0);
  if (grid.dim() == 1) return {Point{-1.0 / hx, 0.0}, Point{1.0 / hx, 0.0}, Point{0.0, 0.0}, Point{0.0, 0.0}};
  const double hy = grid.spacing(1);
  return {Point{-(1 - eta) / hx, -(1 - xi) / hy}, Point{(1 - eta) / hx, -xi / hy}, Point{eta / hx, xi / hy},
          Point{-eta / hx, (1 - xi) / hy}};
}

int quadrature_size(const Grid& grid) { return grid.dim() == 1 ? 1 : 4; }

std::array<double, 3> quadrature_point(const Grid& grid, int q) {
  if (grid.dim() == 1) return {0.5, 0.0, 1.0};
  return {kGauss[q % 2], kGauss[q / 2], 0.25};
}

CsrMatrix assemble_stiffness(const TensorField& a) {
  const Grid& g = a.grid;
  if (a.location != Location::element_midpoints || a.values.size() != g.element_count())
    throw InvalidArgument("stiffness assembly needs one tensor per element");
  const int ne = g.nodes_per_element();
  const int nq = quadrature_size(g);
  std::array<std::array<Point, 4>, 4> grads;
  std::array<double, 4> weights{};
  for (int q = 0; q < nq; ++q) {
    const auto p = quadrature_point(g, q);
    grads[q] = shape_gradients(g, p[0], p[1]);
    weights[q] = p[2] * g.element_volume();
  }
  std::vector<Triplet> t;
  t.reserve(g.element_count() * ne * ne);
  for (std::size_t e = 0; e < g.element_count(); ++e) {
    const Mat2& A = a.values[e];
    const auto nodes = g.element_nodes(e);
    for (int r = 0; r < ne; ++r)
      for (int c = 0; c < ne; ++c) {
        double s = 0.0;
        for (int q = 0; q < nq; ++q) {
          const Point& gr = grads[q][r];
          const Point& gc = grads[q][c];
          const double ax = A[0][0] * gc[0] + A[0][1] * gc[1];
          const double ay = A[1][0] * gc[0] + A[1][1] * gc[1];
          s += weights[q] * (gr[0] * ax + gr[1] * ay);
        }
        t.push_back({static_cast<int>(nodes[r]), static_cast<int>(nodes[c]), s});
      }
  }
  return CsrMatrix::from_triplets(g.node_count(), g.node_count(), std::move(t));
}

std::vector<double> lumped_mass(const Grid& grid) {
  std::vector<double> m(grid.node_count());
  for (std::size_t n = 0; n < m.size(); ++n) {
    const auto ij = grid.node_ij(n);
    double w = 1.0;
    for (int k = 0; k < grid.dim(); ++k) {
      double wk = grid.spacing(k);
      if (!grid.periodic() && (ij[k] == 0 || ij[k] == grid.cells(k))) wk *= 0.5;
      w *= wk;
    }
    m[n] = w;
  }
  return m;
}

Point element_gradient(const Grid& grid, std::span<const double> u, std::size_t e, double xi, double eta) {
  const auto nodes = grid.element_nodes(e);
  const auto gr = shape_gradients(grid, xi, eta);
  Point out{0.0, 0.0};
  for (int a = 0; a < grid.nodes_per_element(); ++a) {
    out[0] += gr[a][0] * u[nodes[a]];
    out[1] += gr[a][1] * u[nodes[a]];
  }
  return out;
}

Point nodal_gradient(const Grid& grid, std::span<const double> u, std::size_t node) {
  const auto ij = grid.node_ij(node);
  Point out{0.0, 0.0};
  for (int k = 0; k < grid.dim(); ++k) {
    const double h = grid.spacing(k);
    const int n = grid.nodes(k);
    auto at = [&](int idx) {
      auto c = ij;
      c[k] = idx;
      return u[grid.node(c[0], c[1])];
    };
    const int i = ij[k];
    if (grid.periodic()) {
      out[k] = (at((i + 1) % n) - at((i - 1 + n) % n)) / (2 * h);
    } else if (i == 0) {
      out[k] = (-3 * at(0) + 4 * at(1) - at(2)) / (2 * h);
    } else if (i == n - 1) {
      out[k] = (3 * at(n - 1) - 4 * at(n - 2) + at(n - 3)) / (2 * h);
    } else {
      out[k] = (at(i + 1) - at(i - 1)) / (2 * h);
    }
  }
  return out;
}

std::array<std::vector<double>, 2> nodal_gradients(const Grid& grid, std::span<const double> u) {
  std::array<std::vector<double>, 2> g;
  g[0].resize(grid.node_count());
  g[1].assign(grid.node_count(), 0.0);
  const auto count = static_cast<long>(grid.node_count());
#pragma omp parallel for schedule(static)
  for (long n = 0; n < count; ++n) {
    const Point p = nodal_gradient(grid, u, static_cast<std::size_t>(n));
    g[0][n] = p[0];
    g[1][n] = p[1];
  }
  return g;
}

std::vector<BoundaryPoint> boundary_quadrature(const Grid& grid, const std::vector<int>& faces) {
  if (grid.periodic()) throw InvalidArgument("periodic grid has no boundary");
  std::vector<int> use = faces;
  if (use.empty())
    for (int f = 0; f < grid.domain().face_count(); ++f) use.push_back(f);
  std::vector<BoundaryPoint> out;
  for (int f : use) {
    const Point n = grid.domain().normal(f);
    const auto nodes = grid.face_nodes(f);
    if (grid.dim() == 1) {
      out.push_back({nodes[0], f, n, 1.0});
      continue;
    }
    const double h = grid.spacing(1 - f / 2);
    for (std::size_t t = 0; t < nodes.size(); ++t) {
      const double w = (t == 0 || t + 1 == nodes.size()) ? 0.5 * h : h;
      out.push_back({nodes[t], f, n, w});
    }
  }
  return out;
}

std::vector<Mat2> boundary_tensors(const TensorField& a, const std::vector<BoundaryPoint>& quad) {
  const Grid& g = a.grid;
  std::vector<Mat2> out;
  out.reserve(quad.size());
  for (const auto& bp : quad) {
    if (a.location == Location::nodes) {
      out.push_back(a.values[bp.node]);
      continue;
    }
    const auto ij = g.node_ij(bp.node);
    Mat2 s{};
    int count = 0;
    const int jr = g.dim() == 2 ? 1 : 0;
    for (int dj = -jr; dj <= 0; ++dj)
      for (int di = -1; di <= 0; ++di) {
        const int ei = ij[0] + di;
        const int ej = ij[1] + dj;
        if (ei < 0 || ei >= g.cells(0) || ej < 0 || ej >= g.cells(1)) continue;
        const Mat2& v = a.values[static_cast<std::size_t>(ei) + static_cast<std::size_t>(g.cells(0)) * ej];
        for (int p = 0; p < 2; ++p)
          for (int q = 0; q < 2; ++q) s[p][q] += v[p][q];
        ++count;
      }
    for (int p = 0; p < 2; ++p)
      for (int q = 0; q < 2; ++q) s[p][q] /= count;
    out.push_back(s);
  }
  return out;
}

DirichletOperator::DirichletOperator(const TensorField& a) : s_(std::make_shared<State>()) {
  if (a.grid.periodic()) throw InvalidArgument("Dirichlet operator needs a domain grid");
  s_->grid = a.grid;
  s_->k = assemble_stiffness(a);
  const std::size_t n = a.grid.node_count();
  s_->interior_index.assign(n, -1);
  std::vector<int> bindex(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (a.grid.is_boundary(i)) {
      bindex[i] = static_cast<int>(s_->boundary.size());
      s_->boundary.push_back(static_cast<int>(i));
    } else {
      s_->interior_index[i] = static_cast<int>(s_->interior.size());
      s_->interior.push_back(static_cast<int>(i));
    }
  }
  if (s_->interior.empty()) throw InvalidArgument("grid has no interior nodes");
  s_->kii = s_->k.extract(s_->interior_index, s_->interior.size(), s_->interior_index, s_->interior.size());
  std::vector<int> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<int>(i);
  s_->kib = s_->k.extract(s_->interior_index, s_->interior.size(), all, n);
  const auto d = s_->kii.diagonal();
  s_->inv_diag.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0)) throw InvalidArgument("stiffness diagonal is not positive");
    s_->inv_diag[i] = 1.0 / d[i];
  }
}

std::vector<double> DirichletOperator::restrict_interior(std::span<const double> full) const {
  std::vector<double> out(s_->interior.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = full[s_->interior[i]];
  return out;
}

std::vector<double> DirichletOperator::extend(std::span<const double> interior, std::span<const double> boundary_full) const {
  std::vector<double> out(s_->grid.node_count(), 0.0);
  if (!boundary_full.empty())
    for (int b : s_->boundary) out[b] = boundary_full[b];
  for (std::size_t i = 0; i < s_->interior.size(); ++i) out[s_->interior[i]] = interior[i];
  return out;
}

const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& DirichletOperator::factor() const {
  std::call_once(s_->once, [this] {
    auto f = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    f->compute(s_->kii.to_eigen());
    if (f->info() != Eigen::Success) throw NumericalFailure("sparse LDLT factorization failed");
    s_->ldlt = std::move(f);
  });
  return *s_->ldlt;
}

std::vector<double> DirichletOperator::solve_interior(std::span<const double> b, double tol, SolverKind kind,
                                                      double* residual) const {
  const std::size_t n = s_->interior.size();
  if (b.size() != n) throw InvalidArgument("right-hand side size does not match the interior unknowns");
  std::vector<double> x(n, 0.0);
  if (kind == SolverKind::direct) {
    Eigen::Map<const Eigen::VectorXd> bb(b.data(), static_cast<Eigen::Index>(n));
    Eigen::VectorXd sol = factor().solve(bb);
    std::copy(sol.data(), sol.data() + n, x.begin());
    if (residual) {
      const auto r = s_->kii.apply(x);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        num += (r[i] - b[i]) * (r[i] - b[i]);
        den += b[i] * b[i];
      }
      *residual = den > 0 ? std::sqrt(num / den) : 0.0;
    }
    return x;
  }
  const CsrMatrix& kii = s_->kii;
  const auto res = pcg([&kii](std::span<const double> in, std::span<double> out) { kii.apply(in, out); }, s_->inv_diag,
                       b, x, tol, static_cast<int>(std::max<std::size_t>(1000, 20 * n)));
  if (residual) *residual = res.relative_residual;
  return x;
}

std::vector<double> DirichletOperator::solve(std::span<const double> load, std::span<const double> g, double tol,
                                             SolverKind kind, double* residual) const {
  const std::size_t n = s_->grid.node_count();
  std::vector<double> gb(n, 0.0);
  if (!g.empty()) {
    if (g.size() != n) throw InvalidArgument("boundary data must be a full nodal vector");
    for (int b : s_->boundary) gb[b] = g[b];
  }
  std::vector<double> rhs(load.begin(), load.end());
  if (rhs.size() != s_->interior.size()) throw InvalidArgument("load size does not match the interior unknowns");
  const auto kg = s_->kib.apply(gb);
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= kg[i];
  const auto x = solve_interior(rhs, tol, kind, residual);
  return extend(x, gb);
}

}  // namespace homwave
