#include "homwave/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "homwave/error.hpp"

namespace homwave {

std::array<double, 2> symmetric_eigenvalues(const Mat2& a, int dim) {
  if (dim == 1) return {a[0][0], a[0][0]};
  const double p = a[0][0];
  const double q = a[1][1];
  const double r = 0.5 * (a[0][1] + a[1][0]);
  const double mean = 0.5 * (p + q);
  const double rad = std::hypot(0.5 * (p - q), r);
  return {mean - rad, mean + rad};
}

Domain Domain::interval(double length) {
  if (!(length > 0.0)) throw InvalidArgument("interval length must be positive");
  Domain d;
  d.dim_ = 1;
  d.extents_ = {length, 1.0};
  return d;
}

Domain Domain::rectangle(double l1, double l2) {
  if (!(l1 > 0.0) || !(l2 > 0.0)) throw InvalidArgument("rectangle extents must be positive");
  Domain d;
  d.dim_ = 2;
  d.extents_ = {l1, l2};
  return d;
}

double Domain::diameter() const { return dim_ == 1 ? extents_[0] : std::hypot(extents_[0], extents_[1]); }

Point Domain::normal(int face) const {
  if (face < 0 || face >= face_count()) throw InvalidArgument("face index out of range");
  Point n{0.0, 0.0};
  n[face / 2] = (face % 2 == 0) ? -1.0 : 1.0;
  return n;
}

Domain Domain::with_gamma(std::vector<int> faces) const {
  for (int f : faces)
    if (f < 0 || f >= face_count()) throw InvalidArgument("gamma face index out of range");
  Domain d = *this;
  d.gamma_ = std::move(faces);
  return d;
}

Point Domain::center() const { return {0.5 * extents_[0], dim_ == 2 ? 0.5 * extents_[1] : 0.0}; }

Grid Grid::cell(int dim, int resolution) {
  if (dim != 1 && dim != 2) throw InvalidArgument("dimension must be 1 or 2");
  if (resolution < 2) throw InvalidArgument("cell resolution must be at least 2");
  Grid g;
  g.role_ = GridRole::cell;
  g.dim_ = dim;
  g.cells_ = {resolution, dim == 2 ? resolution : 1};
  g.h_ = {1.0 / resolution, dim == 2 ? 1.0 / resolution : 1.0};
  g.domain_ = dim == 1 ? Domain::interval(1.0) : Domain::rectangle(1.0, 1.0);
  return g;
}

Grid Grid::on(const Domain& domain, std::array<int, 2> cells) {
  Grid g;
  g.role_ = GridRole::domain;
  g.dim_ = domain.dim();
  if (cells[0] < 2 || (g.dim_ == 2 && cells[1] < 2)) throw InvalidArgument("domain grid needs >= 2 cells per axis");
  g.cells_ = {cells[0], g.dim_ == 2 ? cells[1] : 1};
  g.h_ = {domain.extent(0) / cells[0], g.dim_ == 2 ? domain.extent(1) / cells[1] : 1.0};
  g.domain_ = domain;
  return g;
}

Grid Grid::for_epsilon(const Domain& domain, double eps, int nodes_per_period, int min_cells) {
  if (!(eps > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (nodes_per_period < 1) throw InvalidArgument("nodes per period must be positive");
  std::array<int, 2> c{1, 1};
  for (int k = 0; k < domain.dim(); ++k) {
    const double target = domain.extent(k) / eps * nodes_per_period;
    c[k] = std::max(min_cells, static_cast<int>(std::lround(target)));
  }
  return on(domain, c);
}

double Grid::min_spacing() const { return dim_ == 2 ? std::min(h_[0], h_[1]) : h_[0]; }

Point Grid::node_coord(std::size_t n) const {
  const auto ij = node_ij(n);
  return {ij[0] * h_[0], dim_ == 2 ? ij[1] * h_[1] : 0.0};
}

Point Grid::element_center(std::size_t e) const {
  const auto ij = element_ij(e);
  return {(ij[0] + 0.5) * h_[0], dim_ == 2 ? (ij[1] + 0.5) * h_[1] : 0.0};
}

std::array<std::size_t, 4> Grid::element_nodes(std::size_t e) const {
  const auto [i, j] = element_ij(e);
  const int i1 = periodic() ? (i + 1) % cells_[0] : i + 1;
  if (dim_ == 1) return {node(i), node(i1), 0, 0};
  const int j1 = periodic() ? (j + 1) % cells_[1] : j + 1;
  return {node(i, j), node(i1, j), node(i1, j1), node(i, j1)};
}

bool Grid::is_boundary(std::size_t n) const {
  if (periodic()) return false;
  const auto [i, j] = node_ij(n);
  if (i == 0 || i == cells_[0]) return true;
  return dim_ == 2 && (j == 0 || j == cells_[1]);
}

std::vector<int> Grid::boundary_nodes() const {
  std::vector<int> out;
  for (std::size_t n = 0; n < node_count(); ++n)
    if (is_boundary(n)) out.push_back(static_cast<int>(n));
  return out;
}

std::vector<int> Grid::interior_nodes() const {
  std::vector<int> out;
  for (std::size_t n = 0; n < node_count(); ++n)
    if (!is_boundary(n)) out.push_back(static_cast<int>(n));
  return out;
}

std::vector<int> Grid::face_nodes(int face) const {
  if (periodic()) throw InvalidArgument("periodic grids have no faces");
  std::vector<int> out;
  const int axis = face / 2;
  const int fixed = (face % 2 == 0) ? 0 : cells_[axis];
  if (dim_ == 1) {
    out.push_back(static_cast<int>(node(fixed)));
    return out;
  }
  const int other = 1 - axis;
  for (int t = 0; t < nodes(other); ++t) {
    const int i = axis == 0 ? fixed : t;
    const int j = axis == 0 ? t : fixed;
    out.push_back(static_cast<int>(node(i, j)));
  }
  return out;
}

std::array<double, 2> TensorField::eigenvalue_range() const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& a : values) {
    const auto ev = symmetric_eigenvalues(a, grid.dim());
    lo = std::min(lo, ev[0]);
    hi = std::max(hi, ev[1]);
  }
  return {lo, hi};
}

TensorField constant_tensor_field(const Grid& grid, const Mat2& a, Location loc) {
  TensorField t;
  t.grid = grid;
  t.location = loc;
  t.values.assign(loc == Location::nodes ? grid.node_count() : grid.element_count(), a);
  return t;
}

}  // namespace homwave
