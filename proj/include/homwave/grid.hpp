#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace homwave {

using Point = std::array<double, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;

inline Mat2 identity_tensor(double c = 1.0) { return {{{c, 0.0}, {0.0, c}}}; }

/// Eigenvalues of the symmetric part of the leading dim x dim block, ascending.
std::array<double, 2> symmetric_eigenvalues(const Mat2& a, int dim);

/// Rectangle or interval (0,L1) x (0,L2).
///
/// Faces are numbered 0: x1=0, 1: x1=L1, 2: x2=0, 3: x2=L2 (1D uses 0 and 1).
class Domain {
 public:
  static Domain interval(double length);
  static Domain rectangle(double l1, double l2);

  int dim() const { return dim_; }
  double extent(int axis) const { return extents_[axis]; }
  double diameter() const;
  int face_count() const { return 2 * dim_; }
  /// Outward unit normal of a face.
  Point normal(int face) const;
  /// Optional observation subset; empty means the whole boundary.
  const std::vector<int>& gamma() const { return gamma_; }
  Domain with_gamma(std::vector<int> faces) const;
  Point center() const;

 private:
  int dim_ = 1;
  std::array<double, 2> extents_{1.0, 1.0};
  std::vector<int> gamma_;
};

enum class GridRole { cell, domain };

/// Uniform tensor-product grid.
///
/// A cell grid discretizes the unit torus: `cells(k)` nodes per axis, the node
/// after the last wraps to node 0. A domain grid has `cells(k)+1` nodes per
/// axis including both boundary layers. Nodes are numbered with axis 0 fastest.
class Grid {
 public:
  static Grid cell(int dim, int resolution);
  static Grid on(const Domain& domain, std::array<int, 2> cells);
  /// Domain grid with spacing eps/nodes_per_period (cell counts rounded to
  /// the nearest integer, at least `min_cells`).
  static Grid for_epsilon(const Domain& domain, double eps, int nodes_per_period, int min_cells = 2);

  GridRole role() const { return role_; }
  bool periodic() const { return role_ == GridRole::cell; }
  int dim() const { return dim_; }
  int cells(int axis) const { return cells_[axis]; }
  double spacing(int axis) const { return h_[axis]; }
  double min_spacing() const;
  int nodes(int axis) const { return axis < dim_ ? (periodic() ? cells_[axis] : cells_[axis] + 1) : 1; }
  std::size_t node_count() const { return static_cast<std::size_t>(nodes(0)) * nodes(1); }
  std::size_t element_count() const {
    return static_cast<std::size_t>(cells_[0]) * (dim_ == 2 ? cells_[1] : 1);
  }
  std::size_t node(int i, int j = 0) const { return static_cast<std::size_t>(i) + static_cast<std::size_t>(nodes(0)) * j; }
  std::array<int, 2> node_ij(std::size_t n) const {
    return {static_cast<int>(n % nodes(0)), static_cast<int>(n / nodes(0))};
  }
  Point node_coord(std::size_t n) const;
  Point element_center(std::size_t e) const;
  std::array<int, 2> element_ij(std::size_t e) const {
    return {static_cast<int>(e % cells_[0]), static_cast<int>(e / cells_[0])};
  }
  /// Local order (0,0),(1,0),(1,1),(0,1); 1D uses the first two.
  std::array<std::size_t, 4> element_nodes(std::size_t e) const;
  int nodes_per_element() const { return dim_ == 2 ? 4 : 2; }
  double element_volume() const { return h_[0] * (dim_ == 2 ? h_[1] : 1.0); }
  bool is_boundary(std::size_t n) const;
  std::vector<int> boundary_nodes() const;
  std::vector<int> interior_nodes() const;
  /// Nodes lying on a face (ordered along the face).
  std::vector<int> face_nodes(int face) const;
  const Domain& domain() const { return domain_; }

  bool same_layout(const Grid& o) const {
    return role_ == o.role_ && dim_ == o.dim_ && cells_ == o.cells_ && h_ == o.h_;
  }

 private:
  GridRole role_ = GridRole::domain;
  int dim_ = 1;
  std::array<int, 2> cells_{1, 1};
  std::array<double, 2> h_{1.0, 1.0};
  Domain domain_ = Domain::interval(1.0);
};

enum class BoundaryTag { periodic, dirichlet_zero, dirichlet_given };

struct ScalarField {
  Grid grid;
  std::vector<double> values;
  BoundaryTag bc = BoundaryTag::dirichlet_zero;
};

struct VectorField {
  Grid grid;
  std::array<std::vector<double>, 2> components;
  BoundaryTag bc = BoundaryTag::dirichlet_given;
};

enum class Location { nodes, element_midpoints };

/// d x d tensor per node or per element midpoint.
struct TensorField {
  Grid grid;
  Location location = Location::element_midpoints;
  std::vector<Mat2> values;
  bool symmetric = true;
  BoundaryTag bc = BoundaryTag::dirichlet_given;

  std::size_t expected_size() const {
    return location == Location::nodes ? grid.node_count() : grid.element_count();
  }
  /// Smallest and largest symmetric eigenvalue over all entries.
  std::array<double, 2> eigenvalue_range() const;
};

TensorField constant_tensor_field(const Grid& grid, const Mat2& a, Location loc = Location::element_midpoints);

}  // namespace homwave
