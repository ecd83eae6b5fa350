#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "homwave/expression.hpp"
#include "homwave/grid.hpp"

namespace homwave {

/// What to build: a named preset, four closed-form entries, or a gridded map.
struct CoefficientSpec {
  /// constant | cosine1d | laminate2d | smooth_checker2d | checkerboard2d | expression | gridded
  std::string preset = "constant";
  int dim = 1;
  /// Scale for `constant`; high/low value pair for `checkerboard2d`.
  double value = 1.0;
  double contrast = 4.0;
  /// Row-major a11, a12, a21, a22 (1D uses the first one).
  std::array<std::string, 4> entries{"1", "0", "0", "1"};
  /// Gridded entries: periodic node samples and their resolution.
  std::array<int, 2> resolution{0, 0};
  std::vector<Mat2> samples;
};

/// The 1-periodic coefficient matrix A(y) with its declared constants.
class PeriodicCoefficientField {
 public:
  using Eval = std::function<Mat2(const Point&)>;

  PeriodicCoefficientField(std::string name, int dim, Eval a, double mu, double lipschitz, bool lipschitz_continuous,
                           bool constant, Eval derivative_y1 = {}, Eval derivative_y2 = {});

  int dim() const { return dim_; }
  double mu() const { return mu_; }
  double lipschitz() const { return lipschitz_; }
  /// False for piecewise-constant media.
  bool lipschitz_continuous() const { return lipschitz_continuous_; }
  bool constant() const { return constant_; }
  const std::string& name() const { return name_; }

  /// A at y reduced to the unit cell.
  Mat2 operator()(const Point& y) const;
  /// A at y without reduction (for periodicity checks).
  Mat2 raw(const Point& y) const { return a_(y); }
  /// dA/dy_k, analytic when the preset supplies it, central differences otherwise.
  Mat2 derivative(const Point& y, int k) const;
  bool analytic_derivative() const { return static_cast<bool>(dy_[0]); }

  PeriodicCoefficientField with_constants(double mu, double lipschitz) const;

 private:
  std::string name_;
  int dim_;
  Eval a_;
  std::array<Eval, 2> dy_;
  double mu_;
  double lipschitz_;
  bool lipschitz_continuous_;
  bool constant_;
};

struct ValidationReport {
  double symmetry_defect = 0.0;
  double eig_min = 0.0;
  double eig_max = 0.0;
  double periodicity_mismatch = 0.0;
  double lipschitz_quotient = 0.0;
  /// Where the smallest eigenvalue was seen.
  Point worst_point{0.0, 0.0};
};

/// Sample-based check of symmetry, ellipticity, periodicity and Lipschitz bound.
ValidationReport validate(const PeriodicCoefficientField& field, int samples);

/// Builds and verifies a field. A declared M smaller than the observed
/// Lipschitz quotient is raised to it; ellipticity violations are rejected.
PeriodicCoefficientField build_field(const CoefficientSpec& spec, double mu, double lipschitz);

/// A(x/eps) at element midpoints or nodes of a domain grid.
TensorField sample_epsilon(const PeriodicCoefficientField& field, double eps, const Grid& grid,
                           Location loc = Location::element_midpoints);

/// A(x/eps) at arbitrary points.
std::vector<Mat2> sample_points(const PeriodicCoefficientField& field, double eps, const std::vector<Point>& points);

/// Names accepted by `CoefficientSpec::preset`.
const std::vector<std::string>& preset_names();

}  // namespace homwave
