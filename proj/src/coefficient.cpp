#include "homwave/coefficient.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "homwave/error.hpp"

namespace homwave {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double frac(double x) { return x - std::floor(x); }

Mat2 zero_tensor() { return {{{0.0, 0.0}, {0.0, 0.0}}}; }

Mat2 diag(double a, double b) { return {{{a, 0.0}, {0.0, b}}}; }

double norm(const Mat2& a) {
  return std::sqrt(a[0][0] * a[0][0] + a[0][1] * a[0][1] + a[1][0] * a[1][0] + a[1][1] * a[1][1]);
}

Mat2 minus(const Mat2& a, const Mat2& b) {
  Mat2 c;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) c[i][j] = a[i][j] - b[i][j];
  return c;
}

double cosine_a(double y) { return 1.0 / (2.0 + std::cos(kTwoPi * y)); }
double cosine_da(double y) {
  const double s = 2.0 + std::cos(kTwoPi * y);
  return kTwoPi * std::sin(kTwoPi * y) / (s * s);
}

std::string point_text(const Point& y, int dim) {
  std::ostringstream os;
  os.precision(6);
  os << "(" << y[0];
  if (dim == 2) os << ", " << y[1];
  os << ")";
  return os.str();
}

/// Periodic bilinear interpolation of node samples.
PeriodicCoefficientField::Eval gridded_eval(int dim, std::array<int, 2> res, std::vector<Mat2> samples) {
  return [dim, res, s = std::move(samples)](const Point& y) {
    const int n1 = res[0];
    const int n2 = dim == 2 ? res[1] : 1;
    const double t1 = frac(y[0]) * n1;
    const int i0 = std::min(static_cast<int>(t1), n1 - 1);
    const double a1 = t1 - i0;
    const int i1 = (i0 + 1) % n1;
    int j0 = 0, j1 = 0;
    double a2 = 0.0;
    if (dim == 2) {
      const double t2 = frac(y[1]) * n2;
      j0 = std::min(static_cast<int>(t2), n2 - 1);
      a2 = t2 - j0;
      j1 = (j0 + 1) % n2;
    }
    auto at = [&](int i, int j) -> const Mat2& { return s[static_cast<std::size_t>(i) + static_cast<std::size_t>(n1) * j]; };
    Mat2 out;
    for (int p = 0; p < 2; ++p)
      for (int q = 0; q < 2; ++q)
        out[p][q] = (1 - a1) * (1 - a2) * at(i0, j0)[p][q] + a1 * (1 - a2) * at(i1, j0)[p][q] +
                    (1 - a1) * a2 * at(i0, j1)[p][q] + a1 * a2 * at(i1, j1)[p][q];
    return out;
  };
}

}  // namespace

PeriodicCoefficientField::PeriodicCoefficientField(std::string name, int dim, Eval a, double mu, double lipschitz,
                                                   bool lipschitz_continuous, bool constant, Eval derivative_y1,
                                                   Eval derivative_y2)
    : name_(std::move(name)),
      dim_(dim),
      a_(std::move(a)),
      dy_{std::move(derivative_y1), std::move(derivative_y2)},
      mu_(mu),
      lipschitz_(lipschitz),
      lipschitz_continuous_(lipschitz_continuous),
      constant_(constant) {
  if (dim_ != 1 && dim_ != 2) throw InvalidArgument("coefficient dimension must be 1 or 2");
}

Mat2 PeriodicCoefficientField::operator()(const Point& y) const {
  Point w{frac(y[0]), dim_ == 2 ? frac(y[1]) : 0.0};
  Mat2 a = a_(w);
  if (dim_ == 1) a[0][1] = a[1][0] = a[1][1] = 0.0;
  return a;
}

Mat2 PeriodicCoefficientField::derivative(const Point& y, int k) const {
  if (constant_) return zero_tensor();
  if (dy_[k]) {
    Point w{frac(y[0]), dim_ == 2 ? frac(y[1]) : 0.0};
    return dy_[k](w);
  }
  const double step = 1e-5;
  Point p = y, m = y;
  p[k] += step;
  m[k] -= step;
  const Mat2 ap = (*this)(p);
  const Mat2 am = (*this)(m);
  Mat2 d;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) d[i][j] = (ap[i][j] - am[i][j]) / (2 * step);
  return d;
}

PeriodicCoefficientField PeriodicCoefficientField::with_constants(double mu, double lipschitz) const {
  PeriodicCoefficientField f = *this;
  f.mu_ = mu;
  f.lipschitz_ = lipschitz;
  return f;
}

ValidationReport validate(const PeriodicCoefficientField& field, int samples) {
  if (samples < 2) throw InvalidArgument("validate needs at least 2 samples per axis");
  const int d = field.dim();
  const int s1 = samples;
  const int s2 = d == 2 ? samples : 1;
  ValidationReport r;
  r.eig_min = std::numeric_limits<double>::infinity();
  r.eig_max = -r.eig_min;
  const double h = 1.0 / samples;
  std::vector<Mat2> grid(static_cast<std::size_t>(s1) * s2);
  for (int j = 0; j < s2; ++j)
    for (int i = 0; i < s1; ++i) {
      const Point y{i * h, j * h};
      const Mat2 a = field.raw(y);
      grid[i + static_cast<std::size_t>(s1) * j] = a;
      if (d == 2) r.symmetry_defect = std::max(r.symmetry_defect, std::fabs(a[0][1] - a[1][0]));
      const auto ev = symmetric_eigenvalues(a, d);
      if (ev[0] < r.eig_min) {
        r.eig_min = ev[0];
        r.worst_point = y;
      }
      r.eig_max = std::max(r.eig_max, ev[1]);
    }
  // Faces y_k = 0 against y_k = 1, and neighbour difference quotients.
  for (int j = 0; j < s2; ++j)
    for (int i = 0; i < s1; ++i) {
      const Point y{i * h, j * h};
      const Mat2& a = grid[i + static_cast<std::size_t>(s1) * j];
      if (i == 0) r.periodicity_mismatch = std::max(r.periodicity_mismatch, norm(minus(a, field.raw({1.0, y[1]}))));
      if (d == 2 && j == 0)
        r.periodicity_mismatch = std::max(r.periodicity_mismatch, norm(minus(a, field.raw({y[0], 1.0}))));
      const Mat2& right = grid[(i + 1) % s1 + static_cast<std::size_t>(s1) * j];
      r.lipschitz_quotient = std::max(r.lipschitz_quotient, norm(minus(right, a)) / h);
      if (d == 2) {
        const Mat2& up = grid[i + static_cast<std::size_t>(s1) * ((j + 1) % s2)];
        r.lipschitz_quotient = std::max(r.lipschitz_quotient, norm(minus(up, a)) / h);
      }
    }
  return r;
}

PeriodicCoefficientField build_field(const CoefficientSpec& spec, double mu, double lipschitz) {
  if (!(mu > 0.0) || mu > 1.0) throw InvalidArgument("ellipticity constant mu must lie in (0, 1]");
  if (lipschitz < 0.0) throw InvalidArgument("Lipschitz constant M must be nonnegative");
  const std::string& p = spec.preset;
  int dim = spec.dim;
  PeriodicCoefficientField::Eval a, d1, d2;
  bool smooth = true;
  bool constant = false;
  if (p == "constant") {
    const double c = spec.value;
    a = [c](const Point&) { return identity_tensor(c); };
    constant = true;
  } else if (p == "cosine1d") {
    dim = 1;
    a = [](const Point& y) { return diag(cosine_a(y[0]), 0.0); };
    d1 = [](const Point& y) { return diag(cosine_da(y[0]), 0.0); };
  } else if (p == "laminate2d") {
    dim = 2;
    a = [](const Point& y) { return diag(cosine_a(y[0]), 1.0); };
    d1 = [](const Point& y) { return diag(cosine_da(y[0]), 0.0); };
    d2 = [](const Point&) { return zero_tensor(); };
  } else if (p == "smooth_checker2d") {
    dim = 2;
    a = [](const Point& y) {
      const double s = 1.0 / (2.0 + std::cos(kTwoPi * y[0]) * std::cos(kTwoPi * y[1]));
      return identity_tensor(s);
    };
    d1 = [](const Point& y) {
      const double q = 2.0 + std::cos(kTwoPi * y[0]) * std::cos(kTwoPi * y[1]);
      return identity_tensor(kTwoPi * std::sin(kTwoPi * y[0]) * std::cos(kTwoPi * y[1]) / (q * q));
    };
    d2 = [](const Point& y) {
      const double q = 2.0 + std::cos(kTwoPi * y[0]) * std::cos(kTwoPi * y[1]);
      return identity_tensor(kTwoPi * std::cos(kTwoPi * y[0]) * std::sin(kTwoPi * y[1]) / (q * q));
    };
  } else if (p == "checkerboard2d") {
    dim = 2;
    const double hi = spec.contrast;
    a = [hi](const Point& y) {
      const int parity = (static_cast<int>(std::floor(2.0 * frac(y[0]))) + static_cast<int>(std::floor(2.0 * frac(y[1])))) % 2;
      return identity_tensor(parity == 0 ? 1.0 : hi);
    };
    smooth = false;
  } else if (p == "expression") {
    std::array<Expression, 4> e;
    const int count = dim == 1 ? 1 : 4;
    for (int k = 0; k < count; ++k) e[k] = Expression::parse(spec.entries[k]);
    if (dim == 1 && e[0].uses_y2()) throw InvalidArgument("1D expression may not use y2");
    a = [e, dim](const Point& y) {
      if (dim == 1) return diag(e[0](y[0]), 0.0);
      Mat2 m;
      m[0][0] = e[0](y[0], y[1]);
      m[0][1] = e[1](y[0], y[1]);
      m[1][0] = e[2](y[0], y[1]);
      m[1][1] = e[3](y[0], y[1]);
      return m;
    };
  } else if (p == "gridded") {
    const std::size_t need = static_cast<std::size_t>(spec.resolution[0]) * (dim == 2 ? spec.resolution[1] : 1);
    if (spec.resolution[0] < 2 || (dim == 2 && spec.resolution[1] < 2) || spec.samples.size() != need)
      throw InvalidArgument("gridded coefficient: sample count does not match the resolution");
    a = gridded_eval(dim, spec.resolution, spec.samples);
  } else {
    throw InvalidArgument("unknown coefficient preset '" + p + "'");
  }
  if (dim != 1 && dim != 2) throw InvalidArgument("coefficient dimension must be 1 or 2");

  PeriodicCoefficientField field(p, dim, a, mu, lipschitz, smooth, constant, d1, d2);
  const int samples = dim == 1 ? 4096 : 128;
  const ValidationReport r = validate(field, samples);
  if (r.symmetry_defect > 1e-12) throw InvalidArgument("coefficient is not symmetric (defect " + std::to_string(r.symmetry_defect) + ")");
  const double slack = 1e-12;
  if (r.eig_min < mu * (1 - slack) || r.eig_max > (1 / mu) * (1 + slack)) {
    std::ostringstream os;
    os << "ellipticity with mu=" << mu << " violated: eigenvalues in [" << r.eig_min << ", " << r.eig_max
       << "], smallest at y=" << point_text(r.worst_point, dim);
    throw InvalidArgument(os.str());
  }
  if (r.periodicity_mismatch > 1e-9) throw InvalidArgument("coefficient is not 1-periodic");
  double m = lipschitz;
  if (smooth && r.lipschitz_quotient > m) m = r.lipschitz_quotient;
  if (!smooth) m = std::max(m, r.lipschitz_quotient);
  return field.with_constants(mu, m);
}

TensorField sample_epsilon(const PeriodicCoefficientField& field, double eps, const Grid& grid, Location loc) {
  if (!(eps > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (field.dim() != grid.dim()) throw InvalidArgument("coefficient and grid dimensions differ");
  for (int k = 0; k < grid.dim(); ++k)
    if (grid.spacing(k) > eps / 8.0 * (1 + 1e-12)) {
      warn("grid spacing exceeds eps/8; oscillations are under-resolved");
      break;
    }
  TensorField t;
  t.grid = grid;
  t.location = loc;
  const std::size_t n = loc == Location::nodes ? grid.node_count() : grid.element_count();
  t.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point x = loc == Location::nodes ? grid.node_coord(i) : grid.element_center(i);
    t.values[i] = field({x[0] / eps, x[1] / eps});
  }
  return t;
}

std::vector<Mat2> sample_points(const PeriodicCoefficientField& field, double eps, const std::vector<Point>& points) {
  if (!(eps > 0.0)) throw InvalidArgument("epsilon must be positive");
  std::vector<Mat2> out;
  out.reserve(points.size());
  for (const auto& x : points) out.push_back(field({x[0] / eps, x[1] / eps}));
  return out;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"constant",       "cosine1d",   "laminate2d", "smooth_checker2d",
                                              "checkerboard2d", "expression", "gridded"};
  return names;
}

}  // namespace homwave
