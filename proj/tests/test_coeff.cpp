#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "homwave/array_file.hpp"
#include "homwave/coefficient.hpp"
#include "homwave/error.hpp"

using namespace homwave;

namespace {

CoefficientSpec preset(const std::string& name, int dim = 1) {
  CoefficientSpec s;
  s.preset = name;
  s.dim = dim;
  return s;
}

// Independent scan of 1/(2+cos 2 pi y).
std::array<double, 2> cosine_range_oracle() {
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i <= 100000; ++i) {
    const double v = 1.0 / (2.0 + std::cos(2.0 * std::numbers::pi * i / 100000.0));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

}  // namespace

TEST_CASE("expression parser") {
  CHECK(Expression::parse("1 + 2*3")(0.0) == 7.0);
  CHECK(Expression::parse("-2^2")(0.0) == -4.0);
  CHECK(Expression::parse("2^3^2")(0.0) == 512.0);
  CHECK(Expression::parse("y1*y2 + y")(2.0, 3.0) == 8.0);
  CHECK(Expression::parse("cos(2*pi*y)")(0.5) == doctest::Approx(-1.0));
  CHECK(Expression::parse("sqrt(abs(-4)) + exp(0) + log(e)")(0.0) == doctest::Approx(4.0));
  CHECK(Expression::parse("y2")(0, 1) == 1.0);
  CHECK(Expression::parse("y2").uses_y2());
  CHECK_THROWS_AS(Expression::parse("1 +"), InvalidArgument);
  CHECK_THROWS_AS(Expression::parse("foo(y)"), InvalidArgument);
  CHECK_THROWS_AS(Expression::parse("(1"), InvalidArgument);
  CHECK_THROWS_AS(Expression::parse("1 2"), InvalidArgument);
}

TEST_CASE("identity preset") {
  const auto f = build_field(preset("constant", 2), 1.0, 0.0);
  const auto r = validate(f, 16);
  CHECK(r.symmetry_defect == 0.0);
  CHECK(r.eig_min == 1.0);
  CHECK(r.eig_max == 1.0);
  CHECK(r.periodicity_mismatch == 0.0);
  CHECK(r.lipschitz_quotient == 0.0);
  CHECK(f.lipschitz() == 0.0);
}

TEST_CASE("cosine preset admits mu = 1/3") {
  const auto f = build_field(preset("cosine1d"), 1.0 / 3.0, 0.0);
  const auto oracle = cosine_range_oracle();
  const auto r = validate(f, 1000);
  CHECK(r.eig_min == doctest::Approx(oracle[0]).epsilon(1e-9));
  CHECK(r.eig_max == doctest::Approx(oracle[1]).epsilon(1e-9));
  CHECK(r.eig_min >= 1.0 / 3.0 - 1e-15);
  CHECK(r.eig_max <= 1.0);
  // M is raised to the observed quotient (max |a'| = 2 pi sin/(2+cos)^2 ~ 2.42).
  CHECK(f.lipschitz() > 2.0);
  CHECK(f.lipschitz() < 3.0);
  CHECK_THROWS_AS(build_field(preset("cosine1d"), 0.5, 0.0), InvalidArgument);
}

TEST_CASE("laminate and smooth checker presets") {
  for (const char* name : {"laminate2d", "smooth_checker2d"}) {
    const auto f = build_field(preset(name, 2), 1.0 / 3.0, 0.0);
    const auto r = validate(f, 64);
    CHECK(r.symmetry_defect == 0.0);
    CHECK(r.eig_min >= 1.0 / 3.0 - 1e-15);
    CHECK(r.eig_max <= 1.0 + 1e-15);
    CHECK(r.periodicity_mismatch < 1e-12);
    CHECK(f.lipschitz_continuous());
  }
  const auto lam = build_field(preset("laminate2d", 2), 1.0 / 3.0, 0.0);
  const Mat2 a = lam({0.5, 0.3});
  CHECK(a[0][0] == doctest::Approx(1.0));
  CHECK(a[1][1] == 1.0);
  CHECK(a[0][1] == 0.0);
}

TEST_CASE("analytic derivatives match differences") {
  const auto f = build_field(preset("smooth_checker2d", 2), 1.0 / 3.0, 0.0);
  const Point y{0.13, 0.71};
  for (int k = 0; k < 2; ++k) {
    Point p = y, m = y;
    p[k] += 1e-6;
    m[k] -= 1e-6;
    const double fd = (f(p)[0][0] - f(m)[0][0]) / 2e-6;
    CHECK(f.derivative(y, k)[0][0] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("checkerboard is flagged non-Lipschitz") {
  auto s = preset("checkerboard2d", 2);
  s.contrast = 4.0;
  const auto f = build_field(s, 0.25, 0.0);
  CHECK_FALSE(f.lipschitz_continuous());
}

TEST_CASE("expression preset and rejections") {
  auto s = preset("expression", 2);
  s.entries = {"2 + sin(2*pi*y1)", "0.1*cos(2*pi*y2)", "0.1*cos(2*pi*y2)", "2"};
  const auto f = build_field(s, 0.3, 0.0);
  CHECK(f(Point{0.25, 0.0})[0][0] == doctest::Approx(3.0));
  s.entries[2] = "0.2*cos(2*pi*y2)";
  CHECK_THROWS_AS(build_field(s, 0.3, 0.0), InvalidArgument);
  auto bad = preset("expression", 1);
  bad.entries[0] = "sin(2*pi*y)";
  try {
    build_field(bad, 0.5, 0.0);
    FAIL("expected rejection");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("y=") != std::string::npos);
  }
  CHECK_THROWS_AS(build_field(preset("nope"), 1.0, 0.0), InvalidArgument);
}

TEST_CASE("gridded field with one asymmetric entry is flagged") {
  CoefficientSpec s = preset("gridded", 2);
  s.resolution = {4, 4};
  s.samples.assign(16, identity_tensor());
  const auto ok = build_field(s, 1.0, 0.0);
  CHECK(validate(ok, 8).symmetry_defect == 0.0);
  s.samples[5][0][1] = 0.2;
  CHECK_THROWS_AS(build_field(s, 0.5, 0.0), InvalidArgument);
  PeriodicCoefficientField raw("gridded", 2,
                               [&](const Point& y) {
                                 const int i = static_cast<int>(y[0] * 4) % 4, j = static_cast<int>(y[1] * 4) % 4;
                                 return s.samples[i + 4 * j];
                               },
                               0.5, 0.0, true, false);
  CHECK(validate(raw, 4).symmetry_defect == doctest::Approx(0.2));
}

TEST_CASE("sample_epsilon") {
  const auto f = build_field(preset("cosine1d"), 1.0 / 3.0, 0.0);
  const Grid g = Grid::on(Domain::interval(1.0), {64, 1});
  const auto t = sample_epsilon(f, 0.25, g, Location::nodes);
  // node x = 1/8 -> y = 1/2 -> a = 1
  CHECK(t.values[8][0][0] == doctest::Approx(1.0));
  // discrete eps-periodicity: shift by eps = 16 nodes
  for (int i = 0; i + 16 < 65; ++i) CHECK(t.values[i][0][0] == doctest::Approx(t.values[i + 16][0][0]).epsilon(1e-12));
  const auto one = sample_epsilon(f, 1.0, g, Location::nodes);
  CHECK(one.values[10][0][0] == doctest::Approx(f(Point{10.0 / 64, 0})[0][0]));
  CHECK_THROWS_AS(sample_epsilon(f, 0.0, g), InvalidArgument);
  const auto c = sample_epsilon(build_field(preset("constant"), 1.0, 0.0), 0.1, g);
  for (const auto& v : c.values) CHECK(v[0][0] == 1.0);

  const auto lam = build_field(preset("laminate2d", 2), 1.0 / 3.0, 0.0);
  const Grid g2 = Grid::on(Domain::rectangle(1.0, 1.0), {32, 32});
  const auto t2 = sample_epsilon(lam, 0.25, g2);
  for (std::size_t e = 0; e + 8 < g2.element_count(); ++e)
    if (g2.element_ij(e)[0] + 8 < 32) CHECK(t2.values[e][0][0] == doctest::Approx(t2.values[e + 8][0][0]).epsilon(1e-12));
}

TEST_CASE("array file round trip") {
  ArrayData a;
  a.dim = 2;
  a.resolution = {2, 3};
  a.components = 4;
  for (int i = 0; i < 24; ++i) a.values.push_back(0.1 * i + 1.0 / 3.0);
  const auto path = (std::filesystem::temp_directory_path() / "homwave_array_test.txt").string();
  write_array_file(path, a);
  const auto b = read_array_file(path);
  CHECK(b.dim == 2);
  CHECK(b.resolution == a.resolution);
  CHECK(b.components == 4);
  CHECK(b.values == a.values);
  std::filesystem::remove(path);
}
