#include <cmath>
#include <numbers>

#include "doctest.h"
#include "homwave/cell.hpp"

using namespace homwave;

namespace {

PeriodicCoefficientField preset(const std::string& name, int dim = 1, double value = 1.0) {
  CoefficientSpec s;
  s.preset = name;
  s.dim = dim;
  s.value = value;
  return build_field(s, name == "constant" ? std::min(value, 1.0 / value) : 1.0 / 3.0, 0.0);
}

// chi' = (2 + cos 2 pi y)/2 - 1 integrates to sin(2 pi y)/(4 pi), already mean free.
double chi_oracle(double y) { return std::sin(2.0 * std::numbers::pi * y) / (4.0 * std::numbers::pi); }

}  // namespace

TEST_CASE("constant coefficient has vanishing correctors and flux") {
  const auto f = preset("constant", 2, 2.0);
  const auto cs = solve_correctors(f, Grid::cell(2, 16));
  CHECK(cs.sup_norm[0] < 1e-14);
  CHECK(cs.sup_norm[1] < 1e-14);
  const auto ah = homogenize(f, cs);
  CHECK(ah.a[0][0] == doctest::Approx(2.0));
  CHECK(ah.a[1][1] == doctest::Approx(2.0));
  CHECK(ah.a[0][1] == doctest::Approx(0.0));
  const auto b = flux_field(f, cs);
  for (const auto& row : b.b)
    for (const auto& v : row)
      for (double x : v) CHECK(std::fabs(x) < 1e-14);
  const auto phi = flux_corrector(b);
  CHECK(phi.sup_norm < 1e-14);
}

TEST_CASE("1D cosine corrector and harmonic mean") {
  const auto f = preset("cosine1d");
  const int n = 256;
  const auto cs = solve_correctors(f, Grid::cell(1, n));
  double err = 0.0;
  for (int i = 0; i < n; ++i) err = std::max(err, std::fabs(cs.chi[0][i] - chi_oracle(double(i) / n)));
  CHECK(err < 1e-5);
  CHECK(cs.sup_norm[0] == doctest::Approx(1.0 / (4 * std::numbers::pi)).epsilon(1e-3));
  CHECK(homogenize(f, cs).a[0][0] == doctest::Approx(0.5).epsilon(1e-10));
  const auto b = flux_field(f, cs);
  for (double x : b.b[0][0]) CHECK(std::fabs(x) < 1e-9);
  // O(h^2): halving h quarters the nodal error.
  const auto coarse = solve_correctors(f, Grid::cell(1, 32));
  double ec = 0.0;
  for (int i = 0; i < 32; ++i) ec = std::max(ec, std::fabs(coarse.chi[0][i] - chi_oracle(double(i) / 32)));
  const auto fine = solve_correctors(f, Grid::cell(1, 64));
  double ef = 0.0;
  for (int i = 0; i < 64; ++i) ef = std::max(ef, std::fabs(fine.chi[0][i] - chi_oracle(double(i) / 64)));
  CHECK(ec / ef == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("laminate separates") {
  const auto f = preset("laminate2d", 2);
  const int n = 32;
  const auto cs = solve_correctors(f, Grid::cell(2, n));
  CHECK(cs.sup_norm[1] < 1e-9);
  const auto c1 = solve_correctors(preset("cosine1d"), Grid::cell(1, n));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) CHECK(cs.chi[0][i + n * j] == doctest::Approx(c1.chi[0][i]).epsilon(1e-7));
  const auto ah = homogenize(f, cs);
  CHECK(ah.a[0][0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(ah.a[1][1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::fabs(ah.a[0][1]) < 1e-12);
  const auto b = flux_field(f, cs);
  for (const auto& row : b.b)
    for (const auto& v : row)
      for (double x : v) CHECK(std::fabs(x) < 1e-8);
}

TEST_CASE("smooth checker flux structure") {
  const auto f = preset("smooth_checker2d", 2);
  const auto cs = solve_correctors(f, Grid::cell(2, 32));
  CHECK(cs.residual <= 1e-10);
  double m0 = 0.0, m1 = 0.0;
  for (double v : cs.chi[0]) m0 += v;
  for (double v : cs.chi[1]) m1 += v;
  CHECK(std::fabs(m0) < 1e-12);
  CHECK(std::fabs(m1) < 1e-12);
  const auto ah = homogenize(f, cs);
  CHECK(ah.a[0][1] == ah.a[1][0]);
  const auto ev = ah.eigenvalues();
  CHECK(ev[0] >= 1.0 / 3.0);
  CHECK(ev[1] <= 3.0);
  const auto b = flux_field(f, cs);
  CHECK(b.divergence_residual < 1e-8);
  for (const auto& row : b.b)
    for (const auto& v : row) {
      double s = 0.0;
      for (double x : v) s += x;
      CHECK(std::fabs(s) / v.size() < 1e-14);
    }
  const auto phi = flux_corrector(b);
  CHECK(phi.antisymmetry_defect == 0.0);
  CHECK(phi.b_norm > 1e-3);
  CHECK(phi.relative_residual < 0.1);
}

TEST_CASE("homogenization is invariant under cell translation") {
  CoefficientSpec s;
  s.preset = "expression";
  s.dim = 2;
  s.entries = {"1/(2 + cos(2*pi*y1)*cos(2*pi*y2))", "0", "0", "1/(2 + cos(2*pi*y1)*cos(2*pi*y2))"};
  const auto f = build_field(s, 1.0 / 3.0, 0.0);
  s.entries = {"1/(2 + cos(2*pi*(y1+0.3))*cos(2*pi*(y2+0.1)))", "0", "0",
               "1/(2 + cos(2*pi*(y1+0.3))*cos(2*pi*(y2+0.1)))"};
  const auto g = build_field(s, 1.0 / 3.0, 0.0);
  const auto a = homogenize(f, solve_correctors(f, Grid::cell(2, 32)));
  const auto b = homogenize(g, solve_correctors(g, Grid::cell(2, 32)));
  CHECK(a.a[0][0] == doctest::Approx(b.a[0][0]).epsilon(1e-3));
  CHECK(a.a[1][1] == doctest::Approx(b.a[1][1]).epsilon(1e-3));
}
