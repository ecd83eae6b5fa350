#include <cmath>
#include <numbers>
#include <algorithm>
#include <random>

#include "doctest.h"
#include "homwave/error.hpp"
#include "homwave/spectral.hpp"

using namespace homwave;
using std::numbers::pi;

namespace {

// Exact discrete spectrum of the P1/lumped 1D Laplacian.
double lambda_1d(int k, int n) {
  const double h = 1.0 / n;
  const double s = std::sin(k * pi * h / 2);
  return 4.0 / (h * h) * s * s;
}

// Exact discrete spectrum of Q1 stiffness with lumped mass on the unit square.
double lambda_2d(int m, int k, int n) {
  const double h = 1.0 / n;
  const double a = std::sin(m * pi * h / 2), b = std::sin(k * pi * h / 2);
  return 4.0 / (h * h) * (a * a + b * b - 4.0 / 3.0 * a * a * b * b);
}

}  // namespace

TEST_CASE("1D Laplacian spectrum, dense and iterative") {
  for (int n : {64, 2000}) {
    const Grid g = Grid::on(Domain::interval(1.0), {n, 1});
    const auto b = eigenpairs(constant_tensor_field(g, identity_tensor()), {.count = 6, .tol = 1e-11});
    REQUIRE(b.size() == 6);
    for (int k = 1; k <= 6; ++k) {
      CHECK(b.lambda[k - 1] == doctest::Approx(lambda_1d(k, n)).epsilon(1e-9));
      double err = 0.0;
      for (std::size_t i = 0; i < g.node_count(); ++i)
        err = std::max(err, std::fabs(b.psi[k - 1][i] - std::sqrt(2.0) * std::sin(k * pi * g.node_coord(i)[0])));
      CHECK(err < 1e-6);
    }
    CHECK(b.orthonormality_defect < 1e-10);
    CHECK(b.max_residual < 1e-9);
    CHECK(std::fabs(b.lambda[0] - pi * pi) < 1e-2);
  }
}

TEST_CASE("scaled coefficient scales the spectrum") {
  const Grid g = Grid::on(Domain::interval(1.0), {100, 1});
  const auto b = eigenpairs(constant_tensor_field(g, identity_tensor(0.5)), {.count = 3});
  for (int k = 1; k <= 3; ++k) CHECK(b.lambda[k - 1] == doctest::Approx(0.5 * lambda_1d(k, 100)).epsilon(1e-10));
}

TEST_CASE("2D unit square spectrum") {
  const int n = 40;
  const Grid g = Grid::on(Domain::rectangle(1.0, 1.0), {n, n});
  const auto b = eigenpairs(constant_tensor_field(g, identity_tensor()), {.count = 6, .tol = 1e-10});
  std::vector<double> oracle;
  for (int m = 1; m <= 4; ++m)
    for (int k = 1; k <= 4; ++k) oracle.push_back(lambda_2d(m, k, n));
  std::sort(oracle.begin(), oracle.end());
  for (int i = 0; i < 6; ++i) CHECK(b.lambda[i] == doctest::Approx(oracle[i]).epsilon(1e-9));
  CHECK(b.lambda[0] == doctest::Approx(2 * pi * pi).epsilon(2e-3));
  CHECK(b.orthonormality_defect < 1e-9);
  for (int node : g.boundary_nodes()) CHECK(b.psi[1][node] == 0.0);
}

TEST_CASE("threshold mode, projection and synthesis") {
  const Grid g = Grid::on(Domain::interval(1.0), {1000, 1});
  auto basis = std::make_shared<const EigenBasis>(
      eigenpairs(constant_tensor_field(g, identity_tensor()), {.threshold = 200.0}));
  const std::size_t k = basis->count_at_most(200.0);
  CHECK(k == 4);  // 16 pi^2 < 200 < 25 pi^2
  CHECK(basis->lambda.back() > 200.0);
  const auto fd = project(basis->psi[0], {}, basis, 200.0);
  CHECK(fd.a[0] == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t j = 1; j < k; ++j) CHECK(std::fabs(fd.a[j]) < 1e-10);

  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  FilteredData x;
  x.N = 200.0;
  x.basis = basis;
  for (std::size_t j = 0; j < k; ++j) {
    x.a.push_back(nd(rng));
    x.b.push_back(nd(rng));
  }
  const auto [u, v] = synthesize(x);
  const auto back = project(u.values, v.values, basis, 200.0);
  for (std::size_t j = 0; j < k; ++j) {
    CHECK(back.a[j] == doctest::Approx(x.a[j]).epsilon(1e-10));
    CHECK(back.b[j] == doctest::Approx(x.b[j]).epsilon(1e-10));
  }
  CHECK(u.values.front() == 0.0);
  CHECK(u.values.back() == 0.0);
  // data orthogonal to the retained modes
  const auto far = project(basis->psi[k], basis->psi[k], basis, 200.0);
  for (std::size_t j = 0; j < k; ++j) CHECK(std::fabs(far.a[j]) < 1e-10);
  CHECK_THROWS_AS(project(u.values, {}, basis, basis->lambda.back()), InvalidArgument);
  // dim A_N is nondecreasing in N
  std::size_t last = 0;
  for (double N = 1; N < basis->lambda.back(); N *= 1.5) {
    CHECK(basis->count_at_most(N) >= last);
    last = basis->count_at_most(N);
  }
}

TEST_CASE("frequency threshold") {
  CHECK(frequency_threshold(1e-3, 1.0, 1.0) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(frequency_threshold(0.125, 1.0, 1.0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(frequency_threshold(0.125, 8.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(frequency_threshold(0.0, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("too many modes are rejected") {
  const Grid g = Grid::on(Domain::interval(1.0), {20, 1});
  CHECK_THROWS_AS(eigenpairs(constant_tensor_field(g, identity_tensor()), {.count = 10}), InvalidArgument);
}
