#include <random>
#include <vector>

#include "doctest.h"
#include "homwave/kernels.hpp"
#include "homwave/sparse.hpp"

using namespace homwave;

namespace {

std::vector<double> random_vector(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

CsrMatrix random_sparse(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> col(0, static_cast<int>(n) - 1);
  std::vector<Triplet> t;
  for (std::size_t r = 0; r < n; ++r)
    for (int k = 0; k < 5; ++k) t.push_back({static_cast<int>(r), col(rng), u(rng)});
  return CsrMatrix::from_triplets(n, n, t);
}

}  // namespace

TEST_CASE("parallel kernels agree with the serial reference") {
  const std::size_t n = 10007;
  const auto a = random_sparse(n, 1);
  const auto x = random_vector(n, 2);
  const auto w = random_vector(n, 3);
  std::vector<double> ys(n), yp(n);
  kernels::serial::spmv(a.view(), x, ys);
  kernels::parallel::spmv(a.view(), x, yp);
  for (std::size_t i = 0; i < n; ++i) CHECK(yp[i] == doctest::Approx(ys[i]).epsilon(1e-14));

  CHECK(kernels::parallel::dot(x, w) == doctest::Approx(kernels::serial::dot(x, w)).epsilon(1e-12));
  CHECK(kernels::parallel::weighted_dot(w, x, x) == doctest::Approx(kernels::serial::weighted_dot(w, x, x)).epsilon(1e-12));

  auto u1 = x, u2 = x, v1 = w, v2 = w;
  kernels::serial::kick_drift(0.1, ys, v1, u1);
  kernels::parallel::kick_drift(0.1, ys, v2, u2);
  CHECK(u1 == u2);
  CHECK(v1 == v2);

  auto z1 = w, z2 = w;
  kernels::serial::axpy(0.5, x, z1);
  kernels::parallel::axpy(0.5, x, z2);
  CHECK(z1 == z2);
  kernels::serial::xpby(x, -0.25, z1);
  kernels::parallel::xpby(x, -0.25, z2);
  CHECK(z1 == z2);
}

TEST_CASE("triplet assembly sums duplicates and extracts blocks") {
  auto m = CsrMatrix::from_triplets(3, 3, {{0, 0, 1.0}, {0, 0, 2.0}, {2, 1, -1.0}, {1, 2, 4.0}});
  CHECK(m.nonzeros() == 3);
  CHECK(m.diagonal()[0] == 3.0);
  const std::vector<double> x{1.0, 2.0, 3.0};
  const auto y = m.apply(x);
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 12.0);
  CHECK(y[2] == -2.0);
  const std::vector<int> keep{-1, 0, 1};
  const auto sub = m.extract(keep, 2, keep, 2);
  CHECK(sub.rows() == 2);
  CHECK(sub.nonzeros() == 2);
  CHECK_THROWS_AS(CsrMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), std::exception);
}
