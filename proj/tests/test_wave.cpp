#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "homwave/error.hpp"
#include "homwave/spectral.hpp"
#include "homwave/wave.hpp"

using namespace homwave;

namespace {

constexpr double pi = std::numbers::pi;

WaveState sine_state(const Grid& g, int k) {
  WaveState s;
  s.u.resize(g.node_count());
  s.v.assign(g.node_count(), 0.0);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    const Point x = g.node_coord(n);
    s.u[n] = std::sin(k * pi * x[0]) * (g.dim() == 2 ? std::sin(pi * x[1]) : 1.0);
  }
  for (int b : g.boundary_nodes()) s.u[b] = 0.0;
  return s;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("zero data stays zero") {
  const Grid g = Grid::on(Domain::rectangle(1, 1), {8, 8});
  const auto a = constant_tensor_field(g, identity_tensor());
  WaveState s;
  s.u.assign(g.node_count(), 0.0);
  s.v = s.u;
  WaveOptions o;
  o.T = 0.5;
  const auto tr = integrate(a, s, o);
  for (double e : tr.energy) CHECK(e == 0.0);
  for (double b : tr.boundary_grad_sq) CHECK(b == 0.0);
  CHECK(tr.final_state.t == doctest::Approx(0.5));
}

TEST_CASE("standing wave matches the closed form and its energy") {
  // u = cos(pi t) sin(pi x): energy pi^2/4, boundary flux sum 2 pi^2 cos^2(pi t).
  const Grid g = Grid::on(Domain::interval(1), {400});
  const auto a = constant_tensor_field(g, identity_tensor());
  WaveOptions o;
  o.T = 1.0;
  o.sample_stride = 50;
  const auto tr = integrate(a, sine_state(g, 1), o);
  CHECK(tr.energy[0] == doctest::Approx(pi * pi / 4).epsilon(1e-4));
  for (std::size_t k = 0; k < tr.samples.size(); ++k) {
    const auto& s = tr.samples[k];
    double err = 0.0;
    for (std::size_t n = 0; n < g.node_count(); ++n)
      err = std::max(err, std::fabs(s.u[n] - std::cos(pi * s.t) * std::sin(pi * g.node_coord(n)[0])));
    CHECK(err < 1e-4);
  }
  const std::size_t mid = tr.times.size() / 3;
  CHECK(tr.boundary_grad_sq[mid] == doctest::Approx(2 * pi * pi * std::pow(std::cos(pi * tr.times[mid]), 2)).epsilon(1e-3));
  // int_0^1 2 pi^2 cos^2 = pi^2
  CHECK(boundary_gradient_integral(tr) == doctest::Approx(pi * pi).epsilon(1e-4));
  CHECK(tr.cfl_ratio <= 0.5 + 1e-12);
}

TEST_CASE("energy drift is second order in dt") {
  const Grid g = Grid::on(Domain::rectangle(1, 1), {24, 24});
  const auto a = constant_tensor_field(g, {{{1.0, 0.2}, {0.2, 0.6}}});
  const WaveState s0 = sine_state(g, 2);
  auto drift = [&](double dt) {
    WaveOptions o;
    o.T = 2.0;
    o.dt = dt;
    const auto tr = integrate(a, s0, o);
    double m = 0.0;
    for (double e : tr.energy) m = std::max(m, std::fabs(e - tr.energy[0]));
    return m / tr.energy[0];
  };
  const double d1 = drift(0.01), d2 = drift(0.005);
  CHECK(d1 < 1e-2);
  CHECK(d1 / d2 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("multi-mode data follows the modal solution") {
  const Grid g = Grid::on(Domain::rectangle(1, 1), {20, 20});
  const auto a = constant_tensor_field(g, {{{0.8, 0.1}, {0.1, 0.5}}});
  EigenRequest req;
  req.count = 4;
  auto basis = std::make_shared<EigenBasis>(eigenpairs(a, req));
  FilteredData fd;
  fd.basis = basis;
  fd.N = basis->lambda.back() + 1;
  fd.a = {1.0, -0.5, 0.25, 0.0};
  fd.b = {0.0, 1.0, 0.0, -2.0};
  const WaveState s0 = eigen_solution(*basis, fd, 0.0);
  auto err = [&](double dt) {
    WaveOptions o;
    o.T = 1.5;
    o.dt = dt;
    const auto tr = integrate(a, s0, o);
    return max_abs_diff(tr.final_state.u, eigen_solution(*basis, fd, 1.5).u);
  };
  const double e1 = err(0.016), e2 = err(0.008);
  CHECK(e1 < 1e-2);
  CHECK(e1 / e2 > 3.5);
}

TEST_CASE("half period of the first mode flips the sign") {
  const Grid g = Grid::on(Domain::interval(1), {200});
  const auto a = constant_tensor_field(g, identity_tensor(0.5));
  EigenRequest req;
  req.count = 1;
  auto basis = std::make_shared<EigenBasis>(eigenpairs(a, req));
  FilteredData fd{basis->lambda[0] + 1, {1.0}, {0.0}, basis};
  const double T = pi / std::sqrt(basis->lambda[0]);
  const auto s = eigen_solution(*basis, fd, T);
  for (std::size_t n = 0; n < g.node_count(); ++n) CHECK(s.u[n] == doctest::Approx(-basis->psi[0][n]).epsilon(1e-12));
  WaveOptions o;
  o.T = T;
  o.dt = 1e-3;
  const auto tr = integrate(a, eigen_solution(*basis, fd, 0.0), o);
  CHECK(max_abs_diff(tr.final_state.u, s.u) < 1e-5);
}

TEST_CASE("integration is reversible") {
  const Grid g = Grid::on(Domain::rectangle(1, 1), {16, 16});
  const auto a = constant_tensor_field(g, identity_tensor());
  const WaveState s0 = sine_state(g, 3);
  WaveOptions o;
  o.T = 0.7;
  const auto fwd = integrate(a, s0, o);
  WaveState back = fwd.final_state;
  for (double& v : back.v) v = -v;
  const auto rev = integrate(a, back, o);
  CHECK(max_abs_diff(rev.final_state.u, s0.u) < 1e-11);
}

TEST_CASE("serial and parallel kernels agree") {
  const Grid g = Grid::on(Domain::rectangle(1, 1), {32, 32});
  const auto a = constant_tensor_field(g, identity_tensor());
  WaveOptions o;
  o.T = 0.3;
  const auto p = integrate(a, sine_state(g, 1), o);
  o.serial = true;
  const auto s = integrate(a, sine_state(g, 1), o);
  CHECK(max_abs_diff(p.final_state.u, s.final_state.u) < 1e-12);
}

TEST_CASE("forcing and boundary data") {
  // u = t x is reproduced exactly: g(1,t) = t, no forcing.
  const Grid g = Grid::on(Domain::interval(1), {20});
  const auto a = constant_tensor_field(g, identity_tensor());
  WaveState s;
  s.u.assign(g.node_count(), 0.0);
  s.v.resize(g.node_count());
  for (std::size_t n = 0; n < g.node_count(); ++n) s.v[n] = g.node_coord(n)[0];
  WaveOptions o;
  o.T = 1.0;
  o.boundary = [&](double t, std::size_t, std::span<double> u) {
    u[0] = 0.0;
    u[g.node_count() - 1] = t;
  };
  auto tr = integrate(a, s, o);
  for (std::size_t n = 0; n < g.node_count(); ++n) CHECK(tr.final_state.u[n] == doctest::Approx(g.node_coord(n)[0]).epsilon(1e-10));
  // conormal at x=1 is +1 (n=+1, du/dx=t), at x=0 it is -t.
  const auto cn = conormal_trace(tr, a);
  CHECK(cn.back()[0] == doctest::Approx(-1.0));
  CHECK(cn.back()[1] == doctest::Approx(1.0));

  // u_tt - u_xx = 2 with u = t^2 on the boundary is solved by u = t^2.
  WaveState z;
  z.u.assign(g.node_count(), 0.0);
  z.v = z.u;
  WaveOptions f;
  f.T = 1.0;
  f.forcing = [](double, std::span<double> fv) { for (double& x : fv) x = 2.0; };
  f.boundary = [&](double t, std::size_t, std::span<double> u) { u[0] = u[g.node_count() - 1] = t * t; };
  tr = integrate(a, z, f);
  for (double u : tr.final_state.u) CHECK(u == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("invalid setups are rejected") {
  const Grid g = Grid::on(Domain::interval(1), {20});
  const auto a = constant_tensor_field(g, identity_tensor());
  WaveOptions o;
  o.dt = 0.1;
  CHECK_THROWS_AS(integrate(a, sine_state(g, 1), o), InvalidArgument);
  o.dt = 0.0;
  o.T = -1;
  CHECK_THROWS_AS(integrate(a, sine_state(g, 1), o), InvalidArgument);
  o.T = 1;
  o.boundary = [](double, std::size_t, std::span<double> u) { u[0] = 1.0; };
  CHECK_THROWS_AS(integrate(a, sine_state(g, 1), o), InvalidArgument);
  WaveState bad;
  CHECK_THROWS_AS(integrate(a, bad, WaveOptions{}), InvalidArgument);
}
