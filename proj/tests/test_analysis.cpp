#include <doctest.h>

#include <cmath>
#include <numbers>

#include "homwave/analysis.hpp"
#include "homwave/error.hpp"

using namespace homwave;

namespace {

constexpr double pi = std::numbers::pi;

PeriodicCoefficientField preset(const std::string& name, int dim = 1, double mu = 1.0 / 3.0) {
  CoefficientSpec s;
  s.preset = name;
  s.dim = dim;
  return build_field(s, mu, 10.0);
}

Scenario unit_interval(const std::string& name, double mu = 1.0 / 3.0) {
  return Scenario{name, preset(name, 1, mu), Domain::interval(1.0)};
}

}  // namespace

TEST_CASE("log-log fit recovers a power law and flags the floor") {
  const std::vector<double> eps{0.5, 0.25, 0.125, 0.0625};
  std::vector<double> v;
  for (double e : eps) v.push_back(3.0 * std::pow(e, 1.5));
  const auto f = fit_rate(eps, v, "m", 1e-12);
  CHECK(f.slope == doctest::Approx(1.5));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK_FALSE(f.floor);
  const auto g = fit_rate(eps, {1e-15, 2e-15, 0.0, 1e-16}, "m", 1e-12);
  CHECK(g.floor);
  CHECK(std::isnan(g.slope));
}

TEST_CASE("corrector error vanishes for constant coefficients") {
  const Scenario sc = unit_interval("constant", 1.0);
  const auto s = prepare(sc, 0.125);
  const auto phi = dirichlet_correctors(s.a_eps, 0.125);
  WaveOptions o;
  o.T = 0.5;
  o.sample_stride = 20;
  WaveState init;
  init.u.resize(s.grid.node_count());
  init.v.assign(s.grid.node_count(), 0.0);
  for (std::size_t n = 0; n < init.u.size(); ++n) init.u[n] = std::sin(pi * s.grid.node_coord(n)[0]);
  init.u.front() = init.u.back() = 0.0;
  const auto te = integrate(s.a_eps, init, o);
  const auto t0 = integrate(s.a_hom, init, o);
  for (const auto& e : corrector_error(te, t0, phi)) {
    CHECK(e.grad < 1e-12);
    CHECK(e.time_derivative < 1e-12);
  }
}

TEST_CASE("corrector error with the identity map is the plain difference") {
  // Phi = x removes the corrector term, leaving |grad(u_eps - u0)|.
  const Grid g = Grid::on(Domain::interval(1), {40});
  DirichletCorrector id;
  id.grid = g;
  id.phi[0].resize(g.node_count());
  id.phi[1].assign(g.node_count(), 0.0);
  for (std::size_t n = 0; n < g.node_count(); ++n) id.phi[0][n] = g.node_coord(n)[0];
  WaveState a{0.3, std::vector<double>(g.node_count()), std::vector<double>(g.node_count())};
  WaveState b = a;
  std::vector<double> d(g.node_count());
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    const double x = g.node_coord(n)[0];
    a.u[n] = std::sin(pi * x);
    b.u[n] = 0.5 * std::sin(2 * pi * x);
    a.v[n] = x * (1 - x);
    d[n] = a.u[n] - b.u[n];
  }
  const auto lap = assemble_stiffness(constant_tensor_field(g, identity_tensor()));
  const auto mass = lumped_mass(g);
  const auto e = corrector_error_at(g, lap, mass, a, b, id);
  CHECK(e.grad == doctest::Approx(gradient_norm(lap, d)).epsilon(1e-14));
  CHECK(e.time_derivative == doctest::Approx(l2_norm(mass, a.v)).epsilon(1e-14));
  b.t = 0.4;
  CHECK_THROWS_AS(corrector_error_at(g, lap, mass, a, b, id), InvalidArgument);
}

TEST_CASE("constant coefficient sweeps sit at the floor") {
  const Scenario sc = unit_interval("constant", 1.0);
  const auto t = rate_sweep(sc, {0.25, 0.125}, RateData{}, 0.5);
  CHECK(t.complete);
  CHECK(t.fit("energy_error").floor);
  RateData smooth;
  smooth.filtered = false;
  smooth.phi0 = [](const Point& x) { return std::sin(pi * x[0]); };
  smooth.phi1 = [](const Point& x) { return std::sin(2 * pi * x[0]); };
  const auto l = l2_rate(sc, {0.25, 0.125}, smooth, 0.5);
  CHECK(l.fit("l2_error").floor);
}

TEST_CASE("energy error decays at first order on the cosine preset") {
  const Scenario sc = unit_interval("cosine1d");
  const auto t = rate_sweep(sc, {1.0 / 8, 1.0 / 16, 1.0 / 32}, RateData{}, 1.0);
  REQUIRE(t.complete);
  const auto& f = t.fit("energy_error");
  CHECK(f.slope >= 0.8);
  CHECK(f.r2 >= 0.9);
  // data matched through L_0 phi_0 = L_eps phi_eps0
  for (double m : t.values("data_mismatch")) CHECK(m < 1e-10);
  // the estimate's right side dominates the error
  for (double r : t.values("ratio")) CHECK(r < 1.0);
}

TEST_CASE("L2 error decays at first order and both routes agree") {
  const Scenario sc = unit_interval("cosine1d");
  RateData smooth;
  smooth.filtered = false;
  smooth.phi0 = [](const Point& x) { return std::sin(pi * x[0]); };
  smooth.phi1 = [](const Point& x) { return 0.5 * std::sin(2 * pi * x[0]); };
  const auto t = l2_rate(sc, {1.0 / 8, 1.0 / 16, 1.0 / 32}, smooth, 1.0);
  REQUIRE(t.complete);
  CHECK(t.fit("l2_error").slope >= 0.8);
  const auto a = t.values("l2_error"), b = t.values("l2_error_direct");
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-3));
  for (double g : t.values("route_gap")) CHECK(g < 1e-3);
  CHECK(t.extras.at("doubling_factor") < 2.0);
}

TEST_CASE("sweeps reject bad epsilon lists and coarse grids") {
  const Scenario sc = unit_interval("cosine1d");
  CHECK_THROWS_AS(rate_sweep(sc, {0.125, 0.25}, RateData{}, 1.0), InvalidArgument);
  CHECK_THROWS_AS(rate_sweep(sc, {}, RateData{}, 1.0), InvalidArgument);
  Scenario coarse = sc;
  coarse.nodes_per_eps = 4;
  CHECK_THROWS_AS(prepare(coarse, 0.125), InvalidArgument);
}

TEST_CASE("Rellich identity") {
  SUBCASE("zero trajectory") {
    const Grid g = Grid::on(Domain::interval(1), {16});
    const auto a = constant_tensor_field(g, identity_tensor());
    WaveState z{0, std::vector<double>(g.node_count(), 0.0), std::vector<double>(g.node_count(), 0.0)};
    WaveOptions o;
    const auto r = rellich_residual(a, {}, z, o, {0, 0}, RellichMode::homogenized);
    CHECK(r.lhs == 0.0);
    CHECK(r.rhs == 0.0);
    CHECK(r.residual == 0.0);
  }
  SUBCASE("eigenmode residual is second order") {
    std::vector<double> res;
    for (int n : {16, 32, 64}) {
      const Grid g = Grid::on(Domain::rectangle(1, 1), {n, n});
      const auto a = constant_tensor_field(g, {{{0.6, 0.1}, {0.1, 0.4}}});
      EigenRequest req;
      req.count = 1;
      const auto b = eigenpairs(a, req);
      WaveOptions o;
      o.T = 2.0;
      const WaveState s{0, b.psi[0], std::vector<double>(g.node_count(), 0.0)};
      res.push_back(rellich_residual(a, {}, s, o, {0.2, -0.1}, RellichMode::homogenized).residual);
    }
    CHECK(std::log2(res[0] / res[1]) > 1.8);
    CHECK(std::log2(res[1] / res[2]) > 1.8);
  }
  SUBCASE("trajectory and observer routes agree") {
    const Grid g = Grid::on(Domain::interval(1), {24});
    const auto a = constant_tensor_field(g, identity_tensor(0.5));
    WaveState s{0, std::vector<double>(g.node_count()), std::vector<double>(g.node_count(), 0.0)};
    for (std::size_t n = 0; n < g.node_count(); ++n) s.u[n] = std::sin(pi * g.node_coord(n)[0]);
    WaveOptions o;
    o.T = 1.0;
    o.sample_stride = 1;
    const auto tr = integrate(a, s, o);
    const auto r1 = rellich_residual(tr, a, {}, {0, 0}, RellichMode::homogenized);
    const auto r2 = rellich_residual(a, {}, s, o, {0, 0}, RellichMode::homogenized);
    CHECK(r1.lhs == doctest::Approx(r2.lhs).epsilon(1e-14));
    CHECK(r1.rhs == doctest::Approx(r2.rhs).epsilon(1e-14));
  }
  SUBCASE("oscillating coefficient needs its derivative") {
    const auto checker = preset("checkerboard2d", 2, 0.25);
    const Grid g = Grid::on(Domain::rectangle(1, 1), {16, 16});
    CHECK_THROWS_AS(coefficient_gradient(checker, 0.25, g), InvalidArgument);
    const auto cosine = preset("cosine1d");
    const Grid g1 = Grid::for_epsilon(Domain::interval(1), 0.125, 16);
    const auto a = sample_epsilon(cosine, 0.125, g1);
    WaveState s{0, std::vector<double>(g1.node_count(), 0.0), std::vector<double>(g1.node_count(), 0.0)};
    CHECK_THROWS_AS(rellich_residual(a, {}, s, WaveOptions{}, {0, 0}, RellichMode::full), InvalidArgument);
    CHECK_THROWS_AS(rellich_residual(a, {}, s, WaveOptions{}, {0, 0}, RellichMode::homogenized), InvalidArgument);
  }
  SUBCASE("cosine preset residual decreases under refinement") {
    const auto field = preset("cosine1d");
    double prev = 1.0;
    for (int np : {16, 32, 64}) {
      const Grid g = Grid::for_epsilon(Domain::interval(1), 0.125, np);
      const auto a = sample_epsilon(field, 0.125, g);
      EigenRequest req;
      req.count = 1;
      const auto b = eigenpairs(a, req);
      std::vector<Point> pts;
      for (const auto& q : boundary_quadrature(g)) pts.push_back(g.node_coord(q.node));
      WaveOptions o;
      o.T = 2.0;
      const WaveState s{0, b.psi[0], std::vector<double>(g.node_count(), 0.0)};
      const auto r = rellich_residual(a, coefficient_gradient(field, 0.125, g), s, o, {0, 0}, RellichMode::full,
                                      sample_points(field, 0.125, pts));
      CHECK(std::isfinite(r.residual));
      CHECK(r.residual < prev);
      prev = r.residual;
    }
  }
}

TEST_CASE("observation ratio") {
  const Grid g = Grid::on(Domain::interval(1), {400});
  const double ahat = 0.5;
  const auto a = constant_tensor_field(g, identity_tensor(ahat));
  SUBCASE("single mode closed form") {
    // u = cos(w t) sqrt2 sin(k pi x), w = k pi sqrt(ahat):
    // upper = 4 (1/T) int_0^T cos^2(w t) dt.
    for (int k : {1, 3}) {
      std::vector<double> u(g.node_count()), v(g.node_count(), 0.0);
      for (std::size_t n = 0; n < u.size(); ++n) u[n] = std::sqrt(2.0) * std::sin(k * pi * g.node_coord(n)[0]);
      u.front() = u.back() = 0.0;
      const double T = 2.0, w = k * pi * std::sqrt(ahat);
      const double expect = 4.0 * (0.5 + std::sin(2 * w * T) / (4 * w * T));
      const auto r = observation_ratio(a, u, v, T);
      CHECK(r.upper == doctest::Approx(expect).epsilon(2e-3));
      CHECK(r.lower == doctest::Approx(1.0 / r.upper));
    }
  }
  SUBCASE("scale invariance") {
    EigenRequest req;
    req.count = 4;
    const auto b = eigenpairs(a, req);
    const auto lap = assemble_stiffness(constant_tensor_field(g, identity_tensor()));
    auto [u, v] = random_filtered_data(b, 4, lap, 42);
    CHECK(std::pow(gradient_norm(lap, u), 2) + b.inner(v, v) == doctest::Approx(1.0));
    const auto r1 = observation_ratio(a, u, v, 1.5, 0.5, {0});
    for (double& x : u) x *= 3;
    for (double& x : v) x *= 3;
    const auto r3 = observation_ratio(a, u, v, 1.5, 0.5, {0});
    CHECK(std::fabs(r1.upper - r3.upper) < 1e-10 * r1.upper);
    CHECK(std::fabs(r1.boundary_gamma / r1.energy - r3.boundary_gamma / r3.energy) < 1e-10);
    CHECK(r1.boundary_gamma < r1.boundary);
    const auto [u2, v2] = random_filtered_data(b, 4, lap, 42);
    const auto [u3, v3] = random_filtered_data(b, 4, lap, 43);
    CHECK(u2 == random_filtered_data(b, 4, lap, 42).first);
    CHECK(u2 != u3);
  }
  SUBCASE("zero data rejected") {
    const std::vector<double> z(g.node_count(), 0.0);
    CHECK_THROWS_AS(observation_ratio(a, z, z, 1.0), InvalidArgument);
  }
}

TEST_CASE("constant scenario has no epsilon dependence") {
  const Scenario sc = unit_interval("constant", 1.0);
  const auto s = prepare(sc, 0.125);
  for (std::size_t e = 0; e < s.a_eps.values.size(); ++e) CHECK(s.a_eps.values[e] == s.a_hom.values[e]);
  std::vector<double> u(s.grid.node_count()), v(s.grid.node_count(), 0.0);
  for (std::size_t n = 0; n < u.size(); ++n) u[n] = std::sin(pi * s.grid.node_coord(n)[0]);
  u.front() = u.back() = 0.0;
  CHECK(observation_ratio(s.a_eps, u, v, 2.0).upper == observation_ratio(s.a_hom, u, v, 2.0).upper);
}

TEST_CASE("observability report on a small sweep") {
  Scenario sc{"cosine1d", preset("cosine1d"), Domain::interval(8.0)};
  ObservabilityOptions o;
  o.trials = 3;
  o.t_sweep = {1.0, 2.0};
  const auto rep = observability_ratios(sc, {1.0 / 8, 1.0 / 16}, o);
  CHECK(rep.T == doctest::Approx(32.0));
  CHECK(rep.T_ge_C0_r0);
  REQUIRE(rep.per_eps.size() == 2);
  for (const auto& s : rep.per_eps) {
    CHECK(s.modes >= 1);
    CHECK(s.min_upper > 0.0);
    CHECK(s.min_upper <= s.max_upper);
    CHECK(s.high_mode_eps_lambda == doctest::Approx(1.0).epsilon(0.3));
  }
  CHECK(rep.upper_variation < 10);
  CHECK(rep.lower_variation < 10);
  CHECK(rep.t_sweep.size() == 2);
}

TEST_CASE("trace table") {
  const Scenario sc = unit_interval("constant", 1.0);
  Scenario fine = sc;
  fine.nodes_per_eps = 16;
  const double eps = 1.0 / 32;
  const auto s = prepare(fine, eps);
  EigenRequest req;
  req.count = 40;
  const auto b = eigenpairs(s.a_eps, req);
  const auto t = eigen_trace_table(b, eps);
  int in = 0;
  for (const auto& r : t.rows) {
    CHECK(r.in_range == (eps * eps * r.lambda <= 1.0));
    if (!r.in_range) continue;
    ++in;
    CHECK(r.ratio == doctest::Approx(4.0 / (1.0 + eps * r.lambda)).epsilon(0.02));
  }
  CHECK(in >= 8);
  CHECK(t.rows.back().in_range == false);
  // eps -> 0 at fixed k: the first ratio tends to 4
  const auto s2 = prepare(fine, eps / 4);
  req.count = 2;
  const auto t2 = eigen_trace_table(eigenpairs(s2.a_eps, req), eps / 4);
  CHECK(std::fabs(t2.rows[0].ratio - 4.0) < std::fabs(t.rows[0].ratio - 4.0));
}
