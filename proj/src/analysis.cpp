#include "homwave/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "homwave/csv.hpp"
#include "homwave/error.hpp"
#include "homwave/kernels.hpp"

namespace homwave {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

CsrMatrix laplacian_of(const Grid& g) { return assemble_stiffness(constant_tensor_field(g, identity_tensor())); }

void check_decreasing(const std::vector<double>& eps) {
  if (eps.empty()) throw InvalidArgument("epsilon list is empty");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0)) throw InvalidArgument("epsilon values must be positive");
    if (i > 0 && !(eps[i] < eps[i - 1])) throw InvalidArgument("epsilon list must be strictly decreasing");
  }
}

std::vector<double> nodal(const Grid& g, const std::function<double(const Point&)>& f) {
  std::vector<double> out(g.node_count(), 0.0);
  if (f)
    for (std::size_t n = 0; n < out.size(); ++n)
      if (!g.is_boundary(n)) out[n] = f(g.node_coord(n));
  return out;
}

// (Phi_k - x_k) d_k f at every node.
std::vector<double> corrector_term(const Grid& g, const DirichletCorrector& phi, std::span<const double> f) {
  const auto gr = nodal_gradients(g, f);
  std::vector<double> out(g.node_count(), 0.0);
  for (std::size_t n = 0; n < out.size(); ++n) {
    const Point x = g.node_coord(n);
    for (int k = 0; k < g.dim(); ++k) out[n] += (phi.phi[k][n] - x[k]) * gr[k][n];
  }
  return out;
}

// Pointwise Frobenius norms of the recovered Hessian.
std::vector<double> hessian_pointwise(const Grid& g, std::span<const double> u) {
  const auto gr = nodal_gradients(g, u);
  std::vector<double> out(g.node_count(), 0.0);
  for (int i = 0; i < g.dim(); ++i) {
    const auto hi = nodal_gradients(g, gr[i]);
    for (int j = 0; j < g.dim(); ++j)
      for (std::size_t n = 0; n < out.size(); ++n) out[n] += hi[j][n] * hi[j][n];
  }
  for (double& x : out) x = std::sqrt(x);
  return out;
}

}  // namespace

EpsilonSetup prepare(const Scenario& sc, double eps) {
  if (sc.field.dim() != sc.domain.dim()) throw InvalidArgument("coefficient and domain dimensions differ");
  if (sc.nodes_per_eps < 8) throw InvalidArgument("grid rule needs at least 8 nodes per period (h <= eps/8)");
  EpsilonSetup s;
  s.eps = eps;
  s.grid = Grid::for_epsilon(sc.domain, eps, sc.nodes_per_eps, sc.min_cells);
  for (int k = 0; k < s.grid.dim(); ++k)
    if (s.grid.spacing(k) > eps / 8 * (1 + 1e-12))
      throw InvalidArgument("grid spacing exceeds eps/8 for eps=" + std::to_string(eps));
  s.a_eps = sample_epsilon(sc.field, eps, s.grid);
  s.correctors = solve_correctors(sc.field, Grid::cell(sc.field.dim(), sc.nodes_per_eps), sc.tol);
  s.ahat = homogenize(sc.field, s.correctors);
  s.a_hom = homogenized_field(s.ahat, s.grid);
  return s;
}

double gradient_norm(const CsrMatrix& lap, std::span<const double> u) {
  const auto ku = lap.apply(u);
  return std::sqrt(std::max(0.0, kernels::dot(u, ku)));
}

double l2_norm(std::span<const double> mass, std::span<const double> u) {
  return std::sqrt(kernels::weighted_dot(mass, u, u));
}

double hessian_norm(const Grid& g, std::span<const double> mass, std::span<const double> u) {
  return l2_norm(mass, hessian_pointwise(g, u));
}

std::vector<double> RateTable::values(const std::string& metric) const {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.metric == metric) out.push_back(r.value);
  return out;
}

std::vector<double> RateTable::epsilons(const std::string& metric) const {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.metric == metric) out.push_back(r.eps);
  return out;
}

const RateFit& RateTable::fit(const std::string& metric) const {
  for (const auto& f : fits)
    if (f.metric == metric) return f;
  throw InvalidArgument("no fit for metric " + metric);
}

RateFit fit_rate(const std::vector<double>& eps, const std::vector<double>& values, const std::string& metric,
                 double floor) {
  RateFit f;
  f.metric = metric;
  f.points = values.size();
  f.slope = f.intercept = f.r2 = nan;
  if (values.size() != eps.size()) throw InvalidArgument("fit needs one value per epsilon");
  bool all_floor = true;
  for (double v : values) all_floor = all_floor && std::fabs(v) <= floor;
  if (all_floor) {
    f.floor = true;
    return f;
  }
  if (values.size() < 2) return f;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0)) return f;
    x.push_back(std::log(eps[i]));
    y.push_back(std::log(values[i]));
  }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

void write_rate_csv(const std::string& path, const RateTable& t) {
  CsvWriter w(path, {"epsilon", "h", "dt", "metric", "value"});
  for (const auto& r : t.rows)
    w.row({CsvWriter::number(r.eps), CsvWriter::number(r.h), CsvWriter::number(r.dt), r.metric,
           CsvWriter::number(r.value)});
}

CorrectorErrorSample corrector_error_at(const Grid& g, const CsrMatrix& lap, std::span<const double> mass,
                                        const WaveState& ue, const WaveState& u0, const DirichletCorrector& phi) {
  if (ue.u.size() != g.node_count() || u0.u.size() != g.node_count() || !phi.grid.same_layout(g))
    throw InvalidArgument("corrector error needs states and correctors on one grid");
  if (std::fabs(ue.t - u0.t) > 1e-12 * (1 + std::fabs(ue.t))) throw InvalidArgument("states are at different times");
  const auto cu = corrector_term(g, phi, u0.u);
  const auto cv = corrector_term(g, phi, u0.v);
  std::vector<double> w(g.node_count()), wt(g.node_count());
  for (std::size_t n = 0; n < w.size(); ++n) {
    w[n] = ue.u[n] - u0.u[n] - cu[n];
    wt[n] = ue.v[n] - u0.v[n] - cv[n];
  }
  return {ue.t, gradient_norm(lap, w), l2_norm(mass, wt)};
}

std::vector<CorrectorErrorSample> corrector_error(const WaveTrajectory& te, const WaveTrajectory& t0,
                                                  const DirichletCorrector& phi) {
  if (!te.grid.same_layout(t0.grid)) throw InvalidArgument("trajectories live on different grids");
  if (te.sample_steps != t0.sample_steps || std::fabs(te.dt - t0.dt) > 1e-14 * te.dt)
    throw InvalidArgument("trajectories have different time samples");
  const auto lap = laplacian_of(te.grid);
  const auto mass = lumped_mass(te.grid);
  std::vector<CorrectorErrorSample> out;
  for (std::size_t i = 0; i < te.samples.size(); ++i)
    out.push_back(corrector_error_at(te.grid, lap, mass, te.samples[i], t0.samples[i], phi));
  return out;
}

namespace {

struct InitialPair {
  std::vector<double> u, v;
};

InitialPair eps_data(const EpsilonSetup& s, const RateData& d, double tol) {
  InitialPair p;
  if (!d.filtered) {
    p.u = nodal(s.grid, d.phi0);
    p.v = nodal(s.grid, d.phi1);
    return p;
  }
  EigenRequest req;
  req.count = static_cast<int>(std::max(d.a.size(), d.b.size()));
  req.tol = std::max(tol, 1e-12);
  const EigenBasis basis = eigenpairs(s.a_eps, req);
  std::vector<double> ca(basis.size(), 0.0), cb(basis.size(), 0.0);
  for (std::size_t k = 0; k < d.a.size(); ++k) ca[k] = d.a[k];
  for (std::size_t k = 0; k < d.b.size(); ++k) cb[k] = d.b[k] * std::sqrt(basis.lambda[k]);
  p.u = combine(basis, ca);
  p.v = combine(basis, cb);
  return p;
}

WaveOptions lockstep_options(const EpsilonSetup& s, double T, double cfl) {
  WaveOptions o;
  o.T = T;
  o.cfl = cfl;
  o.dt = std::min(max_stable_dt(s.a_eps, cfl), max_stable_dt(s.a_hom, cfl));
  o.record_boundary_gradients = false;
  return o;
}

void add_row(RateTable& t, const EpsilonSetup& s, double dt, const std::string& metric, double v) {
  t.rows.push_back({s.eps, s.grid.min_spacing(), dt, metric, v});
}

void fit_all(RateTable& t, const std::vector<std::string>& metrics, double floor) {
  for (const auto& m : metrics) t.fits.push_back(fit_rate(t.epsilons(m), t.values(m), m, floor));
}

}  // namespace

RateTable rate_sweep(const Scenario& sc, const std::vector<double>& eps_list, const RateData& data, double T,
                     const RateOptions& opt) {
  check_decreasing(eps_list);
  if (!(T > 0.0)) throw InvalidArgument("final time must be positive");
  RateTable table;
  for (double eps : eps_list) {
    try {
      const EpsilonSetup s = prepare(sc, eps);
      const Grid& g = s.grid;
      const InitialPair pe = eps_data(s, data, sc.tol);
      ScalarField fe{g, pe.u, BoundaryTag::dirichlet_zero};
      const ScalarField phi0 = match_initial_data(fe, s.a_eps, s.ahat, sc.tol, sc.solver);
      const std::vector<double>& phi1 = pe.v;
      const DirichletCorrector phi = dirichlet_correctors(s.a_eps, eps, sc.tol, sc.solver);
      const auto lap = laplacian_of(g);
      const auto mass = lumped_mass(g);

      // H^-1 norm of L_eps phi_eps0 - L_0 phi_0.
      const DirichletOperator op_e(s.a_eps), op_0(s.a_hom);
      const auto le = apply_operator(op_e, pe.u);
      const auto l0 = apply_operator(op_0, phi0.values);
      std::vector<double> diff(le.size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = le[i] - l0[i];
      const double mismatch = h_minus1_norm_load(dirichlet_laplacian(g), diff, sc.tol, sc.solver);

      const WaveOptions o = lockstep_options(s, T, sc.cfl);
      WaveStepper se(s.a_eps, {0.0, pe.u, pe.v}, o);
      WaveStepper s0(s.a_hom, {0.0, phi0.values, phi1}, o);
      const std::size_t stride = std::max<std::size_t>(1, se.steps() / std::max(1, opt.samples));
      double lhs = 0.0, initial = 0.0, sup_h2 = 0.0, sup_h3 = 0.0;
      for (;;) {
        const std::size_t n = se.step();
        if (n % stride == 0 || se.done()) {
          const auto e = corrector_error_at(g, lap, mass, se.state(), s0.state(), phi);
          if (n == 0) initial = e.grad + e.time_derivative;
          lhs = std::max(lhs, e.grad + e.time_derivative);
          const auto& st = s0.state();
          sup_h2 = std::max(sup_h2, hessian_norm(g, mass, st.u));
          const auto hv = hessian_pointwise(g, st.v);
          const auto ga = nodal_gradients(g, s0.acceleration());
          std::vector<double> comb(g.node_count());
          for (std::size_t i = 0; i < comb.size(); ++i) comb[i] = hv[i] + std::hypot(ga[0][i], ga[1][i]);
          sup_h3 = std::max(sup_h3, l2_norm(mass, comb));
        }
        if (se.done()) break;
        se.advance();
        s0.advance();
      }
      const double rhs = mismatch + eps * (hessian_norm(g, mass, phi0.values) + gradient_norm(lap, phi1)) +
                         eps * sup_h2 + eps * std::sqrt(T) * std::sqrt(sup_h3) * std::sqrt(sup_h2);
      const double dt = se.dt();
      add_row(table, s, dt, "energy_error", lhs);
      add_row(table, s, dt, "initial_error", initial);
      add_row(table, s, dt, "rhs", rhs);
      add_row(table, s, dt, "ratio", rhs > 0.0 ? lhs / rhs : 0.0);
      add_row(table, s, dt, "data_mismatch", mismatch);
    } catch (const Error& e) {
      table.complete = false;
      table.failure = "eps=" + std::to_string(eps) + ": " + e.what();
      break;
    }
  }
  fit_all(table, {"energy_error", "initial_error", "rhs"}, opt.floor);
  return table;
}

RateTable l2_rate(const Scenario& sc, const std::vector<double>& eps_list, const RateData& data, double T,
                  const RateOptions& opt) {
  check_decreasing(eps_list);
  if (!(T > 0.0)) throw InvalidArgument("final time must be positive");
  RateTable table;
  auto run = [&](const EpsilonSetup& s, double horizon, bool direct, std::array<double, 3>& out, double& dt) {
    const Grid& g = s.grid;
    const InitialPair p = eps_data(s, data, sc.tol);
    const auto mass = lumped_mass(g);
    const WaveOptions base = lockstep_options(s, horizon, sc.cfl);
    // v = int_0^t u solves v_tt + L v = phi1, v(0) = 0, v_t(0) = phi0, so u = v_t.
    WaveOptions fo = base;
    const std::vector<double> f = p.v;
    fo.forcing = [&f](double, std::span<double> fv) { std::copy(f.begin(), f.end(), fv.begin()); };
    const std::vector<double> zero(g.node_count(), 0.0);
    WaveStepper ve(s.a_eps, {0.0, zero, p.u}, fo), v0(s.a_hom, {0.0, zero, p.u}, fo);
    std::unique_ptr<WaveStepper> ue, u0;
    if (direct) {
      ue = std::make_unique<WaveStepper>(s.a_eps, WaveState{0.0, p.u, p.v}, base);
      u0 = std::make_unique<WaveStepper>(s.a_hom, WaveState{0.0, p.u, p.v}, base);
    }
    const std::size_t stride = std::max<std::size_t>(1, ve.steps() / std::max(1, opt.samples));
    out = {0.0, 0.0, 0.0};
    double scale = 0.0;
    std::vector<double> d(g.node_count());
    for (;;) {
      const std::size_t n = ve.step();
      if (n % stride == 0 || ve.done()) {
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = ve.state().v[i] - v0.state().v[i];
        out[0] = std::max(out[0], l2_norm(mass, d));
        if (direct) {
          for (std::size_t i = 0; i < d.size(); ++i) d[i] = ue->state().u[i] - u0->state().u[i];
          out[1] = std::max(out[1], l2_norm(mass, d));
          for (std::size_t i = 0; i < d.size(); ++i) d[i] = ve.state().v[i] - ue->state().u[i];
          out[2] = std::max(out[2], l2_norm(mass, d));
          scale = std::max(scale, l2_norm(mass, ue->state().u));
        }
      }
      if (ve.done()) break;
      ve.advance();
      v0.advance();
      if (direct) {
        ue->advance();
        u0->advance();
      }
    }
    if (scale > 0.0) out[2] /= scale;
    dt = ve.dt();
  };
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    const double eps = eps_list[i];
    try {
      const EpsilonSetup s = prepare(sc, eps);
      std::array<double, 3> r{};
      double dt = 0.0;
      run(s, T, opt.cross_check, r, dt);
      add_row(table, s, dt, "l2_error", r[0]);
      if (opt.cross_check) {
        add_row(table, s, dt, "l2_error_direct", r[1]);
        add_row(table, s, dt, "route_gap", r[2]);
      }
      if (i == 0 && opt.doubling) {
        std::array<double, 3> r2{};
        double dt2 = 0.0;
        run(s, 2 * T, false, r2, dt2);
        table.extras["doubling_eps"] = eps;
        table.extras["doubling_factor"] = r[0] > 0.0 ? r2[0] / r[0] : 0.0;
      }
    } catch (const Error& e) {
      table.complete = false;
      table.failure = "eps=" + std::to_string(eps) + ": " + e.what();
      break;
    }
  }
  std::vector<std::string> metrics{"l2_error"};
  if (opt.cross_check) metrics.push_back("l2_error_direct");
  fit_all(table, metrics, opt.floor);
  return table;
}

std::vector<std::array<Mat2, 2>> coefficient_gradient(const PeriodicCoefficientField& field, double eps,
                                                      const Grid& grid) {
  if (!field.lipschitz_continuous())
    throw InvalidArgument("coefficient '" + field.name() + "' is piecewise constant; the identity needs its derivative");
  std::vector<std::array<Mat2, 2>> out(grid.element_count());
  for (std::size_t e = 0; e < out.size(); ++e) {
    const Point x = grid.element_center(e);
    const Point y{x[0] / eps, x[1] / eps};
    for (int k = 0; k < 2; ++k) {
      if (k >= grid.dim()) {
        out[e][k] = Mat2{};
        continue;
      }
      Mat2 d = field.derivative(y, k);
      for (auto& row : d)
        for (double& v : row) v /= eps;
      out[e][k] = d;
    }
  }
  return out;
}

RellichAccumulator::RellichAccumulator(const TensorField& a, std::vector<std::array<Mat2, 2>> da, Point x0,
                                       RellichMode mode, std::vector<Mat2> boundary_tensor)
    : a_(a), da_(std::move(da)), x0_(x0), mode_(mode) {
  if (a.location != Location::element_midpoints || a.values.size() != a.grid.element_count())
    throw InvalidArgument("coefficient must be given at element midpoints");
  bool constant = true;
  for (const auto& v : a.values) constant = constant && v == a.values.front();
  if (mode == RellichMode::homogenized) {
    if (!constant) throw InvalidArgument("homogenized mode expects a constant coefficient");
    da_.clear();
  } else if (da_.empty() && !constant) {
    throw InvalidArgument("full mode needs the coefficient derivative");
  } else if (!da_.empty() && da_.size() != a.grid.element_count()) {
    throw InvalidArgument("one coefficient derivative per element is needed");
  }
  quad_ = boundary_quadrature(a.grid);
  bt_ = boundary_tensor.empty() ? boundary_tensors(a, quad_) : std::move(boundary_tensor);
  if (bt_.size() != quad_.size()) throw InvalidArgument("one boundary tensor per boundary point is needed");
}

void RellichAccumulator::observe(std::size_t step, const WaveState& s) {
  const Grid& g = a_.grid;
  const int d = g.dim();
  const double vol = g.element_volume();
  const auto ne = static_cast<long>(g.element_count());
  double div = 0.0, coef = 0.0, en = 0.0, p = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : div, coef, en, p)
  for (long e = 0; e < ne; ++e) {
    const Point gr = element_gradient(g, s.u, e, 0.5, 0.5);
    const auto nodes = g.element_nodes(e);
    double ut = 0.0;
    for (int i = 0; i < g.nodes_per_element(); ++i) ut += s.v[nodes[i]];
    ut /= g.nodes_per_element();
    const Mat2& A = a_.values[e];
    auto quad = [&](const Mat2& m) {
      double q = 0.0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) q += m[i][j] * gr[i] * gr[j];
      return q;
    };
    const double aq = quad(A);
    const Point c = g.element_center(e);
    const Point h{c[0] - x0_[0], d == 2 ? c[1] - x0_[1] : 0.0};
    div += vol * d * (ut * ut - aq);
    en += vol * 2.0 * aq;
    if (!da_.empty())
      for (int k = 0; k < d; ++k) coef += vol * h[k] * quad(da_[e][k]);
    p += vol * (h[0] * gr[0] + h[1] * gr[1]) * ut;
  }
  double b = 0.0;
  for (std::size_t i = 0; i < quad_.size(); ++i) {
    const auto& q = quad_[i];
    const Point gr = nodal_gradient(g, s.u, q.node);
    const Point x = g.node_coord(q.node);
    const double hn = (x[0] - x0_[0]) * q.normal[0] + (d == 2 ? (x[1] - x0_[1]) * q.normal[1] : 0.0);
    double aq = 0.0;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) aq += bt_[i][r][c] * gr[r] * gr[c];
    b += q.weight * hn * aq;
  }
  if (step != boundary_.size()) throw InvalidArgument("steps must be observed in order");
  boundary_.push_back(b);
  divergence_.push_back(div);
  coefficient_.push_back(coef);
  energy_.push_back(en);
  if (step == 0) p_first_ = p;
  p_last_ = p;
}

RellichReport RellichAccumulator::finish(double dt) const {
  RellichReport r;
  const std::size_t n = boundary_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (i == 0 || i + 1 == n) ? 0.5 * dt : dt;
    r.lhs += w * boundary_[i];
    r.divergence_term += w * divergence_[i];
    r.coefficient_term += w * coefficient_[i];
    r.energy_term += w * energy_[i];
  }
  // Integrating h.grad u u_tt by parts in time contributes twice the endpoint pairing.
  r.time_term = 2.0 * (p_last_ - p_first_);
  r.rhs = r.divergence_term - r.coefficient_term + r.energy_term + r.time_term;
  r.residual = std::fabs(r.lhs - r.rhs) / (std::fabs(r.lhs) + std::fabs(r.rhs) + 1e-30);
  return r;
}

RellichReport rellich_residual(const TensorField& a, const std::vector<std::array<Mat2, 2>>& da,
                               const WaveState& initial, const WaveOptions& options, Point x0, RellichMode mode,
                               const std::vector<Mat2>& boundary_tensor) {
  if (options.boundary || options.forcing) throw InvalidArgument("the identity is evaluated for free zero-boundary waves");
  RellichAccumulator acc(a, da, x0, mode, boundary_tensor);
  WaveOptions o = options;
  o.record_boundary_gradients = false;
  const StepObserver outer = options.observer;
  o.observer = [&](std::size_t n, const WaveState& s) {
    acc.observe(n, s);
    if (outer) outer(n, s);
  };
  const auto tr = integrate(a, initial, o);
  return acc.finish(tr.dt);
}

RellichReport rellich_residual(const WaveTrajectory& traj, const TensorField& a,
                               const std::vector<std::array<Mat2, 2>>& da, Point x0, RellichMode mode,
                               const std::vector<Mat2>& boundary_tensor) {
  if (traj.samples.size() != traj.steps + 1) throw InvalidArgument("trajectory must keep a sample at every step");
  RellichAccumulator acc(a, da, x0, mode, boundary_tensor);
  for (std::size_t n = 0; n < traj.samples.size(); ++n) acc.observe(n, traj.samples[n]);
  return acc.finish(traj.dt);
}

ObservationRatio observation_ratio(const TensorField& a, std::span<const double> phi0, std::span<const double> phi1,
                                   double T, double cfl, const std::vector<int>& gamma_faces) {
  const Grid& g = a.grid;
  ObservationRatio r;
  const auto lap = laplacian_of(g);
  const auto mass = lumped_mass(g);
  r.energy = std::pow(gradient_norm(lap, phi0), 2) + std::pow(l2_norm(mass, phi1), 2);
  if (!(r.energy > 0.0)) throw InvalidArgument("initial data are zero; the ratio is undefined");
  WaveOptions o;
  o.T = T;
  o.cfl = cfl;
  o.record_boundary_gradients = !gamma_faces.empty();
  const auto tr = integrate(a, {0.0, {phi0.begin(), phi0.end()}, {phi1.begin(), phi1.end()}}, o);
  r.boundary = boundary_gradient_integral(tr) / T;
  if (!gamma_faces.empty()) {
    const auto w = time_weights(tr);
    double s = 0.0;
    for (std::size_t n = 0; n < w.size(); ++n)
      for (std::size_t b = 0; b < tr.quadrature.size(); ++b) {
        const auto& q = tr.quadrature[b];
        if (std::find(gamma_faces.begin(), gamma_faces.end(), q.face) == gamma_faces.end()) continue;
        const Point& gr = tr.boundary_gradients[n][b];
        s += w[n] * q.weight * (gr[0] * gr[0] + gr[1] * gr[1]);
      }
    r.boundary_gamma = s / T;
  }
  r.upper = r.boundary / r.energy;
  r.lower = r.boundary > 0.0 ? r.energy / r.boundary : std::numeric_limits<double>::infinity();
  return r;
}

std::pair<std::vector<double>, std::vector<double>> random_filtered_data(const EigenBasis& basis, std::size_t K,
                                                                         const CsrMatrix& lap, std::uint64_t seed) {
  if (K == 0 || K > basis.size()) throw InvalidArgument("mode count does not fit the basis");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> a(K), b(K);
  for (std::size_t k = 0; k < K; ++k) {
    a[k] = normal(rng);
    b[k] = normal(rng);
  }
  auto u = combine(basis, a);
  auto v = combine(basis, b);
  const double e = std::pow(gradient_norm(lap, u), 2) + basis.inner(v, v);
  const double s = 1.0 / std::sqrt(e);
  for (double& x : u) x *= s;
  for (double& x : v) x *= s;
  return {std::move(u), std::move(v)};
}

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double variation(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
}

}  // namespace

ObservabilityReport observability_ratios(const Scenario& sc, const std::vector<double>& eps_list,
                                         const ObservabilityOptions& opt) {
  check_decreasing(eps_list);
  if (opt.trials < 1) throw InvalidArgument("at least one trial is needed");
  ObservabilityReport rep;
  rep.r0 = sc.domain.diameter();
  rep.T = opt.T > 0.0 ? opt.T : 4.0 * rep.r0;
  rep.T_ge_C0_r0 = rep.T >= opt.C0 * rep.r0;
  std::vector<double> cmax, cmin;
  for (std::size_t ie = 0; ie < eps_list.size(); ++ie) {
    const double eps = eps_list[ie];
    const EpsilonSetup s = prepare(sc, eps);
    const auto lap = laplacian_of(s.grid);
    const double N = frequency_threshold(eps, rep.T, opt.C0);
    EigenRequest req;
    req.threshold = opt.high_mode ? std::max(N, 1.0 / eps) : N;
    const EigenBasis basis = eigenpairs(s.a_eps, req);
    const std::size_t K = basis.count_at_most(N);
    ObservabilitySummary sum;
    sum.eps = eps;
    sum.N = N;
    sum.modes = K;
    if (K == 0) throw InvalidArgument("threshold N=" + std::to_string(N) + " keeps no modes; use a larger domain");
    std::vector<double> up, gamma;
    for (int t = 0; t < opt.trials; ++t) {
      const auto [u, v] = random_filtered_data(basis, K, lap, mix(opt.seed, ie, t));
      ObservabilityRow row{eps, N, std::to_string(t), K, observation_ratio(s.a_eps, u, v, rep.T, sc.cfl, opt.gamma_faces)};
      up.push_back(row.ratio.upper);
      if (!opt.gamma_faces.empty()) gamma.push_back(row.ratio.boundary_gamma / row.ratio.energy);
      rep.rows.push_back(std::move(row));
    }
    sum.max_upper = *std::max_element(up.begin(), up.end());
    sum.min_upper = *std::min_element(up.begin(), up.end());
    sum.max_lower = 1.0 / sum.min_upper;
    sum.min_lower = 1.0 / sum.max_upper;
    sum.min_gamma_upper = gamma.empty() ? 0.0 : *std::min_element(gamma.begin(), gamma.end());
    cmax.push_back(sum.max_upper);
    cmin.push_back(sum.min_upper);

    if (opt.baseline) {
      EigenRequest hr;
      hr.threshold = N;
      const EigenBasis hb = eigenpairs(s.a_hom, hr);
      const std::size_t KH = hb.count_at_most(N);
      std::vector<double> hu;
      for (int t = 0; KH > 0 && t < opt.trials; ++t) {
        const auto [u, v] = random_filtered_data(hb, KH, lap, mix(opt.seed, ie, 1000 + t));
        ObservabilityRow row{0.0, N, "homogenized:" + std::to_string(t), KH, observation_ratio(s.a_hom, u, v, rep.T, sc.cfl)};
        hu.push_back(row.ratio.upper);
        rep.rows.push_back(std::move(row));
      }
      if (!hu.empty()) {
        sum.hom_max_upper = *std::max_element(hu.begin(), hu.end());
        sum.hom_min_upper = *std::min_element(hu.begin(), hu.end());
      }
    }
    if (opt.high_mode) {
      // The computed mode whose eps*lambda is closest to 1.
      std::size_t best = 0;
      for (std::size_t k = 0; k < basis.size(); ++k)
        if (std::fabs(eps * basis.lambda[k] - 1.0) < std::fabs(eps * basis.lambda[best] - 1.0)) best = k;
      std::vector<double> c(basis.size(), 0.0);
      c[best] = 1.0;
      auto u = combine(basis, c);
      const double sc0 = 1.0 / gradient_norm(lap, u);
      for (double& x : u) x *= sc0;
      const std::vector<double> v(u.size(), 0.0);
      ObservabilityRow row{eps, basis.lambda[best], "high_mode", 1, observation_ratio(s.a_eps, u, v, rep.T, sc.cfl)};
      sum.high_mode_upper = row.ratio.upper;
      sum.high_mode_eps_lambda = eps * basis.lambda[best];
      rep.rows.push_back(std::move(row));
    }
    rep.per_eps.push_back(sum);
  }
  rep.upper_variation = variation(cmax);
  rep.lower_variation = variation(cmin);

  if (opt.baseline && !opt.t_sweep.empty()) {
    // Upper ratio of the homogenized operator against T/r0 + 1.
    const EpsilonSetup s = prepare(sc, eps_list.front());
    const auto lap = laplacian_of(s.grid);
    const double N = frequency_threshold(eps_list.front(), rep.T, opt.C0);
    EigenRequest hr;
    hr.threshold = N;
    const EigenBasis hb = eigenpairs(s.a_hom, hr);
    const std::size_t KH = hb.count_at_most(N);
    if (KH > 0) {
      std::vector<double> xs, ys;
      for (double f : opt.t_sweep) {
        const double T = f * rep.r0;
        double m = 0.0;
        for (int t = 0; t < opt.trials; ++t) {
          const auto [u, v] = random_filtered_data(hb, KH, lap, mix(opt.seed, 777, t));
          m = std::max(m, observation_ratio(s.a_hom, u, v, T, sc.cfl).upper);
        }
        rep.t_sweep.emplace_back(T, m);
        xs.push_back(T / rep.r0 + 1.0);
        ys.push_back(m);
      }
      if (xs.size() >= 2) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          mx += xs[i] / xs.size();
          my += ys[i] / xs.size();
        }
        double sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
          sxx += (xs[i] - mx) * (xs[i] - mx);
          sxy += (xs[i] - mx) * (ys[i] - my);
        }
        rep.t_sweep_slope = sxy / sxx;
        rep.t_sweep_intercept = my - rep.t_sweep_slope * mx;
      }
    }
  }
  return rep;
}

void write_observability_csv(const std::string& path, const ObservabilityReport& rep) {
  CsvWriter w(path, {"epsilon", "N", "trial", "upper_ratio", "lower_ratio"});
  for (const auto& r : rep.rows)
    w.row({CsvWriter::number(r.eps), CsvWriter::number(r.N), r.trial, CsvWriter::number(r.ratio.upper),
           CsvWriter::number(r.ratio.lower)});
}

TraceTable eigen_trace_table(const EigenBasis& basis, double eps) {
  if (basis.boundary_grad_sq.size() != basis.size()) throw InvalidArgument("basis lacks boundary gradient data");
  TraceTable t;
  t.eps = eps;
  t.max_ratio = 0.0;
  t.min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < basis.size(); ++k) {
    TraceRow r;
    r.k = static_cast<int>(k + 1);
    r.lambda = basis.lambda[k];
    r.trace = basis.boundary_grad_sq[k];
    r.ratio = r.trace / (r.lambda * (1.0 + eps * r.lambda));
    r.in_range = eps * eps * r.lambda <= 1.0;
    if (r.in_range) {
      t.max_ratio = std::max(t.max_ratio, r.ratio);
      t.min_ratio = std::min(t.min_ratio, r.ratio);
    }
    t.rows.push_back(r);
  }
  if (!std::isfinite(t.min_ratio)) t.min_ratio = 0.0;
  return t;
}

void write_trace_csv(const std::string& path, const TraceTable& t) {
  CsvWriter w(path, {"k", "lambda", "trace", "ratio", "in_range"});
  for (const auto& r : t.rows)
    w.row({CsvWriter::integer(r.k), CsvWriter::number(r.lambda), CsvWriter::number(r.trace), CsvWriter::number(r.ratio),
           r.in_range ? "1" : "0"});
}

}  // namespace homwave
