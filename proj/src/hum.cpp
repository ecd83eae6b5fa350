#include "homwave/hum.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <json.hpp>
#include <random>

#include "homwave/csv.hpp"
#include "homwave/error.hpp"

namespace homwave {

namespace {

void check_problem(const ControlProblem& p) {
  if (!p.basis) throw InvalidArgument("control problem needs an eigenbasis");
  if (!p.basis->grid.same_layout(p.a.grid)) throw InvalidArgument("eigenbasis and coefficient grids differ");
  const std::size_t nn = p.a.grid.node_count();
  if (p.theta0.size() != nn || p.theta1.size() != nn) throw InvalidArgument("targets do not match the grid");
  if (!(p.T > 0.0)) throw InvalidArgument("control horizon must be positive");
  if (p.basis->size() > 0 && p.N >= p.basis->lambda.back() && p.basis->count_at_most(p.N) == p.basis->size())
    throw InvalidArgument("threshold N reaches the largest computed eigenvalue; compute more modes");
}

WaveOptions dual_options(const ControlProblem& p) {
  WaveOptions o;
  o.T = p.T;
  o.dt = p.dt;
  o.cfl = p.cfl;
  o.record_boundary_gradients = true;
  return o;
}

std::vector<double> inner_all(const EigenBasis& b, std::size_t K, std::span<const double> f) {
  std::vector<double> c(K);
  for (std::size_t k = 0; k < K; ++k) c[k] = b.inner(b.psi[k], f);
  return c;
}

double pair(const std::vector<double>& w, const std::vector<BoundaryPoint>& q, const std::vector<std::vector<double>>& a,
            const std::vector<std::vector<double>>& b) {
  double s = 0.0;
  for (std::size_t n = 0; n < w.size(); ++n) {
    double t = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) t += q[i].weight * a[n][i] * b[n][i];
    s += w[n] * t;
  }
  return s;
}

// (K u)_node / (sum of boundary weights at node), per boundary point.
class VariationalFlux {
 public:
  VariationalFlux(const TensorField& a, const std::vector<BoundaryPoint>& quad) : quad_(quad) {
    const Grid& g = a.grid;
    const CsrMatrix k = assemble_stiffness(a);
    std::vector<double> w(g.node_count(), 0.0);
    for (const auto& q : quad) w[q.node] += q.weight;
    for (const auto& q : quad) {
      Row r;
      r.scale = 1.0 / w[q.node];
      for (int j = k.row_ptr()[q.node]; j < k.row_ptr()[q.node + 1]; ++j) {
        r.cols.push_back(k.col_index()[j]);
        r.vals.push_back(k.values()[j]);
      }
      rows_.push_back(std::move(r));
    }
  }
  std::vector<double> operator()(std::span<const double> u) const {
    std::vector<double> out(rows_.size());
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < rows_[i].cols.size(); ++j) s += rows_[i].vals[j] * u[rows_[i].cols[j]];
      out[i] = s * rows_[i].scale;
    }
    return out;
  }

 private:
  struct Row {
    std::vector<int> cols;
    std::vector<double> vals;
    double scale = 1.0;
  };
  std::vector<BoundaryPoint> quad_;
  std::vector<Row> rows_;
};

struct TimeGrid {
  double dt = 0.0;
  std::size_t steps = 0;
  std::vector<double> times, weights;
  std::vector<BoundaryPoint> quad;
};

TimeGrid time_grid(const ControlProblem& p) {
  TimeGrid tg;
  const double limit = max_stable_dt(p.a, p.cfl);
  const double req = p.dt > 0.0 ? p.dt : limit;
  tg.steps = static_cast<std::size_t>(std::ceil(p.T / req - 1e-9));
  tg.dt = p.T / static_cast<double>(tg.steps);
  for (std::size_t n = 0; n <= tg.steps; ++n) {
    tg.times.push_back(tg.dt * static_cast<double>(n));
    tg.weights.push_back((n == 0 || n == tg.steps) ? 0.5 * tg.dt : tg.dt);
  }
  tg.quad = boundary_quadrature(p.a.grid);
  return tg;
}

// The stepper maps an eigenvector psi_k onto multiples of itself, so modal
// dual solutions reduce to a scalar Verlet recurrence.
struct ModalPath {
  std::vector<double> alpha;
  double beta_end = 0.0;
};

ModalPath modal_path(double lam, double dt, std::size_t steps, int type) {
  // reflected data: alpha(0) = 1 or alpha'(0) = -1
  double al = type == 0 ? 1.0 : 0.0, be = type == 0 ? 0.0 : -1.0;
  ModalPath m;
  m.alpha.resize(steps + 1);
  m.alpha[0] = al;
  double acc = -lam * al;
  for (std::size_t n = 0; n < steps; ++n) {
    be += 0.5 * dt * acc;
    al += dt * be;
    acc = -lam * al;
    be += 0.5 * dt * acc;
    m.alpha[n + 1] = al;
  }
  m.beta_end = be;
  return m;
}

std::vector<std::vector<std::vector<double>>> modal_traces(const ControlProblem& p, const TimeGrid& tg) {
  const std::size_t K = p.modes();
  const EigenBasis& b = *p.basis;
  const Grid& g = p.a.grid;
  const std::vector<Mat2> bt = p.boundary_tensor.empty() ? boundary_tensors(p.a, tg.quad) : p.boundary_tensor;
  std::vector<std::vector<std::vector<double>>> out(2 * K);
  const VariationalFlux flux(p.a, tg.quad);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> c(tg.quad.size());
    if (p.conormal == ConormalRule::variational) c = flux(b.psi[k]);
    for (std::size_t i = 0; p.conormal == ConormalRule::recovered && i < tg.quad.size(); ++i) {
      const Point gr = nodal_gradient(g, b.psi[k], tg.quad[i].node);
      const Point& nv = tg.quad[i].normal;
      const Mat2& A = bt[i];
      c[i] = nv[0] * (A[0][0] * gr[0] + A[0][1] * gr[1]) + nv[1] * (A[1][0] * gr[0] + A[1][1] * gr[1]);
    }
    for (int type = 0; type < 2; ++type) {
      const auto path = modal_path(b.lambda[k], tg.dt, tg.steps, type);
      auto& tr = out[type * K + k];
      tr.assign(tg.steps + 1, std::vector<double>(tg.quad.size()));
      for (std::size_t n = 0; n <= tg.steps; ++n)
        for (std::size_t i = 0; i < c.size(); ++i) tr[n][i] = path.alpha[tg.steps - n] * c[i];
    }
  }
  return out;
}

// u_i(0) = alpha(T) psi_k and u_i,t(0) = -alpha'(T) psi_k.
std::vector<double> modal_loads(const ControlProblem& p, const TimeGrid& tg) {
  const std::size_t K = p.modes();
  const EigenBasis& b = *p.basis;
  std::vector<double> out(2 * K);
  for (std::size_t k = 0; k < K; ++k) {
    const double c0 = b.inner(p.theta0, b.psi[k]), c1 = b.inner(p.theta1, b.psi[k]);
    for (int type = 0; type < 2; ++type) {
      const auto path = modal_path(b.lambda[k], tg.dt, tg.steps, type);
      out[type * K + k] = -c1 * path.alpha.back() - c0 * path.beta_end;
    }
  }
  return out;
}

double load(const ControlProblem& p, const DualSolution& d) {
  return -p.basis->inner(p.theta1, d.u0) + p.basis->inner(p.theta0, d.ut0);
}

}  // namespace

std::size_t ControlProblem::modes() const { return basis ? basis->count_at_most(N) : 0; }

DualSolution dual_solve(const ControlProblem& p, std::span<const double> x) {
  check_problem(p);
  const std::size_t K = p.modes();
  if (x.size() != 2 * K) throw InvalidArgument("dual data need 2K coefficients");
  const EigenBasis& b = *p.basis;
  std::vector<double> c0(x.begin(), x.begin() + K), c1(K);
  for (std::size_t k = 0; k < K; ++k) c1[k] = -x[K + k];
  WaveState init{0.0, combine(b, c0), combine(b, c1)};
  if (K == 0) init.u.assign(p.a.grid.node_count(), 0.0), init.v.assign(p.a.grid.node_count(), 0.0);
  WaveOptions o = dual_options(p);
  std::vector<std::vector<double>> cn;
  std::unique_ptr<VariationalFlux> vf;
  if (p.conormal == ConormalRule::variational) {
    o.record_boundary_gradients = false;
    vf = std::make_unique<VariationalFlux>(p.a, boundary_quadrature(p.a.grid));
    const VariationalFlux& flux = *vf;
    o.observer = [&](std::size_t, const WaveState& s) { cn.push_back(flux(s.u)); };
  }
  const auto tr = integrate(p.a, init, o);
  if (p.conormal == ConormalRule::recovered) cn = conormal_trace(tr, p.a, p.boundary_tensor);
  DualSolution d;
  d.trace.resize(cn.size());
  for (std::size_t n = 0; n < cn.size(); ++n) d.trace[n] = cn[cn.size() - 1 - n];
  d.u0 = tr.final_state.u;
  d.ut0 = tr.final_state.v;
  for (double& v : d.ut0) v = -v;
  return d;
}

std::vector<double> gramian_apply(const ControlProblem& p, std::span<const double> x) {
  check_problem(p);
  const std::size_t K = p.modes();
  std::vector<double> out(2 * K, 0.0);
  bool zero = true;
  for (double v : x) zero = zero && v == 0.0;
  if (zero || K == 0) return out;
  const TimeGrid tg = time_grid(p);
  const auto d = dual_solve(p, x);
  const auto modal = modal_traces(p, tg);
  for (std::size_t j = 0; j < 2 * K; ++j) out[j] = pair(tg.weights, tg.quad, d.trace, modal[j]);
  return out;
}

FilteredData gramian_apply(const FilteredData& c, const ControlProblem& p) {
  const std::size_t K = p.modes();
  if (c.a.size() != K || c.b.size() != K) throw InvalidArgument("coefficients must cover the retained modes");
  std::vector<double> x(c.a);
  x.insert(x.end(), c.b.begin(), c.b.end());
  const auto y = gramian_apply(p, x);
  FilteredData out;
  out.N = p.N;
  out.basis = p.basis;
  out.a.assign(y.begin(), y.begin() + K);
  out.b.assign(y.begin() + K, y.end());
  return out;
}

double control_norm(const ControlResult& r, const std::vector<std::vector<double>>& g) {
  return std::sqrt(std::max(0.0, pair(r.time_weights, r.quadrature, g, g)));
}

ControlResult solve_control(const ControlProblem& p, ControlMethod method, double tol) {
  check_problem(p);
  const std::size_t K = p.modes();
  const std::size_t m = 2 * K;
  const TimeGrid tg = time_grid(p);
  ControlResult r;
  r.method = method;
  r.K = K;
  r.dt = tg.dt;
  r.steps = tg.steps;
  r.times = tg.times;
  r.time_weights = tg.weights;
  r.quadrature = tg.quad;
  r.in_regime = p.regime_threshold <= 0.0 || p.N <= p.regime_threshold;
  r.g.assign(tg.steps + 1, std::vector<double>(tg.quad.size(), 0.0));
  r.x.assign(m, 0.0);
  r.load.assign(m, 0.0);
  if (K == 0) return r;

  Eigen::VectorXd ell(static_cast<Eigen::Index>(m));
  Eigen::VectorXd x(static_cast<Eigen::Index>(m));
  if (method == ControlMethod::dense) {
    r.columns.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> e(m, 0.0);
      e[i] = 1.0;
      DualSolution d = dual_solve(p, e);
      ell(static_cast<Eigen::Index>(i)) = load(p, d);
      r.columns[i] = std::move(d.trace);
    }
    Eigen::MatrixXd G(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j)
        G(i, j) = G(j, i) = pair(tg.weights, tg.quad, r.columns[i], r.columns[j]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(m - 1);
    r.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(r.condition <= 1e12))
      throw NumericalFailure("Gramian is numerically singular (condition " + std::to_string(r.condition) +
                                 "); increase T or lower N",
                             r.condition);
    x = es.eigenvectors() * (es.eigenvalues().cwiseInverse().asDiagonal() * (es.eigenvectors().transpose() * -ell));
    // one step of refinement against the assembled matrix
    x += es.eigenvectors() *
         (es.eigenvalues().cwiseInverse().asDiagonal() * (es.eigenvectors().transpose() * (-ell - G * x)));
    r.gramian.resize(m * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) r.gramian[i * m + j] = G(i, j);
    r.normal_residual = ell.norm() > 0.0 ? (G * x + ell).norm() / ell.norm() : (G * x).norm();
  } else {
    const auto ml = modal_loads(p, tg);
    for (std::size_t i = 0; i < m; ++i) ell(static_cast<Eigen::Index>(i)) = ml[i];
    auto apply = [&](const Eigen::VectorXd& v) {
      const auto y = gramian_apply(p, std::vector<double>(v.data(), v.data() + m));
      return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(m)).eval();
    };
    const Eigen::VectorXd rhs = -ell;
    x.setZero();
    Eigen::VectorXd res = rhs, dir = res;
    double rr = res.squaredNorm();
    const double target = tol * rhs.norm();
    int it = 0;
    const int max_it = static_cast<int>(4 * m + 20);
    double lam_max = 0.0, lam_min = std::numeric_limits<double>::infinity();
    while (std::sqrt(rr) > target && it < max_it) {
      const Eigen::VectorXd q = apply(dir);
      const double dq = dir.dot(q);
      if (!(dq > 0.0)) throw NumericalFailure("Gramian is not positive definite along the cg search direction", dq);
      const double ray = dq / dir.squaredNorm();
      lam_max = std::max(lam_max, ray);
      lam_min = std::min(lam_min, ray);
      const double alpha = rr / dq;
      x += alpha * dir;
      res -= alpha * q;
      const double rr_new = res.squaredNorm();
      dir = res + (rr_new / rr) * dir;
      rr = rr_new;
      ++it;
    }
    r.iterations = it;
    if (std::sqrt(rr) > target && rhs.norm() > 0.0)
      throw NumericalFailure("cg on the Gramian did not converge", std::sqrt(rr) / rhs.norm());
    r.condition = lam_min > 0.0 ? lam_max / lam_min : 0.0;
    const Eigen::VectorXd gx = apply(x);
    r.normal_residual = ell.norm() > 0.0 ? (gx + ell).norm() / ell.norm() : gx.norm();
  }
  for (std::size_t i = 0; i < m; ++i) {
    r.x[i] = x(static_cast<Eigen::Index>(i));
    r.load[i] = ell(static_cast<Eigen::Index>(i));
  }
  // the control is the conormal derivative of the minimizer's dual solution
  r.g = dual_solve(p, r.x).trace;
  r.control_norm = control_norm(r, r.g);
  return r;
}

std::array<double, 2> verify_control(ControlResult& r, const ControlProblem& p) {
  check_problem(p);
  const Grid& g = p.a.grid;
  const EigenBasis& b = *p.basis;
  const std::size_t K = p.modes();
  // nodal Dirichlet values: weighted average over boundary points at a node
  std::vector<double> wsum(g.node_count(), 0.0);
  for (const auto& q : r.quadrature) wsum[q.node] += q.weight;
  WaveOptions o;
  o.T = p.T;
  o.dt = r.dt;
  o.cfl = p.cfl;
  o.record_boundary_gradients = false;
  o.overwrite_initial_boundary = true;
  o.boundary = [&](double, std::size_t n, std::span<double> u) {
    for (const auto& q : r.quadrature) u[q.node] = 0.0;
    for (std::size_t i = 0; i < r.quadrature.size(); ++i) {
      const auto& q = r.quadrature[i];
      u[q.node] += q.weight * r.g[n][i] / wsum[q.node];
    }
  };
  const auto tr = integrate(p.a, {0.0, p.theta0, p.theta1}, o);
  if (tr.steps != r.steps) throw InvalidArgument("verification time grid differs from the control's");
  const auto cu = inner_all(b, K, tr.final_state.u);
  const auto cv = inner_all(b, K, tr.final_state.v);
  const auto c0 = inner_all(b, K, p.theta0);
  const auto c1 = inner_all(b, K, p.theta1);
  double pu = 0.0, pv = 0.0, d0 = 0.0, d1 = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    pu += cu[k] * cu[k];
    pv += cv[k] * cv[k] / b.lambda[k];
    d0 += c0[k] * c0[k];
    d1 += c1[k] * c1[k] / b.lambda[k];
  }
  const double scale = std::sqrt(d0) + std::sqrt(d1);
  const double s = scale > 0.0 ? scale : 1.0;
  r.residual_position = std::sqrt(pu) / s;
  r.residual_velocity = std::sqrt(pv) / s;
  return {r.residual_position, r.residual_velocity};
}

DualityDefect duality_check(const ControlResult& r, const ControlProblem& p, std::uint64_t seed,
                            const std::vector<std::vector<double>>* g) {
  const std::size_t K = p.modes();
  DualityDefect out;
  if (K == 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> y(2 * K);
  for (double& v : y) v = normal(rng);
  const auto d = dual_solve(p, y);
  const auto& gg = g ? *g : r.g;
  const double a = p.basis->inner(p.theta1, d.u0);
  const double b = p.basis->inner(p.theta0, d.ut0);
  const double c = pair(r.time_weights, r.quadrature, gg, d.trace);
  out.defect = std::fabs(a - b - c);
  out.scale = std::fabs(a) + std::fabs(b) + std::fabs(c);
  out.relative = out.scale > 0.0 ? out.defect / out.scale : out.defect;
  return out;
}

void write_control_csv(const std::string& path, const ControlResult& r) {
  CsvWriter w(path, {"t", "boundary-node-id", "g"});
  for (std::size_t n = 0; n < r.g.size(); ++n)
    for (std::size_t i = 0; i < r.quadrature.size(); ++i)
      w.row({CsvWriter::number(r.times[n]), CsvWriter::integer(r.quadrature[i].node), CsvWriter::number(r.g[n][i])});
}

void write_control_summary(const std::string& path, const ControlResult& r) {
  nlohmann::json j;
  j["method"] = r.method == ControlMethod::dense ? "dense" : "cg";
  j["modes"] = r.K;
  j["dt"] = r.dt;
  j["steps"] = r.steps;
  j["condition"] = r.condition;
  j["normal_residual"] = r.normal_residual;
  j["control_norm"] = r.control_norm;
  j["iterations"] = r.iterations;
  j["in_regime"] = r.in_regime;
  j["residual_position"] = r.residual_position;
  j["residual_velocity"] = r.residual_velocity;
  j["coefficients"] = r.x;
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path);
  f << j.dump(2) << "\n";
}

ControlSweep control_sweep(const Scenario& sc, const std::vector<double>& eps_list, double T, double C0, int trials,
                           std::uint64_t seed, ConormalRule rule) {
  if (trials < 1) throw InvalidArgument("at least one trial is needed");
  ControlSweep out;
  out.T = T;
  std::vector<double> cs, Cs;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (double eps : eps_list) {
    const EpsilonSetup s = prepare(sc, eps);
    ControlProblem p;
    p.a = s.a_eps;
    p.conormal = rule;
    p.T = T;
    p.cfl = sc.cfl;
    p.N = frequency_threshold(eps, T, C0);
    p.regime_threshold = p.N;
    EigenRequest req;
    req.threshold = p.N;
    p.basis = std::make_shared<EigenBasis>(eigenpairs(s.a_eps, req));
    const std::size_t K = p.modes();
    if (K == 0) throw InvalidArgument("threshold keeps no modes at eps=" + std::to_string(eps));
    ControlSweepRow row;
    row.eps = eps;
    row.N = p.N;
    row.modes = K;
    row.c_obs = std::numeric_limits<double>::infinity();
    // one Gramian per eps; targets only change the load
    p.theta0.assign(s.grid.node_count(), 0.0);
    p.theta1 = p.theta0;
    ControlResult base;
    for (int t = 0; t < trials; ++t) {
      std::vector<double> c0(K), c1(K);
      double d0 = 0.0, d1 = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        c0[k] = normal(rng);
        c1[k] = normal(rng);
        d0 += c0[k] * c0[k];
        d1 += c1[k] * c1[k] / p.basis->lambda[k];
      }
      const double scale = std::sqrt(d0) + std::sqrt(d1);
      for (std::size_t k = 0; k < K; ++k) {
        c0[k] /= scale;
        c1[k] /= scale;
      }
      p.theta0 = combine(*p.basis, c0);
      p.theta1 = combine(*p.basis, c1);
      ControlResult r = solve_control(p, ControlMethod::dense);
      const auto v = verify_control(r, p);
      const auto d = duality_check(r, p, seed + static_cast<std::uint64_t>(t));
      const double ratio = 1.0 / r.control_norm;
      row.c_obs = std::min(row.c_obs, ratio);
      row.C_obs = std::max(row.C_obs, ratio);
      row.max_normal_residual = std::max(row.max_normal_residual, r.normal_residual);
      row.max_verify_residual = std::max({row.max_verify_residual, v[0], v[1]});
      row.max_duality = std::max(row.max_duality, d.relative);
      row.condition = r.condition;
    }
    cs.push_back(row.c_obs);
    Cs.push_back(row.C_obs);
    out.rows.push_back(row);
  }
  auto variation = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
  };
  out.c_variation = variation(cs);
  out.C_variation = variation(Cs);
  return out;
}

}  // namespace homwave
