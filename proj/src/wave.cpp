#include "homwave/wave.hpp"

#include <algorithm>
#include <cmath>

#include "homwave/csv.hpp"
#include "homwave/error.hpp"
#include "homwave/kernels.hpp"

namespace homwave {

namespace {

double effective_mu(const TensorField& a) {
  const auto r = a.eigenvalue_range();
  if (!(r[0] > 0.0)) throw InvalidArgument("coefficient is not positive definite");
  return std::min(r[0], 1.0 / r[1]);
}

double boundary_sum(const Grid& g, std::span<const double> u, const std::vector<BoundaryPoint>& quad,
                    std::vector<Point>* grads) {
  double s = 0.0;
  if (grads) grads->resize(quad.size());
  for (std::size_t i = 0; i < quad.size(); ++i) {
    const Point gr = nodal_gradient(g, u, quad[i].node);
    s += quad[i].weight * (gr[0] * gr[0] + gr[1] * gr[1]);
    if (grads) (*grads)[i] = gr;
  }
  return s;
}

}  // namespace

double max_stable_dt(const TensorField& a, double cfl) {
  return cfl * a.grid.min_spacing() * std::sqrt(effective_mu(a));
}

double energy(const WaveState& s, const CsrMatrix& k, std::span<const double> mass) {
  const auto ku = k.apply(s.u);
  return 0.5 * kernels::dot(s.u, ku) + 0.5 * kernels::weighted_dot(mass, s.v, s.v);
}

double energy(const WaveState& s, const TensorField& a) {
  if (s.u.size() != a.grid.node_count() || s.v.size() != a.grid.node_count())
    throw InvalidArgument("state does not match the coefficient grid");
  return energy(s, assemble_stiffness(a), lumped_mass(a.grid));
}

struct WaveStepper::Impl {
  const Grid& g() const { return tr.grid; }
  WaveOptions opt;
  CsrMatrix k;
  kernels::CsrView kv;
  std::vector<double> mass, inv_mass;
  std::vector<char> bmask;
  std::vector<int> bnodes;
  std::vector<double> ku, acc, f, gprev;
  WaveTrajectory tr;
  WaveState s;
  std::size_t n = 0;
  double e0 = 0.0;
  bool homogeneous = true;

  void spmv() { opt.serial ? kernels::serial::spmv(kv, s.u, ku) : kernels::parallel::spmv(kv, s.u, ku); }
  void accel(double t) {
    if (opt.forcing) opt.forcing(t, f);
    const auto nl = static_cast<long>(acc.size());
#pragma omp parallel for schedule(static) if (!opt.serial)
    for (long i = 0; i < nl; ++i) acc[i] = bmask[i] ? 0.0 : -ku[i] * inv_mass[i] + f[i];
  }
  void record() {
    const double pot = opt.serial ? kernels::serial::dot(s.u, ku) : kernels::parallel::dot(s.u, ku);
    const double kin = opt.serial ? kernels::serial::weighted_dot(mass, s.v, s.v)
                                  : kernels::parallel::weighted_dot(mass, s.v, s.v);
    tr.times.push_back(s.t);
    tr.energy.push_back(0.5 * pot + 0.5 * kin);
    std::vector<Point> grads;
    tr.boundary_grad_sq.push_back(
        boundary_sum(g(), s.u, tr.quadrature, opt.record_boundary_gradients ? &grads : nullptr));
    if (opt.record_boundary_gradients) tr.boundary_gradients.push_back(std::move(grads));
    const bool sample = n == 0 || n == tr.steps || (opt.sample_stride > 0 && n % opt.sample_stride == 0);
    if (sample) {
      tr.samples.push_back(s);
      tr.sample_steps.push_back(n);
    }
    if (opt.observer) opt.observer(n, s);
  }
};

WaveStepper::WaveStepper(const TensorField& a, const WaveState& initial, const WaveOptions& opt)
    : impl_(std::make_unique<Impl>()) {
  const Grid& g = a.grid;
  if (g.periodic()) throw InvalidArgument("wave problems need a domain grid");
  const std::size_t nn = g.node_count();
  if (initial.u.size() != nn || initial.v.size() != nn) throw InvalidArgument("initial state does not match the grid");
  if (!(opt.T > 0.0)) throw InvalidArgument("final time must be positive");
  if (!(opt.cfl > 0.0)) throw InvalidArgument("CFL number must be positive");
  const double limit = max_stable_dt(a, opt.cfl);
  const double dt_req = opt.dt > 0.0 ? opt.dt : limit;
  if (dt_req > limit * (1 + 1e-12))
    throw InvalidArgument("time step " + std::to_string(dt_req) + " violates the CFL bound " + std::to_string(limit));
  const auto steps = static_cast<std::size_t>(std::ceil(opt.T / dt_req - 1e-9));

  Impl& m = *impl_;
  m.opt = opt;
  m.k = assemble_stiffness(a);
  m.kv = m.k.view();
  m.mass = lumped_mass(g);
  m.inv_mass.assign(nn, 0.0);
  m.bmask.assign(nn, 0);
  for (std::size_t i = 0; i < nn; ++i) {
    m.bmask[i] = g.is_boundary(i) ? 1 : 0;
    m.inv_mass[i] = m.bmask[i] ? 0.0 : 1.0 / m.mass[i];
  }
  m.bnodes = g.boundary_nodes();
  m.tr.grid = g;
  m.tr.label = opt.label;
  m.tr.steps = steps;
  m.tr.dt = opt.T / static_cast<double>(steps);
  m.tr.cfl_ratio = m.tr.dt / (g.min_spacing() * std::sqrt(effective_mu(a)));
  m.tr.quadrature = boundary_quadrature(g, opt.trace_faces);

  m.s = initial;
  m.s.t = 0.0;
  if (opt.boundary) {
    std::vector<double> ub = m.s.u;
    opt.boundary(0.0, 0, ub);
    double scale = 0.0, diff = 0.0;
    for (int b : m.bnodes) {
      scale = std::max(scale, std::fabs(ub[b]));
      diff = std::max(diff, std::fabs(ub[b] - m.s.u[b]));
    }
    if (opt.overwrite_initial_boundary)
      m.s.u = std::move(ub);
    else if (diff > 1e-10 * (1.0 + scale))
      throw InvalidArgument("initial state disagrees with the boundary data at t=0");
  }
  m.homogeneous = !opt.boundary && !opt.forcing;
  m.ku.assign(nn, 0.0);
  m.acc.assign(nn, 0.0);
  m.f.assign(nn, 0.0);
  m.gprev.assign(m.bnodes.size(), 0.0);
  m.tr.times.reserve(steps + 1);
  m.tr.energy.reserve(steps + 1);
  m.tr.boundary_grad_sq.reserve(steps + 1);
  m.spmv();
  m.accel(0.0);
  m.record();
  m.e0 = m.tr.energy[0];
}

WaveStepper::~WaveStepper() = default;
WaveStepper::WaveStepper(WaveStepper&&) noexcept = default;
WaveStepper& WaveStepper::operator=(WaveStepper&&) noexcept = default;

std::size_t WaveStepper::steps() const { return impl_->tr.steps; }
std::size_t WaveStepper::step() const { return impl_->n; }
double WaveStepper::dt() const { return impl_->tr.dt; }
const WaveState& WaveStepper::state() const { return impl_->s; }
std::span<const double> WaveStepper::acceleration() const { return impl_->acc; }
const CsrMatrix& WaveStepper::stiffness() const { return impl_->k; }
std::span<const double> WaveStepper::mass() const { return impl_->mass; }
const WaveTrajectory& WaveStepper::trajectory() const { return impl_->tr; }

void WaveStepper::advance() {
  Impl& m = *impl_;
  if (m.n >= m.tr.steps) throw InvalidArgument("integration already reached the final time");
  const double dt = m.tr.dt;
  const double t1 = dt * static_cast<double>(m.n + 1);
  for (std::size_t i = 0; i < m.bnodes.size(); ++i) m.gprev[i] = m.s.u[m.bnodes[i]];
  if (m.opt.serial)
    kernels::serial::kick_drift(dt, m.acc, m.s.v, m.s.u);
  else
    kernels::parallel::kick_drift(dt, m.acc, m.s.v, m.s.u);
  if (m.opt.boundary) {
    m.opt.boundary(t1, m.n + 1, m.s.u);
    for (std::size_t i = 0; i < m.bnodes.size(); ++i) m.s.v[m.bnodes[i]] = (m.s.u[m.bnodes[i]] - m.gprev[i]) / dt;
  } else {
    for (int b : m.bnodes) m.s.u[b] = m.s.v[b] = 0.0;
  }
  m.s.t = t1;
  m.spmv();
  m.accel(t1);
  if (m.opt.serial)
    kernels::serial::axpy(0.5 * dt, m.acc, m.s.v);
  else
    kernels::parallel::axpy(0.5 * dt, m.acc, m.s.v);
  ++m.n;
  m.record();
  const double e = m.tr.energy.back();
  if (!std::isfinite(e) || (m.homogeneous && m.e0 > 0.0 && e > 1e6 * m.e0))
    throw NumericalFailure("wave integration became unstable at t=" + std::to_string(t1), e);
}

WaveTrajectory WaveStepper::finish() {
  while (!done()) advance();
  impl_->tr.final_state = impl_->s;
  return std::move(impl_->tr);
}

WaveTrajectory integrate(const TensorField& a, const WaveState& initial, const WaveOptions& opt) {
  return WaveStepper(a, initial, opt).finish();
}

std::vector<double> time_weights(const WaveTrajectory& tr) {
  std::vector<double> w(tr.times.size(), tr.dt);
  if (!w.empty()) {
    w.front() *= 0.5;
    w.back() *= 0.5;
  }
  return w;
}

double boundary_gradient_integral(const WaveTrajectory& tr) {
  const auto w = time_weights(tr);
  double s = 0.0;
  for (std::size_t n = 0; n < w.size(); ++n) s += w[n] * tr.boundary_grad_sq[n];
  return s;
}

std::vector<std::vector<double>> conormal_trace(const WaveTrajectory& tr, const TensorField& a,
                                                const std::vector<Mat2>& boundary_tensor) {
  if (tr.boundary_gradients.size() != tr.times.size())
    throw InvalidArgument("trajectory was integrated without boundary gradients");
  if (!a.grid.same_layout(tr.grid)) throw InvalidArgument("coefficient and trajectory grids differ");
  const std::vector<Mat2> at = boundary_tensor.empty() ? boundary_tensors(a, tr.quadrature) : boundary_tensor;
  if (at.size() != tr.quadrature.size()) throw InvalidArgument("one boundary tensor per quadrature point is needed");
  std::vector<std::vector<double>> out(tr.times.size(), std::vector<double>(tr.quadrature.size()));
  for (std::size_t n = 0; n < out.size(); ++n)
    for (std::size_t b = 0; b < tr.quadrature.size(); ++b) {
      const Point& gr = tr.boundary_gradients[n][b];
      const Point& nv = tr.quadrature[b].normal;
      const Mat2& A = at[b];
      out[n][b] = nv[0] * (A[0][0] * gr[0] + A[0][1] * gr[1]) + nv[1] * (A[1][0] * gr[0] + A[1][1] * gr[1]);
    }
  return out;
}

WaveState eigen_solution(const EigenBasis& basis, const FilteredData& c, double t) {
  if (c.a.size() != c.b.size() || c.a.size() > basis.size()) throw InvalidArgument("coefficients do not fit the basis");
  WaveState s;
  s.t = t;
  std::vector<double> cu(c.a.size()), cv(c.a.size());
  for (std::size_t k = 0; k < c.a.size(); ++k) {
    const double w = std::sqrt(basis.lambda[k]);
    cu[k] = c.a[k] * std::cos(w * t) + c.b[k] / w * std::sin(w * t);
    cv[k] = -c.a[k] * w * std::sin(w * t) + c.b[k] * std::cos(w * t);
  }
  s.u = combine(basis, cu);
  s.v = combine(basis, cv);
  return s;
}

void write_trajectory_csv(const std::string& path, const WaveTrajectory& tr) {
  CsvWriter w(path, {"t", "energy", "boundary_grad_sq"});
  for (std::size_t n = 0; n < tr.times.size(); ++n)
    w.row({CsvWriter::number(tr.times[n]), CsvWriter::number(tr.energy[n]), CsvWriter::number(tr.boundary_grad_sq[n])});
}

}  // namespace homwave
