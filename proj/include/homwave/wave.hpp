#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "homwave/fem.hpp"
#include "homwave/grid.hpp"
#include "homwave/spectral.hpp"

namespace homwave {

struct WaveState {
  double t = 0.0;
  std::vector<double> u;
  std::vector<double> v;
};

/// Writes Dirichlet values at time t into the boundary entries of `u`
/// (interior entries must be left alone).
using BoundaryData = std::function<void(double t, std::size_t step, std::span<double> u)>;
/// Writes nodal forcing values at time t.
using Forcing = std::function<void(double t, std::span<double> f)>;
using StepObserver = std::function<void(std::size_t step, const WaveState& state)>;

struct WaveOptions {
  double T = 1.0;
  /// Requested step; 0 picks cfl * h * sqrt(mu). The step actually used is
  /// T / ceil(T / dt) so that the last step lands on T.
  double dt = 0.0;
  double cfl = 0.5;
  /// Store full states every `sample_stride` steps (0: first and last only).
  std::size_t sample_stride = 0;
  /// Faces for the boundary traces (empty: whole boundary).
  std::vector<int> trace_faces;
  /// Keep per-step boundary gradients (needed by conormal_trace).
  bool record_boundary_gradients = true;
  BoundaryData boundary;
  Forcing forcing;
  StepObserver observer;
  /// Replace the initial boundary values by the boundary data at t=0 instead
  /// of rejecting a mismatch (control problems start from L2 data).
  bool overwrite_initial_boundary = false;
  /// Use the serial reference kernels.
  bool serial = false;
  std::string label;
};

struct WaveTrajectory {
  Grid grid;
  std::string label;
  double dt = 0.0;
  std::size_t steps = 0;
  /// dt / (h sqrt(mu)).
  double cfl_ratio = 0.0;
  std::vector<double> times;
  std::vector<double> energy;
  std::vector<double> boundary_grad_sq;
  std::vector<BoundaryPoint> quadrature;
  /// [step][quadrature point]
  std::vector<std::vector<Point>> boundary_gradients;
  std::vector<WaveState> samples;
  std::vector<std::size_t> sample_steps;
  WaveState final_state;
};

/// Velocity Verlet, one step at a time. `integrate` runs it to completion;
/// sweeps that compare two solutions advance two steppers in lockstep.
class WaveStepper {
 public:
  WaveStepper(const TensorField& a, const WaveState& initial, const WaveOptions& options);
  ~WaveStepper();
  WaveStepper(WaveStepper&&) noexcept;
  WaveStepper& operator=(WaveStepper&&) noexcept;

  std::size_t steps() const;
  std::size_t step() const;
  double dt() const;
  bool done() const { return step() >= steps(); }
  const WaveState& state() const;
  /// Current discrete u_tt (zero on the boundary).
  std::span<const double> acceleration() const;
  const CsrMatrix& stiffness() const;
  std::span<const double> mass() const;
  void advance();
  const WaveTrajectory& trajectory() const;
  WaveTrajectory finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

WaveTrajectory integrate(const TensorField& a, const WaveState& initial, const WaveOptions& options);

/// Largest dt allowed by the CFL rule for this coefficient and grid.
double max_stable_dt(const TensorField& a, double cfl = 0.5);

/// 1/2 int <a grad u, grad u> + 1/2 int v^2 with the assembly quadrature.
double energy(const WaveState& state, const TensorField& a);
double energy(const WaveState& state, const CsrMatrix& stiffness, std::span<const double> mass);

/// Trapezoid in time of the per-step boundary quadrature of |grad u|^2.
double boundary_gradient_integral(const WaveTrajectory& traj);
/// Trapezoid weights of the trajectory time grid.
std::vector<double> time_weights(const WaveTrajectory& traj);

/// n . a grad u at every boundary quadrature point and step, with `a` averaged
/// over the elements touching each boundary node unless `boundary_tensor` is given.
std::vector<std::vector<double>> conormal_trace(const WaveTrajectory& traj, const TensorField& a,
                                                const std::vector<Mat2>& boundary_tensor = {});

/// Exact modal solution at time t.
WaveState eigen_solution(const EigenBasis& basis, const FilteredData& coeffs, double t);

/// CSV (t, energy, boundary_grad_sq).
void write_trajectory_csv(const std::string& path, const WaveTrajectory& traj);

}  // namespace homwave
