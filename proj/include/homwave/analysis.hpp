#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "homwave/cell.hpp"
#include "homwave/coefficient.hpp"
#include "homwave/elliptic.hpp"
#include "homwave/spectral.hpp"
#include "homwave/wave.hpp"

namespace homwave {

/// A coefficient on a domain plus the discretization rule shared by all
/// experiments: spacing eps / nodes_per_eps, cell correctors on a cell grid
/// of the same resolution.
struct Scenario {
  std::string name;
  PeriodicCoefficientField field;
  Domain domain;
  int nodes_per_eps = 8;
  int min_cells = 16;
  double cfl = 0.5;
  double tol = 1e-10;
  SolverKind solver = SolverKind::direct;
};

struct EpsilonSetup {
  double eps = 0.0;
  Grid grid;
  TensorField a_eps;
  CorrectorSet correctors;
  HomogenizedTensor ahat;
  TensorField a_hom;
};

/// Rejects grids coarser than eps/8.
EpsilonSetup prepare(const Scenario& scenario, double eps);

/// |grad u|_L2 through the Laplacian stiffness form, |u|_L2 through the lumped mass.
double gradient_norm(const CsrMatrix& laplacian, std::span<const double> u);
double l2_norm(std::span<const double> mass, std::span<const double> u);
/// L2 norm of the recovered Hessian (nodal gradients applied twice).
double hessian_norm(const Grid& grid, std::span<const double> mass, std::span<const double> u);

struct RateRow {
  double eps = 0.0;
  double h = 0.0;
  double dt = 0.0;
  std::string metric;
  double value = 0.0;
};

struct RateFit {
  std::string metric;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  /// All values at the discretization floor; no slope is fitted.
  bool floor = false;
  std::size_t points = 0;
};

struct RateTable {
  std::vector<RateRow> rows;
  std::vector<RateFit> fits;
  std::map<std::string, double> extras;
  bool complete = true;
  std::string failure;

  std::vector<double> values(const std::string& metric) const;
  std::vector<double> epsilons(const std::string& metric) const;
  const RateFit& fit(const std::string& metric) const;
};

/// Least squares on log-log; values at or below `floor` mark the fit as floor.
RateFit fit_rate(const std::vector<double>& eps, const std::vector<double>& values, const std::string& metric,
                 double floor);

void write_rate_csv(const std::string& path, const RateTable& table);

struct CorrectorErrorSample {
  double t = 0.0;
  double grad = 0.0;
  double time_derivative = 0.0;
};

/// w = u_eps - u0 - (Phi_k - x_k) d_k u0 and its time derivative from two states.
CorrectorErrorSample corrector_error_at(const Grid& grid, const CsrMatrix& laplacian, std::span<const double> mass,
                                        const WaveState& u_eps, const WaveState& u_hom, const DirichletCorrector& phi);
/// Same along two trajectories with matching samples.
std::vector<CorrectorErrorSample> corrector_error(const WaveTrajectory& traj_eps, const WaveTrajectory& traj_hom,
                                                  const DirichletCorrector& phi);

/// Initial data of a rate sweep. Filtered: phi_eps0 = sum a_k psi_k and
/// phi_eps1 = sum b_k sqrt(lambda_k) psi_k over eps-eigenfunctions.
/// Smooth: nodal values of the two functions (zeroed on the boundary).
struct RateData {
  bool filtered = true;
  std::vector<double> a{1.0, 0.5};
  std::vector<double> b{0.5, 0.0};
  std::function<double(const Point&)> phi0;
  std::function<double(const Point&)> phi1;
};

struct RateOptions {
  /// Number of time samples for the sup over t.
  int samples = 64;
  /// Absolute level below which errors count as floor.
  double floor = 1e-9;
  /// l2_rate: also integrate u directly and compare with the antiderivative.
  bool cross_check = true;
  /// l2_rate: rerun the first epsilon with 2T.
  bool doubling = true;
};

/// Metrics: energy_error (sup_t |grad w| + |w_t|), initial_error, rhs (the
/// right side of the energy estimate with C = 1), ratio = energy_error/rhs,
/// data_mismatch (H^-1 norm of L_eps phi_eps0 - L_0 phi_0).
RateTable rate_sweep(const Scenario& scenario, const std::vector<double>& eps_list, const RateData& data, double T,
                     const RateOptions& options = {});

/// Metrics: l2_error (via v = int_0^t u), l2_error_direct, route_gap.
RateTable l2_rate(const Scenario& scenario, const std::vector<double>& eps_list, const RateData& data, double T,
                  const RateOptions& options = {});

enum class RellichMode { full, homogenized };

struct RellichReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  double divergence_term = 0.0;
  double coefficient_term = 0.0;
  double energy_term = 0.0;
  double time_term = 0.0;
};

/// d a(x/eps)/dx_k at element midpoints. Rejects fields without a derivative.
std::vector<std::array<Mat2, 2>> coefficient_gradient(const PeriodicCoefficientField& field, double eps,
                                                      const Grid& grid);

/// Collects the interior integrals of the multiplier identity with
/// h = x - x0 along an integration (feed `observe` from a StepObserver).
class RellichAccumulator {
 public:
  RellichAccumulator(const TensorField& a, std::vector<std::array<Mat2, 2>> da, Point x0, RellichMode mode,
                     std::vector<Mat2> boundary_tensor = {});
  void observe(std::size_t step, const WaveState& state);
  RellichReport finish(double dt) const;

 private:
  TensorField a_;
  std::vector<std::array<Mat2, 2>> da_;
  Point x0_;
  RellichMode mode_;
  std::vector<BoundaryPoint> quad_;
  std::vector<Mat2> bt_;
  std::vector<double> boundary_, divergence_, coefficient_, energy_;
  double p_first_ = 0.0, p_last_ = 0.0;
};

/// Integrates and evaluates both sides. Returns |L-R| / (|L| + |R| + 1e-30).
RellichReport rellich_residual(const TensorField& a, const std::vector<std::array<Mat2, 2>>& da,
                               const WaveState& initial, const WaveOptions& options, Point x0, RellichMode mode,
                               const std::vector<Mat2>& boundary_tensor = {});
/// From a trajectory that kept a sample at every step.
RellichReport rellich_residual(const WaveTrajectory& traj, const TensorField& a,
                               const std::vector<std::array<Mat2, 2>>& da, Point x0, RellichMode mode,
                               const std::vector<Mat2>& boundary_tensor = {});

struct ObservationRatio {
  double energy = 0.0;
  double boundary = 0.0;
  double boundary_gamma = 0.0;
  double upper = 0.0;
  double lower = 0.0;
};

/// energy = |grad phi0|^2 + |phi1|^2, boundary = (1/T) int int |grad u|^2,
/// upper = boundary/energy, lower = energy/boundary. `gamma_faces` adds the
/// same integral over those faces only.
ObservationRatio observation_ratio(const TensorField& a, std::span<const double> phi0, std::span<const double> phi1,
                                   double T, double cfl = 0.5, const std::vector<int>& gamma_faces = {});

struct ObservabilityOptions {
  double C0 = 1.0;
  /// 0 means 4 r0.
  double T = 0.0;
  int trials = 8;
  std::uint64_t seed = 1;
  bool baseline = true;
  bool high_mode = true;
  std::vector<int> gamma_faces{0};
  std::vector<double> t_sweep{1.0, 2.0, 4.0};
};

struct ObservabilityRow {
  double eps = 0.0;
  double N = 0.0;
  /// "3", "homogenized:3", "high_mode".
  std::string trial;
  std::size_t modes = 0;
  ObservationRatio ratio;
};

struct ObservabilitySummary {
  double eps = 0.0;
  double N = 0.0;
  std::size_t modes = 0;
  double max_upper = 0.0;
  double min_upper = 0.0;
  double max_lower = 0.0;
  double min_lower = 0.0;
  double min_gamma_upper = 0.0;
  double hom_max_upper = 0.0;
  double hom_min_upper = 0.0;
  double high_mode_upper = 0.0;
  double high_mode_eps_lambda = 0.0;
};

struct ObservabilityReport {
  double T = 0.0;
  double r0 = 0.0;
  bool T_ge_C0_r0 = false;
  std::vector<ObservabilityRow> rows;
  std::vector<ObservabilitySummary> per_eps;
  /// max over eps / min over eps of the per-eps max_upper and min_upper.
  double upper_variation = 0.0;
  double lower_variation = 0.0;
  std::vector<std::pair<double, double>> t_sweep;
  double t_sweep_slope = 0.0;
  double t_sweep_intercept = 0.0;
};

/// Coefficients i.i.d. normal over the first K modes, scaled to unit energy.
std::pair<std::vector<double>, std::vector<double>> random_filtered_data(const EigenBasis& basis, std::size_t K,
                                                                         const CsrMatrix& laplacian,
                                                                         std::uint64_t seed);

ObservabilityReport observability_ratios(const Scenario& scenario, const std::vector<double>& eps_list,
                                         const ObservabilityOptions& options = {});

void write_observability_csv(const std::string& path, const ObservabilityReport& report);

struct TraceRow {
  int k = 0;
  double lambda = 0.0;
  double trace = 0.0;
  double ratio = 0.0;
  bool in_range = true;
};

struct TraceTable {
  double eps = 0.0;
  std::vector<TraceRow> rows;
  double max_ratio = 0.0;
  double min_ratio = 0.0;
};

/// ratio = int |grad psi|^2 / (lambda (1 + eps lambda)); in_range iff eps^2 lambda <= 1.
TraceTable eigen_trace_table(const EigenBasis& basis, double eps);
void write_trace_csv(const std::string& path, const TraceTable& table);

}  // namespace homwave
