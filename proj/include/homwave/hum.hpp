#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "homwave/analysis.hpp"
#include "homwave/spectral.hpp"
#include "homwave/wave.hpp"

namespace homwave {

/// How the conormal derivative of a dual solution is taken: `recovered`
/// contracts the one-sided nodal gradient with the tensor (as conormal_trace),
/// `variational` uses the boundary rows of K u divided by the boundary
/// weight, which satisfies the discrete Green identity exactly.
enum class ConormalRule { recovered, variational };

/// Drive (theta0, theta1) at t=0 to a state whose projection onto the modes
/// with lambda <= N vanishes at T, using Dirichlet data on the boundary.
struct ControlProblem {
  TensorField a;
  /// Eigenbasis of `a` (must cover lambda <= N).
  std::shared_ptr<const EigenBasis> basis;
  double N = 0.0;
  /// Nodal targets; theta1 is paired in L2 and measured in H^-1 spectrally.
  std::vector<double> theta0;
  std::vector<double> theta1;
  double T = 1.0;
  /// 0 picks the CFL step.
  double dt = 0.0;
  double cfl = 0.5;
  /// Conormal tensors per boundary point (empty: element averages).
  std::vector<Mat2> boundary_tensor;
  ConormalRule conormal = ConormalRule::recovered;
  /// frequency_threshold(eps, T, C0) when the problem comes from a sweep; 0 skips the regime flag.
  double regime_threshold = 0.0;

  std::size_t modes() const;
};

/// Conormal traces of one dual solution on the forward time grid, plus its
/// values u(0), u_t(0).
struct DualSolution {
  std::vector<std::vector<double>> trace;
  std::vector<double> u0;
  std::vector<double> ut0;
};

/// Solves u_tt + L u = 0, u = 0 on the boundary, u(T) = sum x_k psi_k,
/// u_t(T) = sum x_{K+k} psi_k by integrating the reflected data forward.
DualSolution dual_solve(const ControlProblem& problem, std::span<const double> x);

enum class ControlMethod { dense, cg };

struct ControlResult {
  ControlMethod method = ControlMethod::dense;
  std::size_t K = 0;
  double dt = 0.0;
  std::size_t steps = 0;
  std::vector<double> times;
  std::vector<double> time_weights;
  std::vector<BoundaryPoint> quadrature;
  /// g[n][b]: control at t_n and boundary point b.
  std::vector<std::vector<double>> g;
  /// Minimizer coefficients (phi0 modes, then phi1 modes).
  std::vector<double> x;
  /// Load of the functional: l_i = -<theta1, u_i(0)> + <theta0, u_i,t(0)>.
  std::vector<double> load;
  /// Dense mode: 2K x 2K row-major Gramian and the basis traces.
  std::vector<double> gramian;
  std::vector<std::vector<std::vector<double>>> columns;
  double condition = 0.0;
  double normal_residual = 0.0;
  double control_norm = 0.0;
  int iterations = 0;
  bool in_regime = true;
  /// Filled by verify_control.
  double residual_position = -1.0;
  double residual_velocity = -1.0;
};

/// x -> G x with G_ij = int int dnu u_i dnu u_j: one dual solve for x, basis
/// traces from the exact modal recurrence of the time stepper.
std::vector<double> gramian_apply(const ControlProblem& problem, std::span<const double> x);
FilteredData gramian_apply(const FilteredData& coeffs, const ControlProblem& problem);

/// Minimizes 1/2 <G x, x> + <l, x>. Dense mode assembles G from 2K dual
/// solves; cg mode iterates gramian_apply. Throws NumericalFailure when G is
/// singular to working precision (condition > 1e12) or cg stalls.
ControlResult solve_control(const ControlProblem& problem, ControlMethod method = ControlMethod::dense,
                            double tol = 1e-12);

/// Integrates the controlled problem from (theta0, theta1) and returns
/// |P_N v(T)|_L2 and |P_N v_t(T)|_H^-1 relative to |P_N theta0| + |P_N theta1|_H^-1.
std::array<double, 2> verify_control(ControlResult& result, const ControlProblem& problem);

struct DualityDefect {
  double defect = 0.0;
  double scale = 0.0;
  double relative = 0.0;
};

/// <theta1, u(0)> - <theta0, u_t(0)> - int int g dnu u for a random dual
/// solution u with data in A_N x A_N; vanishes when g controls the filtered
/// state. `g` overrides the stored control.
DualityDefect duality_check(const ControlResult& result, const ControlProblem& problem, std::uint64_t seed,
                            const std::vector<std::vector<double>>* g = nullptr);

/// int int g^2 with the result's quadrature.
double control_norm(const ControlResult& result, const std::vector<std::vector<double>>& g);

/// CSV (t, boundary-node-id, g) and a JSON summary.
void write_control_csv(const std::string& path, const ControlResult& result);
void write_control_summary(const std::string& path, const ControlResult& result);

struct ControlSweepRow {
  double eps = 0.0;
  double N = 0.0;
  std::size_t modes = 0;
  /// min and max over trials of (|P_N theta0| + |P_N theta1|_H^-1) / |g|.
  double c_obs = 0.0;
  double C_obs = 0.0;
  double max_normal_residual = 0.0;
  double max_verify_residual = 0.0;
  double max_duality = 0.0;
  double condition = 0.0;
};

struct ControlSweep {
  double T = 0.0;
  std::vector<ControlSweepRow> rows;
  /// max over eps / min over eps of c_obs and of C_obs.
  double c_variation = 0.0;
  double C_variation = 0.0;
};

/// Random unit targets in A_N x A_N with N = frequency_threshold(eps, T, C0),
/// one dense Gramian per eps.
ControlSweep control_sweep(const Scenario& scenario, const std::vector<double>& eps_list, double T, double C0,
                           int trials, std::uint64_t seed, ConormalRule rule = ConormalRule::recovered);

}  // namespace homwave
