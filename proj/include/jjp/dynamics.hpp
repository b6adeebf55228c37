#pragma once

#include <vector>

#include "jjp/model.hpp"

namespace jjp {

/// sigma(j,k) = <a^dag_j a_k>: populations on the diagonal, coherences off it.
/// A plain Eigen matrix is used as the state; these helpers enforce the
/// invariants where they matter.
namespace mdm {

/// max_jk |sigma - sigma^dag|
double hermiticity_defect(const Matrix& sigma);

/// sigma <- (sigma + sigma^dag)/2
void resymmetrize(Matrix& sigma);

/// Smallest eigenvalue (self-adjoint part).
double min_eigenvalue(const Matrix& sigma);

/// Throws std::invalid_argument if the defect exceeds tol.
void require_hermitian(const Matrix& sigma, double tol = 1e-8);

}  // namespace mdm

/// Mean-field equation of motion for the full two-point matrix:
///   dn_j/dt  = -gamma n_j + gamma_up_j + 2 sum_{m!=j} Im(t_mj sigma_jm)
///   dz_jk/dt = i[i gamma + d_eps_jk + 2 sum_m (c_jm dn_jm + c_mk dn_mk)] z_jk
///              - i t_jk dn_jk - i sum_{m!=j,k} (t_mk z_jm - t_jm z_mk)
/// Output is hermitian for hermitian input.
Matrix mdm_derivative(const NetworkModel& m, const Matrix& sigma);

struct TrajectorySample {
    double time = 0.0;
    Matrix state;
    double step_size_used = 0.0;
};

struct EvolveOptions {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double initial_step = 1e-3;
    // When non-empty, samples are emitted exactly at these times (must be
    // increasing, within [0, t_end]); otherwise at every accepted step.
    std::vector<double> sample_times;
};

/// Adaptive embedded Runge-Kutta integration of the mean-field equations
/// from t=0 to t_end. The state is re-symmetrized after every accepted step.
/// Throws std::runtime_error on step-size underflow or non-finite state.
std::vector<TrajectorySample> evolve(const NetworkModel& m, const Matrix& initial,
                                     double t_end, double rel_tol);
std::vector<TrajectorySample> evolve(const NetworkModel& m, const Matrix& initial,
                                     double t_end, const EvolveOptions& opts);

// Defined in steady.hpp; declared here so relax_to_steady can return it.
struct SteadyStateResult;

/// Integrates until max|d sigma/dt| < tol or t_max is reached.
/// Non-convergence is reported through the result, not thrown.
SteadyStateResult relax_to_steady(const NetworkModel& m, const Matrix& initial,
                                  double tol = 1e-8, double t_max = 1e4);

/// Default initial state for steady-state searches: n_j = gamma_up_j / gamma,
/// all coherences zero (the exact K=0 fixed point).
Matrix equilibrium_state(const NetworkModel& m);

/// Trajectory CSV: time, n_1..n_J, then Re/Im of the upper-triangle
/// coherences in row-major order.
void write_trajectory_csv(const std::vector<TrajectorySample>& traj,
                          const NetworkModel& m, const std::string& path,
                          const std::vector<std::string>& header_lines = {});

}  // namespace jjp
