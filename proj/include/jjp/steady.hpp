#pragma once

#include <cstdint>
#include <string>

#include "jjp/dynamics.hpp"
#include "jjp/model.hpp"

namespace jjp {

enum class SteadyMethod { fixed_point, ode_relax, linear_ec0 };

std::string to_string(SteadyMethod m);

struct SteadyStateResult {
    Matrix state;
    double residual = 0.0;       // max |d sigma/dt| at the returned state
    long iterations = 0;         // iterations (fixed point) or accepted steps (ode)
    bool converged = false;
    SteadyMethod method = SteadyMethod::fixed_point;
    std::uint64_t seed = 0;      // seed of a randomized initial guess, if any
    double elapsed_time = 0.0;   // model time integrated (ode_relax only)
};

struct FixedPointConfig {
    double tol = 1e-8;
    long max_iter = 100000;
    double alpha = 0.5;          // population under-relaxation, in (0, 1]
    bool random_init = false;
    std::uint64_t seed = 0;
};

/// Self-consistent iteration of the steady-state conditions:
/// coherences from the current populations (Jacobi), then populations from
/// the fresh coherences, mixed with factor alpha.
/// Convergence requires sum_j |n1_j - n0_j| < tol together with the
/// coherence update and the full equation-of-motion residual below tol.
/// Throws std::runtime_error if a coherence denominator falls below 1e-14
/// in magnitude (message names the pair).
SteadyStateResult fixed_point_iterate(const NetworkModel& m, const FixedPointConfig& cfg = {});

/// Same iteration from an explicit initial state (used for warm starts).
SteadyStateResult fixed_point_iterate(const NetworkModel& m, const FixedPointConfig& cfg,
                                      const Matrix& initial);

/// max over (j,k) of the steady-state condition defect == max |d sigma/dt|.
double residual(const NetworkModel& m, const Matrix& sigma);

/// Direct solution for capacitance-free models: the steady-state conditions
/// are affine in (n, Re z, Im z), a real linear system of dimension
/// J + J(J-1). Requires m.capacitance == 0.
SteadyStateResult solve_linear_ec0(const NetworkModel& m);

/// Random initial state used by multi_start and random_init:
/// n_j uniform in [0, 2 gamma_up_j/gamma], coherences uniform in the complex
/// disc of radius 0.1 * mean(gamma_up)/gamma.
Matrix random_state(const NetworkModel& m, std::uint64_t seed);

struct MultiStartReport {
    int n_starts = 0;
    int n_converged = 0;
    double max_pairwise_distance = 0.0;      // max-norm over full states
    double max_population_distance = 0.0;    // max-norm over populations only
    std::vector<SteadyStateResult> runs;
};

/// Runs fixed_point_iterate from n_starts random initial guesses
/// (seed = base_seed + run index) and reports the spread of the converged
/// states. Detects multistability; never throws on non-convergence.
MultiStartReport multi_start(const NetworkModel& m, int n_starts,
                             std::uint64_t base_seed, const FixedPointConfig& cfg = {});

}  // namespace jjp
