#pragma once

#include <functional>

#include "jjp/model.hpp"

namespace jjp {

/// Dormand-Prince 5(4) embedded step controller on complex matrices.
/// Shared by the mean-field integrator (J x J sigma) and the Fock-space
/// oracle (dim x dim rho).
struct Rk45Options {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double initial_step = 1e-3;
    double max_step = 0.0;   // 0 = unlimited
    double min_step = 1e-13; // underflow guard
};

struct Rk45Callbacks {
    // Called after each accepted step with (t, y, h_used). Return false to
    // stop the integration early.
    std::function<bool(double, const Matrix&, double)> on_accept;
    // Optional in-place projection applied to the state after each accepted
    // step (e.g. hermitian re-symmetrization).
    std::function<void(Matrix&)> project;
};

/// Integrates dy/dt = f(y) from (t0, y) to t_end in place. If sample_times is
/// non-empty, steps are clipped to land exactly on them and on_sample is
/// invoked there. Throws std::runtime_error on step underflow or non-finite
/// values (message carries the time stamp).
void rk45_integrate(const std::function<void(const Matrix&, Matrix&)>& f,
                    Matrix& y, double t0, double t_end, const Rk45Options& opts,
                    const Rk45Callbacks& cb = {},
                    const std::vector<double>& sample_times = {},
                    const std::function<void(double, const Matrix&, double)>& on_sample = {});

}  // namespace jjp
