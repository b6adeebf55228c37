#include "jjp/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "jjp/rk45.hpp"
#include "jjp/steady.hpp"
#include "jjp/sweep.hpp"  // format_g17

namespace jjp {

namespace mdm {

double hermiticity_defect(const Matrix& sigma) {
    return (sigma - sigma.adjoint()).cwiseAbs().maxCoeff();
}

void resymmetrize(Matrix& sigma) { sigma = 0.5 * (sigma + sigma.adjoint()).eval(); }

double min_eigenvalue(const Matrix& sigma) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sigma + sigma.adjoint()),
                                             Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void require_hermitian(const Matrix& sigma, double tol) {
    const double defect = hermiticity_defect(sigma);
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    if (!(defect <= tol * scale))
        throw std::invalid_argument("state is not hermitian (defect " +
                                    std::to_string(defect) + ")");
}

}  // namespace mdm

namespace {

void derivative_into(const NetworkModel& m, const Matrix& sigma, Matrix& out) {
    const int J = m.n_modes;
    const Complex I(0.0, 1.0);
    RealVector n(J);
    for (int j = 0; j < J; ++j) n(j) = sigma(j, j).real();

    // 2 sum_m (c_jm dn_jm + c_mk dn_mk) decomposes into a per-mode potential:
    // u_j = sum_m c_jm (n_j - n_m), giving u_j + u_k picked up with signs below.
    RealVector u = RealVector::Zero(J);
    for (int j = 0; j < J; ++j)
        for (int mm = 0; mm < J; ++mm) u(j) += m.capacitance(j, mm) * (n(j) - n(mm));

    for (int j = 0; j < J; ++j) {
        for (int k = 0; k < J; ++k) {
            if (j == k) {
                double flow = 0.0;
                for (int mm = 0; mm < J; ++mm)
                    if (mm != j) flow += std::imag(m.tunneling(mm, j) * sigma(j, mm));
                out(j, j) = Complex(-m.gamma * n(j) + m.gamma_up(j) + 2.0 * flow, 0.0);
            } else {
                const double deps = m.epsilon(j) - m.epsilon(k);
                const double coul = 2.0 * (u(j) - u(k));
                Complex val = I * (I * m.gamma + deps + coul) * sigma(j, k);
                val -= I * m.tunneling(j, k) * Complex(n(j) - n(k), 0.0);
                for (int mm = 0; mm < J; ++mm) {
                    if (mm == j || mm == k) continue;
                    val -= I * (m.tunneling(mm, k) * sigma(j, mm) -
                                m.tunneling(j, mm) * sigma(mm, k));
                }
                out(j, k) = val;
            }
        }
    }
}

}  // namespace

Matrix mdm_derivative(const NetworkModel& m, const Matrix& sigma) {
    if (sigma.rows() != m.n_modes || sigma.cols() != m.n_modes)
        throw std::invalid_argument("mdm_derivative: state dimension mismatch");
    mdm::require_hermitian(sigma);
    Matrix out(m.n_modes, m.n_modes);
    derivative_into(m, sigma, out);
    return out;
}

Matrix equilibrium_state(const NetworkModel& m) {
    Matrix sigma = Matrix::Zero(m.n_modes, m.n_modes);
    for (int j = 0; j < m.n_modes; ++j)
        sigma(j, j) = Complex(m.gamma_up(j) / m.gamma, 0.0);
    return sigma;
}

std::vector<TrajectorySample> evolve(const NetworkModel& m, const Matrix& initial,
                                     double t_end, double rel_tol) {
    EvolveOptions opts;
    opts.rel_tol = rel_tol;
    return evolve(m, initial, t_end, opts);
}

std::vector<TrajectorySample> evolve(const NetworkModel& m, const Matrix& initial,
                                     double t_end, const EvolveOptions& opts) {
    if (!(t_end >= 0.0)) throw std::invalid_argument("evolve: t_end must be >= 0");
    if (!(opts.rel_tol > 0.0 && opts.rel_tol <= 1e-2))
        throw std::invalid_argument("evolve: rel_tol must be in (0, 1e-2]");
    mdm::require_hermitian(initial);

    std::vector<TrajectorySample> traj;
    Matrix y = initial;
    mdm::resymmetrize(y);
    traj.push_back({0.0, y, 0.0});
    if (t_end == 0.0) return traj;

    Rk45Options rk;
    rk.rel_tol = opts.rel_tol;
    rk.abs_tol = opts.abs_tol;
    rk.initial_step = opts.initial_step / m.gamma;

    Rk45Callbacks cb;
    cb.project = [](Matrix& s) { mdm::resymmetrize(s); };
    auto f = [&m](const Matrix& s, Matrix& ds) { derivative_into(m, s, ds); };

    if (!opts.sample_times.empty()) {
        rk45_integrate(f, y, 0.0, t_end, rk, cb, opts.sample_times,
                       [&](double t, const Matrix& s, double h) {
                           if (t > 0.0) traj.push_back({t, s, h});
                       });
    } else {
        cb.on_accept = [&](double t, const Matrix& s, double h) {
            traj.push_back({t, s, h});
            return true;
        };
        rk45_integrate(f, y, 0.0, t_end, rk, cb);
    }
    return traj;
}

SteadyStateResult relax_to_steady(const NetworkModel& m, const Matrix& initial,
                                  double tol, double t_max) {
    if (!(tol > 0.0)) throw std::invalid_argument("relax_to_steady: tol must be > 0");
    mdm::require_hermitian(initial);

    SteadyStateResult res;
    res.method = SteadyMethod::ode_relax;

    Matrix y = initial;
    mdm::resymmetrize(y);
    Matrix dy(m.n_modes, m.n_modes);

    Rk45Options rk;
    // the numerical steady state wanders at the integrator error scale, so
    // the step tolerance must sit well below the requested residual
    rk.rel_tol = std::clamp(tol * 1e-2, 1e-13, 1e-9);
    rk.abs_tol = std::clamp(tol * 1e-3, 1e-16, 1e-12);
    rk.initial_step = 1e-3 / m.gamma;

    long steps = 0;
    double t_reached = 0.0;
    bool done = false;

    Rk45Callbacks cb;
    cb.project = [](Matrix& s) { mdm::resymmetrize(s); };
    cb.on_accept = [&](double t, const Matrix& s, double) {
        ++steps;
        t_reached = t;
        derivative_into(m, s, dy);
        if (dy.cwiseAbs().maxCoeff() < tol) {
            done = true;
            return false;
        }
        return true;
    };
    auto f = [&m](const Matrix& s, Matrix& ds) { derivative_into(m, s, ds); };
    rk45_integrate(f, y, 0.0, t_max, rk, cb);

    res.state = y;
    res.residual = residual(m, y);
    res.iterations = steps;
    res.converged = done && res.residual < tol;
    res.elapsed_time = t_reached;
    return res;
}

void write_trajectory_csv(const std::vector<TrajectorySample>& traj,
                          const NetworkModel& m, const std::string& path,
                          const std::vector<std::string>& header_lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& line : header_lines) out << "# " << line << '\n';
    out << "time";
    for (int j = 0; j < m.n_modes; ++j) out << ",n_" << j + 1;
    for (int j = 0; j < m.n_modes; ++j)
        for (int k = j + 1; k < m.n_modes; ++k)
            out << ",Re_z_" << j + 1 << k + 1 << ",Im_z_" << j + 1 << k + 1;
    out << '\n';
    for (const auto& s : traj) {
        out << format_g17(s.time);
        for (int j = 0; j < m.n_modes; ++j) out << ',' << format_g17(s.state(j, j).real());
        for (int j = 0; j < m.n_modes; ++j)
            for (int k = j + 1; k < m.n_modes; ++k)
                out << ',' << format_g17(s.state(j, k).real()) << ','
                    << format_g17(s.state(j, k).imag());
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace jjp
