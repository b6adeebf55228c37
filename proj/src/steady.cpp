#include "jjp/steady.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>

namespace jjp {

std::string to_string(SteadyMethod m) {
    switch (m) {
        case SteadyMethod::fixed_point: return "fixed_point";
        case SteadyMethod::ode_relax: return "ode_relax";
        case SteadyMethod::linear_ec0: return "linear_ec0";
    }
    return "?";
}

double residual(const NetworkModel& m, const Matrix& sigma) {
    return mdm_derivative(m, sigma).cwiseAbs().maxCoeff();
}

namespace {

struct SplitState {
    RealVector n;
    Matrix z;  // off-diagonal only; diagonal kept zero
};

SplitState split(const Matrix& sigma) {
    const int J = static_cast<int>(sigma.rows());
    SplitState s;
    s.n = RealVector(J);
    s.z = sigma;
    for (int j = 0; j < J; ++j) {
        s.n(j) = sigma(j, j).real();
        s.z(j, j) = Complex(0, 0);
    }
    return s;
}

Matrix join(const SplitState& s) {
    Matrix sigma = s.z;
    for (int j = 0; j < s.n.size(); ++j) sigma(j, j) = Complex(s.n(j), 0.0);
    return sigma;
}

}  // namespace

Matrix random_state(const NetworkModel& m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const int J = m.n_modes;
    const double zr = 0.1 * m.gamma_up.mean() / m.gamma;
    Matrix sigma = Matrix::Zero(J, J);
    for (int j = 0; j < J; ++j)
        sigma(j, j) = Complex(uni(rng) * 2.0 * m.gamma_up(j) / m.gamma, 0.0);
    for (int j = 0; j < J; ++j)
        for (int k = j + 1; k < J; ++k) {
            const double r = zr * std::sqrt(uni(rng));
            const double phi = 2.0 * std::numbers::pi * uni(rng);
            sigma(j, k) = std::polar(r, phi);
            sigma(k, j) = std::conj(sigma(j, k));
        }
    return sigma;
}

SteadyStateResult fixed_point_iterate(const NetworkModel& m, const FixedPointConfig& cfg) {
    return fixed_point_iterate(
        m, cfg, cfg.random_init ? random_state(m, cfg.seed) : equilibrium_state(m));
}

SteadyStateResult fixed_point_iterate(const NetworkModel& m, const FixedPointConfig& cfg,
                                      const Matrix& initial) {
    if (!(cfg.tol > 0.0)) throw std::invalid_argument("fixed_point: tol must be > 0");
    if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0))
        throw std::invalid_argument("fixed_point: alpha must be in (0, 1]");

    const int J = m.n_modes;
    SteadyStateResult res;
    res.method = SteadyMethod::fixed_point;
    res.seed = cfg.seed;

    SplitState cur = split(initial);
    Matrix znew = Matrix::Zero(J, J);
    RealVector u(J);

    for (long it = 1; it <= cfg.max_iter; ++it) {
        for (int j = 0; j < J; ++j) {
            u(j) = 0.0;
            for (int mm = 0; mm < J; ++mm)
                u(j) += m.capacitance(j, mm) * (cur.n(j) - cur.n(mm));
        }
        // coherences from the current populations and coherences
        for (int j = 0; j < J; ++j) {
            for (int k = 0; k < J; ++k) {
                if (j == k) continue;
                Complex num = m.tunneling(j, k) * Complex(cur.n(j) - cur.n(k), 0.0);
                for (int mm = 0; mm < J; ++mm) {
                    if (mm == j || mm == k) continue;
                    num += m.tunneling(mm, k) * cur.z(j, mm) -
                           m.tunneling(j, mm) * cur.z(mm, k);
                }
                const Complex den(m.epsilon(j) - m.epsilon(k) + 2.0 * (u(j) - u(k)),
                                  m.gamma);
                if (std::abs(den) < 1e-14) {
                    std::ostringstream os;
                    os << "fixed_point: singular coherence denominator at (" << j
                       << "," << k << ")";
                    throw std::runtime_error(os.str());
                }
                znew(j, k) = num / den;
            }
        }
        // populations from the fresh coherences, under-relaxed
        RealVector nstar(J);
        for (int j = 0; j < J; ++j) {
            double flow = 0.0;
            for (int mm = 0; mm < J; ++mm)
                if (mm != j) flow += std::imag(m.tunneling(mm, j) * znew(j, mm));
            nstar(j) = m.gamma_up(j) / m.gamma + 2.0 * flow / m.gamma;
        }
        const RealVector n1 = (1.0 - cfg.alpha) * cur.n + cfg.alpha * nstar;

        const double dn_sum = (n1 - cur.n).cwiseAbs().sum();
        const double dz_max = (znew - cur.z).cwiseAbs().maxCoeff();
        cur.n = n1;
        cur.z = znew;
        res.iterations = it;

        if (dn_sum < cfg.tol && dz_max < cfg.tol) {
            const Matrix sigma = join(cur);
            const double r = residual(m, sigma);
            if (r < cfg.tol || dn_sum + dz_max == 0.0) {
                res.state = sigma;
                res.residual = r;
                res.converged = r < cfg.tol;
                return res;
            }
        }
        if (!cur.n.allFinite() || !cur.z.allFinite()) break;
    }
    res.state = join(cur);
    res.residual = cur.n.allFinite() && cur.z.allFinite() ? residual(m, res.state)
                                                          : std::nan("");
    res.converged = false;
    return res;
}

SteadyStateResult solve_linear_ec0(const NetworkModel& m) {
    if (m.capacitance.cwiseAbs().maxCoeff() != 0.0)
        throw std::invalid_argument("solve_linear_ec0: model has nonzero capacitance");

    const int J = m.n_modes;
    const int npairs = J * (J - 1) / 2;
    const int dim = J + 2 * npairs;
    auto re_idx = [&](int p) { return J + 2 * p; };
    auto im_idx = [&](int p) { return J + 2 * p + 1; };
    std::vector<std::vector<int>> pair_of(J, std::vector<int>(J, -1));
    {
        int p = 0;
        for (int j = 0; j < J; ++j)
            for (int k = j + 1; k < J; ++k) pair_of[j][k] = pair_of[k][j] = p++;
    }
    // unknowns x = [n_0..n_{J-1}, Re z_p, Im z_p ...] with z_p = z_{jk}, j<k
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);

    // gamma n_j - 2 sum_m Im(t_mj z_jm) = gamma_up_j
    for (int j = 0; j < J; ++j) {
        A(j, j) = m.gamma;
        b(j) = m.gamma_up(j);
        for (int mm = 0; mm < J; ++mm) {
            if (mm == j) continue;
            const Complex t = m.tunneling(mm, j);
            const int p = pair_of[j][mm];
            // z_jm = Re +/- i Im depending on orientation of the stored pair
            const double sgn = (j < mm) ? 1.0 : -1.0;
            // Im(t z_jm) = Re t * Im z_jm + Im t * Re z_jm
            A(j, re_idx(p)) += -2.0 * t.imag();
            A(j, im_idx(p)) += -2.0 * t.real() * sgn;
        }
    }
    // (i gamma + d_eps) z_jk - t_jk (n_j - n_k) - sum_m (t_mk z_jm - t_jm z_mk) = 0
    for (int j = 0; j < J; ++j) {
        for (int k = j + 1; k < J; ++k) {
            const int p = pair_of[j][k];
            const int row_re = re_idx(p), row_im = im_idx(p);
            const double deps = m.epsilon(j) - m.epsilon(k);
            // (i gamma + deps)(Re + i Im) -> real: deps*Re - gamma*Im
            //                                imag: gamma*Re + deps*Im
            A(row_re, re_idx(p)) += deps;
            A(row_re, im_idx(p)) += -m.gamma;
            A(row_im, re_idx(p)) += m.gamma;
            A(row_im, im_idx(p)) += deps;

            const Complex tjk = m.tunneling(j, k);
            A(row_re, j) -= tjk.real();
            A(row_re, k) += tjk.real();
            A(row_im, j) -= tjk.imag();
            A(row_im, k) += tjk.imag();

            for (int mm = 0; mm < J; ++mm) {
                if (mm == j || mm == k) continue;
                // -(t_mk z_jm) term
                {
                    const Complex t = m.tunneling(mm, k);
                    const int q = pair_of[j][mm];
                    const double sgn = (j < mm) ? 1.0 : -1.0;  // Im part sign
                    // t*(Re + i sgn Im): real = ReT*Re - sgn ImT*Im... careful:
                    // z_jm = R + i*sgn*I where (R, I) are the stored unknowns.
                    // t*z_jm real = ReT*R - ImT*sgn*I ; imag = ImT*R + ReT*sgn*I
                    A(row_re, re_idx(q)) -= t.real();
                    A(row_re, im_idx(q)) -= -t.imag() * sgn;
                    A(row_im, re_idx(q)) -= t.imag();
                    A(row_im, im_idx(q)) -= t.real() * sgn;
                }
                // +(t_jm z_mk) term
                {
                    const Complex t = m.tunneling(j, mm);
                    const int q = pair_of[mm][k];
                    const double sgn = (mm < k) ? 1.0 : -1.0;
                    A(row_re, re_idx(q)) += t.real();
                    A(row_re, im_idx(q)) += -t.imag() * sgn;
                    A(row_im, re_idx(q)) += t.imag();
                    A(row_im, im_idx(q)) += t.real() * sgn;
                }
            }
        }
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
        throw std::runtime_error("solve_linear_ec0: singular steady-state system");
    const Eigen::VectorXd x = lu.solve(b);

    Matrix sigma = Matrix::Zero(J, J);
    for (int j = 0; j < J; ++j) sigma(j, j) = Complex(x(j), 0.0);
    for (int j = 0; j < J; ++j)
        for (int k = j + 1; k < J; ++k) {
            const int p = pair_of[j][k];
            sigma(j, k) = Complex(x(re_idx(p)), x(im_idx(p)));
            sigma(k, j) = std::conj(sigma(j, k));
        }

    SteadyStateResult res;
    res.state = sigma;
    res.residual = residual(m, sigma);
    res.iterations = 1;
    res.converged = true;
    res.method = SteadyMethod::linear_ec0;
    return res;
}

MultiStartReport multi_start(const NetworkModel& m, int n_starts,
                             std::uint64_t base_seed, const FixedPointConfig& cfg) {
    if (n_starts < 2) throw std::invalid_argument("multi_start: n_starts must be >= 2");
    MultiStartReport rep;
    rep.n_starts = n_starts;
    for (int i = 0; i < n_starts; ++i) {
        FixedPointConfig c = cfg;
        c.random_init = true;
        c.seed = base_seed + static_cast<std::uint64_t>(i);
        rep.runs.push_back(fixed_point_iterate(m, c));
        if (rep.runs.back().converged) ++rep.n_converged;
    }
    for (std::size_t a = 0; a < rep.runs.size(); ++a) {
        if (!rep.runs[a].converged) continue;
        for (std::size_t o = a + 1; o < rep.runs.size(); ++o) {
            if (!rep.runs[o].converged) continue;
            const Matrix diff = rep.runs[a].state - rep.runs[o].state;
            rep.max_pairwise_distance =
                std::max(rep.max_pairwise_distance, diff.cwiseAbs().maxCoeff());
            rep.max_population_distance = std::max(
                rep.max_population_distance,
                diff.diagonal().cwiseAbs().maxCoeff());
        }
    }
    return rep;
}

}  // namespace jjp
