#include "jjp/oracle.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "jjp/dynamics.hpp"
#include "jjp/rk45.hpp"
#include "jjp/sweep.hpp"  // format_g17

namespace jjp {

namespace {

constexpr long kDimGuard = 4096;

long int_pow(long base, int exp) {
    long v = 1;
    for (int i = 0; i < exp; ++i) {
        v *= base;
        if (v > kDimGuard) return v;  // caller checks
    }
    return v;
}

}  // namespace

int FockOperatorSet::occupation(long index, int j) const {
    // mode 0 is the slowest (leftmost Kronecker factor)
    long stride = 1;
    for (int s = j + 1; s < n_modes; ++s) stride *= cutoff + 1;
    return static_cast<int>((index / stride) % (cutoff + 1));
}

FockOperatorSet build_fock_operators(int n_modes, int cutoff) {
    if (n_modes <= 0 || cutoff <= 0)
        throw std::invalid_argument("fock: n_modes and cutoff must be positive");
    const long dim = int_pow(cutoff + 1, n_modes);
    if (dim > kDimGuard) {
        std::ostringstream os;
        os << "fock: dimension (cutoff+1)^J = " << dim << " exceeds guard "
           << kDimGuard;
        throw std::invalid_argument(os.str());
    }

    FockOperatorSet ops;
    ops.n_modes = n_modes;
    ops.cutoff = cutoff;
    ops.dim = dim;

    const int d = cutoff + 1;
    for (int j = 0; j < n_modes; ++j) {
        SparseMatrix a(dim, dim);
        std::vector<Eigen::Triplet<Complex>> trip;
        trip.reserve(static_cast<std::size_t>(dim));
        for (long col = 0; col < dim; ++col) {
            const int occ = ops.occupation(col, j);
            if (occ == 0) continue;
            long stride = 1;
            for (int s = j + 1; s < n_modes; ++s) stride *= d;
            const long row = col - stride;  // occ -> occ-1
            trip.emplace_back(row, col, Complex(std::sqrt(double(occ)), 0.0));
        }
        a.setFromTriplets(trip.begin(), trip.end());
        ops.a.push_back(a);
        ops.a_dag.push_back(SparseMatrix(a.adjoint()));
        ops.number.push_back(SparseMatrix((ops.a_dag.back() * a).pruned()));
        ops.a_adag.push_back(SparseMatrix((a * ops.a_dag.back()).pruned()));
    }
    return ops;
}

SparseMatrix hamiltonian_matrix(const NetworkModel& m, const FockOperatorSet& ops) {
    if (m.n_modes != ops.n_modes)
        throw std::invalid_argument("hamiltonian_matrix: mode count mismatch");
    SparseMatrix H(ops.dim, ops.dim);
    for (int j = 0; j < m.n_modes; ++j)
        if (m.epsilon(j) != 0.0)
            H = H + SparseMatrix(Complex(m.epsilon(j), 0.0) * ops.number[j]);
    for (int j = 0; j < m.n_modes; ++j)
        for (int k = 0; k < m.n_modes; ++k) {
            if (j == k || m.tunneling(j, k) == Complex(0, 0)) continue;
            // tunneling(j,k) is the coefficient of a^dag_k a_j
            H = H + SparseMatrix(m.tunneling(j, k) * (ops.a_dag[k] * ops.a[j]));
        }
    for (int j = 0; j < m.n_modes; ++j)
        for (int k = j + 1; k < m.n_modes; ++k) {
            if (m.capacitance(j, k) == 0.0) continue;
            SparseMatrix dn = ops.number[j] - ops.number[k];
            H = H + SparseMatrix(Complex(m.capacitance(j, k), 0.0) * (dn * dn));
        }
    H.makeCompressed();
    return H;
}

namespace {

// drho/dt = G rho + (G rho)^dag + sum_j (gdn_j a_j rho a_j^dag
//                                        + gup_j a_j^dag rho a_j)
// for hermitian rho, with G = -iH - (1/2) sum_j (gdn_j n_j + gup_j a_j a_j^dag).
//
// Every operator here is a strided shift-scale in the Fock product basis, so
// the whole right-hand side is applied in a handful of contiguous passes
// instead of generic sparse products. G is decomposed once into its complex
// diagonal plus off-diagonal groups of constant offset: (G rho)(r, c) =
// gdiag(r) rho(r, c) + sum_groups w(r) rho(r + offset, c).
struct LindbladApplier {
    std::uint64_t key = 0;
    Eigen::VectorXcd gdiag;
    struct OffsetGroup {
        long offset = 0;
        Eigen::VectorXcd w;  // w(r) = G(r, r + offset)
    };
    std::vector<OffsetGroup> groups;
    struct Jump {
        long stride = 0;
        double rate = 0.0;
        bool lowering = true;    // a rho a^dag if true, a^dag rho a otherwise
        Eigen::VectorXd w;       // sqrt factors indexed by basis state, zero
                                 // where the ladder annihilates
    };
    std::vector<Jump> jumps;
    Matrix t1;

    void refresh(const NetworkModel& m, const FockOperatorSet& ops) {
        const std::uint64_t want = model_hash(m) ^ (std::uint64_t(ops.dim) << 1);
        if (key == want) return;
        SparseMatrix G = hamiltonian_matrix(m, ops);
        G = SparseMatrix(Complex(0, -1) * G);
        for (int j = 0; j < m.n_modes; ++j) {
            const double gdn = m.gamma + m.gamma_up(j);
            const double gup = m.gamma_up(j);
            G = G + SparseMatrix(Complex(-0.5 * gdn, 0.0) * ops.number[j]);
            if (gup != 0.0)
                G = G + SparseMatrix(Complex(-0.5 * gup, 0.0) * ops.a_adag[j]);
        }
        G.makeCompressed();

        const long dim = ops.dim;
        gdiag = Eigen::VectorXcd::Zero(dim);
        std::map<long, Eigen::VectorXcd> by_offset;
        for (int outer = 0; outer < G.outerSize(); ++outer)
            for (SparseMatrix::InnerIterator it(G, outer); it; ++it) {
                const long r = it.row(), c = it.col();
                if (r == c) {
                    gdiag(r) += it.value();
                } else {
                    auto& w = by_offset[c - r];
                    if (w.size() == 0) w = Eigen::VectorXcd::Zero(dim);
                    w(r) += it.value();
                }
            }
        groups.clear();
        for (auto& [offset, w] : by_offset) groups.push_back({offset, std::move(w)});

        jumps.clear();
        for (int j = 0; j < m.n_modes; ++j) {
            long stride = 1;
            for (int s = j + 1; s < m.n_modes; ++s) stride *= ops.cutoff + 1;
            const double gdn = m.gamma + m.gamma_up(j);
            const double gup = m.gamma_up(j);
            Eigen::VectorXd lower(dim), raise(dim);
            for (long i = 0; i < dim; ++i) {
                const int occ = ops.occupation(i, j);
                lower(i) = occ < ops.cutoff ? std::sqrt(double(occ + 1)) : 0.0;
                raise(i) = std::sqrt(double(occ));
            }
            jumps.push_back({stride, gdn, true, lower});
            if (gup != 0.0) jumps.push_back({stride, gup, false, raise});
        }
        key = want;
    }

    void apply(const NetworkModel& m, const FockOperatorSet& ops, const Matrix& rho,
               Matrix& out) {
        refresh(m, ops);
        const long dim = ops.dim;
        t1.resize(dim, dim);
        out.resize(dim, dim);

        // t1 = G rho, column by column
        for (long c = 0; c < dim; ++c) {
            auto dst = t1.col(c);
            const auto src = rho.col(c);
            dst.array() = gdiag.array() * src.array();
            for (const auto& g : groups) {
                const long lo = std::max(0L, -g.offset);
                const long hi = std::min(dim, dim - g.offset);
                dst.segment(lo, hi - lo).array() +=
                    g.w.segment(lo, hi - lo).array() *
                    src.segment(lo + g.offset, hi - lo).array();
            }
        }
        out.noalias() = t1 + t1.adjoint();

        for (const auto& jmp : jumps) {
            const long s = jmp.stride;
            if (jmp.lowering) {
                // out(r,c) += rate * w(r) w(c) rho(r+s, c+s)
                for (long c = 0; c + s < dim; ++c) {
                    const double wc = jmp.rate * jmp.w(c);
                    if (wc == 0.0) continue;
                    out.col(c).head(dim - s).array() +=
                        wc * jmp.w.head(dim - s).array() *
                        rho.col(c + s).tail(dim - s).array();
                }
            } else {
                // out(r,c) += rate * w(r) w(c) rho(r-s, c-s)
                for (long c = s; c < dim; ++c) {
                    const double wc = jmp.rate * jmp.w(c);
                    if (wc == 0.0) continue;
                    out.col(c).tail(dim - s).array() +=
                        wc * jmp.w.tail(dim - s).array() *
                        rho.col(c - s).head(dim - s).array();
                }
            }
        }
    }
};

thread_local LindbladApplier g_applier;

}  // namespace

Matrix lindblad_derivative(const NetworkModel& m, const Matrix& rho,
                           const FockOperatorSet& ops) {
    if (rho.rows() != ops.dim || rho.cols() != ops.dim)
        throw std::invalid_argument("lindblad_derivative: dimension mismatch");
    mdm::require_hermitian(rho);  // the fused kernel assumes rho = rho^dag
    Matrix out;
    g_applier.apply(m, ops, rho, out);
    return out;
}

Matrix mdm_of(const Matrix& rho, const FockOperatorSet& ops) {
    const int J = ops.n_modes;
    Matrix sigma(J, J);
    for (int j = 0; j < J; ++j)
        for (int k = 0; k < J; ++k) {
            // Tr(a^dag_j a_k rho) = sum over nonzeros of (a^dag_j a_k)
            const SparseMatrix op = SparseMatrix(ops.a_dag[j] * ops.a[k]);
            Complex tr(0, 0);
            for (int outer = 0; outer < op.outerSize(); ++outer)
                for (SparseMatrix::InnerIterator it(op, outer); it; ++it)
                    tr += it.value() * rho(it.col(), it.row());
            sigma(j, k) = tr;
        }
    return sigma;
}

double top_layer_population(const Matrix& rho, const FockOperatorSet& ops) {
    double total = 0.0;
    for (long i = 0; i < ops.dim; ++i) {
        for (int j = 0; j < ops.n_modes; ++j) {
            if (ops.occupation(i, j) == ops.cutoff) {
                total += rho(i, i).real();
                break;
            }
        }
    }
    return total;
}

ExactTrajectory evolve_exact(const NetworkModel& m, const Matrix& rho0,
                             const FockOperatorSet& ops,
                             const std::vector<double>& sample_times,
                             double rel_tol) {
    if (rho0.rows() != ops.dim || rho0.cols() != ops.dim)
        throw std::invalid_argument("evolve_exact: rho dimension mismatch");
    ExactTrajectory traj;
    Matrix rho = rho0;
    mdm::resymmetrize(rho);

    Rk45Options rk;
    rk.rel_tol = rel_tol;
    rk.abs_tol = 1e-13;
    rk.initial_step = 1e-3 / m.gamma;

    Rk45Callbacks cb;
    cb.project = [](Matrix& r) { mdm::resymmetrize(r); };

    auto f = [&](const Matrix& r, Matrix& dr) { g_applier.apply(m, ops, r, dr); };
    const double t_end = sample_times.empty() ? 0.0 : sample_times.back();

    auto record = [&](double t, const Matrix& r, double) {
        ExactSample s;
        s.time = t;
        s.sigma = mdm_of(r, ops);
        s.top_layer = top_layer_population(r, ops);
        traj.max_top_layer = std::max(traj.max_top_layer, s.top_layer);
        traj.trace_defect =
            std::max(traj.trace_defect, std::abs(r.trace().real() - 1.0) +
                                            std::abs(r.trace().imag()));
        traj.samples.push_back(std::move(s));
    };
    rk45_integrate(f, rho, 0.0, t_end, rk, cb, sample_times, record);
    traj.final_rho = rho;
    traj.truncation_leak = traj.max_top_layer > 1e-6;
    return traj;
}

std::string DeviationReport::to_json() const {
    std::ostringstream os;
    os << "{\"max_dev\": " << format_g17(max_dev)
       << ", \"final_dev\": " << format_g17(final_dev)
       << ", \"max_covariance\": " << format_g17(max_covariance)
       << ", \"truncation_leak\": " << (truncation_leak ? "true" : "false")
       << ", \"max_top_layer\": " << format_g17(max_top_layer)
       << ", \"params\": {\"cutoff\": " << cutoff << ", \"t_end\": " << format_g17(t_end)
       << "}}";
    return os.str();
}

DeviationReport compare_meanfield(const NetworkModel& m, double t_end, int cutoff,
                                  double rel_tol, int n_samples) {
    FockOperatorSet ops = build_fock_operators(m.n_modes, cutoff);
    std::vector<double> ts(n_samples);
    for (int i = 0; i < n_samples; ++i) ts[i] = t_end * i / double(n_samples - 1);

    Matrix rho0 = Matrix::Zero(ops.dim, ops.dim);
    rho0(0, 0) = Complex(1, 0);  // vacuum
    ExactTrajectory exact = evolve_exact(m, rho0, ops, ts, rel_tol);

    EvolveOptions mf_opts;
    mf_opts.rel_tol = std::min(rel_tol, 1e-10);
    mf_opts.abs_tol = 1e-13;
    mf_opts.sample_times = ts;
    auto mf = evolve(m, Matrix::Zero(m.n_modes, m.n_modes), t_end, mf_opts);

    DeviationReport rep;
    rep.cutoff = cutoff;
    rep.t_end = t_end;
    rep.truncation_leak = exact.truncation_leak;
    rep.max_top_layer = exact.max_top_layer;
    const std::size_t n = std::min(exact.samples.size(), mf.size());
    for (std::size_t i = 0; i < n; ++i) {
        const double dev =
            (exact.samples[i].sigma - mf[i].state).cwiseAbs().maxCoeff();
        rep.max_dev = std::max(rep.max_dev, dev);
        if (i + 1 == n) rep.final_dev = dev;
    }

    // covariance diagnostic at the final exact state:
    // Cov(a^dag_j a_k, a^dag_m a_n) = <a^dag_j a_k a^dag_m a_n> - sigma_jk sigma_mn
    {
        const Matrix& rho = exact.final_rho;
        const Matrix sigma = mdm_of(rho, ops);
        const int J = m.n_modes;
        for (int j = 0; j < J; ++j)
            for (int k = 0; k < J; ++k)
                for (int mm = 0; mm < J; ++mm)
                    for (int nn = 0; nn < J; ++nn) {
                        const Matrix op = Matrix(ops.a_dag[j] * ops.a[k]) *
                                          Matrix(ops.a_dag[mm] * ops.a[nn]);
                        const Complex four = (op * rho).trace();
                        const Complex cov = four - sigma(j, k) * sigma(mm, nn);
                        rep.max_covariance = std::max(rep.max_covariance, std::abs(cov));
                    }
    }
    return rep;
}

}  // namespace jjp
