#pragma once

#include <vector>

#include <Eigen/SparseCore>

#include "jjp/model.hpp"

namespace jjp {

using SparseMatrix = Eigen::SparseMatrix<Complex>;

/// Truncated-Fock ladder operators for J modes with per-mode occupations
/// 0..cutoff, Kronecker-extended to the product space of dimension
/// (cutoff+1)^J. Guarded at dimension 4096.
struct FockOperatorSet {
    int n_modes = 0;
    int cutoff = 0;
    long dim = 0;
    std::vector<SparseMatrix> a;        // annihilation
    std::vector<SparseMatrix> a_dag;
    std::vector<SparseMatrix> number;   // a^dag a
    // a a^dag as a truncated-operator product. This differs from number + 1
    // on the top Fock layer, and using the product keeps the dissipator an
    // exact trace-preserving Lindblad form on the truncated space.
    std::vector<SparseMatrix> a_adag;

    /// Occupation of mode j in basis state |index>.
    int occupation(long index, int j) const;
};

FockOperatorSet build_fock_operators(int n_modes, int cutoff);

/// H = sum_j eps_j n_j + sum_{j!=k} t_jk a^dag_k a_j
///     + sum_{j<k} c_jk (n_j - n_k)^2
SparseMatrix hamiltonian_matrix(const NetworkModel& m, const FockOperatorSet& ops);

/// Full Lindblad right-hand side:
///   drho/dt = -i[H, rho]
///           + sum_j gdn_j (a_j rho a_j^dag - {a_j^dag a_j, rho}/2)
///           + sum_j gup_j (a_j^dag rho a_j - {a_j a_j^dag, rho}/2)
/// with gdn_j = gamma + gamma_up_j. Output is hermitian and traceless.
Matrix lindblad_derivative(const NetworkModel& m, const Matrix& rho,
                           const FockOperatorSet& ops);

/// Two-point matrix sigma_jk = Tr(a^dag_j a_k rho).
Matrix mdm_of(const Matrix& rho, const FockOperatorSet& ops);

/// Probability weight on basis states with any mode at the cutoff; the
/// truncation-leak monitor.
double top_layer_population(const Matrix& rho, const FockOperatorSet& ops);

struct ExactSample {
    double time = 0.0;
    Matrix sigma;            // exact two-point matrix at this time
    double top_layer = 0.0;
};

struct ExactTrajectory {
    std::vector<ExactSample> samples;
    Matrix final_rho;               // density matrix at the last sample time
    bool truncation_leak = false;   // top layer exceeded 1e-6 somewhere
    double max_top_layer = 0.0;
    double trace_defect = 0.0;      // max |Tr rho - 1| observed
};

/// Integrates the master equation from rho0 and records the exact two-point
/// matrix at the given sample times.
ExactTrajectory evolve_exact(const NetworkModel& m, const Matrix& rho0,
                             const FockOperatorSet& ops,
                             const std::vector<double>& sample_times,
                             double rel_tol = 1e-9);

struct DeviationReport {
    double max_dev = 0.0;       // max elementwise |sigma_exact - sigma_mf| over time
    double final_dev = 0.0;
    double max_covariance = 0.0;  // max |Cov(a^dag_j a_k, a^dag_m a_n)| at t_end
    bool truncation_leak = false;
    double max_top_layer = 0.0;
    int cutoff = 0;
    double t_end = 0.0;
    std::string to_json() const;
};

/// Runs the exact and mean-field integrators from matched initial states
/// (vacuum <-> sigma = 0) and reports the closure error.
DeviationReport compare_meanfield(const NetworkModel& m, double t_end, int cutoff,
                                  double rel_tol = 1e-9, int n_samples = 41);

}  // namespace jjp
