#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace jjp {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Network of bosonic modes, each coupled to its own electron bath.
///
/// Conventions (hbar = 1, energies and rates in units of the common
/// relaxation rate gamma):
///   tunneling(j,k)  = t_jk = coefficient of a^dag_k a_j in H
///                     (the amplitude for a pair hopping j -> k);
///   capacitance(j,k) = charging energy of the j-k junction, symmetric,
///                     zero diagonal;
///   gamma_up(j)     = bath pair-creation rate of mode j;
///   gamma           = common relaxation rate gamma_down_j - gamma_up_j.
struct NetworkModel {
    int n_modes = 0;
    RealVector epsilon;
    Matrix tunneling;
    RealMatrix capacitance;
    RealVector gamma_up;
    double gamma = 1.0;
    std::vector<std::string> mode_labels;

    int label_index(const std::string& name) const;
    bool has_label(const std::string& name) const;
};

/// Magnetic flux through the outer loop, in units of the flux quantum.
struct FluxSpec {
    double flux_ratio = 0.0;
    double delta_phi() const;
};

/// Returns the loop phase delta_phi = 2*pi*(Phi/Phi0).
double flux_phase(double flux_ratio);

/// Parameters of the four-terminal pump geometries.
struct PumpParams {
    double K = 0.1;             // bare tunneling amplitude
    double Ec = 0.0;            // junction charging energy
    double gamma_up_base = 100.0;
    double bias = 0.0;          // creation-rate disequilibrium between L and R
    double flux_ratio = 0.0;    // Phi/Phi0
    double gamma = 1.0;
};

// Mode order used by both pump builders.
inline constexpr int kModeL = 0;
inline constexpr int kModeD = 1;
inline constexpr int kModeR = 2;
inline constexpr int kModeU = 3;

/// Four-terminal SQUID pump with the direct D-U junction.
/// Outer junctions carry phase delta_phi/4, the D-U junction delta_phi/2.
NetworkModel build_symmetric_pump(const PumpParams& p);

/// Same loop without the direct D-U junction (and no D-U capacitance).
NetworkModel build_asymmetric_pump(const PumpParams& p);

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
    std::string to_string() const;
};

/// Checks hermiticity of t, symmetry/positivity of c, and rate positivity.
ValidationReport validate(const NetworkModel& m);

/// Parse a model from a JSON document (see README for the schema).
/// Throws std::invalid_argument with a path-qualified message on schema or
/// invariant violations.
NetworkModel load_model(const std::string& json_text);
NetworkModel load_model_file(const std::string& path);

/// FNV-1a hash of the model contents; used for output provenance headers.
std::uint64_t model_hash(const NetworkModel& m);

}  // namespace jjp
