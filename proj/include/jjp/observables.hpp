#pragma once

#include "jjp/model.hpp"

namespace jjp {

/// Terminal currents. Sign convention: I_j > 0 is net flow from bath j into
/// the network, I_j = -gamma n_j + gamma_up_j.
struct CurrentReport {
    RealVector per_terminal;
    double pump = 0.0;                 // I_D - I_U = -gamma (n_D - n_U)
    double conservation_defect = 0.0;  // sum_j I_j
};

double terminal_current(const NetworkModel& m, const Matrix& sigma, int j);

/// Pumped current through the unbiased D-U branch. Requires labels D and U.
double pump_current(const NetworkModel& m, const Matrix& sigma);

CurrentReport current_report(const NetworkModel& m, const Matrix& sigma);

}  // namespace jjp
