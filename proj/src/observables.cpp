#include "jjp/observables.hpp"

#include <stdexcept>

namespace jjp {

double terminal_current(const NetworkModel& m, const Matrix& sigma, int j) {
    if (j < 0 || j >= m.n_modes)
        throw std::out_of_range("terminal_current: mode index out of range");
    return -m.gamma * sigma(j, j).real() + m.gamma_up(j);
}

double pump_current(const NetworkModel& m, const Matrix& sigma) {
    const int d = m.label_index("D");
    const int u = m.label_index("U");
    return -m.gamma * (sigma(d, d).real() - sigma(u, u).real());
}

CurrentReport current_report(const NetworkModel& m, const Matrix& sigma) {
    CurrentReport rep;
    rep.per_terminal = RealVector(m.n_modes);
    double total = 0.0;
    for (int j = 0; j < m.n_modes; ++j) {
        rep.per_terminal(j) = terminal_current(m, sigma, j);
        total += rep.per_terminal(j);
    }
    rep.conservation_defect = total;
    if (m.has_label("D") && m.has_label("U")) rep.pump = pump_current(m, sigma);
    return rep;
}

}  // namespace jjp
