#include "jjp/rk45.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace jjp {

namespace {

// Dormand-Prince 5(4) tableau. b is the 5th-order weights, e = b - b_hat the
// error weights. FSAL: k7 at one step is k1 of the next.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

// scaled RMS norm (Hairer-Norsett-Wanner II.4); a max norm over the many
// near-zero entries of a large density matrix would throttle the step size
double error_norm(const Matrix& err, const Matrix& y0, const Matrix& y1,
                  double rtol, double atol) {
    double acc = 0.0;
    for (Eigen::Index c = 0; c < err.cols(); ++c)
        for (Eigen::Index r = 0; r < err.rows(); ++r) {
            const double scale =
                atol + rtol * std::max(std::abs(y0(r, c)), std::abs(y1(r, c)));
            const double q = std::abs(err(r, c)) / scale;
            acc += q * q;
        }
    return std::sqrt(acc / double(err.size()));
}

[[noreturn]] void fail(const char* what, double t) {
    std::ostringstream os;
    os << "rk45: " << what << " at t = " << t;
    throw std::runtime_error(os.str());
}

}  // namespace

void rk45_integrate(const std::function<void(const Matrix&, Matrix&)>& f,
                    Matrix& y, double t0, double t_end, const Rk45Options& opts,
                    const Rk45Callbacks& cb, const std::vector<double>& sample_times,
                    const std::function<void(double, const Matrix&, double)>& on_sample) {
    double t = t0;
    std::size_t next_sample = 0;
    auto emit_samples_at = [&](double time, const Matrix& state, double h_used) {
        while (next_sample < sample_times.size() &&
               sample_times[next_sample] <= time + 1e-14 * std::max(1.0, std::abs(time))) {
            if (on_sample) on_sample(sample_times[next_sample], state, h_used);
            ++next_sample;
        }
    };
    emit_samples_at(t0, y, 0.0);
    if (t_end <= t0) return;

    Matrix k1(y.rows(), y.cols()), k2 = k1, k3 = k1, k4 = k1, k5 = k1, k6 = k1, k7 = k1;
    Matrix ytmp = y, ynew = y, err = y;

    f(y, k1);
    double h = opts.initial_step > 0 ? opts.initial_step : 1e-3;
    if (opts.max_step > 0) h = std::min(h, opts.max_step);
    h = std::min(h, t_end - t);
    bool have_k1 = true;

    while (t < t_end) {
        // land exactly on the next sample time and on t_end
        double limit = t_end;
        if (next_sample < sample_times.size())
            limit = std::min(limit, sample_times[next_sample]);
        if (limit - t <= 1e-14 * std::max(1.0, std::abs(limit))) {
            // within roundoff of the boundary; snap instead of micro-stepping
            t = limit;
            emit_samples_at(t, y, h);
            continue;
        }
        h = std::min(h, limit - t);
        if (h < opts.min_step) fail("step size underflow (stiffness?)", t);

        if (!have_k1) f(y, k1);
        ytmp = y + h * a21 * k1;
        f(ytmp, k2);
        ytmp = y + h * (a31 * k1 + a32 * k2);
        f(ytmp, k3);
        ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        f(ytmp, k4);
        ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        f(ytmp, k5);
        ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        f(ytmp, k6);
        ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        f(ynew, k7);
        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        if (!ynew.allFinite()) fail("non-finite state", t);
        const double en = error_norm(err, y, ynew, opts.rel_tol, opts.abs_tol);

        if (en <= 1.0) {
            t += h;
            y = ynew;
            if (cb.project) {
                cb.project(y);
                have_k1 = false;  // FSAL derivative is stale after projection
            } else {
                k1 = k7;
                have_k1 = true;
            }
            emit_samples_at(t, y, h);
            if (cb.on_accept && !cb.on_accept(t, y, h)) return;
        } else {
            have_k1 = true;  // k1 still matches y
        }

        const double factor =
            std::clamp(0.9 * std::pow(std::max(en, 1e-10), -0.2), 0.2, 5.0);
        h *= factor;
        if (opts.max_step > 0) h = std::min(h, opts.max_step);
    }
}

}  // namespace jjp
