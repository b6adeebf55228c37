#include "jjp/sweep.hpp"

#include <atomic>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "jjp/observables.hpp"
#include "jjp/version.hpp"

namespace jjp {

std::string to_string(PumpGeometry g) {
    return g == PumpGeometry::symmetric ? "symmetric" : "asymmetric";
}

double AxisSpec::at(int i) const {
    if (count <= 1) return min;
    return min + (max - min) * double(i) / double(count - 1);
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::string format_g17(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v,
                                   std::chars_format::general, 17);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("JJPUMP_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace {

NetworkModel build_geometry(PumpGeometry g, const PumpParams& p) {
    return g == PumpGeometry::symmetric ? build_symmetric_pump(p)
                                        : build_asymmetric_pump(p);
}

SweepRecord solve_point(const NetworkModel& m, const SweepSpec& spec,
                        const Matrix* warm, Matrix* state_out) {
    SweepRecord rec;
    SteadyStateResult r;
    switch (spec.method) {
        case SteadyMethod::linear_ec0:
            r = solve_linear_ec0(m);
            break;
        case SteadyMethod::ode_relax:
            r = relax_to_steady(m, warm ? *warm : equilibrium_state(m),
                                spec.solver.tol);
            break;
        case SteadyMethod::fixed_point: {
            FixedPointConfig cfg = spec.solver;
            cfg.seed = spec.seed;
            if (warm)
                r = fixed_point_iterate(m, cfg, *warm);
            else
                r = fixed_point_iterate(m, cfg);
            break;
        }
    }
    if (state_out) *state_out = r.state;
    const auto cur = current_report(m, r.state);
    rec.I_pump = cur.pump;
    rec.I_L = cur.per_terminal(kModeL);
    rec.I_D = cur.per_terminal(kModeD);
    rec.I_R = cur.per_terminal(kModeR);
    rec.I_U = cur.per_terminal(kModeU);
    rec.n_L = r.state(kModeL, kModeL).real();
    rec.n_D = r.state(kModeD, kModeD).real();
    rec.n_R = r.state(kModeR, kModeR).real();
    rec.n_U = r.state(kModeU, kModeU).real();
    rec.converged = r.converged;
    rec.iterations = r.iterations;
    rec.method = r.method;
    return rec;
}

std::vector<std::string> sweep_provenance(const SweepSpec& spec) {
    const NetworkModel base = build_geometry(spec.geometry, spec.base);
    std::vector<std::string> prov;
    std::ostringstream os;
    os << "jjpump " << kVersion;
    prov.push_back(os.str());
    os.str("");
    os << "geometry: " << to_string(spec.geometry) << "  model_hash: " << std::hex
       << model_hash(base) << std::dec;
    prov.push_back(os.str());
    os.str("");
    os << "K: " << format_g17(spec.base.K) << "  Ec: " << format_g17(spec.base.Ec)
       << "  gamma_up: " << format_g17(spec.base.gamma_up_base)
       << "  gamma: " << format_g17(spec.base.gamma);
    prov.push_back(os.str());
    os.str("");
    os << "flux axis: [" << format_g17(spec.flux.min) << ", " << format_g17(spec.flux.max)
       << "] x " << spec.flux.count << "  bias axis: [" << format_g17(spec.bias.min)
       << ", " << format_g17(spec.bias.max) << "] x " << spec.bias.count;
    prov.push_back(os.str());
    os.str("");
    os << "method: " << to_string(spec.method) << "  tol: " << format_g17(spec.solver.tol)
       << "  alpha: " << format_g17(spec.solver.alpha) << "  seed: " << spec.seed;
    prov.push_back(os.str());
    return prov;
}

}  // namespace

const SweepRecord& SweepResult::at(int flux_idx, int bias_idx) const {
    return records.at(static_cast<std::size_t>(flux_idx) * spec.bias.count + bias_idx);
}

SweepResult run_sweep(const SweepSpec& spec) {
    if (spec.flux.count < 1 || spec.bias.count < 1)
        throw std::invalid_argument("run_sweep: axis counts must be >= 1");
    if (spec.method == SteadyMethod::linear_ec0 && spec.base.Ec != 0.0)
        throw std::invalid_argument("run_sweep: linear_ec0 requires Ec = 0");

    SweepResult result;
    result.spec = spec;
    result.provenance = sweep_provenance(spec);
    const long total = long(spec.flux.count) * spec.bias.count;
    result.records.resize(total);

    auto solve_index = [&](long idx, const Matrix* warm, Matrix* state_out) {
        const int fi = static_cast<int>(idx / spec.bias.count);
        const int bi = static_cast<int>(idx % spec.bias.count);
        PumpParams p = spec.base;
        p.flux_ratio = spec.flux.at(fi);
        p.bias = spec.bias.at(bi);
        SweepRecord rec;
        try {
            const NetworkModel m = build_geometry(spec.geometry, p);
            rec = solve_point(m, spec, warm, state_out);
        } catch (const std::exception&) {
            rec.converged = false;  // per-point failure, flagged not thrown
            rec.method = spec.method;
        }
        rec.flux_ratio = p.flux_ratio;
        rec.bias = p.bias;
        result.records[idx] = rec;
    };

    if (spec.warm_start) {
        // serial row-major pass, reusing the previous state within each row
        Matrix prev;
        for (long idx = 0; idx < total; ++idx) {
            const bool fresh = idx % spec.bias.count == 0;
            solve_index(idx, fresh || prev.size() == 0 ? nullptr : &prev, &prev);
        }
        return result;
    }

    const int n_threads = std::min<long>(resolve_threads(spec.threads), total);
    if (n_threads <= 1) {
        for (long idx = 0; idx < total; ++idx) solve_index(idx, nullptr, nullptr);
        return result;
    }
    std::atomic<long> next(0);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n_threads);
    for (int w = 0; w < n_threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (long idx = next.fetch_add(1); idx < total; idx = next.fetch_add(1))
                    solve_index(idx, nullptr, nullptr);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return result;
}

CapacitanceScanResult scan_capacitance(PumpGeometry geometry,
                                       const std::vector<double>& Ec_list,
                                       const std::vector<double>& K_list,
                                       double bias,
                                       const std::vector<double>& flux_grid,
                                       const PumpParams& base, int threads,
                                       const FixedPointConfig& solver) {
    if (flux_grid.empty())
        throw std::invalid_argument("scan_capacitance: empty flux grid");
    CapacitanceScanResult out;
    {
        std::ostringstream os;
        os << "jjpump " << kVersion << "  capacitance scan  geometry: "
           << to_string(geometry) << "  bias: " << format_g17(bias)
           << "  flux points: " << flux_grid.size();
        out.provenance.push_back(os.str());
    }
    struct Task {
        double Ec, K;
    };
    std::vector<Task> tasks;
    for (double ec : Ec_list)
        for (double k : K_list) tasks.push_back({ec, k});
    out.records.resize(tasks.size());

    auto run_task = [&](std::size_t ti) {
        const Task t = tasks[ti];
        CapacitanceScanRecord rec;
        rec.Ec = t.Ec;
        rec.K = t.K;
        for (double f : flux_grid) {
            PumpParams p = base;
            p.K = t.K;
            p.Ec = t.Ec;
            p.bias = bias;
            p.flux_ratio = f;
            const NetworkModel m = geometry == PumpGeometry::symmetric
                                       ? build_symmetric_pump(p)
                                       : build_asymmetric_pump(p);
            const auto r = fixed_point_iterate(m, solver);
            if (!r.converged) rec.all_converged = false;
            const double ip = std::abs(pump_current(m, r.state));
            if (ip > rec.max_abs_pump) {
                rec.max_abs_pump = ip;
                rec.argmax_flux = f;
            }
        }
        out.records[ti] = rec;
    };

    const int n_threads =
        std::min<std::size_t>(resolve_threads(threads), tasks.size());
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
    } else {
        std::atomic<std::size_t> next(0);
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(n_threads);
        for (int w = 0; w < n_threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = next.fetch_add(1); i < tasks.size();
                         i = next.fetch_add(1))
                        run_task(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }
    return out;
}

void write_csv(const SweepResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& line : result.provenance) out << "# " << line << '\n';
    out << "flux_ratio,bias,I_pump,I_L,I_D,I_R,I_U,n_L,n_D,n_R,n_U,converged,"
           "iterations,method\n";
    for (const auto& r : result.records) {
        out << format_g17(r.flux_ratio) << ',' << format_g17(r.bias) << ','
            << format_g17(r.I_pump) << ',' << format_g17(r.I_L) << ','
            << format_g17(r.I_D) << ',' << format_g17(r.I_R) << ','
            << format_g17(r.I_U) << ',' << format_g17(r.n_L) << ','
            << format_g17(r.n_D) << ',' << format_g17(r.n_R) << ','
            << format_g17(r.n_U) << ',' << (r.converged ? 1 : 0) << ','
            << r.iterations << ',' << to_string(r.method) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_csv(const CapacitanceScanResult& result, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& line : result.provenance) out << "# " << line << '\n';
    out << "Ec,K,max_abs_I_pump,argmax_flux,all_converged\n";
    for (const auto& r : result.records)
        out << format_g17(r.Ec) << ',' << format_g17(r.K) << ','
            << format_g17(r.max_abs_pump) << ',' << format_g17(r.argmax_flux) << ','
            << (r.all_converged ? 1 : 0) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

double record_quantity(const SweepRecord& r, const std::string& q) {
    if (q == "I_pump") return r.I_pump;
    if (q == "I_L") return r.I_L;
    if (q == "I_D") return r.I_D;
    if (q == "I_R") return r.I_R;
    if (q == "I_U") return r.I_U;
    if (q == "n_L") return r.n_L;
    if (q == "n_D") return r.n_D;
    if (q == "n_R") return r.n_R;
    if (q == "n_U") return r.n_U;
    throw std::invalid_argument("unknown heatmap quantity: " + q);
}

// diverging blue-white-red map on [-1, 1]
std::string diverging_color(double v) {
    v = std::clamp(v, -1.0, 1.0);
    int r, g, b;
    if (v < 0) {
        const double s = 1.0 + v;  // 0 at -1, 1 at 0
        r = static_cast<int>(33 + (255 - 33) * s);
        g = static_cast<int>(102 + (255 - 102) * s);
        b = static_cast<int>(172 + (255 - 172) * s);
    } else {
        const double s = 1.0 - v;
        r = static_cast<int>(178 + (255 - 178) * s);
        g = static_cast<int>(24 + (255 - 24) * s);
        b = static_cast<int>(43 + (255 - 43) * s);
    }
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

}  // namespace

void render_heatmap_svg(const SweepResult& result, const std::string& quantity,
                        const std::string& path, const HeatmapOptions& opts) {
    const int nf = result.spec.flux.count;
    const int nb = result.spec.bias.count;
    double vmax = 0.0;
    for (const auto& r : result.records)
        vmax = std::max(vmax, std::abs(record_quantity(r, quantity)));
    if (vmax == 0.0) vmax = 1.0;  // all-zero grid renders mid-color

    const int cell = std::max(2, opts.cell_px);
    const int margin_l = 70, margin_b = 50, margin_t = 30, margin_r = 90;
    const int W = margin_l + nf * cell + margin_r;
    const int H = margin_t + nb * cell + margin_b;

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
        << "<defs><pattern id=\"hatch\" width=\"4\" height=\"4\" "
           "patternUnits=\"userSpaceOnUse\" patternTransform=\"rotate(45)\">"
           "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"4\" stroke=\"#555\" "
           "stroke-width=\"1.5\"/></pattern></defs>\n"
        << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    if (!opts.title.empty())
        svg << "<text x=\"" << margin_l << "\" y=\"20\" font-family=\"sans-serif\" "
            << "font-size=\"13\">" << opts.title << "</text>\n";

    for (int fi = 0; fi < nf; ++fi) {
        for (int bi = 0; bi < nb; ++bi) {
            const auto& r = result.at(fi, bi);
            const double v = record_quantity(r, quantity) / vmax;
            const int x = margin_l + fi * cell;
            // bias increases upward
            const int y = margin_t + (nb - 1 - bi) * cell;
            svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell
                << "\" height=\"" << cell << "\" fill=\"" << diverging_color(v)
                << "\"/>";
            if (!r.converged)
                svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell
                    << "\" height=\"" << cell << "\" fill=\"url(#hatch)\"/>";
            svg << '\n';
        }
    }

    // axes labels and ticks (ends only)
    const int plot_bottom = margin_t + nb * cell;
    svg << "<text x=\"" << margin_l + nf * cell / 2
        << "\" y=\"" << plot_bottom + 35
        << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">"
           "&#x3A6;/&#x3A6;&#x2080;</text>\n";
    svg << "<text x=\"18\" y=\"" << margin_t + nb * cell / 2
        << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
           "transform=\"rotate(-90 18 "
        << margin_t + nb * cell / 2 << ")\">&#x393;/&#x3B3;</text>\n";
    auto tick = [&](double x, double y, double val, bool xaxis) {
        svg << "<text x=\"" << x << "\" y=\"" << y
            << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\""
            << (xaxis ? "middle" : "end") << "\">" << format_g17(val).substr(0, 6)
            << "</text>\n";
    };
    tick(margin_l, plot_bottom + 14, result.spec.flux.min, true);
    tick(margin_l + nf * cell, plot_bottom + 14, result.spec.flux.max, true);
    tick(margin_l - 6, plot_bottom, result.spec.bias.min, false);
    tick(margin_l - 6, margin_t + 10, result.spec.bias.max, false);

    // colorbar
    const int cb_x = margin_l + nf * cell + 20, cb_w = 14;
    const int cb_h = nb * cell;
    const int steps = 64;
    for (int s = 0; s < steps; ++s) {
        const double v = 1.0 - 2.0 * s / double(steps - 1);
        const int y = margin_t + s * cb_h / steps;
        svg << "<rect x=\"" << cb_x << "\" y=\"" << y << "\" width=\"" << cb_w
            << "\" height=\"" << (cb_h + steps - 1) / steps + 1 << "\" fill=\""
            << diverging_color(v) << "\"/>\n";
    }
    svg << "<text x=\"" << cb_x + cb_w + 4 << "\" y=\"" << margin_t + 10
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << format_g17(vmax).substr(0, 8)
        << "</text>\n";
    svg << "<text x=\"" << cb_x + cb_w + 4 << "\" y=\"" << margin_t + cb_h
        << "\" font-family=\"sans-serif\" font-size=\"10\">-" << format_g17(vmax).substr(0, 8)
        << "</text>\n";
    svg << "<text x=\"" << cb_x << "\" y=\"" << margin_t - 8
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << quantity << "</text>\n";
    svg << "</svg>\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << svg.str();
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace jjp
