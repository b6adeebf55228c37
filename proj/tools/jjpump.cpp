#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "jjp/dynamics.hpp"
#include "jjp/model.hpp"
#include "jjp/observables.hpp"
#include "jjp/oracle.hpp"
#include "jjp/steady.hpp"
#include "jjp/sweep.hpp"
#include "jjp/version.hpp"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNoConverge = 2;

struct ModelFlags {
    std::string model_file;
    std::string geometry = "symmetric";
    double K = 0.1;
    double Ec = 0.0;
    double gamma_up = 100.0;
    double bias = 0.0;
    double flux = 0.0;
    double gamma = 1.0;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
    cmd->add_option("--model", f.model_file, "JSON model document (overrides geometry flags)");
    cmd->add_option("--geometry", f.geometry, "symmetric | asymmetric")
        ->check(CLI::IsMember({"symmetric", "asymmetric"}));
    cmd->add_option("--K", f.K, "bare tunneling amplitude");
    cmd->add_option("--Ec", f.Ec, "junction charging energy");
    cmd->add_option("--gamma-up", f.gamma_up, "baseline creation rate");
    cmd->add_option("--bias", f.bias, "creation-rate bias Gamma between L and R");
    cmd->add_option("--flux", f.flux, "magnetic flux Phi/Phi0");
    cmd->add_option("--gamma", f.gamma, "common relaxation rate (default 1)");
}

jjp::NetworkModel resolve_model(const ModelFlags& f) {
    if (!f.model_file.empty()) return jjp::load_model_file(f.model_file);
    jjp::PumpParams p;
    p.K = f.K;
    p.Ec = f.Ec;
    p.gamma_up_base = f.gamma_up;
    p.bias = f.bias;
    p.flux_ratio = f.flux;
    p.gamma = f.gamma;
    return f.geometry == "symmetric" ? jjp::build_symmetric_pump(p)
                                     : jjp::build_asymmetric_pump(p);
}

std::uint64_t file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string s = ss.str();
    return jjp::fnv1a64(s.data(), s.size());
}

json manifest(const std::string& subcommand, const ModelFlags& f,
              const jjp::NetworkModel& m, std::uint64_t seed) {
    json man;
    man["subcommand"] = subcommand;
    man["artifact_version"] = jjp::kVersion;
    man["seed"] = seed;
    man["timestamp_utc"] =
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(jjp::model_hash(m)));
    man["model_hash"] = hex;
    json params;
    if (!f.model_file.empty()) {
        params["model_file"] = f.model_file;
        std::snprintf(hex, sizeof hex, "%016llx",
                      static_cast<unsigned long long>(file_hash(f.model_file)));
        params["model_file_hash"] = hex;
    } else {
        params["geometry"] = f.geometry;
        params["K"] = f.K;
        params["Ec"] = f.Ec;
        params["gamma_up"] = f.gamma_up;
        params["bias"] = f.bias;
        params["flux_ratio"] = f.flux;
        params["gamma"] = f.gamma;
    }
    man["parameters"] = params;
    return man;
}

json state_json(const jjp::NetworkModel& m, const jjp::Matrix& sigma) {
    json out;
    json pops = json::array();
    for (int j = 0; j < m.n_modes; ++j) pops.push_back(sigma(j, j).real());
    out["populations"] = pops;
    json coh = json::array();
    for (int j = 0; j < m.n_modes; ++j)
        for (int k = j + 1; k < m.n_modes; ++k)
            coh.push_back({{"j", j},
                           {"k", k},
                           {"re", sigma(j, k).real()},
                           {"im", sigma(j, k).imag()}});
    out["coherences"] = coh;
    if (!m.mode_labels.empty()) out["mode_labels"] = m.mode_labels;
    return out;
}

json currents_json(const jjp::NetworkModel& m, const jjp::Matrix& sigma) {
    const auto rep = jjp::current_report(m, sigma);
    json out;
    json per = json::array();
    for (int j = 0; j < m.n_modes; ++j) per.push_back(rep.per_terminal(j));
    // I_j > 0 flows from bath j into the network
    out["per_terminal"] = per;
    out["conservation_defect"] = rep.conservation_defect;
    if (m.has_label("D") && m.has_label("U")) out["pump"] = rep.pump;
    return out;
}

int cmd_steady(const ModelFlags& mf, const std::string& method, double tol,
               long max_iter, double alpha, std::uint64_t seed, bool random_init) {
    const jjp::NetworkModel m = resolve_model(mf);
    jjp::SteadyStateResult res;
    jjp::FixedPointConfig cfg;
    cfg.tol = tol;
    cfg.max_iter = max_iter;
    cfg.alpha = alpha;
    cfg.seed = seed;
    cfg.random_init = random_init;

    if (method == "linear-ec0") {
        res = jjp::solve_linear_ec0(m);
    } else if (method == "ode") {
        res = jjp::relax_to_steady(m, jjp::equilibrium_state(m), tol);
    } else {
        res = jjp::fixed_point_iterate(m, cfg);
        if (!res.converged) {
            // documented fallback: relax the same model by time integration
            res = jjp::relax_to_steady(m, jjp::equilibrium_state(m), tol);
        }
    }

    json out = state_json(m, res.state);
    out["currents"] = currents_json(m, res.state);
    out["residual"] = res.residual;
    out["iterations"] = res.iterations;
    out["converged"] = res.converged;
    out["method"] = jjp::to_string(res.method);
    out["manifest"] = manifest("steady", mf, m, seed);
    std::cout << out.dump(2) << '\n';
    return res.converged ? kExitOk : kExitNoConverge;
}

int cmd_evolve(const ModelFlags& mf, double t_end, double rtol,
               const std::string& out_path, int samples, const std::string& init) {
    const jjp::NetworkModel m = resolve_model(mf);
    jjp::EvolveOptions opts;
    opts.rel_tol = rtol;
    if (samples > 1 && t_end > 0.0) {
        opts.sample_times.resize(samples);
        for (int i = 0; i < samples; ++i)
            opts.sample_times[i] = t_end * i / double(samples - 1);
    }
    const jjp::Matrix initial = init == "equilibrium"
                                    ? jjp::equilibrium_state(m)
                                    : jjp::Matrix::Zero(m.n_modes, m.n_modes);
    const auto traj = jjp::evolve(m, initial, t_end, opts);

    std::vector<std::string> header;
    header.push_back(std::string("jjpump ") + jjp::kVersion);
    {
        std::ostringstream os;
        os << "t_end: " << jjp::format_g17(t_end) << "  rel_tol: " << jjp::format_g17(rtol);
        header.push_back(os.str());
    }
    jjp::write_trajectory_csv(traj, m, out_path, header);

    json man = manifest("evolve", mf, m, 0);
    man["output"] = out_path;
    man["rows"] = traj.size();
    std::cout << man.dump(2) << '\n';
    return kExitOk;
}

int cmd_sweep(const ModelFlags& mf, const std::string& geometry, double fmin,
              double fmax, int fcount, double bmin, double bmax, int bcount,
              const std::string& method, double tol, std::uint64_t seed,
              int threads, bool warm_start, const std::string& out_path,
              const std::string& svg_path, const std::string& quantity) {
    jjp::SweepSpec spec;
    spec.geometry = geometry == "asymmetric" ? jjp::PumpGeometry::asymmetric
                                             : jjp::PumpGeometry::symmetric;
    spec.base.K = mf.K;
    spec.base.Ec = mf.Ec;
    spec.base.gamma_up_base = mf.gamma_up;
    spec.base.gamma = mf.gamma;
    spec.flux = {fmin, fmax, fcount};
    spec.bias = {bmin, bmax, bcount};
    spec.method = method == "ode"          ? jjp::SteadyMethod::ode_relax
                  : method == "linear-ec0" ? jjp::SteadyMethod::linear_ec0
                                           : jjp::SteadyMethod::fixed_point;
    spec.solver.tol = tol;
    spec.seed = seed;
    spec.threads = threads;
    spec.warm_start = warm_start;

    const auto result = jjp::run_sweep(spec);
    jjp::write_csv(result, out_path);
    if (!svg_path.empty()) jjp::render_heatmap_svg(result, quantity, svg_path);

    long failed = 0;
    for (const auto& r : result.records)
        if (!r.converged) ++failed;

    const auto hash_model = spec.geometry == jjp::PumpGeometry::symmetric
                                ? jjp::build_symmetric_pump(spec.base)
                                : jjp::build_asymmetric_pump(spec.base);
    json man = manifest("sweep", mf, hash_model, seed);
    man["output"] = out_path;
    if (!svg_path.empty()) man["svg"] = svg_path;
    man["grid"] = {{"flux_count", fcount}, {"bias_count", bcount}};
    man["non_converged_points"] = failed;
    std::cout << man.dump(2) << '\n';
    return failed == 0 ? kExitOk : kExitNoConverge;
}

int cmd_scan_ec(const ModelFlags& mf, const std::string& geometry,
                std::vector<double> ec_list, std::vector<double> k_list,
                double bias, double flux_step, int threads,
                const std::string& out_path) {
    if (ec_list.empty()) ec_list = {0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0};
    if (k_list.empty()) k_list = {mf.K};
    std::vector<double> flux_grid;
    for (double f = 0.0; f < 1.0 - 1e-12; f += flux_step) flux_grid.push_back(f);

    jjp::PumpParams base;
    base.gamma_up_base = mf.gamma_up;
    base.gamma = mf.gamma;
    const auto result = jjp::scan_capacitance(
        geometry == "asymmetric" ? jjp::PumpGeometry::asymmetric
                                 : jjp::PumpGeometry::symmetric,
        ec_list, k_list, bias, flux_grid, base, threads);
    jjp::write_csv(result, out_path);

    json man = manifest("scan-ec", mf,
                        geometry == "asymmetric" ? jjp::build_asymmetric_pump(base)
                                                 : jjp::build_symmetric_pump(base),
                        0);
    man["output"] = out_path;
    man["Ec_count"] = ec_list.size();
    man["K_count"] = k_list.size();
    std::cout << man.dump(2) << '\n';
    return kExitOk;
}

int cmd_verify(double Ec, int cutoff, double t_end, double tol, bool quick) {
    int failures = 0;
    auto check = [&](const std::string& name, bool ok, const std::string& detail) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name
                  << (detail.empty() ? "" : "  (" + detail + ")") << '\n';
        if (!ok) ++failures;
    };

    // two-mode exactness of the closure at Ec = 0 (or deviation report if Ec > 0)
    jjp::NetworkModel m;
    m.n_modes = 2;
    m.epsilon = jjp::RealVector::Zero(2);
    m.tunneling = jjp::Matrix::Zero(2, 2);
    m.tunneling(0, 1) = m.tunneling(1, 0) = 0.5;
    m.capacitance = jjp::RealMatrix::Zero(2, 2);
    m.capacitance(0, 1) = m.capacitance(1, 0) = Ec;
    m.gamma_up = jjp::RealVector(2);
    m.gamma_up << 1.0, 0.25;
    m.gamma = 1.0;

    const auto rep = jjp::compare_meanfield(m, t_end, cutoff);
    std::cout << rep.to_json() << '\n';
    if (Ec == 0.0) {
        check("mean-field exactness at Ec=0", rep.max_dev < tol,
              "max_dev " + jjp::format_g17(rep.max_dev));
        check("truncation leak monitor", !rep.truncation_leak,
              "top layer " + jjp::format_g17(rep.max_top_layer));
    } else {
        std::cout << "[INFO] Ec = " << jjp::format_g17(Ec)
                  << ": closure deviation " << jjp::format_g17(rep.max_dev)
                  << " (reported, not asserted)\n";
    }

    // conservation at a pump steady state
    {
        jjp::PumpParams p;
        p.K = 0.1;
        p.Ec = 0.1;
        p.gamma_up_base = 100.0;
        p.bias = 1.0;
        p.flux_ratio = 0.25;
        const auto model = jjp::build_symmetric_pump(p);
        jjp::FixedPointConfig cfg;
        cfg.tol = 1e-10;
        const auto res = jjp::fixed_point_iterate(model, cfg);
        const auto cur = jjp::current_report(model, res.state);
        check("steady-state convergence", res.converged,
              "residual " + jjp::format_g17(res.residual));
        check("current conservation", std::abs(cur.conservation_defect) < 1e-8,
              "defect " + jjp::format_g17(cur.conservation_defect));
    }

    // symmetry battery at Ec = 0 (small grid unless quick is off)
    {
        const int npts = quick ? 5 : 11;
        double worst_flux = 0.0, worst_bias_sym = 0.0, worst_asym = 0.0;
        for (int gi = 0; gi < 2; ++gi) {
            const bool sym = gi == 0;
            for (int fi = 0; fi < npts; ++fi) {
                for (int bi = 0; bi < npts; ++bi) {
                    const double f = -0.5 + fi / double(npts - 1);
                    const double g = -3.0 + 6.0 * bi / double(npts - 1);
                    jjp::PumpParams p;
                    p.K = 0.1;
                    p.Ec = 0.0;
                    p.gamma_up_base = 100.0;
                    p.bias = g;
                    p.flux_ratio = f;
                    auto build = [&](double fl, double bs) {
                        jjp::PumpParams q = p;
                        q.flux_ratio = fl;
                        q.bias = bs;
                        return sym ? jjp::build_symmetric_pump(q)
                                   : jjp::build_asymmetric_pump(q);
                    };
                    auto ip = [&](const jjp::NetworkModel& mm) {
                        return jjp::pump_current(mm, jjp::solve_linear_ec0(mm).state);
                    };
                    const double i0 = ip(build(f, g));
                    worst_flux = std::max(worst_flux, std::abs(ip(build(-f, g)) + i0));
                    if (sym)
                        worst_bias_sym =
                            std::max(worst_bias_sym, std::abs(ip(build(f, -g)) + i0));
                    else
                        worst_asym = std::max(worst_asym, std::abs(i0));
                }
            }
        }
        check("flux antisymmetry (Ec=0)", worst_flux < 1e-6,
              jjp::format_g17(worst_flux));
        check("bias antisymmetry, symmetric geometry (Ec=0)", worst_bias_sym < 1e-6,
              jjp::format_g17(worst_bias_sym));
        check("no pumping, asymmetric geometry (Ec=0)", worst_asym < 1e-8,
              jjp::format_g17(worst_asym));
    }

    return failures == 0 ? kExitOk : kExitNoConverge;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Josephson-junction network pump simulator"};
    app.require_subcommand(1);

    ModelFlags mf;
    std::string method = "fixed-point";
    double tol = 1e-8;
    long max_iter = 100000;
    double alpha = 0.5;
    std::uint64_t seed = 0;
    bool random_init = false;

    auto* steady = app.add_subcommand("steady", "solve the nonequilibrium steady state");
    add_model_flags(steady, mf);
    steady->add_option("--method", method, "fixed-point | ode | linear-ec0")
        ->check(CLI::IsMember({"fixed-point", "ode", "linear-ec0"}));
    steady->add_option("--tol", tol, "convergence tolerance");
    steady->add_option("--max-iter", max_iter, "fixed-point iteration cap");
    steady->add_option("--alpha", alpha, "population mixing factor");
    steady->add_option("--seed", seed, "seed for --random-init");
    steady->add_flag("--random-init", random_init, "randomized initial guess");

    double t_end = 10.0, rtol = 1e-9;
    std::string out_path = "out.csv";
    int samples = 0;
    std::string init = "vacuum";
    auto* evolve = app.add_subcommand("evolve", "integrate the mean-field dynamics");
    add_model_flags(evolve, mf);
    evolve->add_option("--t-end", t_end, "integration time (units of 1/gamma)");
    evolve->add_option("--rtol", rtol, "integrator relative tolerance");
    evolve->add_option("--out", out_path, "trajectory CSV path")->required();
    evolve->add_option("--samples", samples, "emit this many equally spaced rows");
    evolve->add_option("--init", init, "vacuum | equilibrium")
        ->check(CLI::IsMember({"vacuum", "equilibrium"}));

    std::string geometry = "symmetric", svg_path, quantity = "I_pump";
    double fmin = -1.0, fmax = 1.0, bmin = -5.0, bmax = 5.0;
    int fcount = 101, bcount = 101, threads = 0;
    bool warm_start = false;
    auto* sweep = app.add_subcommand("sweep", "flux x bias steady-state grid");
    sweep->add_option("--geometry", geometry, "symmetric | asymmetric")
        ->check(CLI::IsMember({"symmetric", "asymmetric"}));
    sweep->add_option("--K", mf.K);
    sweep->add_option("--Ec", mf.Ec);
    sweep->add_option("--gamma-up", mf.gamma_up);
    sweep->add_option("--gamma", mf.gamma);
    sweep->add_option("--flux-min", fmin);
    sweep->add_option("--flux-max", fmax);
    sweep->add_option("--flux-count", fcount);
    sweep->add_option("--bias-min", bmin);
    sweep->add_option("--bias-max", bmax);
    sweep->add_option("--bias-count", bcount);
    sweep->add_option("--method", method, "fixed-point | ode | linear-ec0")
        ->check(CLI::IsMember({"fixed-point", "ode", "linear-ec0"}));
    sweep->add_option("--tol", tol);
    sweep->add_option("--seed", seed);
    sweep->add_option("--threads", threads, "worker threads (or JJPUMP_THREADS)");
    sweep->add_flag("--warm-start", warm_start, "serial row-major warm starting");
    sweep->add_option("--out", out_path, "CSV output path")->required();
    sweep->add_option("--svg", svg_path, "also render an SVG heatmap");
    sweep->add_option("--quantity", quantity, "heatmap quantity (default I_pump)");

    std::vector<double> ec_list, k_list;
    double scan_bias = 1.0, flux_step = 0.01;
    auto* scan = app.add_subcommand("scan-ec", "capacitance scan, flux-maximized");
    scan->add_option("--geometry", geometry, "symmetric | asymmetric")
        ->check(CLI::IsMember({"symmetric", "asymmetric"}));
    scan->add_option("--Ec", ec_list, "Ec values (default paper-style list)");
    scan->add_option("--K", k_list, "K values (default 0.1)");
    scan->add_option("--gamma-up", mf.gamma_up);
    scan->add_option("--gamma", mf.gamma);
    scan->add_option("--bias", scan_bias, "fixed bias (default 1)");
    scan->add_option("--flux-step", flux_step, "flux grid step over [0,1)");
    scan->add_option("--threads", threads);
    scan->add_option("--out", out_path, "CSV output path")->required();

    double verify_Ec = 0.0, verify_tol = 1e-6;
    int cutoff = 26;
    bool quick = false;
    auto* verify = app.add_subcommand("verify", "built-in oracle and symmetry checks");
    verify->add_option("--Ec", verify_Ec, "closure deviation is reported, not asserted, when > 0");
    verify->add_option("--cutoff", cutoff, "Fock cutoff per mode");
    verify->add_option("--t-end", t_end, "comparison horizon");
    verify->add_option("--tol", verify_tol, "exactness tolerance");
    verify->add_flag("--quick", quick, "smaller symmetry grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (steady->parsed())
            return cmd_steady(mf, method, tol, max_iter, alpha, seed, random_init);
        if (evolve->parsed())
            return cmd_evolve(mf, t_end, rtol, out_path, samples, init);
        if (sweep->parsed()) {
            mf.geometry = geometry;
            return cmd_sweep(mf, geometry, fmin, fmax, fcount, bmin, bmax, bcount,
                             method, tol, seed, threads, warm_start, out_path,
                             svg_path, quantity);
        }
        if (scan->parsed()) {
            mf.geometry = geometry;
            return cmd_scan_ec(mf, geometry, ec_list, k_list, scan_bias, flux_step,
                               threads, out_path);
        }
        if (verify->parsed())
            return cmd_verify(verify_Ec, cutoff, t_end, verify_tol, quick);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNoConverge;
    }
    return kExitUsage;
}
