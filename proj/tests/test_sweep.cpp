#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "jjp/observables.hpp"
#include "jjp/sweep.hpp"

using namespace jjp;

namespace {

SweepSpec small_spec(PumpGeometry g, double Ec, int nf, int nb) {
    SweepSpec spec;
    spec.geometry = g;
    spec.base.K = 0.1;
    spec.base.Ec = Ec;
    spec.base.gamma_up_base = 100.0;
    spec.flux = {-0.4, 0.4, nf};
    spec.bias = {-2.0, 2.0, nb};
    spec.solver.tol = 1e-10;
    return spec;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string tmp_path(const std::string& name) {
    return std::string("jjp_test_") + name;
}

// minimal XML well-formedness scan: tag balance and attribute quoting
bool xml_well_formed(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    if (text.rfind("<?xml", 0) != 0) return false;
    while ((i = text.find('<', i)) != std::string::npos) {
        const std::size_t end = text.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = text.substr(i + 1, end - i - 1);
        i = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '?') continue;
        if (tag[0] == '/') {
            if (stack.empty() || stack.back() != tag.substr(1)) return false;
            stack.pop_back();
            continue;
        }
        const bool self_close = tag.back() == '/';
        if (self_close) tag.pop_back();
        const std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
        // attribute quotes must be balanced
        if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
        if (!self_close) stack.push_back(name);
    }
    return stack.empty();
}

}  // namespace

TEST_CASE("a 1x1 grid equals a direct steady solve") {
    SweepSpec spec = small_spec(PumpGeometry::symmetric, 0.1, 1, 1);
    spec.flux = {0.25, 0.25, 1};
    spec.bias = {1.0, 1.0, 1};
    const auto result = run_sweep(spec);
    REQUIRE(result.records.size() == 1);
    const auto& r = result.records[0];
    CHECK(r.converged);

    PumpParams p = spec.base;
    p.flux_ratio = 0.25;
    p.bias = 1.0;
    const auto m = build_symmetric_pump(p);
    FixedPointConfig cfg;
    cfg.tol = 1e-10;
    const auto direct = fixed_point_iterate(m, cfg);
    CHECK(r.I_pump == doctest::Approx(pump_current(m, direct.state)).epsilon(1e-12));
    CHECK(r.n_L == doctest::Approx(direct.state(0, 0).real()).epsilon(1e-12));
    CHECK(r.iterations == direct.iterations);
}

TEST_CASE("CSV schema, shape and exact round-trip") {
    SweepSpec spec = small_spec(PumpGeometry::symmetric, 0.0, 1, 1);
    spec.flux = {0.3, 0.3, 1};
    spec.bias = {0.7, 0.7, 1};
    spec.method = SteadyMethod::linear_ec0;
    const auto result = run_sweep(spec);
    const auto path = tmp_path("one_point.csv");
    write_csv(result, path);
    const std::string text = slurp(path);

    // header block, one column row, one data row
    std::istringstream lines(text);
    std::string line;
    int comments = 0, data = 0;
    std::string columns;
    while (std::getline(lines, line)) {
        if (line.rfind("#", 0) == 0) {
            ++comments;
        } else if (columns.empty()) {
            columns = line;
        } else {
            ++data;
            // round-trip the flux value exactly
            const double parsed = std::strtod(line.c_str(), nullptr);
            CHECK(parsed == 0.3);
        }
    }
    CHECK(comments >= 3);
    CHECK(data == 1);
    CHECK(columns ==
          "flux_ratio,bias,I_pump,I_L,I_D,I_R,I_U,n_L,n_D,n_R,n_U,converged,"
          "iterations,method");
    std::remove(path.c_str());
}

TEST_CASE("format_g17 round-trips doubles exactly") {
    for (double v : {0.1, -3.0 / 7.0, 1e-17, 123456.789, 0.0}) {
        const std::string s = format_g17(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
        CHECK(s.find(',') == std::string::npos);
    }
}

TEST_CASE("sweeps are deterministic and schedule-independent") {
    SweepSpec spec = small_spec(PumpGeometry::symmetric, 0.1, 4, 3);
    spec.seed = 99;

    spec.threads = 1;
    const auto a = run_sweep(spec);
    spec.threads = 4;
    const auto b = run_sweep(spec);
    const auto c = run_sweep(spec);

    const auto pa = tmp_path("det_a.csv"), pb = tmp_path("det_b.csv"),
               pc = tmp_path("det_c.csv");
    write_csv(a, pa);
    write_csv(b, pb);
    write_csv(c, pc);
    CHECK(slurp(pa) == slurp(pb));
    CHECK(slurp(pb) == slurp(pc));
    std::remove(pa.c_str());
    std::remove(pb.c_str());
    std::remove(pc.c_str());
}

TEST_CASE("grid symmetry post-processing at Ec = 0") {
    // symmetric axes: record(i,j) pairs with record(nf-1-i, j) etc.
    for (auto g : {PumpGeometry::symmetric, PumpGeometry::asymmetric}) {
        SweepSpec spec = small_spec(g, 0.0, 5, 5);
        const auto res = run_sweep(spec);
        const int nf = spec.flux.count, nb = spec.bias.count;
        for (int fi = 0; fi < nf; ++fi)
            for (int bi = 0; bi < nb; ++bi) {
                const auto& r = res.at(fi, bi);
                CHECK(r.converged);
                CHECK(std::abs(r.I_L + r.I_D + r.I_R + r.I_U) < 1e-8);
                // flux antisymmetry
                CHECK(std::abs(r.I_pump + res.at(nf - 1 - fi, bi).I_pump) < 1e-9);
                if (g == PumpGeometry::symmetric)
                    CHECK(std::abs(r.I_pump + res.at(fi, nb - 1 - bi).I_pump) < 1e-6);
                else
                    CHECK(std::abs(r.I_pump) < 1e-8);
            }
    }
}

TEST_CASE("warm start produces the same physics as cold solves") {
    SweepSpec cold = small_spec(PumpGeometry::symmetric, 0.1, 3, 3);
    SweepSpec warm = cold;
    warm.warm_start = true;
    const auto a = run_sweep(cold);
    const auto b = run_sweep(warm);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].converged);
        CHECK(b.records[i].converged);
        CHECK(a.records[i].I_pump == doctest::Approx(b.records[i].I_pump).epsilon(1e-7));
    }
}

TEST_CASE("capacitance scan: no tunneling, no pumping") {
    const std::vector<double> flux = {0.0, 0.1, 0.2, 0.3, 0.4};
    PumpParams base;
    base.gamma_up_base = 100.0;
    const auto res = scan_capacitance(PumpGeometry::symmetric, {0.0, 0.1, 1.0},
                                      {0.0}, 1.0, flux, base);
    REQUIRE(res.records.size() == 3);
    for (const auto& r : res.records) {
        CHECK(r.all_converged);
        CHECK(r.max_abs_pump == 0.0);
    }
    const auto path = tmp_path("scan.csv");
    write_csv(res, path);
    const auto text = slurp(path);
    CHECK(text.find("Ec,K,max_abs_I_pump,argmax_flux,all_converged") != std::string::npos);
    std::remove(path.c_str());
}

TEST_CASE("linear_ec0 sweeps reject nonzero Ec") {
    SweepSpec spec = small_spec(PumpGeometry::symmetric, 0.1, 2, 2);
    spec.method = SteadyMethod::linear_ec0;
    CHECK_THROWS_AS(run_sweep(spec), std::invalid_argument);
}

TEST_CASE("SVG heatmap is well-formed XML, all-zero grid renders neutrally") {
    SweepSpec spec = small_spec(PumpGeometry::asymmetric, 0.0, 5, 4);
    spec.method = SteadyMethod::linear_ec0;
    const auto res = run_sweep(spec);  // asymmetric at Ec=0: I_pump ~ 0 grid
    const auto path = tmp_path("zero.svg");
    render_heatmap_svg(res, "I_pump", path);
    const auto text = slurp(path);
    CHECK(xml_well_formed(text));
    CHECK(text.find("&#x3A6;/&#x3A6;&#x2080;") != std::string::npos);  // flux axis label
    CHECK(text.find("&#x393;/&#x3B3;") != std::string::npos);          // bias axis label
    CHECK(text.find("#ffffff") != std::string::npos);                 // neutral cells
    std::remove(path.c_str());
}

TEST_CASE("antisymmetric data renders mirrored, inverted colors") {
    SweepSpec spec;
    spec.geometry = PumpGeometry::symmetric;
    spec.flux = {-1.0, 1.0, 3};
    spec.bias = {0.0, 0.0, 1};
    SweepResult res;
    res.spec = spec;
    res.records.resize(3);
    for (int i = 0; i < 3; ++i) {
        res.records[i].flux_ratio = spec.flux.at(i);
        res.records[i].bias = 0.0;
        res.records[i].I_pump = -1.0 + i;  // -1, 0, +1
        res.records[i].converged = true;
    }
    const auto path = tmp_path("mirror.svg");
    render_heatmap_svg(res, "I_pump", path);
    const auto text = slurp(path);
    CHECK(xml_well_formed(text));
    // extreme blue, neutral white, extreme red in grid order
    const auto b = text.find("#2166ac"), w = text.find("#ffffff"),
               r = text.find("#b2182b");
    REQUIRE(b != std::string::npos);
    REQUIRE(w != std::string::npos);
    REQUIRE(r != std::string::npos);
    CHECK(b < w);
    CHECK(w < r);
    std::remove(path.c_str());
}

TEST_CASE("non-converged cells are hatched") {
    SweepSpec spec;
    spec.flux = {0.0, 1.0, 2};
    spec.bias = {0.0, 0.0, 1};
    SweepResult res;
    res.spec = spec;
    res.records.resize(2);
    res.records[0].I_pump = 0.5;
    res.records[0].converged = true;
    res.records[1].I_pump = -0.5;
    res.records[1].converged = false;
    const auto path = tmp_path("hatch.svg");
    render_heatmap_svg(res, "I_pump", path);
    const auto text = slurp(path);
    CHECK(text.find("url(#hatch)") != std::string::npos);
    CHECK(xml_well_formed(text));
    std::remove(path.c_str());

    CHECK_THROWS_AS(render_heatmap_svg(res, "I_bogus", path), std::invalid_argument);
}

TEST_CASE("thread resolution: explicit, env, hardware") {
    CHECK(resolve_threads(3) == 3);
    setenv("JJPUMP_THREADS", "2", 1);
    CHECK(resolve_threads(0) == 2);
    unsetenv("JJPUMP_THREADS");
    CHECK(resolve_threads(0) >= 1);
}
