#include "jjp/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "jjp/sweep.hpp"  // fnv1a64

namespace jjp {

int NetworkModel::label_index(const std::string& name) const {
    auto it = std::find(mode_labels.begin(), mode_labels.end(), name);
    if (it == mode_labels.end())
        throw std::invalid_argument("no mode labeled '" + name + "'");
    return static_cast<int>(it - mode_labels.begin());
}

bool NetworkModel::has_label(const std::string& name) const {
    return std::find(mode_labels.begin(), mode_labels.end(), name) != mode_labels.end();
}

double FluxSpec::delta_phi() const { return flux_phase(flux_ratio); }

double flux_phase(double flux_ratio) {
    if (!std::isfinite(flux_ratio))
        throw std::invalid_argument("flux_phase: non-finite flux ratio");
    return 2.0 * std::numbers::pi * flux_ratio;
}

namespace {

void check_pump_params(const PumpParams& p) {
    if (!(p.K >= 0.0)) throw std::invalid_argument("pump: K must be >= 0");
    if (!(p.Ec >= 0.0)) throw std::invalid_argument("pump: Ec must be >= 0");
    if (!(p.gamma > 0.0)) throw std::invalid_argument("pump: gamma must be > 0");
    if (!(p.gamma_up_base >= 0.0))
        throw std::invalid_argument("pump: gamma_up must be >= 0");
    if (!(p.gamma_up_base + std::min(p.bias, 0.0) >= 0.0))
        throw std::invalid_argument("pump: bias drives a creation rate negative");
}

NetworkModel pump_skeleton(const PumpParams& p) {
    check_pump_params(p);
    NetworkModel m;
    m.n_modes = 4;
    m.epsilon = RealVector::Zero(4);
    m.tunneling = Matrix::Zero(4, 4);
    m.capacitance = RealMatrix::Zero(4, 4);
    m.gamma = p.gamma;
    m.mode_labels = {"L", "D", "R", "U"};
    // The bias enters one-sided: gamma_up = (g + Gamma, g, g, g).
    // The midpoint split (g + G/2, g, g - G/2, g) looks more symmetric but is
    // degenerate: combined with the exact relabeling (L<->R)(D<->U) and the
    // particle-hole map sigma -> s - sigma^T it forces I_pump == 0 in the
    // asymmetric geometry at every Ec, contrary to the observed pumping.
    m.gamma_up = RealVector::Constant(4, p.gamma_up_base);
    m.gamma_up(kModeL) += p.bias;

    auto set_hop = [&](int j, int k, Complex amp) {
        // amp is the coefficient of a^dag_k a_j, i.e. tunneling(j,k)
        m.tunneling(j, k) = amp;
        m.tunneling(k, j) = std::conj(amp);
    };
    // All quarter/half phases shift by full turns when flux_ratio changes by 4;
    // reducing first makes that identity exact in floating point.
    const double quarter = flux_phase(std::fmod(p.flux_ratio, 4.0)) / 4.0;
    const Complex outer = p.K * std::exp(Complex(0.0, quarter));
    // Coefficients of a^dag_L a_D, a^dag_D a_R, a^dag_R a_U, a^dag_U a_L.
    set_hop(kModeD, kModeL, outer);
    set_hop(kModeR, kModeD, outer);
    set_hop(kModeU, kModeR, outer);
    set_hop(kModeL, kModeU, outer);
    for (auto [a, b] : {std::pair{kModeL, kModeD}, {kModeD, kModeR},
                        {kModeR, kModeU}, {kModeU, kModeL}}) {
        m.capacitance(a, b) = p.Ec;
        m.capacitance(b, a) = p.Ec;
    }
    return m;
}

}  // namespace

NetworkModel build_symmetric_pump(const PumpParams& p) {
    NetworkModel m = pump_skeleton(p);
    // Direct D-U junction: phase difference twice that of the outer branches.
    const Complex chord =
        p.K * std::exp(Complex(0.0, flux_phase(std::fmod(p.flux_ratio, 4.0)) / 2.0));
    m.tunneling(kModeU, kModeD) = chord;             // coefficient of a^dag_D a_U
    m.tunneling(kModeD, kModeU) = std::conj(chord);
    m.capacitance(kModeD, kModeU) = p.Ec;
    m.capacitance(kModeU, kModeD) = p.Ec;
    return m;
}

NetworkModel build_asymmetric_pump(const PumpParams& p) { return pump_skeleton(p); }

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    for (const auto& v : violations) os << v << '\n';
    return os.str();
}

ValidationReport validate(const NetworkModel& m) {
    ValidationReport rep;
    auto add = [&](const std::string& s) { rep.violations.push_back(s); };
    const int J = m.n_modes;
    auto idx = [](int j, int k) {
        return "(" + std::to_string(j) + "," + std::to_string(k) + ")";
    };
    if (J <= 0) {
        add("n_modes must be positive");
        return rep;
    }
    if (m.epsilon.size() != J) add("epsilon has wrong length");
    if (m.gamma_up.size() != J) add("gamma_up has wrong length");
    if (m.tunneling.rows() != J || m.tunneling.cols() != J) add("tunneling has wrong shape");
    if (m.capacitance.rows() != J || m.capacitance.cols() != J)
        add("capacitance has wrong shape");
    if (!rep.ok()) return rep;

    for (int j = 0; j < J; ++j) {
        if (std::abs(m.tunneling(j, j)) != 0.0) add("tunneling diagonal nonzero at " + idx(j, j));
        if (m.capacitance(j, j) != 0.0) add("capacitance diagonal nonzero at " + idx(j, j));
        for (int k = j + 1; k < J; ++k) {
            if (std::abs(m.tunneling(j, k) - std::conj(m.tunneling(k, j))) > 0.0)
                add("tunneling hermiticity violation at " + idx(j, k));
            if (m.capacitance(j, k) != m.capacitance(k, j))
                add("capacitance symmetry violation at " + idx(j, k));
            if (m.capacitance(j, k) < 0.0)
                add("capacitance negativity violation at " + idx(j, k));
        }
    }
    if (!(m.gamma > 0.0)) add("gamma must be > 0");
    for (int j = 0; j < J; ++j)
        if (!(m.gamma_up(j) >= 0.0))
            add("gamma_up negativity violation at mode " + std::to_string(j));
    for (int j = 0; j < J; ++j) {
        if (!std::isfinite(m.epsilon(j)) || !std::isfinite(m.gamma_up(j)))
            add("non-finite entry at mode " + std::to_string(j));
        for (int k = 0; k < J; ++k)
            if (!std::isfinite(m.tunneling(j, k).real()) ||
                !std::isfinite(m.tunneling(j, k).imag()) ||
                !std::isfinite(m.capacitance(j, k)))
                add("non-finite matrix entry at " + idx(j, k));
    }
    return rep;
}

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
    throw std::invalid_argument("model document: " + path + ": " + what);
}

double require_number(const json& j, const std::string& path) {
    if (!j.is_number()) schema_error(path, "expected a number");
    return j.get<double>();
}

void reject_unknown_keys(const json& doc, const std::vector<std::string>& allowed) {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            schema_error(it.key(), "unknown key");
    }
}

NetworkModel parse_custom(const json& doc) {
    reject_unknown_keys(doc, {"geometry", "n_modes", "epsilon", "tunneling",
                              "capacitance", "gamma", "gamma_up"});
    for (const char* key : {"n_modes", "gamma", "gamma_up"})
        if (!doc.contains(key)) schema_error(key, "missing required key");

    NetworkModel m;
    if (!doc["n_modes"].is_number_integer() || doc["n_modes"].get<long>() <= 0)
        schema_error("n_modes", "expected a positive integer");
    const int J = doc["n_modes"].get<int>();
    m.n_modes = J;
    m.epsilon = RealVector::Zero(J);
    m.tunneling = Matrix::Zero(J, J);
    m.capacitance = RealMatrix::Zero(J, J);
    m.gamma = require_number(doc["gamma"], "gamma");

    if (doc.contains("epsilon")) {
        const auto& eps = doc["epsilon"];
        if (!eps.is_array() || static_cast<int>(eps.size()) != J)
            schema_error("epsilon", "expected an array of length n_modes");
        for (int j = 0; j < J; ++j) m.epsilon(j) = require_number(eps[j], "epsilon[" + std::to_string(j) + "]");
    }

    const auto& gu = doc["gamma_up"];
    if (gu.is_number()) {
        m.gamma_up = RealVector::Constant(J, gu.get<double>());
    } else if (gu.is_array() && static_cast<int>(gu.size()) == J) {
        m.gamma_up = RealVector::Zero(J);
        for (int j = 0; j < J; ++j) m.gamma_up(j) = require_number(gu[j], "gamma_up[" + std::to_string(j) + "]");
    } else {
        schema_error("gamma_up", "expected a number or an array of length n_modes");
    }

    if (doc.contains("tunneling")) {
        const auto& tl = doc["tunneling"];
        if (!tl.is_array()) schema_error("tunneling", "expected an array of {from,to,re,im}");
        int i = 0;
        for (const auto& e : tl) {
            const std::string p = "tunneling[" + std::to_string(i++) + "]";
            if (!e.is_object()) schema_error(p, "expected an object");
            reject_unknown_keys(e, {"from", "to", "re", "im"});
            if (!e.contains("from") || !e.contains("to")) schema_error(p, "missing from/to");
            const int from = e["from"].get<int>();
            const int to = e["to"].get<int>();
            if (from < 0 || from >= J || to < 0 || to >= J || from == to)
                schema_error(p, "from/to out of range or equal");
            const double re = e.contains("re") ? require_number(e["re"], p + ".re") : 0.0;
            const double im = e.contains("im") ? require_number(e["im"], p + ".im") : 0.0;
            const Complex amp(re, im);
            // hermitian closure; conflicting duplicates are rejected
            if (m.tunneling(from, to) != Complex(0, 0) &&
                m.tunneling(from, to) != amp)
                schema_error(p, "conflicts with an earlier entry for the same pair");
            m.tunneling(from, to) = amp;
            m.tunneling(to, from) = std::conj(amp);
        }
    }

    if (doc.contains("capacitance")) {
        const auto& cl = doc["capacitance"];
        if (!cl.is_array()) schema_error("capacitance", "expected an array of {i,j,value}");
        int i = 0;
        for (const auto& e : cl) {
            const std::string p = "capacitance[" + std::to_string(i++) + "]";
            if (!e.is_object()) schema_error(p, "expected an object");
            reject_unknown_keys(e, {"i", "j", "value"});
            if (!e.contains("i") || !e.contains("j") || !e.contains("value"))
                schema_error(p, "missing i/j/value");
            const int a = e["i"].get<int>();
            const int b = e["j"].get<int>();
            if (a < 0 || a >= J || b < 0 || b >= J || a == b)
                schema_error(p, "i/j out of range or equal");
            const double v = require_number(e["value"], p + ".value");
            m.capacitance(a, b) = v;
            m.capacitance(b, a) = v;
        }
    }
    return m;
}

NetworkModel parse_preset(const json& doc, const std::string& geometry) {
    reject_unknown_keys(doc, {"geometry", "K", "Ec", "gamma", "gamma_up", "bias",
                              "flux_ratio"});
    for (const char* key : {"K", "Ec", "gamma", "gamma_up", "bias", "flux_ratio"})
        if (!doc.contains(key)) schema_error(key, "missing required key");
    PumpParams p;
    p.K = require_number(doc["K"], "K");
    p.Ec = require_number(doc["Ec"], "Ec");
    p.gamma = require_number(doc["gamma"], "gamma");
    if (!doc["gamma_up"].is_number())
        schema_error("gamma_up", "presets take a scalar gamma_up");
    p.gamma_up_base = doc["gamma_up"].get<double>();
    p.bias = require_number(doc["bias"], "bias");
    p.flux_ratio = require_number(doc["flux_ratio"], "flux_ratio");
    return geometry == "symmetric" ? build_symmetric_pump(p) : build_asymmetric_pump(p);
}

}  // namespace

NetworkModel load_model(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("model document: ") + e.what());
    }
    if (!doc.is_object()) schema_error("$", "expected a JSON object");
    if (!doc.contains("geometry")) schema_error("geometry", "missing required key");
    if (!doc["geometry"].is_string()) schema_error("geometry", "expected a string");
    const std::string geometry = doc["geometry"].get<std::string>();
    NetworkModel m;
    if (geometry == "symmetric" || geometry == "asymmetric")
        m = parse_preset(doc, geometry);
    else if (geometry == "custom")
        m = parse_custom(doc);
    else
        schema_error("geometry", "expected symmetric | asymmetric | custom");

    auto rep = validate(m);
    if (!rep.ok())
        throw std::invalid_argument("model document: invariant violations:\n" + rep.to_string());
    return m;
}

NetworkModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open model file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_model(ss.str());
}

std::uint64_t model_hash(const NetworkModel& m) {
    std::uint64_t h = fnv1a64(&m.n_modes, sizeof m.n_modes);
    auto mix = [&](const void* p, std::size_t n) { h = fnv1a64(p, n, h); };
    mix(m.epsilon.data(), sizeof(double) * m.epsilon.size());
    mix(m.tunneling.data(), sizeof(Complex) * m.tunneling.size());
    mix(m.capacitance.data(), sizeof(double) * m.capacitance.size());
    mix(m.gamma_up.data(), sizeof(double) * m.gamma_up.size());
    mix(&m.gamma, sizeof m.gamma);
    for (const auto& s : m.mode_labels) mix(s.data(), s.size());
    return h;
}

}  // namespace jjp
