#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jjp/model.hpp"
#include "jjp/steady.hpp"

namespace jjp {

enum class PumpGeometry { symmetric, asymmetric };

std::string to_string(PumpGeometry g);

struct AxisSpec {
    double min = 0.0;
    double max = 0.0;
    int count = 1;
    double at(int i) const;
};

struct SweepSpec {
    PumpGeometry geometry = PumpGeometry::symmetric;
    PumpParams base;              // bias and flux_ratio are overridden per point
    AxisSpec flux;                // x axis: Phi/Phi0
    AxisSpec bias;                // y axis: Gamma/gamma
    SteadyMethod method = SteadyMethod::fixed_point;
    FixedPointConfig solver;
    std::uint64_t seed = 0;
    int threads = 0;              // 0: JJPUMP_THREADS or hardware default
    bool warm_start = false;      // row-major warm starting (serial)
};

struct SweepRecord {
    double flux_ratio = 0.0;
    double bias = 0.0;
    double I_pump = 0.0;
    double I_L = 0.0, I_D = 0.0, I_R = 0.0, I_U = 0.0;
    double n_L = 0.0, n_D = 0.0, n_R = 0.0, n_U = 0.0;
    bool converged = false;
    long iterations = 0;
    SteadyMethod method = SteadyMethod::fixed_point;
};

struct SweepResult {
    SweepSpec spec;
    std::vector<SweepRecord> records;   // flux-major order, bias fastest
    std::vector<std::string> provenance;

    const SweepRecord& at(int flux_idx, int bias_idx) const;
};

/// Solves the steady state at every grid point. Points are independent tasks
/// on a thread pool; records are stored by grid index, so results do not
/// depend on scheduling. Per-point failures are flagged, never thrown.
SweepResult run_sweep(const SweepSpec& spec);

struct CapacitanceScanRecord {
    double Ec = 0.0;
    double K = 0.0;
    double max_abs_pump = 0.0;
    double argmax_flux = 0.0;
    bool all_converged = true;
};

struct CapacitanceScanResult {
    std::vector<CapacitanceScanRecord> records;
    std::vector<std::string> provenance;
};

/// For each (Ec, K): max over the flux grid of |I_pump| at fixed bias.
CapacitanceScanResult scan_capacitance(PumpGeometry geometry,
                                       const std::vector<double>& Ec_list,
                                       const std::vector<double>& K_list,
                                       double bias,
                                       const std::vector<double>& flux_grid,
                                       const PumpParams& base = {},
                                       int threads = 0,
                                       const FixedPointConfig& solver = {});

/// Exact schema:
/// flux_ratio,bias,I_pump,I_L,I_D,I_R,I_U,n_L,n_D,n_R,n_U,converged,iterations,method
/// preceded by '#'-prefixed provenance lines. Floats are written with 17
/// significant digits via locale-independent formatting, so identical inputs
/// produce byte-identical files.
void write_csv(const SweepResult& result, const std::string& path);
void write_csv(const CapacitanceScanResult& result, const std::string& path);

/// Locale-independent float formatting used by every writer (17 significant
/// digits, '.' decimal separator).
std::string format_g17(double v);

struct HeatmapOptions {
    int cell_px = 6;
    std::string title;
};

/// Standalone SVG heatmap of one sweep quantity: flux on x, bias on y,
/// diverging color scale symmetric about zero, hatched non-converged cells.
/// quantity: one of I_pump, I_L, I_D, I_R, I_U, n_L, n_D, n_R, n_U.
void render_heatmap_svg(const SweepResult& result, const std::string& quantity,
                        const std::string& path, const HeatmapOptions& opts = {});

/// Thread-count resolution: explicit value > 0 wins, else JJPUMP_THREADS,
/// else hardware concurrency.
int resolve_threads(int requested);

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull);

}  // namespace jjp
