#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gps/fbi.hpp"
#include "gps/geometry.hpp"
#include "gps/spectral.hpp"

namespace gps {

// Tags: davies, analytic-transport, gevrey-transport:s=S, trapped-toy, rotated-transport:s=S,angle=A.
// Throws ConfigError for unknown tags or parameters.
ModelInstance parse_model(const std::string& tag);

// Gevrey index used in the scaling laws: 1 for analytic symbols.
double gevrey_index(const GevreySymbol& sym);

struct SweepConfig {
    std::string model_tag = "gevrey-transport:s=2";
    std::vector<double> h_list;
    double L = 4.0;
    int N = 0;             // 0: smallest power of two meeting the Nyquist rule
    double xi_extent = 4.0; // lower bound on the resolved xi extent
    cplx z0{0.0, 0.0};
    double epsilon_deform = 0.1;
    std::filesystem::path output_dir = "gps_out";
    std::uint64_t seed = 0x5eed;
    int circle_samples = 32;
    bool run_escape = true;
    bool run_toeplitz = true;
    bool check_refinement = true; // recompute the nearest eigenvalue at 2N
    int heatmap_res = 32;
    int heatmap_max_n = 512;
    double fbi_L = kFbiDefaultL;
    double state_x = 0.0;
    double state_xi = 1.0;
    ComplexBox elliptic_box{-2.0, 2.0, -1.5, 1.5};
    double elliptic_state_x = 2.0;
    double elliptic_state_xi = 0.0;

    // Throws ConfigError on an empty or non-decreasing h list, h outside (0, 1], or bad counts.
    void validate() const;
    int points_for(double h, const GevreySymbol& sym) const;
};

// Flat "key = value" lines, '#' starts a comment. Unknown keys are ConfigErrors.
SweepConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
SweepConfig load_config(const std::filesystem::path& path);

struct SweepRecord {
    double h = 0.0;
    double r = 0.0;               // distance from z0 to the nearest retained eigenvalue
    double sigma_min_probe = 0.0; // min sigma_min on |z - z0| = r / 2
    double resnorm = 0.0;         // resolvent norm at the outward half-radius probe
    double margin_c = 0.0;
    double gamma = 0.0;
    double toeplitz_res = 0.0;
};

inline constexpr double kRefinementTolerance = 1e-2;

struct SweepDiagnostics {
    double h = 0.0;
    int N = 0;
    double L = 0.0;
    int retained = 0;
    bool boundary_filter = false;
    cplx nearest;
    double nearest_condition = 0.0;
    double norm_estimate = 0.0;
    bool floor_limited = false; // condition * eps * ||P|| >= 1e-3 r: position set by rounding, not by P
    double refined_r = std::numeric_limits<double>::quiet_NaN();        // r recomputed at 2N (nan: not checked)
    double refinement_drift = std::numeric_limits<double>::quiet_NaN(); // |refined_r - r| / r
    cplx circle_argmin;
    cplx probe;
    bool probe_moved = false;
    double epsilon_used = 0.0;
    double t = 0.0;

    bool converged() const { return !(refinement_drift >= kRefinementTolerance); }
    bool resolved() const { return !floor_limited && converged(); }
};

struct HeatmapData {
    double h = 0.0;
    PseudospectrumField field;
    std::vector<cplx> eigenvalues;
};

struct SweepResult {
    SweepConfig config;
    std::vector<SweepRecord> records;
    std::vector<SweepDiagnostics> diagnostics;
    std::vector<HeatmapData> heatmaps;
    std::vector<std::pair<double, std::string>> skipped;
};

// Writes sweep.csv and diagnostics.csv row by row as each h finishes (h descending).
SweepResult run_sweep(const SweepConfig& cfg);

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    int n_points = 0;
};

// Least squares y = slope x + intercept. Needs two distinct x values.
FitResult fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Fit of log(value) against log(h). Nonpositive or non-finite values are excluded with a warning;
// throws NumericalError with fewer than 4 remaining points.
FitResult fit_power_law(const std::vector<SweepRecord>& records, const std::function<double(const SweepRecord&)>& field);

inline constexpr double kBoundedResolvent = 1e3;

struct GrowthCheck {
    std::optional<FitResult> fit; // log value against h^{-1/s}
    double max_value = 0.0;
    bool bounded = false;
    bool finite = true;
    bool pass = false;
    std::string regime; // "bounded", "exponential", "infinite" or "unexplained"
};

// values: resolvent norms per record. Passes if all are below 1e3 or the fit has r^2 >= 0.9.
GrowthCheck resolvent_growth_check(const std::vector<double>& h, const std::vector<double>& values, double s);
GrowthCheck resolvent_growth_check(const std::vector<SweepRecord>& records, double s);

void write_sweep_csv_header(std::ostream& os);
void write_sweep_csv_row(std::ostream& os, const SweepRecord& r);
std::vector<SweepRecord> load_sweep_csv(const std::filesystem::path& path);
std::vector<SweepDiagnostics> load_diagnostics_csv(const std::filesystem::path& path);

// Reads sweep.csv and diagnostics.csv from the output directory and derives fits and verdicts;
// writes summary.json and one heatmap_<k>.svg per field. Returns the summary path.
std::filesystem::path emit_outputs(const SweepConfig& cfg, const std::vector<HeatmapData>& heatmaps,
                                   const std::vector<std::pair<double, std::string>>& skipped = {});

void write_pseudospectrum_svg(const std::filesystem::path& path, const HeatmapData& data, cplx z0, double disk_radius);

struct ToeplitzRow {
    double h = 0.0;
    double t = 0.0;
    ToeplitzTerms terms;
};

struct ToeplitzSweep {
    std::vector<ToeplitzRow> rows;
    std::vector<EllipticTerms> elliptic;
    double exterior_floor = 0.0;
    std::optional<FitResult> slope_flat;     // t = 0
    std::optional<FitResult> slope_deformed; // t = -epsilon h^{1 - 1/s}
    std::optional<EllipticFit> elliptic_fit;
};

// Toeplitz residuals at t = 0 and t = -epsilon h^{1-1/s} plus the elliptic estimate; writes
// toeplitz.csv, elliptic.csv and toeplitz_summary.json into the output directory.
ToeplitzSweep run_toeplitz_sweep(const SweepConfig& cfg);

} // namespace gps
