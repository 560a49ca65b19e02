#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "gps/symbols.hpp"

namespace gps {

inline constexpr double kFlowBox = 50.0;

struct Trajectory {
    std::vector<double> times;
    std::vector<PhasePoint> points;
    double energy_drift = 0.0; // max |Im p(point) - Im p(start)|
    bool truncated = false;    // left [-50, 50]^2
};

// H_{Im p} = (d_xi Im p, -d_x Im p).
PhasePoint hamilton_field(const GevreySymbol& sym, PhasePoint rho);

// One RK4 step of size dt (negative dt flows backward).
PhasePoint rk4_step(const GevreySymbol& sym, PhasePoint rho, double dt);

// RK4 flow of H_{Im p} from rho0 to time t_max (either sign) with fixed step dt.
Trajectory flow(const GevreySymbol& sym, PhasePoint rho0, double t_max, double dt = 1e-2);

struct LatticeSpec {
    PhaseBox box;
    int nx = 1;
    int nxi = 1;

    double dx() const { return nx > 1 ? (box.x_max - box.x_min) / (nx - 1) : 0.0; }
    double dxi() const { return nxi > 1 ? (box.xi_max - box.xi_min) / (nxi - 1) : 0.0; }
    PhasePoint node(int i, int j) const { return {box.x_min + i * dx(), box.xi_min + j * dxi()}; }
    std::size_t size() const { return static_cast<std::size_t>(nx) * nxi; }
};

// Nodes with |p - z0| <= delta, where p and z0 are the model's effective symbol and target.
std::vector<PhasePoint> numerical_zero_set(const ModelInstance& model, const LatticeSpec& lattice, double delta);

// 81 x 81 lattice over the zero-set hint box (odd counts keep the box center on the lattice).
LatticeSpec hint_lattice(const ModelInstance& model, int n = 81);

struct NontrappingReport {
    bool ok = false;
    double worst_escape_time = 0.0;
    std::size_t zero_points = 0;
    std::optional<PhasePoint> trapped_point;
};

// Throws ConfigError if the lattice finds no zero point.
NontrappingReport nontrapping_check(const ModelInstance& model, double delta, double epsilon, double T);

struct EscapeParams {
    double T = 4.0;
    double dt = 1e-2;
    double zero_delta = 1e-3;
};

// Smooth ball cutoff: 1 within inner radius, 0 beyond outer radius.
struct BallCutoff {
    PhasePoint center;
    double inner = 0.0;
    double outer = 0.0;
    double operator()(PhasePoint rho) const;
};

// Center at the hint box center, inner radius = box diagonal, outer radius = 2 x diagonal.
BallCutoff default_cutoff(const ModelInstance& model);

// Lattice covering the cutoff ball with two spare nodes per side; (2k + 1) nodes per axis.
LatticeSpec escape_lattice(const ModelInstance& model, int k = 40);

struct EscapeSample {
    double G = 0.0;
    double HG = 0.0; // derivative of G along the flow, fourth-order difference with step dt
};

// G(rho) = chi_cut(rho) [ -int chi_T(t) Re p(Phi_t rho) dt + int chi_T(t) Re p(Phi_{-t} rho) dt ].
EscapeSample escape_sample(const GevreySymbol& sym, const BallCutoff& cut, const EscapeParams& params, PhasePoint rho);

// Closed form 2 Re p + int chi_T'(t) [Re p(Phi_t) + Re p(Phi_{-t})] dt, valid where chi_cut == 1.
double escape_derivative_closed_form(const GevreySymbol& sym, const EscapeParams& params, PhasePoint rho);

struct EscapeField {
    LatticeSpec lattice;
    std::vector<double> G;  // index j * nx + i for node (i, j)
    std::vector<double> HG;
    std::vector<PhasePoint> zero_points;
    double margin_c = 0.0;
    PhasePoint worst_zero_point;
    BallCutoff cutoff;
    EscapeParams params;
    GevreySymbol symbol; // effective symbol the field was built for

    double cutoff_radius() const { return cutoff.outer; }
    double at(int i, int j) const { return G[static_cast<std::size_t>(j) * lattice.nx + i]; }
    double hg_at(int i, int j) const { return HG[static_cast<std::size_t>(j) * lattice.nx + i]; }
    // Fourth-order centered lattice gradient (dG/dx, dG/dxi); needs two nodes on each side.
    PhasePoint lattice_gradient(int i, int j) const;
    // Piecewise-cubic interpolation; 0 outside the cutoff ball. Throws GridError if not covered.
    double value_at(PhasePoint rho) const;
    // Fourth-order differences of value_at with the lattice spacings as steps.
    PhasePoint gradient_at(PhasePoint rho) const;
    double sup_abs() const;
};

// Throws EscapeError when margin_c <= 0 (reports the offending zero point).
EscapeField build_escape(const ModelInstance& model, const EscapeParams& params, const LatticeSpec& lattice);
EscapeField build_escape(const ModelInstance& model, const EscapeParams& params = {});
// Serial reference for build_escape.
EscapeField build_escape_reference(const ModelInstance& model, const EscapeParams& params, const LatticeSpec& lattice);

inline constexpr double kDefaultDeformationCap = 0.5;

struct DeformationCheck {
    double t = 0.0;
    double gamma_measured = 0.0;
    PhaseBox omega_box;
    PhasePoint argmin;
    int ext_order = 2;
};

// min over Omega of Re p~(rho + i t H_G(rho)) / |t|. Omega is the zero-set hint box, sampled n x n.
// Throws std::invalid_argument for t >= 0, ConfigError for |t| > t0_cap, DeformationError if gamma <= 0.
DeformationCheck check_deformed_ellipticity(const ModelInstance& model, const EscapeField& esc, double t, int ext_order,
                                            double t0_cap = kDefaultDeformationCap, int n = 41);

// Largest |t| = 0.005 * 2^k <= cap with gamma_measured > 0 (0 if none).
double largest_valid_deformation(const ModelInstance& model, const EscapeField& esc, int ext_order,
                                 double t0_cap = kDefaultDeformationCap);

void write_escape_csv(const std::filesystem::path& path, const EscapeField& esc);
void write_escape_summary(const std::filesystem::path& path, const EscapeField& esc,
                          const std::optional<DeformationCheck>& check);

} // namespace gps
