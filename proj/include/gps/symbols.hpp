#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <string>

namespace gps {

using cplx = std::complex<double>;

struct PhasePoint {
    double x = 0.0;
    double xi = 0.0;
};

struct PhaseBox {
    double x_min = 0.0;
    double x_max = 0.0;
    double xi_min = 0.0;
    double xi_max = 0.0;

    bool contains(PhasePoint p) const
    {
        return p.x >= x_min && p.x <= x_max && p.xi >= xi_min && p.xi <= xi_max;
    }
    PhasePoint center() const { return {(x_min + x_max) / 2, (xi_min + xi_max) / 2}; }
    double diagonal() const;
    PhaseBox inflated(double margin) const
    {
        return {x_min - margin, x_max + margin, xi_min - margin, xi_max + margin};
    }
};

struct SymbolGradient {
    cplx dx;
    cplx dxi;
};

// Symmetric by construction: only the upper triangle is stored.
struct SymbolHessian {
    cplx xx;
    cplx xxi;
    cplx xixi;
};

inline constexpr double kAnalyticOrder = std::numeric_limits<double>::infinity();

struct GevreySymbol {
    std::string tag;
    std::function<cplx(double, double)> eval;
    std::function<SymbolGradient(double, double)> grad;
    std::function<SymbolHessian(double, double)> hess;
    double order_s = kAnalyticOrder;
    double bound_C = std::numeric_limits<double>::infinity();
    std::optional<PhaseBox> zero_set_hint;
    // Largest |xi| the discretization must resolve at a given h (0: no requirement).
    std::function<double(double)> xi_extent = [](double) { return 0.0; };

    cplx operator()(double x, double xi) const { return eval(x, xi); }
    bool is_analytic() const { return order_s == kAnalyticOrder; }
};

// Exponent 1 - 1/s of the free-region size; 0 for analytic symbols.
double free_radius_exponent(const GevreySymbol& sym);

enum class ModelFamily { davies, analytic_transport, gevrey_transport, custom };

struct ModelInstance {
    GevreySymbol symbol;
    cplx z0{0.0, 0.0};
    std::optional<GevreySymbol> multiplier_q;
    ModelFamily family = ModelFamily::custom;
    // Unit direction pointing from z0 away from the interior of the symbol range.
    cplx outward{-1.0, 0.0};

    const std::string& tag() const { return symbol.tag; }
};

// E_s(t) = exp(-t^{-1/(s-1)}) for t > 0, else 0.
double gevrey_flat(double s, double t);

struct ScalarJet {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

ScalarJet gevrey_flat_jet(double s, double t);

// Smooth step: 1 for u <= 0, 0 for u >= 1, built from E_2.
ScalarJet smooth_step(double u);

ModelInstance make_davies();
ModelInstance make_gevrey_transport(double s);
ModelInstance make_analytic_transport();
// p = i x^2: Re p vanishes identically, every trajectory is trapped.
ModelInstance make_trapped_toy();
// p = e^{i angle} (i tanh xi + E_s(x^2 - 1)) with multiplier q = e^{-i angle}.
ModelInstance make_rotated_transport(double s, double angle);

// Symbol with q (p - z0) and target 0 when a multiplier is present, else p itself.
GevreySymbol effective_symbol(const ModelInstance& model);
cplx effective_z0(const ModelInstance& model);

cplx taylor_extension(const GevreySymbol& sym, int order, PhasePoint rho_re, PhasePoint rho_im);

GevreySymbol constant_symbol(cplx c);
GevreySymbol position_symbol();
GevreySymbol momentum_symbol();
GevreySymbol product(const GevreySymbol& a, const GevreySymbol& b);
GevreySymbol linear_combination(cplx alpha, const GevreySymbol& a, cplx beta, const GevreySymbol& b);
// Multiplies by a cutoff chi(xi) equal to 1 on |xi| <= xi_in and 0 on |xi| >= xi_out.
GevreySymbol band_limited(const GevreySymbol& sym, double xi_in, double xi_out);

} // namespace gps
