#include "gps/symbols.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace gps {

namespace {

constexpr double kFlatCutoff = 700.0;

double combined_order(double a, double b)
{
    if(a == kAnalyticOrder) return b;
    if(b == kAnalyticOrder) return a;
    return std::max(a, b);
}

ScalarJet e2_jet(double t)
{
    if(t <= 0.0) return {};
    double u = 1.0 / t;
    if(u > kFlatCutoff) return {};
    double e = std::exp(-u);
    return {e, e * u * u, e * (u * u * u * u - 2.0 * u * u * u)};
}

GevreySymbol transport_symbol(std::string tag, std::function<ScalarJet(double)> f, double order)
{
    GevreySymbol sym;
    sym.tag = std::move(tag);
    sym.eval = [f](double x, double xi) { return cplx(f(x).value, std::tanh(xi)); };
    sym.grad = [f](double x, double xi) {
        double sech = 1.0 / std::cosh(xi);
        return SymbolGradient{f(x).d1, cplx(0.0, sech * sech)};
    };
    sym.hess = [f](double x, double xi) {
        double sech = 1.0 / std::cosh(xi);
        return SymbolHessian{f(x).d2, 0.0, cplx(0.0, -2.0 * std::tanh(xi) * sech * sech)};
    };
    sym.order_s = order;
    sym.bound_C = std::sqrt(2.0);
    sym.xi_extent = [](double) { return 4.0; };
    return sym;
}

} // namespace

double PhaseBox::diagonal() const
{
    return std::hypot(x_max - x_min, xi_max - xi_min);
}

double free_radius_exponent(const GevreySymbol& sym)
{
    return sym.is_analytic() ? 0.0 : 1.0 - 1.0 / sym.order_s;
}

double gevrey_flat(double s, double t)
{
    return gevrey_flat_jet(s, t).value;
}

ScalarJet gevrey_flat_jet(double s, double t)
{
    if(!(s > 1.0)) throw std::invalid_argument(fmt::format("invalid Gevrey order s = {} (need s > 1)", s));
    if(t <= 0.0) return {};
    double a = 1.0 / (s - 1.0);
    double u = std::pow(t, -a);
    if(u > kFlatCutoff) return {};
    double e = std::exp(-u);
    double g = a * u / t;
    double d1 = e * g;
    double d2 = e * (g * g - a * (a + 1.0) * u / (t * t));
    return {e, d1, d2};
}

ScalarJet smooth_step(double u)
{
    if(u <= 0.0) return {1.0, 0.0, 0.0};
    if(u >= 1.0) return {0.0, 0.0, 0.0};
    ScalarJet ea = e2_jet(1.0 - u);
    ScalarJet eb = e2_jet(u);
    double a = ea.value, a1 = -ea.d1, a2 = ea.d2;
    double b1 = eb.d1, b2 = eb.d2;
    double d = a + eb.value, d1 = a1 + b1, d2 = a2 + b2;
    double num1 = a1 * d - a * d1;
    double s = a / d;
    double s1 = num1 / (d * d);
    double s2 = (a2 * d - a * d2) / (d * d) - 2.0 * d1 * num1 / (d * d * d);
    return {s, s1, s2};
}

ModelInstance make_davies()
{
    GevreySymbol sym;
    sym.tag = "davies";
    sym.eval = [](double x, double xi) { return cplx(xi * xi, x * x); };
    sym.grad = [](double x, double xi) { return SymbolGradient{cplx(0.0, 2.0 * x), 2.0 * xi}; };
    sym.hess = [](double, double) { return SymbolHessian{cplx(0.0, 2.0), 0.0, 2.0}; };
    sym.zero_set_hint = PhaseBox{-0.5, 0.5, -0.5, 0.5};
    // Resolves eigenfunctions up to energy 20h.
    sym.xi_extent = [](double h) { return 3.0 * std::sqrt(20.0 * h); };
    ModelInstance m;
    m.symbol = std::move(sym);
    m.family = ModelFamily::davies;
    m.outward = std::polar(1.0, -0.75 * M_PI);
    return m;
}

ModelInstance make_gevrey_transport(double s)
{
    if(!(s > 1.0)) throw std::invalid_argument(fmt::format("invalid Gevrey order s = {} (need s > 1)", s));
    auto f = [s](double x) {
        ScalarJet e = gevrey_flat_jet(s, x * x - 1.0);
        return ScalarJet{e.value, 2.0 * x * e.d1, 2.0 * e.d1 + 4.0 * x * x * e.d2};
    };
    ModelInstance m;
    m.symbol = transport_symbol(fmt::format("gevrey-transport:s={}", s), f, s);
    m.symbol.zero_set_hint = PhaseBox{-1.1, 1.1, -0.1, 0.1};
    m.family = ModelFamily::gevrey_transport;
    return m;
}

ModelInstance make_analytic_transport()
{
    auto f = [](double x) {
        double q = 1.0 + x * x;
        return ScalarJet{x * x / q, 2.0 * x / (q * q), (2.0 - 6.0 * x * x) / (q * q * q)};
    };
    ModelInstance m;
    m.symbol = transport_symbol("analytic-transport", f, kAnalyticOrder);
    m.symbol.zero_set_hint = PhaseBox{-0.1, 0.1, -0.1, 0.1};
    m.family = ModelFamily::analytic_transport;
    return m;
}

ModelInstance make_trapped_toy()
{
    GevreySymbol sym;
    sym.tag = "trapped-toy";
    sym.eval = [](double x, double) { return cplx(0.0, x * x); };
    sym.grad = [](double x, double) { return SymbolGradient{cplx(0.0, 2.0 * x), 0.0}; };
    sym.hess = [](double, double) { return SymbolHessian{cplx(0.0, 2.0), 0.0, 0.0}; };
    sym.zero_set_hint = PhaseBox{-0.5, 0.5, -0.5, 0.5};
    ModelInstance m;
    m.symbol = std::move(sym);
    return m;
}

ModelInstance make_rotated_transport(double s, double angle)
{
    ModelInstance base = make_gevrey_transport(s);
    cplx rot = std::polar(1.0, angle);
    ModelInstance m;
    m.symbol = linear_combination(rot, base.symbol, 0.0, constant_symbol(0.0));
    m.symbol.tag = fmt::format("rotated-transport:s={},angle={}", s, angle);
    m.symbol.order_s = s;
    m.symbol.zero_set_hint = base.symbol.zero_set_hint;
    m.symbol.xi_extent = base.symbol.xi_extent;
    m.multiplier_q = constant_symbol(std::conj(rot));
    m.outward = -rot;
    return m;
}

GevreySymbol effective_symbol(const ModelInstance& model)
{
    if(!model.multiplier_q) return model.symbol;
    GevreySymbol shifted = linear_combination(1.0, model.symbol, -model.z0, constant_symbol(1.0));
    GevreySymbol out = product(*model.multiplier_q, shifted);
    out.tag = model.symbol.tag + "#reduced";
    out.zero_set_hint = model.symbol.zero_set_hint;
    return out;
}

cplx effective_z0(const ModelInstance& model)
{
    return model.multiplier_q ? cplx(0.0, 0.0) : model.z0;
}

cplx taylor_extension(const GevreySymbol& sym, int order, PhasePoint rho_re, PhasePoint rho_im)
{
    if(order != 1 && order != 2) throw std::invalid_argument(fmt::format("taylor extension order {} not in {{1,2}}", order));
    cplx p = sym.eval(rho_re.x, rho_re.xi);
    if(rho_im.x == 0.0 && rho_im.xi == 0.0) return p;
    const cplx I(0.0, 1.0);
    SymbolGradient g = sym.grad(rho_re.x, rho_re.xi);
    p += I * (g.dx * rho_im.x + g.dxi * rho_im.xi);
    if(order == 2) {
        SymbolHessian H = sym.hess(rho_re.x, rho_re.xi);
        p -= 0.5 * (H.xx * rho_im.x * rho_im.x + 2.0 * H.xxi * rho_im.x * rho_im.xi + H.xixi * rho_im.xi * rho_im.xi);
    }
    return p;
}

GevreySymbol constant_symbol(cplx c)
{
    GevreySymbol sym;
    sym.tag = fmt::format("const({},{})", c.real(), c.imag());
    sym.eval = [c](double, double) { return c; };
    sym.grad = [](double, double) { return SymbolGradient{}; };
    sym.hess = [](double, double) { return SymbolHessian{}; };
    sym.bound_C = std::max(std::abs(c), 1e-300);
    return sym;
}

GevreySymbol position_symbol()
{
    GevreySymbol sym;
    sym.tag = "x";
    sym.eval = [](double x, double) { return cplx(x); };
    sym.grad = [](double, double) { return SymbolGradient{1.0, 0.0}; };
    sym.hess = [](double, double) { return SymbolHessian{}; };
    return sym;
}

GevreySymbol momentum_symbol()
{
    GevreySymbol sym;
    sym.tag = "xi";
    sym.eval = [](double, double xi) { return cplx(xi); };
    sym.grad = [](double, double) { return SymbolGradient{0.0, 1.0}; };
    sym.hess = [](double, double) { return SymbolHessian{}; };
    return sym;
}

GevreySymbol product(const GevreySymbol& a, const GevreySymbol& b)
{
    GevreySymbol sym;
    sym.tag = "(" + a.tag + ")*(" + b.tag + ")";
    sym.eval = [a, b](double x, double xi) { return a.eval(x, xi) * b.eval(x, xi); };
    sym.grad = [a, b](double x, double xi) {
        cplx va = a.eval(x, xi), vb = b.eval(x, xi);
        SymbolGradient ga = a.grad(x, xi), gb = b.grad(x, xi);
        return SymbolGradient{ga.dx * vb + va * gb.dx, ga.dxi * vb + va * gb.dxi};
    };
    sym.hess = [a, b](double x, double xi) {
        cplx va = a.eval(x, xi), vb = b.eval(x, xi);
        SymbolGradient ga = a.grad(x, xi), gb = b.grad(x, xi);
        SymbolHessian ha = a.hess(x, xi), hb = b.hess(x, xi);
        return SymbolHessian{ha.xx * vb + 2.0 * ga.dx * gb.dx + va * hb.xx,
                             ha.xxi * vb + ga.dx * gb.dxi + ga.dxi * gb.dx + va * hb.xxi,
                             ha.xixi * vb + 2.0 * ga.dxi * gb.dxi + va * hb.xixi};
    };
    sym.order_s = combined_order(a.order_s, b.order_s);
    sym.bound_C = a.bound_C * b.bound_C;
    sym.zero_set_hint = a.zero_set_hint ? a.zero_set_hint : b.zero_set_hint;
    auto ea = a.xi_extent, eb = b.xi_extent;
    sym.xi_extent = [ea, eb](double h) { return std::max(ea(h), eb(h)); };
    return sym;
}

GevreySymbol linear_combination(cplx alpha, const GevreySymbol& a, cplx beta, const GevreySymbol& b)
{
    GevreySymbol sym;
    sym.tag = fmt::format("({},{})*{}+({},{})*{}", alpha.real(), alpha.imag(), a.tag, beta.real(), beta.imag(), b.tag);
    sym.eval = [=](double x, double xi) { return alpha * a.eval(x, xi) + beta * b.eval(x, xi); };
    sym.grad = [=](double x, double xi) {
        SymbolGradient ga = a.grad(x, xi), gb = b.grad(x, xi);
        return SymbolGradient{alpha * ga.dx + beta * gb.dx, alpha * ga.dxi + beta * gb.dxi};
    };
    sym.hess = [=](double x, double xi) {
        SymbolHessian ha = a.hess(x, xi), hb = b.hess(x, xi);
        return SymbolHessian{alpha * ha.xx + beta * hb.xx, alpha * ha.xxi + beta * hb.xxi,
                             alpha * ha.xixi + beta * hb.xixi};
    };
    sym.order_s = combined_order(a.order_s, b.order_s);
    sym.bound_C = std::abs(alpha) * a.bound_C + std::abs(beta) * b.bound_C;
    sym.zero_set_hint = a.zero_set_hint ? a.zero_set_hint : b.zero_set_hint;
    auto ea = a.xi_extent, eb = b.xi_extent;
    sym.xi_extent = [ea, eb](double h) { return std::max(ea(h), eb(h)); };
    return sym;
}

GevreySymbol band_limited(const GevreySymbol& sym, double xi_in, double xi_out)
{
    if(!(xi_out > xi_in && xi_in >= 0.0)) throw std::invalid_argument("band_limited needs 0 <= xi_in < xi_out");
    double w = xi_out - xi_in;
    GevreySymbol chi;
    chi.tag = "chi";
    auto jet = [xi_in, w](double xi) {
        ScalarJet s = smooth_step((std::abs(xi) - xi_in) / w);
        double sg = xi < 0.0 ? -1.0 : 1.0;
        return ScalarJet{s.value, sg * s.d1 / w, s.d2 / (w * w)};
    };
    chi.eval = [jet](double, double xi) { return cplx(jet(xi).value); };
    chi.grad = [jet](double, double xi) { return SymbolGradient{0.0, jet(xi).d1}; };
    chi.hess = [jet](double, double xi) { return SymbolHessian{0.0, 0.0, jet(xi).d2}; };
    chi.order_s = 2.0;
    chi.bound_C = 1.0;
    GevreySymbol out = product(sym, chi);
    out.tag = fmt::format("band({},{},{})", sym.tag, xi_in, xi_out);
    out.order_s = combined_order(sym.order_s, 2.0);
    out.bound_C = sym.bound_C;
    out.xi_extent = [xi_out](double) { return xi_out; };
    return out;
}

} // namespace gps
