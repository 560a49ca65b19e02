#include "gps/geometry.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

#include "gps/error.hpp"
#include "gps/parallel.hpp"

namespace gps {

namespace {

bool inside_flow_box(PhasePoint p)
{
    return std::abs(p.x) <= kFlowBox && std::abs(p.xi) <= kFlowBox;
}

PhasePoint axpy(PhasePoint a, double s, PhasePoint b)
{
    return {a.x + s * b.x, a.xi + s * b.xi};
}

int quadrature_intervals(const EscapeParams& p)
{
    int m = static_cast<int>(std::ceil(2.0 * p.T / p.dt - 1e-9));
    return m + (m & 1);
}

std::vector<double> simpson_weights(int m, double dt)
{
    std::vector<double> w(m + 1);
    for(int i = 0; i <= m; ++i) w[i] = dt / 3.0 * ((i == 0 || i == m) ? 1.0 : (i & 1) ? 4.0 : 2.0);
    return w;
}

// Samples of Re p and the points along the flow line through rho, indices -count..count.
struct FlowLine {
    int count;
    std::vector<double> re_p;
    std::vector<PhasePoint> points;

    double r(int j) const { return re_p[static_cast<std::size_t>(j + count)]; }
    PhasePoint pt(int j) const { return points[static_cast<std::size_t>(j + count)]; }
};

FlowLine flow_line(const GevreySymbol& sym, PhasePoint rho, int count, double dt)
{
    FlowLine line{count, std::vector<double>(2 * count + 1), std::vector<PhasePoint>(2 * count + 1)};
    line.points[count] = rho;
    line.re_p[count] = sym.eval(rho.x, rho.xi).real();
    PhasePoint fwd = rho, bwd = rho;
    for(int i = 1; i <= count; ++i) {
        fwd = rk4_step(sym, fwd, dt);
        bwd = rk4_step(sym, bwd, -dt);
        line.points[count + i] = fwd;
        line.points[count - i] = bwd;
        line.re_p[count + i] = sym.eval(fwd.x, fwd.xi).real();
        line.re_p[count - i] = sym.eval(bwd.x, bwd.xi).real();
    }
    return line;
}

std::array<double, 4> catmull_rom(double t)
{
    double t2 = t * t, t3 = t2 * t;
    return {0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2), 0.5 * (-3 * t3 + 4 * t2 + t), 0.5 * (t3 - t2)};
}

DeformationCheck measure_gamma(const ModelInstance& model, const EscapeField& esc, double t, int ext_order, int n)
{
    GevreySymbol sym = effective_symbol(model);
    cplx z0 = effective_z0(model);
    PhaseBox box = *model.symbol.zero_set_hint;
    DeformationCheck out{t, std::numeric_limits<double>::infinity(), box, {}, ext_order};
    for(int j = 0; j < n; ++j) {
        for(int i = 0; i < n; ++i) {
            PhasePoint rho{box.x_min + (box.x_max - box.x_min) * i / (n - 1), box.xi_min + (box.xi_max - box.xi_min) * j / (n - 1)};
            PhasePoint g = esc.gradient_at(rho);
            PhasePoint im{t * g.xi, -t * g.x};
            double v = (taylor_extension(sym, ext_order, rho, im) - z0).real() / std::abs(t);
            if(v < out.gamma_measured) {
                out.gamma_measured = v;
                out.argmin = rho;
            }
        }
    }
    return out;
}

} // namespace

PhasePoint hamilton_field(const GevreySymbol& sym, PhasePoint rho)
{
    SymbolGradient g = sym.grad(rho.x, rho.xi);
    return {g.dxi.imag(), -g.dx.imag()};
}

PhasePoint rk4_step(const GevreySymbol& sym, PhasePoint p, double dt)
{
    PhasePoint k1 = hamilton_field(sym, p);
    PhasePoint k2 = hamilton_field(sym, axpy(p, 0.5 * dt, k1));
    PhasePoint k3 = hamilton_field(sym, axpy(p, 0.5 * dt, k2));
    PhasePoint k4 = hamilton_field(sym, axpy(p, dt, k3));
    return {p.x + dt / 6.0 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x), p.xi + dt / 6.0 * (k1.xi + 2 * k2.xi + 2 * k3.xi + k4.xi)};
}

Trajectory flow(const GevreySymbol& sym, PhasePoint rho0, double t_max, double dt)
{
    if(!(dt > 0.0)) throw std::invalid_argument("flow step dt must be positive");
    if(std::abs(t_max) / dt > 1e6) throw std::invalid_argument("flow step budget |t_max|/dt exceeds 1e6");
    long steps = std::max(1L, std::lround(std::abs(t_max) / dt));
    double h = t_max / static_cast<double>(steps);
    Trajectory tr;
    tr.times.push_back(0.0);
    tr.points.push_back(rho0);
    double im0 = sym.eval(rho0.x, rho0.xi).imag();
    PhasePoint p = rho0;
    for(long n = 1; n <= steps && t_max != 0.0; ++n) {
        p = rk4_step(sym, p, h);
        tr.times.push_back(n * h);
        tr.points.push_back(p);
        tr.energy_drift = std::max(tr.energy_drift, std::abs(sym.eval(p.x, p.xi).imag() - im0));
        if(!inside_flow_box(p)) {
            tr.truncated = true;
            break;
        }
    }
    return tr;
}

std::vector<PhasePoint> numerical_zero_set(const ModelInstance& model, const LatticeSpec& lattice, double delta)
{
    GevreySymbol sym = effective_symbol(model);
    cplx z0 = effective_z0(model);
    std::vector<PhasePoint> out;
    for(int j = 0; j < lattice.nxi; ++j)
        for(int i = 0; i < lattice.nx; ++i) {
            PhasePoint p = lattice.node(i, j);
            if(std::abs(sym.eval(p.x, p.xi) - z0) <= delta) out.push_back(p);
        }
    return out;
}

LatticeSpec hint_lattice(const ModelInstance& model, int n)
{
    if(!model.symbol.zero_set_hint) throw ConfigError(fmt::format("model '{}' has no zero-set hint box", model.tag()));
    return {*model.symbol.zero_set_hint, n, n};
}

NontrappingReport nontrapping_check(const ModelInstance& model, double delta, double epsilon, double T)
{
    const double dt = 1e-2;
    GevreySymbol sym = effective_symbol(model);
    std::vector<PhasePoint> zeros = numerical_zero_set(model, hint_lattice(model), delta);
    if(zeros.empty())
        throw ConfigError(fmt::format("no lattice point with |p - z0| <= {} in the hint box of '{}'", delta, model.tag()));
    NontrappingReport rep;
    rep.ok = true;
    rep.zero_points = zeros.size();
    for(PhasePoint z : zeros) {
        double escape = std::numeric_limits<double>::infinity();
        for(double dir : {1.0, -1.0}) {
            Trajectory tr = flow(sym, z, dir * T, dt);
            for(std::size_t k = 0; k < tr.points.size(); ++k) {
                if(sym.eval(tr.points[k].x, tr.points[k].xi).real() > epsilon) {
                    escape = std::min(escape, std::abs(tr.times[k]));
                    break;
                }
            }
        }
        if(!std::isfinite(escape)) {
            rep.ok = false;
            rep.trapped_point = z;
            rep.worst_escape_time = std::numeric_limits<double>::infinity();
            return rep;
        }
        rep.worst_escape_time = std::max(rep.worst_escape_time, escape);
    }
    return rep;
}

double BallCutoff::operator()(PhasePoint rho) const
{
    double r = std::hypot(rho.x - center.x, rho.xi - center.xi);
    return smooth_step((r - inner) / (outer - inner)).value;
}

BallCutoff default_cutoff(const ModelInstance& model)
{
    if(!model.symbol.zero_set_hint) throw ConfigError(fmt::format("model '{}' has no zero-set hint box", model.tag()));
    const PhaseBox& b = *model.symbol.zero_set_hint;
    return {b.center(), b.diagonal(), 2.0 * b.diagonal()};
}

LatticeSpec escape_lattice(const ModelInstance& model, int k)
{
    BallCutoff cut = default_cutoff(model);
    double step = cut.outer / k;
    double half = cut.outer + 2.0 * step;
    PhaseBox box{cut.center.x - half, cut.center.x + half, cut.center.xi - half, cut.center.xi + half};
    return {box, 2 * (k + 2) + 1, 2 * (k + 2) + 1};
}

EscapeSample escape_sample(const GevreySymbol& sym, const BallCutoff& cut, const EscapeParams& params, PhasePoint rho)
{
    const int m = quadrature_intervals(params);
    const std::vector<double> w = simpson_weights(m, params.dt);
    std::vector<double> chi(m + 1);
    for(int i = 0; i <= m; ++i) chi[i] = w[i] * smooth_step((i * params.dt - params.T) / params.T).value;
    FlowLine line = flow_line(sym, rho, m + 2, params.dt);
    auto g_at = [&](int k) {
        double c = cut(line.pt(k));
        if(c == 0.0) return 0.0;
        double acc = 0.0;
        for(int i = 0; i <= m; ++i) acc += chi[i] * (line.r(k - i) - line.r(k + i));
        return c * acc;
    };
    double g0 = g_at(0);
    double hg = (-g_at(2) + 8.0 * g_at(1) - 8.0 * g_at(-1) + g_at(-2)) / (12.0 * params.dt);
    return {g0, hg};
}

double escape_derivative_closed_form(const GevreySymbol& sym, const EscapeParams& params, PhasePoint rho)
{
    const int m = quadrature_intervals(params);
    const std::vector<double> w = simpson_weights(m, params.dt);
    FlowLine line = flow_line(sym, rho, m, params.dt);
    double acc = 2.0 * line.r(0);
    for(int i = 0; i <= m; ++i) {
        double d = smooth_step((i * params.dt - params.T) / params.T).d1 / params.T;
        acc += w[i] * d * (line.r(i) + line.r(-i));
    }
    return acc;
}

PhasePoint EscapeField::lattice_gradient(int i, int j) const
{
    if(i < 2 || j < 2 || i > lattice.nx - 3 || j > lattice.nxi - 3)
        throw GridError(fmt::format("lattice gradient at node ({}, {}) needs two neighbours per side", i, j));
    double gx = (-at(i + 2, j) + 8 * at(i + 1, j) - 8 * at(i - 1, j) + at(i - 2, j)) / (12 * lattice.dx());
    double gxi = (-at(i, j + 2) + 8 * at(i, j + 1) - 8 * at(i, j - 1) + at(i, j - 2)) / (12 * lattice.dxi());
    return {gx, gxi};
}

double EscapeField::value_at(PhasePoint rho) const
{
    if(std::hypot(rho.x - cutoff.center.x, rho.xi - cutoff.center.xi) >= cutoff.outer) return 0.0;
    double u = (rho.x - lattice.box.x_min) / lattice.dx();
    double v = (rho.xi - lattice.box.xi_min) / lattice.dxi();
    int i0 = static_cast<int>(std::floor(u)), j0 = static_cast<int>(std::floor(v));
    if(i0 < 1 || j0 < 1 || i0 + 2 > lattice.nx - 1 || j0 + 2 > lattice.nxi - 1)
        throw GridError(fmt::format("escape lattice does not cover ({}, {})", rho.x, rho.xi));
    auto wx = catmull_rom(u - i0), wy = catmull_rom(v - j0);
    double acc = 0.0;
    for(int b = 0; b < 4; ++b) {
        double row = 0.0;
        for(int a = 0; a < 4; ++a) row += wx[a] * at(i0 - 1 + a, j0 - 1 + b);
        acc += wy[b] * row;
    }
    return acc;
}

PhasePoint EscapeField::gradient_at(PhasePoint rho) const
{
    const double hx = lattice.dx(), hy = lattice.dxi();
    auto f = [&](double dx, double dy) { return value_at({rho.x + dx, rho.xi + dy}); };
    double gx = (-f(2 * hx, 0) + 8 * f(hx, 0) - 8 * f(-hx, 0) + f(-2 * hx, 0)) / (12 * hx);
    double gxi = (-f(0, 2 * hy) + 8 * f(0, hy) - 8 * f(0, -hy) + f(0, -2 * hy)) / (12 * hy);
    return {gx, gxi};
}

double EscapeField::sup_abs() const
{
    double s = 0.0;
    for(double g : G) s = std::max(s, std::abs(g));
    return s;
}

namespace {

EscapeField prepare_field(const ModelInstance& model, const EscapeParams& params, const LatticeSpec& lattice)
{
    if(!(params.T > 0.0) || !(params.dt > 0.0)) throw ConfigError("escape parameters T and dt must be positive");
    EscapeField f;
    f.lattice = lattice;
    f.params = params;
    f.cutoff = default_cutoff(model);
    f.symbol = effective_symbol(model);
    f.G.assign(lattice.size(), 0.0);
    f.HG.assign(lattice.size(), 0.0);
    return f;
}

void finish_field(const ModelInstance& model, EscapeField& f)
{
    cplx z0 = effective_z0(model);
    double worst = -std::numeric_limits<double>::infinity();
    for(int j = 0; j < f.lattice.nxi; ++j)
        for(int i = 0; i < f.lattice.nx; ++i) {
            PhasePoint p = f.lattice.node(i, j);
            if(std::abs(f.symbol.eval(p.x, p.xi) - z0) > f.params.zero_delta) continue;
            f.zero_points.push_back(p);
            if(f.hg_at(i, j) > worst) {
                worst = f.hg_at(i, j);
                f.worst_zero_point = p;
            }
        }
    if(f.zero_points.empty())
        throw ConfigError(fmt::format("escape lattice of '{}' contains no point with |p - z0| <= {}", model.tag(),
                                      f.params.zero_delta));
    f.margin_c = -worst;
    if(!(f.margin_c > 0.0))
        throw EscapeError(fmt::format("escape construction failed for '{}': H G = {:.6g} >= 0 at zero point ({}, {})",
                                      model.tag(), worst, f.worst_zero_point.x, f.worst_zero_point.xi));
}

} // namespace

EscapeField build_escape(const ModelInstance& model, const EscapeParams& params, const LatticeSpec& lattice)
{
    configure_workers();
    EscapeField f = prepare_field(model, params, lattice);
    const long total = static_cast<long>(lattice.size());
#pragma omp parallel for schedule(dynamic, 16)
    for(long idx = 0; idx < total; ++idx) {
        int i = static_cast<int>(idx % lattice.nx), j = static_cast<int>(idx / lattice.nx);
        EscapeSample s = escape_sample(f.symbol, f.cutoff, params, lattice.node(i, j));
        f.G[idx] = s.G;
        f.HG[idx] = s.HG;
    }
    finish_field(model, f);
    return f;
}

EscapeField build_escape(const ModelInstance& model, const EscapeParams& params)
{
    return build_escape(model, params, escape_lattice(model));
}

EscapeField build_escape_reference(const ModelInstance& model, const EscapeParams& params, const LatticeSpec& lattice)
{
    EscapeField f = prepare_field(model, params, lattice);
    for(int j = 0; j < lattice.nxi; ++j)
        for(int i = 0; i < lattice.nx; ++i) {
            EscapeSample s = escape_sample(f.symbol, f.cutoff, params, lattice.node(i, j));
            f.G[static_cast<std::size_t>(j) * lattice.nx + i] = s.G;
            f.HG[static_cast<std::size_t>(j) * lattice.nx + i] = s.HG;
        }
    finish_field(model, f);
    return f;
}

DeformationCheck check_deformed_ellipticity(const ModelInstance& model, const EscapeField& esc, double t, int ext_order,
                                            double t0_cap, int n)
{
    if(!(t < 0.0)) throw std::invalid_argument(fmt::format("deformation size t = {} must be negative", t));
    if(ext_order != 1 && ext_order != 2) throw std::invalid_argument("extension order must be 1 or 2");
    if(std::abs(t) > t0_cap) throw ConfigError(fmt::format("|t| = {} exceeds the deformation cap t0 = {}", std::abs(t), t0_cap));
    if(n < 2) throw ConfigError("deformation sampling needs n >= 2");
    DeformationCheck c = measure_gamma(model, esc, t, ext_order, n);
    if(!(c.gamma_measured > 0.0))
        throw DeformationError(fmt::format("deformed symbol of '{}' not elliptic at t = {}: gamma = {:.6g} at ({}, {})",
                                           model.tag(), t, c.gamma_measured, c.argmin.x, c.argmin.xi));
    return c;
}

double largest_valid_deformation(const ModelInstance& model, const EscapeField& esc, int ext_order, double t0_cap)
{
    double best = 0.0;
    for(double a = 0.005; a <= t0_cap; a *= 2.0) {
        if(measure_gamma(model, esc, -a, ext_order, 41).gamma_measured > 0.0)
            best = a;
        else
            break;
    }
    return best;
}

void write_escape_csv(const std::filesystem::path& path, const EscapeField& esc)
{
    std::ofstream os(path);
    if(!os) throw ConfigError(fmt::format("cannot open '{}' for writing", path.string()));
    os << "x,xi,G,HG\n";
    for(int j = 0; j < esc.lattice.nxi; ++j)
        for(int i = 0; i < esc.lattice.nx; ++i) {
            PhasePoint p = esc.lattice.node(i, j);
            os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", p.x, p.xi, esc.at(i, j), esc.hg_at(i, j));
        }
    if(!os) throw ConfigError(fmt::format("write to '{}' failed", path.string()));
}

void write_escape_summary(const std::filesystem::path& path, const EscapeField& esc,
                          const std::optional<DeformationCheck>& check)
{
    nlohmann::ordered_json j;
    j["symbol"] = esc.symbol.tag;
    j["margin_c"] = esc.margin_c;
    j["T"] = esc.params.T;
    j["dt"] = esc.params.dt;
    j["cutoff_radius"] = esc.cutoff.outer;
    j["zero_points"] = esc.zero_points.size();
    j["sup_G"] = esc.sup_abs();
    if(check) {
        j["t"] = check->t;
        j["gamma_measured"] = check->gamma_measured;
        j["ext_order"] = check->ext_order;
        j["omega_box"] = {check->omega_box.x_min, check->omega_box.x_max, check->omega_box.xi_min, check->omega_box.xi_max};
    }
    std::ofstream os(path);
    if(!os) throw ConfigError(fmt::format("cannot open '{}' for writing", path.string()));
    os << j.dump(2) << "\n";
}

} // namespace gps
