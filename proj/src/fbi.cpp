#include "gps/fbi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <span>

#include <fmt/format.h>

#include "gps/error.hpp"
#include "gps/parallel.hpp"
#include "gps/svg.hpp"

namespace gps {

namespace {

constexpr double kKernelCut = 1e-17;

double weighted_norm2(std::span<const double> w, const Eigen::VectorXcd& U, double area)
{
    std::vector<double> terms(static_cast<std::size_t>(U.size()));
#pragma omp parallel for schedule(static)
    for(Eigen::Index n = 0; n < U.size(); ++n) terms[n] = std::norm(U[n]) * (w.empty() ? 1.0 : w[n]);
    return area * pairwise_sum(std::span<const double>(terms));
}

} // namespace

ComplexGrid ComplexGrid::covering(const ModelInstance& model, double h, double margin)
{
    if(!(h > 0.0)) throw ConfigError(fmt::format("h must be positive, got {}", h));
    if(!model.symbol.zero_set_hint) throw ConfigError(fmt::format("model '{}' has no zero-set hint box", model.tag()));
    const PhaseBox& b = *model.symbol.zero_set_hint;
    ComplexGrid g;
    g.re_center = 0.5 * (b.x_min + b.x_max);
    g.im_center = -0.5 * (b.xi_min + b.xi_max);
    g.re_span = 0.5 * (b.x_max - b.x_min) + margin;
    g.im_span = 0.5 * (b.xi_max - b.xi_min) + margin;
    const double step = 0.5 * std::sqrt(h);
    g.re_n = static_cast<int>(std::ceil(2.0 * g.re_span / step)) + 1;
    g.im_n = static_cast<int>(std::ceil(2.0 * g.im_span / step)) + 1;
    return g;
}

FBIOperator::FBIOperator(const RealGrid& real_grid, const ComplexGrid& cgrid, double h)
    : real_grid_(real_grid), cgrid_(cgrid), h_(h)
{
    if(!(h > 0.0)) throw ConfigError(fmt::format("h must be positive, got {}", h));
    if(cgrid.re_n < 2 || cgrid.im_n < 2) throw GridError("complex grid needs at least 2 x 2 nodes");
    const int N = real_grid.n_points;
    const double L = real_grid.half_width_L, dy = real_grid.spacing();
    const double decay = std::sqrt(-2.0 * h * std::log(kFbiDecayFloor));
    for(int i = 0; i < cgrid.re_n; ++i) {
        double a = cgrid.node(i, 0).real();
        if(a - decay < -L || a + decay > L - dy)
            throw GridError(fmt::format("FBI kernel at Re x = {:.4g} does not decay below {:g} inside the real grid "
                                        "[-{}, {}) at h = {}; enlarge L",
                                        a, kFbiDecayFloor, L, L, h));
    }

    const double width = std::sqrt(-2.0 * h * std::log(kKernelCut));
    band_lo_.resize(cgrid.re_n);
    band_len_.resize(cgrid.re_n);
    for(int i = 0; i < cgrid.re_n; ++i) {
        double a = cgrid.node(i, 0).real();
        int lo = std::max(0, static_cast<int>(std::ceil((a - width + L) / dy)));
        int hi = std::min(N - 1, static_cast<int>(std::floor((a + width + L) / dy)));
        band_lo_[i] = lo;
        band_len_[i] = hi - lo + 1;
    }
    offset_.resize(cgrid.size() + 1);
    offset_[0] = 0;
    for(int j = 0; j < cgrid.im_n; ++j)
        for(int i = 0; i < cgrid.re_n; ++i) {
            std::size_t n = cgrid.index(i, j);
            offset_[n + 1] = offset_[n] + band_len_[i];
        }
    kernel_.resize(offset_.back());

    const double scale = std::pow(h, -0.75) * dy;
#pragma omp parallel for schedule(static)
    for(std::size_t n = 0; n < cgrid.size(); ++n) {
        int i = static_cast<int>(n % cgrid.re_n), j = static_cast<int>(n / cgrid.re_n);
        cplx x = cgrid.node(i, j);
        for(int k = 0; k < band_len_[i]; ++k) {
            double d = x.real() - real_grid.node(band_lo_[i] + k);
            kernel_[offset_[n] + k] = scale * std::exp(-d * d / (2.0 * h)) * std::polar(1.0, -d * x.imag() / h);
        }
    }

    col_i_lo_.assign(N, cgrid.re_n);
    col_i_hi_.assign(N, -1);
    for(int i = 0; i < cgrid.re_n; ++i)
        for(int k = band_lo_[i]; k < band_lo_[i] + band_len_[i]; ++k) {
            col_i_lo_[k] = std::min(col_i_lo_[k], i);
            col_i_hi_[k] = std::max(col_i_hi_[k], i);
        }

    // Calibrate C on the coherent state centered at kappa^{-1} of the grid center.
    Eigen::VectorXcd g = coherent_state(real_grid, cgrid.re_center, -cgrid.im_center, h);
    double ratio = std::sqrt(real_grid.spacing() * g.squaredNorm()) / norm(apply(g));
    for(cplx& k : kernel_) k *= ratio;
    normalization_ = ratio;
}

Eigen::VectorXcd FBIOperator::apply(const Eigen::VectorXcd& u) const
{
    if(u.size() != real_grid_.n_points)
        throw ConfigError(fmt::format("FBI input has {} samples, grid has {}", u.size(), real_grid_.n_points));
    Eigen::VectorXcd U(static_cast<Eigen::Index>(cgrid_.size()));
#pragma omp parallel for schedule(static)
    for(std::size_t n = 0; n < cgrid_.size(); ++n) {
        int i = static_cast<int>(n % cgrid_.re_n);
        const cplx* K = kernel_.data() + offset_[n];
        const cplx* v = u.data() + band_lo_[i];
        cplx acc = 0.0;
        for(int k = 0; k < band_len_[i]; ++k) acc += K[k] * v[k];
        U[static_cast<Eigen::Index>(n)] = acc;
    }
    return U;
}

Eigen::VectorXcd FBIOperator::apply_reference(const Eigen::VectorXcd& u) const
{
    if(u.size() != real_grid_.n_points)
        throw ConfigError(fmt::format("FBI input has {} samples, grid has {}", u.size(), real_grid_.n_points));
    const double scale = normalization_ * std::pow(h_, -0.75) * real_grid_.spacing();
    Eigen::VectorXcd U(static_cast<Eigen::Index>(cgrid_.size()));
    for(int j = 0; j < cgrid_.im_n; ++j)
        for(int i = 0; i < cgrid_.re_n; ++i) {
            cplx x = cgrid_.node(i, j), acc = 0.0;
            for(int k = 0; k < real_grid_.n_points; ++k) {
                double d = x.real() - real_grid_.node(k);
                acc += std::exp(-d * d / (2.0 * h_)) * std::polar(1.0, -d * x.imag() / h_) * u[k];
            }
            U[static_cast<Eigen::Index>(cgrid_.index(i, j))] = scale * acc;
        }
    return U;
}

Eigen::VectorXcd FBIOperator::adjoint(const Eigen::VectorXcd& U) const
{
    if(static_cast<std::size_t>(U.size()) != cgrid_.size())
        throw ConfigError(fmt::format("Bargmann vector has {} samples, grid has {}", U.size(), cgrid_.size()));
    const int N = real_grid_.n_points;
    const double factor = cgrid_.cell_area() / real_grid_.spacing();
    Eigen::VectorXcd u(N);
#pragma omp parallel for schedule(static)
    for(int k = 0; k < N; ++k) {
        cplx acc = 0.0;
        for(int j = 0; j < cgrid_.im_n; ++j)
            for(int i = col_i_lo_[k]; i <= col_i_hi_[k]; ++i) {
                std::size_t n = cgrid_.index(i, j);
                acc += std::conj(kernel_[offset_[n] + (k - band_lo_[i])]) * U[static_cast<Eigen::Index>(n)];
            }
        u[k] = factor * acc;
    }
    return u;
}

double FBIOperator::norm(const Eigen::VectorXcd& U) const
{
    return std::sqrt(weighted_norm2({}, U, cgrid_.cell_area()));
}

FBIOperator make_fbi(const RealGrid& real_grid, const ComplexGrid& cgrid, double h)
{
    return FBIOperator(real_grid, cgrid, h);
}

PhasePoint BargmannWeight::lifted_real(std::size_t n) const
{
    cplx x = grid.node(static_cast<int>(n % grid.re_n), static_cast<int>(n / grid.re_n));
    return {x.real() + t * grad_G[n].x, -x.imag() + t * grad_G[n].xi};
}

PhasePoint BargmannWeight::lifted_imag(std::size_t n) const
{
    return {t * grad_G[n].xi, -t * grad_G[n].x};
}

BargmannWeight weight_phi_t(const EscapeField& esc, double t, const ComplexGrid& cgrid)
{
    BargmannWeight w;
    w.grid = cgrid;
    w.t = t;
    const std::size_t M = cgrid.size();
    w.phi_values.resize(M);
    w.delta_phi.resize(M);
    w.xi_section.resize(M);
    w.grad_G.resize(M);
    std::vector<int> failed(M, 0);
#pragma omp parallel for schedule(static)
    for(std::size_t n = 0; n < M; ++n) {
        cplx x = cgrid.node(static_cast<int>(n % cgrid.re_n), static_cast<int>(n / cgrid.re_n));
        const double b = x.imag();
        double G = 0.0;
        PhasePoint dG{0.0, 0.0};
        if(t != 0.0) {
            try {
                G = esc.value_at({x.real(), -b});
                dG = esc.gradient_at({x.real(), -b});
            } catch(const GridError&) {
                failed[n] = 1;
            }
        }
        w.delta_phi[n] = t * G;
        w.phi_values[n] = b * b / 2.0 + t * G;
        w.grad_G[n] = dG;
        w.xi_section[n] = cplx(-b + t * dG.xi, -t * dG.x);
    }
    for(std::size_t n = 0; n < M; ++n)
        if(failed[n]) {
            cplx x = cgrid.node(static_cast<int>(n % cgrid.re_n), static_cast<int>(n / cgrid.re_n));
            throw GridError(fmt::format("escape lattice does not cover ({:.4g}, {:.4g}) = kappa^-1 of Bargmann node {:.4g}{:+.4g}i",
                                        x.real(), -x.imag(), x.real(), x.imag()));
        }
    return w;
}

EgorovOperator::EgorovOperator(const WeylMatrix& P, const FBIOperator& T) : P_(&P), T_(&T)
{
    if(P.size() != T.real_grid().n_points)
        throw ConfigError(fmt::format("operator size {} does not match FBI real grid size {}", P.size(), T.real_grid().n_points));
}

Eigen::VectorXcd EgorovOperator::apply(const Eigen::VectorXcd& U) const
{
    Eigen::VectorXcd u = T_->adjoint(U);
    Eigen::VectorXcd Pu = P_->entries * u;
    return T_->apply(Pu);
}

EgorovOperator egorov_conjugate(const WeylMatrix& P, const FBIOperator& T)
{
    return EgorovOperator(P, T);
}

Eigen::VectorXcd coherent_state(const RealGrid& grid, double x0, double xi0, double h)
{
    Eigen::VectorXcd u(grid.n_points);
    const double c = std::pow(std::numbers::pi * h, -0.25);
    for(int k = 0; k < grid.n_points; ++k) {
        double y = grid.node(k), d = y - x0;
        u[k] = c * std::exp(-d * d / (2.0 * h)) * std::polar(1.0, xi0 * y / h);
    }
    return u;
}

namespace {

std::vector<double> phi_weights(const BargmannWeight& w, double h)
{
    std::vector<double> out(w.delta_phi.size());
    for(std::size_t n = 0; n < out.size(); ++n) out[n] = std::exp(-2.0 * w.delta_phi[n] / h);
    return out;
}

} // namespace

cplx BargmannContext::inner(const Eigen::VectorXcd& U, const Eigen::VectorXcd& V) const
{
    const std::size_t M = cgrid.size();
    std::vector<cplx> terms(M);
#pragma omp parallel for schedule(static)
    for(std::size_t n = 0; n < M; ++n) {
        auto e = static_cast<Eigen::Index>(n);
        terms[n] = U[e] * std::conj(V[e]) * std::exp(-2.0 * weight.delta_phi[n] / h);
    }
    return cgrid.cell_area() * pairwise_sum(std::span<const cplx>(terms));
}

double BargmannContext::norm(const Eigen::VectorXcd& U) const
{
    std::vector<double> w = phi_weights(weight, h);
    return std::sqrt(weighted_norm2(w, U, cgrid.cell_area()));
}

Eigen::VectorXcd BargmannContext::conjugated_apply(const Eigen::VectorXcd& U) const
{
    return egorov_conjugate(P, T).apply(U);
}

BargmannContext make_bargmann_context(const ModelInstance& model, const EscapeField& esc, double t, double h, double fbi_L,
                                      double margin)
{
    ComplexGrid cgrid = ComplexGrid::covering(model, h, margin);
    double extent = model.symbol.xi_extent ? model.symbol.xi_extent(h) : 4.0;
    RealGrid grid = RealGrid::make(fbi_L, required_points(fbi_L, h, extent));
    FBIOperator T = make_fbi(grid, cgrid, h);
    WeylMatrix P = assemble_weyl(model.symbol, grid, h, extent);
    BargmannWeight weight = weight_phi_t(esc, t, cgrid);
    std::vector<cplx> sym(cgrid.size());
#pragma omp parallel for schedule(static)
    for(std::size_t n = 0; n < cgrid.size(); ++n)
        sym[n] = taylor_extension(model.symbol, 2, weight.lifted_real(n), weight.lifted_imag(n));
    return BargmannContext{model, h, t, grid, cgrid, std::move(T), std::move(P), std::move(weight), std::move(sym)};
}

ToeplitzTerms toeplitz_terms(const BargmannContext& ctx, const Eigen::VectorXcd& U, const Eigen::VectorXcd& V)
{
    ToeplitzTerms out;
    out.operator_side = ctx.inner(ctx.conjugated_apply(U), V);
    Eigen::VectorXcd aU(U.size());
    for(Eigen::Index n = 0; n < U.size(); ++n) aU[n] = ctx.symbol_on_section[static_cast<std::size_t>(n)] * U[n];
    out.symbol_side = ctx.inner(aU, V);
    out.norm_u = ctx.norm(U);
    out.norm_v = ctx.norm(V);
    out.residual = std::abs(out.operator_side - out.symbol_side) / (out.norm_u * out.norm_v);
    return out;
}

double toeplitz_residual(const BargmannContext& ctx, const Eigen::VectorXcd& U, const Eigen::VectorXcd& V)
{
    return toeplitz_terms(ctx, U, V).residual;
}

double exterior_symbol_floor(const BargmannContext& ctx, const ComplexBox& U_box, double floor)
{
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for(std::size_t n = 0; n < ctx.cgrid.size(); ++n) {
        cplx x = ctx.cgrid.node(static_cast<int>(n % ctx.cgrid.re_n), static_cast<int>(n / ctx.cgrid.re_n));
        if(U_box.contains(x)) continue;
        double v = std::abs(ctx.symbol_on_section[n]);
        if(v < best) {
            best = v;
            arg = n;
        }
    }
    if(!std::isfinite(best)) throw EllipticityError("excluded box covers the whole Bargmann grid");
    if(best < floor) {
        cplx x = ctx.cgrid.node(static_cast<int>(arg % ctx.cgrid.re_n), static_cast<int>(arg / ctx.cgrid.re_n));
        throw EllipticityError(fmt::format("|p~| = {:.3g} < {:.3g} at Bargmann node {:.4g}{:+.4g}i outside the excluded box",
                                           best, floor, x.real(), x.imag()));
    }
    return best;
}

EllipticTerms elliptic_terms(const BargmannContext& ctx, const Eigen::VectorXcd& U, const ComplexBox& U_box)
{
    EllipticTerms out;
    out.h = ctx.h;
    std::vector<double> w = phi_weights(ctx.weight, ctx.h);
    std::vector<double> outside(w.size());
    for(std::size_t n = 0; n < w.size(); ++n) {
        cplx x = ctx.cgrid.node(static_cast<int>(n % ctx.cgrid.re_n), static_cast<int>(n / ctx.cgrid.re_n));
        outside[n] = U_box.contains(x) ? 0.0 : w[n];
    }
    out.lhs = weighted_norm2(outside, U, ctx.cgrid.cell_area());
    out.au_norm2 = weighted_norm2(w, ctx.conjugated_apply(U), ctx.cgrid.cell_area());
    out.u_norm2 = weighted_norm2(w, U, ctx.cgrid.cell_area());
    return out;
}

EllipticFit fit_elliptic_constants(const std::vector<EllipticTerms>& terms, double C1, double cap)
{
    EllipticFit fit;
    fit.C1 = C1;
    for(const EllipticTerms& e : terms)
        fit.C2 = std::max(fit.C2, (e.lhs - C1 * e.au_norm2) / (e.h * e.u_norm2));
    for(const EllipticTerms& e : terms) {
        fit.lhs.push_back(e.lhs);
        fit.rhs.push_back(C1 * e.au_norm2 + fit.C2 * e.h * e.u_norm2);
    }
    fit.pass = fit.C2 <= cap;
    return fit;
}

void write_bargmann_csv(const std::filesystem::path& path, const BargmannContext& ctx, const Eigen::VectorXcd& U)
{
    std::ofstream os(path);
    if(!os) throw ConfigError(fmt::format("cannot open '{}' for writing", path.string()));
    os << "re_x,im_x,re_u,im_u,phi\n";
    for(std::size_t n = 0; n < ctx.cgrid.size(); ++n) {
        cplx x = ctx.cgrid.node(static_cast<int>(n % ctx.cgrid.re_n), static_cast<int>(n / ctx.cgrid.re_n));
        cplx u = U[static_cast<Eigen::Index>(n)] * std::exp(-ctx.weight.delta_phi[n] / ctx.h);
        os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", x.real(), x.imag(), u.real(), u.imag(),
                          ctx.weight.phi_values[n]);
    }
    if(!os) throw ConfigError(fmt::format("write to '{}' failed", path.string()));
}

void write_bargmann_svg(const std::filesystem::path& path, const BargmannContext& ctx, const Eigen::VectorXcd& U)
{
    Eigen::MatrixXd dens(ctx.cgrid.im_n, ctx.cgrid.re_n);
    for(int j = 0; j < ctx.cgrid.im_n; ++j)
        for(int i = 0; i < ctx.cgrid.re_n; ++i) {
            std::size_t n = ctx.cgrid.index(i, j);
            dens(j, i) = std::norm(U[static_cast<Eigen::Index>(n)]) * std::exp(-2.0 * ctx.weight.delta_phi[n] / ctx.h);
        }
    HeatmapSpec spec;
    spec.cell = std::max(2, 600 / std::max(ctx.cgrid.re_n, ctx.cgrid.im_n));
    spec.title = fmt::format("|u|^2 exp(-2 Phi_t / h), {} h = {} t = {}", ctx.model.tag(), ctx.h, ctx.t);
    write_heatmap_svg(path, dens, spec);
}

} // namespace gps
