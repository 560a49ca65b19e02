#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "gps/geometry.hpp"
#include "gps/quantize.hpp"

namespace gps {

inline constexpr double kFbiDefaultMargin = 3.0;

// Uniform grid of nodes x = a + i b. Node (i, j) has index j * re_n + i.
struct ComplexGrid {
    double re_center = 0.0;
    double im_center = 0.0;
    double re_span = 1.0; // half-width
    double im_span = 1.0;
    int re_n = 2;
    int im_n = 2;

    double da() const { return 2.0 * re_span / (re_n - 1); }
    double db() const { return 2.0 * im_span / (im_n - 1); }
    double cell_area() const { return da() * db(); }
    cplx node(int i, int j) const { return {re_center - re_span + i * da(), im_center - im_span + j * db()}; }
    std::size_t size() const { return static_cast<std::size_t>(re_n) * im_n; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * re_n + i; }

    // Covers kappa(hint box) = {a - i xi} with the given margin; spacing at most 0.5 sqrt(h).
    static ComplexGrid covering(const ModelInstance& model, double h, double margin = kFbiDefaultMargin);
};

inline constexpr double kFbiDefaultL = 8.0;
inline constexpr double kFbiDecayFloor = 1e-12;

// Discrete T u(x) = C h^{-3/4} sum_y exp(i (x - y)^2 / (2h)) u(y) dy.
// Bargmann vectors are stored weighted, U(x) = exp(-Phi_0(x) / h) T u(x), so that
// the H_{Phi_0} norm is sqrt(cell_area * sum |U|^2).
class FBIOperator {
public:
    FBIOperator(const RealGrid& real_grid, const ComplexGrid& cgrid, double h);

    const RealGrid& real_grid() const { return real_grid_; }
    const ComplexGrid& cgrid() const { return cgrid_; }
    double h() const { return h_; }
    // Calibrated constant C (continuum value 2^{-1/2} pi^{-3/4}).
    double normalization() const { return normalization_; }
    std::size_t stored_entries() const { return kernel_.size(); }

    Eigen::VectorXcd apply(const Eigen::VectorXcd& u) const;
    // Serial reference: full kernel sum over every real node, no band cut.
    Eigen::VectorXcd apply_reference(const Eigen::VectorXcd& u) const;
    // Adjoint with respect to the H_{Phi_0} and dx-weighted l2 inner products.
    Eigen::VectorXcd adjoint(const Eigen::VectorXcd& U) const;
    double norm(const Eigen::VectorXcd& U) const;

private:
    RealGrid real_grid_;
    ComplexGrid cgrid_;
    double h_;
    double normalization_ = 1.0;
    std::vector<int> band_lo_;  // per Re index
    std::vector<int> band_len_; // per Re index
    std::vector<std::size_t> offset_; // per node into kernel_
    std::vector<cplx> kernel_;
    std::vector<int> col_i_lo_; // per real node: Re indices whose band contains it
    std::vector<int> col_i_hi_;
};

// Throws GridError when exp(-(a - y)^2 / (2h)) exceeds 1e-12 at the real grid edges for some node.
FBIOperator make_fbi(const RealGrid& real_grid, const ComplexGrid& cgrid, double h);

// Phi_t = (Im x)^2 / 2 + t G(Re x, -Im x) and xi_t = (2/i) d_x Phi_t.
struct BargmannWeight {
    ComplexGrid grid;
    double t = 0.0;
    std::vector<double> phi_values;
    std::vector<double> delta_phi; // Phi_t - Phi_0
    std::vector<cplx> xi_section;
    std::vector<PhasePoint> grad_G; // gradient of G at (Re x, -Im x)

    // kappa^{-1}(x, xi_t(x)) split as real point plus imaginary offset.
    PhasePoint lifted_real(std::size_t n) const;
    PhasePoint lifted_imag(std::size_t n) const;
};

// Throws GridError if the escape lattice does not cover the needed points.
BargmannWeight weight_phi_t(const EscapeField& esc, double t, const ComplexGrid& cgrid);

// U -> T P T^* U on weighted Bargmann samples. Holds references; P and T must outlive it.
class EgorovOperator {
public:
    EgorovOperator(const WeylMatrix& P, const FBIOperator& T);
    Eigen::VectorXcd apply(const Eigen::VectorXcd& U) const;
    const FBIOperator& fbi() const { return *T_; }

private:
    const WeylMatrix* P_;
    const FBIOperator* T_;
};

EgorovOperator egorov_conjugate(const WeylMatrix& P, const FBIOperator& T);

// Normalized coherent state (pi h)^{-1/4} exp(-(y - x0)^2 / (2h) + i xi0 y / h) sampled on the grid.
Eigen::VectorXcd coherent_state(const RealGrid& grid, double x0, double xi0, double h);

// Everything needed for Bargmann-side measurements of one model at one (h, t).
struct BargmannContext {
    ModelInstance model;
    double h = 0.0;
    double t = 0.0;
    RealGrid real_grid;
    ComplexGrid cgrid;
    FBIOperator T;
    WeylMatrix P;
    BargmannWeight weight;
    std::vector<cplx> symbol_on_section; // order-2 extension of p at kappa^{-1}(x, xi_t(x))

    // <U, V> in H_{Phi_t} for weighted samples.
    cplx inner(const Eigen::VectorXcd& U, const Eigen::VectorXcd& V) const;
    double norm(const Eigen::VectorXcd& U) const;
    Eigen::VectorXcd conjugated_apply(const Eigen::VectorXcd& U) const;
};

BargmannContext make_bargmann_context(const ModelInstance& model, const EscapeField& esc, double t, double h,
                                      double fbi_L = kFbiDefaultL, double margin = kFbiDefaultMargin);

struct ToeplitzTerms {
    cplx operator_side;
    cplx symbol_side;
    double norm_u = 0.0;
    double norm_v = 0.0;
    double residual = 0.0;
};

ToeplitzTerms toeplitz_terms(const BargmannContext& ctx, const Eigen::VectorXcd& U, const Eigen::VectorXcd& V);
double toeplitz_residual(const BargmannContext& ctx, const Eigen::VectorXcd& U, const Eigen::VectorXcd& V);

struct ComplexBox {
    double re_min = 0.0;
    double re_max = 0.0;
    double im_min = 0.0;
    double im_max = 0.0;

    bool contains(cplx x) const
    {
        return x.real() >= re_min && x.real() <= re_max && x.imag() >= im_min && x.imag() <= im_max;
    }
};

// min |p~| over grid nodes outside the box. Throws EllipticityError naming the node if below floor.
double exterior_symbol_floor(const BargmannContext& ctx, const ComplexBox& U_box, double floor = 1e-2);

struct EllipticTerms {
    double h = 0.0;
    double lhs = 0.0;      // weighted mass of U outside the box
    double au_norm2 = 0.0; // ||A U||^2_{Phi_t}
    double u_norm2 = 0.0;  // ||U||^2_{Phi_t}
};

EllipticTerms elliptic_terms(const BargmannContext& ctx, const Eigen::VectorXcd& U, const ComplexBox& U_box);

struct EllipticFit {
    double C1 = 0.0; // 1 / (exterior symbol floor)^2
    double C2 = 0.0; // smallest constant making lhs <= C1 ||AU||^2 + C2 h ||U||^2 over the sweep
    std::vector<double> lhs;
    std::vector<double> rhs;
    bool pass = false; // C2 <= cap
};

inline constexpr double kEllipticConstantCap = 100.0;

EllipticFit fit_elliptic_constants(const std::vector<EllipticTerms>& terms, double C1, double cap = kEllipticConstantCap);

// Columns re_x, im_x, re_u, im_u, phi with u stored as exp(-Phi/h) u.
void write_bargmann_csv(const std::filesystem::path& path, const BargmannContext& ctx, const Eigen::VectorXcd& U);
// Heatmap of |u|^2 exp(-2 Phi_t / h).
void write_bargmann_svg(const std::filesystem::path& path, const BargmannContext& ctx, const Eigen::VectorXcd& U);

} // namespace gps
