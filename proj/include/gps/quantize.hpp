#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gps/symbols.hpp"

namespace gps {

struct RealGrid {
    double half_width_L = 0.0;
    int n_points = 0;

    // Throws GridError unless N is a power of two and L > 0.
    static RealGrid make(double L, int N);

    double spacing() const { return 2.0 * half_width_L / n_points; }
    double node(int j) const { return -half_width_L + j * spacing(); }
    // Dual Nyquist frequency pi h / dx.
    double nyquist(double h) const;
    double theta(int m, double h) const;
};

// Smallest power of two N with pi h N / (2L) >= xi_extent (at least 8).
int required_points(double L, double h, double xi_extent);

// Dense discretization of p^w(x, hD) in the sample basis; inner product dx * sum u conj(v).
struct WeylMatrix {
    Eigen::MatrixXcd entries;
    double h = 0.0;
    RealGrid grid;
    std::string symbol_tag;

    int size() const { return static_cast<int>(entries.rows()); }
};

// Throws ResolutionError when the symbol's xi extent exceeds the Nyquist frequency.
WeylMatrix assemble_weyl(const GevreySymbol& sym, const RealGrid& grid, double h);
WeylMatrix assemble_weyl(const GevreySymbol& sym, const RealGrid& grid, double h, double xi_extent);

// Direct O(N^3) midpoint sum, serial. Reference for tests and benchmarks.
WeylMatrix assemble_weyl_reference(const GevreySymbol& sym, const RealGrid& grid, double h);

// Symbol samples c(m_s, theta_m) on the 2N-1 anti-diagonal midpoints m_s = -L + s dx / 2.
struct SampledSymbol {
    std::vector<double> mids;
    std::vector<double> thetas;
    Eigen::MatrixXcd values; // (2N-1) x N
    std::vector<bool> valid; // rows whose full (j-k) window lies inside the matrix
    double h = 0.0;
};

SampledSymbol inverse_weyl(const WeylMatrix& P);

// Samples sym on the same (mid, theta) lattice as inverse_weyl(P) would produce.
SampledSymbol sample_symbol(const GevreySymbol& sym, const RealGrid& grid, double h);

// (inverse_weyl(A B) - a b) / h.
SampledSymbol compose_and_extract(const GevreySymbol& a, const GevreySymbol& b, const RealGrid& grid, double h);

// Max |values| over valid rows with |mid| <= x_window and |theta| <= theta_window.
double window_sup(const SampledSymbol& field, double x_window, double theta_window);

// Binary layout: "GPSW", uint32 N, float64 h, then N*N (re, im) float64 pairs row-major, little-endian.
void write_weyl_binary(const std::filesystem::path& path, const WeylMatrix& P);
WeylMatrix read_weyl_binary(const std::filesystem::path& path, double L);

} // namespace gps
