#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gps/quantize.hpp"

namespace gps {

inline constexpr double kBoundaryMassThreshold = 1e-6;
inline constexpr double kBoundaryWindow = 0.1;

struct SpectrumResult {
    std::vector<cplx> eigenvalues;
    std::vector<double> boundary_mass; // fraction of l2 mass in the outer 10% of the grid
    std::vector<double> condition;     // 1 / |<left, right>| for unit eigenvectors
    double h = 0.0;
    std::string symbol_tag;

    bool contaminated(std::size_t i) const { return boundary_mass[i] > kBoundaryMassThreshold; }
};

// Dense eigendecomposition (LAPACK zgeev). Throws NumericalError with a matrix dump path on failure.
SpectrumResult eigenvalues(const WeylMatrix& P);

// Eigenvalues only (zgeev without eigenvectors), unsorted.
std::vector<cplx> eigenvalues_only(const WeylMatrix& P);

double sigma_min(const WeylMatrix& P, cplx z);
double sigma_min_svd(const Eigen::MatrixXcd& A, cplx z);
// Inverse Lanczos on ((A - z)^* (A - z))^{-1} through an LU factorization.
double sigma_min_lanczos(const Eigen::MatrixXcd& A, cplx z);

// Complex Schur form computed once; sigma_min(T - z) for many z by triangular solves.
class ResolventSolver {
public:
    explicit ResolventSolver(const Eigen::MatrixXcd& A);
    double sigma_min(cplx z) const;
    int size() const { return static_cast<int>(T_.rows()); }

private:
    Eigen::MatrixXcd T_;
};

struct ZWindow {
    cplx center;
    double span_re = 1.0; // full width
    double span_im = 1.0;
    int res_re = 1;
    int res_im = 1;

    cplx node(int i_re, int i_im) const;
    double cell_re() const { return res_re > 1 ? span_re / (res_re - 1) : 0.0; }
    double cell_im() const { return res_im > 1 ? span_im / (res_im - 1) : 0.0; }
};

inline constexpr int kMaxPseudospectrumResolution = 512;

struct PseudospectrumField {
    ZWindow window;
    Eigen::MatrixXd sigma_min; // res_im rows x res_re columns, row 0 at the lowest Im z
};

// Parallel over z (Schur form + inverse Lanczos). Throws ConfigError above 512 x 512.
PseudospectrumField pseudospectrum(const WeylMatrix& P, const ZWindow& window);
// Serial, one SVD per z.
PseudospectrumField pseudospectrum_reference(const WeylMatrix& P, const ZWindow& window);

// min |lambda - z0| over eigenvalues passing the boundary-mass filter. Throws NumericalError if none pass.
double spectrum_free_radius(const SpectrumResult& spec, cplx z0);
// Index of the retained eigenvalue closest to z0.
std::size_t nearest_retained(const SpectrumResult& spec, cplx z0);

struct ResolventNorm {
    double value = 0.0;
    bool in_spectrum = false; // value is +infinity
};

inline constexpr double kSingularThreshold = 1e-14;

ResolventNorm resolvent_norm(const WeylMatrix& P, cplx z);
ResolventNorm resolvent_from_sigma(double sigma);

void write_spectrum_csv(const std::filesystem::path& path, const SpectrumResult& spec);
void write_pseudospectrum_csv(const std::filesystem::path& path, const PseudospectrumField& field);

} // namespace gps
