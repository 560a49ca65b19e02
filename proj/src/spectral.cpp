#include "gps/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <random>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <fmt/format.h>
#include <fmt/os.h>

#include "gps/error.hpp"
#include "gps/parallel.hpp"

namespace gps {

namespace {

constexpr int kLanczosMaxSteps = 80;
constexpr double kLanczosTol = 1e-13;

std::filesystem::path dump_matrix(const WeylMatrix& P)
{
    std::string name = P.symbol_tag;
    for(char& c : name)
        if(!std::isalnum(static_cast<unsigned char>(c))) c = '_';
    auto path = std::filesystem::temp_directory_path() / fmt::format("gps_failed_{}_N{}_h{}.bin", name, P.size(), P.h);
    try {
        write_weyl_binary(path, P);
    } catch(const std::exception&) {
        return "<dump failed>";
    }
    return path;
}

// Largest eigenvalue of a Hermitian positive operator by Lanczos with full reorthogonalization.
double lanczos_largest(int n, const std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)>& apply)
{
    const int kmax = std::min(n, kLanczosMaxSteps);
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> normal;
    Eigen::VectorXcd q(n);
    for(int i = 0; i < n; ++i) q(i) = cplx(normal(rng), normal(rng));
    q.normalize();

    Eigen::MatrixXcd Q(n, kmax);
    std::vector<double> alpha, beta;
    Eigen::VectorXcd w(n);
    double theta = 0.0;
    for(int k = 0; k < kmax; ++k) {
        Q.col(k) = q;
        apply(q, w);
        double a = q.dot(w).real();
        alpha.push_back(a);
        for(int pass = 0; pass < 2; ++pass)
            for(int i = 0; i <= k; ++i) w -= Q.col(i) * Q.col(i).dot(w);
        double b = w.norm();

        Eigen::MatrixXd Tk = Eigen::MatrixXd::Zero(k + 1, k + 1);
        for(int i = 0; i <= k; ++i) Tk(i, i) = alpha[i];
        for(int i = 0; i < k; ++i) Tk(i, i + 1) = Tk(i + 1, i) = beta[i];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Tk);
        theta = es.eigenvalues()(k);
        double residual = b * std::abs(es.eigenvectors()(k, k));
        if(residual <= kLanczosTol * theta || b <= 1e-300 || k + 1 == kmax) break;
        beta.push_back(b);
        q = w / b;
    }
    return theta;
}

} // namespace

SpectrumResult eigenvalues(const WeylMatrix& P)
{
    const int n = P.size();
    if(n > 2048) throw ConfigError(fmt::format("N = {} exceeds the dense eigensolver budget of 2048", n));
    Eigen::MatrixXcd A = P.entries;
    Eigen::VectorXcd w(n);
    Eigen::MatrixXcd vl(n, n), vr(n, n);
    lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'V', 'V', n, A.data(), n, w.data(), vl.data(), n, vr.data(), n);
    if(info != 0)
        throw NumericalError(fmt::format("zgeev failed (info = {}) for '{}' at h = {}; matrix dumped to {}", info,
                                         P.symbol_tag, P.h, dump_matrix(P).string()));

    const double L = P.grid.half_width_L;
    std::vector<bool> edge(n);
    for(int j = 0; j < n; ++j) edge[j] = std::abs(P.grid.node(j)) > (1.0 - kBoundaryWindow) * L;

    std::vector<int> order(n);
    for(int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        double ma = std::abs(w(a)), mb = std::abs(w(b));
        if(ma != mb) return ma < mb;
        return std::arg(w(a)) < std::arg(w(b));
    });

    SpectrumResult out;
    out.h = P.h;
    out.symbol_tag = P.symbol_tag;
    for(int i : order) {
        double total = vr.col(i).squaredNorm(), outer = 0.0;
        for(int j = 0; j < n; ++j)
            if(edge[j]) outer += std::norm(vr(j, i));
        out.eigenvalues.push_back(w(i));
        out.boundary_mass.push_back(total > 0.0 ? outer / total : 0.0);
        double overlap = std::abs(vl.col(i).dot(vr.col(i))) / (vl.col(i).norm() * vr.col(i).norm());
        out.condition.push_back(overlap > 0.0 ? 1.0 / overlap : std::numeric_limits<double>::infinity());
    }
    return out;
}

std::vector<cplx> eigenvalues_only(const WeylMatrix& P)
{
    const int n = P.size();
    if(n > 2048) throw ConfigError(fmt::format("N = {} exceeds the dense eigensolver budget of 2048", n));
    Eigen::MatrixXcd A = P.entries;
    Eigen::VectorXcd w(n);
    lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n, A.data(), n, w.data(), nullptr, 1, nullptr, 1);
    if(info != 0)
        throw NumericalError(fmt::format("zgeev failed (info = {}) for '{}' at h = {}; matrix dumped to {}", info,
                                         P.symbol_tag, P.h, dump_matrix(P).string()));
    return {w.data(), w.data() + n};
}

double sigma_min(const WeylMatrix& P, cplx z)
{
    if(P.size() <= 512) return sigma_min_svd(P.entries, z);
    return sigma_min_lanczos(P.entries, z);
}

double sigma_min_svd(const Eigen::MatrixXcd& A, cplx z)
{
    const int n = static_cast<int>(A.rows());
    Eigen::MatrixXcd M = A;
    M.diagonal().array() -= z;
    Eigen::VectorXd s(n);
    lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', n, n, M.data(), n, s.data(), nullptr, 1, nullptr, 1);
    if(info != 0) throw NumericalError(fmt::format("zgesdd failed (info = {}) at z = ({}, {})", info, z.real(), z.imag()));
    return s(n - 1);
}

double sigma_min_lanczos(const Eigen::MatrixXcd& A, cplx z)
{
    const int n = static_cast<int>(A.rows());
    Eigen::MatrixXcd M = A;
    M.diagonal().array() -= z;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
    if(lu.matrixLU().diagonal().cwiseAbs().minCoeff() == 0.0) return 0.0;
    double theta = lanczos_largest(n, [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
        Eigen::VectorXcd t = lu.adjoint().solve(x);
        y = lu.solve(t);
    });
    return 1.0 / std::sqrt(theta);
}

ResolventSolver::ResolventSolver(const Eigen::MatrixXcd& A) : T_(A)
{
    const int n = static_cast<int>(A.rows());
    Eigen::VectorXcd w(n);
    lapack_int sdim = 0;
    lapack_int info = LAPACKE_zgees(LAPACK_COL_MAJOR, 'N', 'N', nullptr, n, T_.data(), n, &sdim, w.data(), nullptr, 1);
    if(info != 0) throw NumericalError(fmt::format("zgees failed (info = {})", info));
    T_.triangularView<Eigen::StrictlyLower>().setZero();
}

double ResolventSolver::sigma_min(cplx z) const
{
    const int n = size();
    for(int i = 0; i < n; ++i)
        if(T_(i, i) == z) return 0.0;
    // (T - z) y = b, column-oriented back substitution.
    auto solve = [&](const Eigen::VectorXcd& b, Eigen::VectorXcd& y) {
        y = b;
        for(int j = n - 1; j >= 0; --j) {
            y(j) /= (T_(j, j) - z);
            if(j > 0) y.head(j) -= T_.col(j).head(j) * y(j);
        }
    };
    // (T - z)^* y = b, forward substitution with column dot products.
    auto solve_adjoint = [&](const Eigen::VectorXcd& b, Eigen::VectorXcd& y) {
        y.resize(n);
        for(int i = 0; i < n; ++i) {
            cplx acc = b(i);
            if(i > 0) acc -= T_.col(i).head(i).dot(y.head(i));
            y(i) = acc / std::conj(T_(i, i) - z);
        }
    };
    Eigen::VectorXcd t;
    double theta = lanczos_largest(n, [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
        solve_adjoint(x, t);
        solve(t, y);
    });
    return 1.0 / std::sqrt(theta);
}

cplx ZWindow::node(int i_re, int i_im) const
{
    double re = res_re > 1 ? center.real() - 0.5 * span_re + i_re * cell_re() : center.real();
    double im = res_im > 1 ? center.imag() - 0.5 * span_im + i_im * cell_im() : center.imag();
    return {re, im};
}

namespace {

void check_window(const ZWindow& w)
{
    if(w.res_re < 1 || w.res_im < 1) throw ConfigError("pseudospectrum resolution must be positive");
    if(w.res_re > kMaxPseudospectrumResolution || w.res_im > kMaxPseudospectrumResolution) {
        int f = (std::max(w.res_re, w.res_im) + kMaxPseudospectrumResolution - 1) / kMaxPseudospectrumResolution;
        throw ConfigError(fmt::format("pseudospectrum lattice {}x{} exceeds the {}x{} budget; coarsen to {}x{}", w.res_re,
                                      w.res_im, kMaxPseudospectrumResolution, kMaxPseudospectrumResolution,
                                      std::max(1, w.res_re / f), std::max(1, w.res_im / f)));
    }
}

} // namespace

PseudospectrumField pseudospectrum(const WeylMatrix& P, const ZWindow& window)
{
    check_window(window);
    configure_workers();
    ResolventSolver solver(P.entries);
    PseudospectrumField field{window, Eigen::MatrixXd(window.res_im, window.res_re)};
    const int total = window.res_re * window.res_im;
#pragma omp parallel for schedule(dynamic, 4)
    for(int idx = 0; idx < total; ++idx) {
        int i_im = idx / window.res_re, i_re = idx % window.res_re;
        field.sigma_min(i_im, i_re) = solver.sigma_min(window.node(i_re, i_im));
    }
    return field;
}

PseudospectrumField pseudospectrum_reference(const WeylMatrix& P, const ZWindow& window)
{
    check_window(window);
    PseudospectrumField field{window, Eigen::MatrixXd(window.res_im, window.res_re)};
    for(int i_im = 0; i_im < window.res_im; ++i_im)
        for(int i_re = 0; i_re < window.res_re; ++i_re)
            field.sigma_min(i_im, i_re) = sigma_min_svd(P.entries, window.node(i_re, i_im));
    return field;
}

std::size_t nearest_retained(const SpectrumResult& spec, cplx z0)
{
    std::size_t best = spec.eigenvalues.size();
    double r = std::numeric_limits<double>::infinity();
    for(std::size_t i = 0; i < spec.eigenvalues.size(); ++i) {
        if(spec.contaminated(i)) continue;
        double d = std::abs(spec.eigenvalues[i] - z0);
        if(d < r) {
            r = d;
            best = i;
        }
    }
    if(best == spec.eigenvalues.size())
        throw NumericalError(fmt::format("no eigenvalue of '{}' at h = {} passes the boundary-mass filter; enlarge the grid",
                                         spec.symbol_tag, spec.h));
    return best;
}

double spectrum_free_radius(const SpectrumResult& spec, cplx z0)
{
    return std::abs(spec.eigenvalues[nearest_retained(spec, z0)] - z0);
}

ResolventNorm resolvent_from_sigma(double sigma)
{
    if(sigma < kSingularThreshold) return {std::numeric_limits<double>::infinity(), true};
    return {1.0 / sigma, false};
}

ResolventNorm resolvent_norm(const WeylMatrix& P, cplx z)
{
    return resolvent_from_sigma(sigma_min(P, z));
}

void write_spectrum_csv(const std::filesystem::path& path, const SpectrumResult& spec)
{
    std::ofstream os(path);
    if(!os) throw ConfigError(fmt::format("cannot open '{}' for writing", path.string()));
    os << "re,im,boundary_mass\n";
    for(std::size_t i = 0; i < spec.eigenvalues.size(); ++i)
        os << fmt::format("{:.17g},{:.17g},{:.17g}\n", spec.eigenvalues[i].real(), spec.eigenvalues[i].imag(),
                          spec.boundary_mass[i]);
    if(!os) throw ConfigError(fmt::format("write to '{}' failed", path.string()));
}

void write_pseudospectrum_csv(const std::filesystem::path& path, const PseudospectrumField& field)
{
    std::ofstream os(path);
    if(!os) throw ConfigError(fmt::format("cannot open '{}' for writing", path.string()));
    os << "re,im,sigma_min\n";
    for(int i_im = 0; i_im < field.window.res_im; ++i_im)
        for(int i_re = 0; i_re < field.window.res_re; ++i_re) {
            cplx z = field.window.node(i_re, i_im);
            os << fmt::format("{:.17g},{:.17g},{:.17g}\n", z.real(), z.imag(), field.sigma_min(i_im, i_re));
        }
    if(!os) throw ConfigError(fmt::format("write to '{}' failed", path.string()));
}

} // namespace gps
