#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <omp.h>

#include "gps/error.hpp"
#include "gps/spectral.hpp"

using namespace gps;

namespace {

WeylMatrix identity(int n)
{
    return WeylMatrix{Eigen::MatrixXcd::Identity(n, n), 0.1, RealGrid::make(4.0, n), "identity"};
}

GevreySymbol real_symbol()
{
    GevreySymbol s;
    s.tag = "tanh+x2window";
    s.eval = [](double x, double xi) { return cplx(std::tanh(xi) + x * x * std::exp(-x * x)); };
    s.grad = [](double, double) { return SymbolGradient{}; };
    s.hess = [](double, double) { return SymbolHessian{}; };
    return s;
}

WeylMatrix hermitian(int n)
{
    return assemble_weyl(real_symbol(), RealGrid::make(4.0, n), 0.2);
}

WeylMatrix transport(int n, double h)
{
    return assemble_weyl(make_gevrey_transport(2.0).symbol, RealGrid::make(4.0, n), h);
}

double dist_to_spectrum(const std::vector<cplx>& ev, cplx z)
{
    double d = 1e300;
    for(cplx l : ev) d = std::min(d, std::abs(l - z));
    return d;
}

} // namespace

TEST(Eigenvalues, DaviesLowestTen)
{
    auto dav = make_davies();
    for(double h : {0.1, 0.05}) {
        WeylMatrix P = assemble_weyl(dav.symbol, RealGrid::make(8.0, 512), h);
        SpectrumResult spec = eigenvalues(P);
        ASSERT_EQ(spec.eigenvalues.size(), 512u);
        for(int k = 0; k < 10; ++k) {
            cplx want = std::polar(1.0, M_PI / 4) * h * (2.0 * k + 1.0);
            EXPECT_LT(std::abs(spec.eigenvalues[k] - want) / std::abs(want), 1e-3) << "h=" << h << " k=" << k;
            EXPECT_FALSE(spec.contaminated(k));
        }
        EXPECT_NEAR(spectrum_free_radius(spec, 0.0), h, 1e-3 * h);
    }
}

TEST(Eigenvalues, HermitianIsReal)
{
    SpectrumResult spec = eigenvalues(hermitian(128));
    for(cplx l : spec.eigenvalues) EXPECT_LT(std::abs(l.imag()), 1e-10);
    for(double m : spec.boundary_mass) {
        EXPECT_GE(m, 0.0);
        EXPECT_LE(m, 1.0);
    }
}

TEST(Eigenvalues, Identity)
{
    SpectrumResult spec = eigenvalues(identity(32));
    for(cplx l : spec.eigenvalues) EXPECT_LT(std::abs(l - 1.0), 1e-14);
    EXPECT_NEAR(spectrum_free_radius(spec, 0.0), 1.0, 1e-14);
    EXPECT_NEAR(spectrum_free_radius(spec, 1.0), 0.0, 1e-14);
}

TEST(SigmaMin, Examples)
{
    EXPECT_NEAR(sigma_min(identity(16), 0.0), 1.0, 1e-14);
    WeylMatrix P = transport(128, 0.2);
    SpectrumResult spec = eigenvalues(P);
    double norm = P.entries.operatorNorm();
    for(int i = 0; i < 5; ++i) EXPECT_LE(sigma_min(P, spec.eigenvalues[i * 20]), 1e-10 * norm);
}

TEST(SigmaMin, HermitianDistance)
{
    WeylMatrix P = hermitian(64);
    SpectrumResult spec = eigenvalues(P);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-1.5, 1.5);
    for(int i = 0; i < 20; ++i) {
        cplx z(U(rng), U(rng));
        double d = dist_to_spectrum(spec.eigenvalues, z);
        EXPECT_NEAR(sigma_min(P, z), d, 1e-10);
        ResolventNorm r = resolvent_norm(P, z);
        EXPECT_FALSE(r.in_spectrum);
        EXPECT_NEAR(r.value, 1.0 / d, 1e-9 * (1.0 / d));
    }
}

TEST(SigmaMin, SolversAgree)
{
    WeylMatrix P = transport(256, 0.1);
    ResolventSolver schur(P.entries);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(-0.5, 1.0);
    for(int i = 0; i < 10; ++i) {
        cplx z(U(rng), U(rng));
        double svd = sigma_min_svd(P.entries, z);
        EXPECT_NEAR(sigma_min_lanczos(P.entries, z), svd, 1e-8 * std::max(1.0, svd));
        EXPECT_NEAR(schur.sigma_min(z), svd, 1e-8 * std::max(1.0, svd));
    }
}

TEST(SigmaMin, Lipschitz)
{
    WeylMatrix P = transport(128, 0.1);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1.0, 1.5);
    for(int i = 0; i < 30; ++i) {
        cplx a(U(rng), U(rng)), b(U(rng), U(rng));
        EXPECT_LE(std::abs(sigma_min(P, a) - sigma_min(P, b)), std::abs(a - b) + 1e-12);
    }
}

TEST(Resolvent, IdentityExamples)
{
    ResolventNorm r0 = resolvent_norm(identity(16), 0.0);
    EXPECT_NEAR(r0.value, 1.0, 1e-14);
    EXPECT_FALSE(r0.in_spectrum);
    ResolventNorm r1 = resolvent_norm(identity(16), 1.0);
    EXPECT_TRUE(r1.in_spectrum);
    EXPECT_TRUE(std::isinf(r1.value));
}

TEST(Pseudospectrum, IdentityField)
{
    ZWindow w{cplx(1.0, 0.0), 1.0, 1.0, 11, 9};
    PseudospectrumField f = pseudospectrum(identity(32), w);
    for(int i = 0; i < 9; ++i)
        for(int j = 0; j < 11; ++j) EXPECT_NEAR(f.sigma_min(i, j), std::abs(w.node(j, i) - 1.0), 1e-13);
}

TEST(Pseudospectrum, MatchesReferenceAndMinimumAtEigenvalue)
{
    auto dav = make_davies();
    const double h = 0.1;
    WeylMatrix P = assemble_weyl(dav.symbol, RealGrid::make(8.0, 256), h);
    cplx ground = std::polar(1.0, M_PI / 4) * h;
    ZWindow w{ground, 0.1, 0.1, 21, 21};
    PseudospectrumField fast = pseudospectrum(P, w);
    PseudospectrumField ref = pseudospectrum_reference(P, w);
    EXPECT_LT((fast.sigma_min - ref.sigma_min).cwiseAbs().maxCoeff(), 1e-8);
    Eigen::Index r, c;
    fast.sigma_min.minCoeff(&r, &c);
    SpectrumResult spec = eigenvalues(P);
    cplx zmin = w.node(static_cast<int>(c), static_cast<int>(r));
    EXPECT_LE(std::abs(zmin.real() - spec.eigenvalues[0].real()), w.cell_re());
    EXPECT_LE(std::abs(zmin.imag() - spec.eigenvalues[0].imag()), w.cell_im());
    EXPECT_LT(std::abs(zmin - ground), 0.6 * std::hypot(w.cell_re(), w.cell_im()) + 1e-3);
    for(int i = 0; i < 21; ++i)
        for(int j = 0; j < 21; ++j) EXPECT_GE(fast.sigma_min(i, j), 0.0);
}

TEST(Pseudospectrum, IndependentOfWorkerCount)
{
    WeylMatrix P = transport(128, 0.1);
    ZWindow w{cplx(0.3, 0.0), 1.0, 1.0, 16, 16};
    int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    PseudospectrumField one = pseudospectrum(P, w);
    omp_set_num_threads(4);
    PseudospectrumField four = pseudospectrum(P, w);
    omp_set_num_threads(saved);
    EXPECT_TRUE(one.sigma_min == four.sigma_min);
}

TEST(Pseudospectrum, BudgetRefusal)
{
    ZWindow w{cplx(0.0), 1.0, 1.0, 1024, 16};
    try {
        pseudospectrum(identity(8), w);
        FAIL();
    } catch(const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("coarsen"), std::string::npos);
    }
}

TEST(FreeRadius, UnitaryInvariance)
{
    WeylMatrix P = transport(128, 0.1);
    SpectrumResult spec = eigenvalues(P);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> N01;
    Eigen::MatrixXcd G(128, 128);
    for(int i = 0; i < 128; ++i)
        for(int j = 0; j < 128; ++j) G(i, j) = cplx(N01(rng), N01(rng));
    Eigen::MatrixXcd Q = Eigen::HouseholderQR<Eigen::MatrixXcd>(G).householderQ();
    // Conjugation by Q mixes boundary mass, so compare unfiltered radii.
    SpectrumResult a = spec, b = eigenvalues(WeylMatrix{Q * P.entries * Q.adjoint(), P.h, P.grid, "conj"});
    std::fill(a.boundary_mass.begin(), a.boundary_mass.end(), 0.0);
    std::fill(b.boundary_mass.begin(), b.boundary_mass.end(), 0.0);
    EXPECT_NEAR(spectrum_free_radius(a, 0.0), spectrum_free_radius(b, 0.0), 1e-8);
}

TEST(FreeRadius, EmptyRetainedSetThrows)
{
    SpectrumResult spec;
    spec.eigenvalues = {1.0};
    spec.boundary_mass = {0.5};
    spec.condition = {1.0};
    EXPECT_THROW(spectrum_free_radius(spec, 0.0), NumericalError);
}
