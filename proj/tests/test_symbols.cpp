#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gps/symbols.hpp"

using namespace gps;

namespace {

std::vector<ModelInstance> catalog()
{
    return {make_davies(), make_analytic_transport(), make_gevrey_transport(1.5), make_gevrey_transport(2.0),
            make_gevrey_transport(3.0), make_trapped_toy(), make_rotated_transport(2.0, 0.5)};
}

} // namespace

TEST(GevreyFlat, FlatRegionAndClosedForms)
{
    EXPECT_EQ(gevrey_flat(2.0, 0.0), 0.0);
    EXPECT_EQ(gevrey_flat(2.0, -3.0), 0.0);
    EXPECT_NEAR(gevrey_flat(2.0, 1.0), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(gevrey_flat(3.0, 0.25), std::exp(-2.0), 1e-15);
}

TEST(GevreyFlat, RejectsInvalidOrder)
{
    EXPECT_THROW(gevrey_flat(1.0, 0.5), std::invalid_argument);
    EXPECT_THROW(gevrey_flat(0.5, 0.5), std::invalid_argument);
    EXPECT_THROW(make_gevrey_transport(1.0), std::invalid_argument);
}

TEST(GevreyFlat, MonotoneBelowOne)
{
    double prev = 0.0;
    for(int i = 1; i <= 1000; ++i) {
        double v = gevrey_flat(2.5, 0.01 * i);
        EXPECT_GE(v, prev);
        EXPECT_LT(v, 1.0);
        prev = v;
    }
}

TEST(GevreyFlat, JetMatchesFiniteDifferences)
{
    const double d = 1e-5;
    for(double s : {1.5, 2.0, 3.0}) {
        for(double t : {0.2, 0.5, 1.0, 2.0}) {
            ScalarJet j = gevrey_flat_jet(s, t);
            double fd1 = (gevrey_flat(s, t + d) - gevrey_flat(s, t - d)) / (2 * d);
            double fd2 = (gevrey_flat_jet(s, t + d).d1 - gevrey_flat_jet(s, t - d).d1) / (2 * d);
            EXPECT_NEAR(j.d1, fd1, 1e-7 * (1 + std::abs(fd1)));
            EXPECT_NEAR(j.d2, fd2, 1e-6 * (1 + std::abs(fd2)));
        }
    }
}

TEST(SmoothStep, LimitsAndDerivatives)
{
    EXPECT_EQ(smooth_step(-0.1).value, 1.0);
    EXPECT_EQ(smooth_step(1.1).value, 0.0);
    EXPECT_NEAR(smooth_step(0.5).value, 0.5, 1e-15);
    const double d = 1e-5;
    for(double u : {0.1, 0.3, 0.5, 0.8}) {
        ScalarJet j = smooth_step(u);
        EXPECT_NEAR(j.d1, (smooth_step(u + d).value - smooth_step(u - d).value) / (2 * d), 1e-8);
        EXPECT_NEAR(j.d2, (smooth_step(u + d).d1 - smooth_step(u - d).d1) / (2 * d), 1e-6);
    }
}

TEST(Davies, Examples)
{
    auto m = make_davies();
    EXPECT_EQ(m.symbol(1.0, 1.0), cplx(1.0, 1.0));
    EXPECT_EQ(m.symbol(2.0, 0.0), cplx(0.0, 4.0));
    auto g = m.symbol.grad(0.0, 2.0);
    EXPECT_EQ(g.dx, cplx(0.0));
    EXPECT_EQ(g.dxi, cplx(4.0));
    EXPECT_TRUE(m.symbol.is_analytic());
    EXPECT_EQ(m.z0, cplx(0.0));
}

TEST(GevreyTransport, Examples)
{
    auto m = make_gevrey_transport(2.0);
    EXPECT_EQ(m.symbol(0.0, 0.0), cplx(0.0));
    EXPECT_LT(std::abs(m.symbol(0.0, 10.0).imag() - 1.0), 1e-8);
    EXPECT_NEAR(m.symbol(std::sqrt(2.0), 0.0).real(), std::exp(-1.0), 1e-14);
    EXPECT_EQ(m.symbol.order_s, 2.0);
    EXPECT_FALSE(m.symbol.is_analytic());
    for(double x = -1.0; x <= 1.0; x += 0.01) EXPECT_EQ(m.symbol(x, 0.0), cplx(0.0));
}

TEST(AnalyticTransport, Examples)
{
    auto m = make_analytic_transport();
    EXPECT_EQ(m.symbol(0.0, 0.0), cplx(0.0));
    EXPECT_NEAR(m.symbol(1.0, 0.0).real(), 0.5, 1e-15);
    EXPECT_EQ(m.symbol(1.0, 0.0).imag(), 0.0);
    auto g = m.symbol.grad(0.0, 0.0);
    EXPECT_EQ(g.dx, cplx(0.0));
    EXPECT_EQ(g.dxi, cplx(0.0, 1.0));
    EXPECT_TRUE(m.symbol.is_analytic());
}

TEST(Catalog, DerivativesMatchFiniteDifferences)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-5.0, 5.0);
    const double d = 1e-4;
    for(const auto& m : catalog()) {
        const auto& p = m.symbol;
        for(int i = 0; i < 100; ++i) {
            double x = U(rng), xi = U(rng);
            auto g = p.grad(x, xi);
            auto H = p.hess(x, xi);
            cplx fdx = (p(x + d, xi) - p(x - d, xi)) / (2 * d);
            cplx fdxi = (p(x, xi + d) - p(x, xi - d)) / (2 * d);
            EXPECT_LT(std::abs(g.dx - fdx), 1e-5) << p.tag;
            EXPECT_LT(std::abs(g.dxi - fdxi), 1e-5) << p.tag;
            // Richardson-extrapolated differences of grad: the plain centered rule has
            // truncation error above 1e-5 where the flat factor switches on (s = 3).
            auto rich = [&](auto&& g) { return (4.0 * g(d / 2) - g(d)) / 3.0; };
            cplx hxx = rich([&](double e) { return (p.grad(x + e, xi).dx - p.grad(x - e, xi).dx) / (2 * e); });
            cplx hxxi = rich([&](double e) { return (p.grad(x, xi + e).dx - p.grad(x, xi - e).dx) / (2 * e); });
            cplx hxix = rich([&](double e) { return (p.grad(x + e, xi).dxi - p.grad(x - e, xi).dxi) / (2 * e); });
            cplx hxixi = rich([&](double e) { return (p.grad(x, xi + e).dxi - p.grad(x, xi - e).dxi) / (2 * e); });
            EXPECT_LT(std::abs(H.xx - hxx), 1e-5) << p.tag;
            EXPECT_LT(std::abs(H.xxi - hxxi), 1e-5) << p.tag;
            EXPECT_LT(std::abs(H.xxi - hxix), 1e-5) << p.tag;
            EXPECT_LT(std::abs(H.xixi - hxixi), 1e-5) << p.tag;
        }
    }
}

TEST(Catalog, BoundsAndSigns)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-5.0, 5.0);
    for(const auto& m : catalog()) {
        for(int i = 0; i < 500; ++i) {
            double x = U(rng), xi = U(rng);
            EXPECT_LE(std::abs(m.symbol(x, xi)), m.symbol.bound_C) << m.tag();
            if(m.family == ModelFamily::gevrey_transport || m.family == ModelFamily::analytic_transport)
                EXPECT_GE(m.symbol(x, xi).real(), 0.0);
        }
    }
}

TEST(Catalog, MultiplierNonvanishingOnHintBox)
{
    for(const auto& m : catalog()) {
        if(!m.multiplier_q) continue;
        const PhaseBox box = *m.symbol.zero_set_hint;
        double gamma = 1e300;
        for(int i = 0; i <= 20; ++i)
            for(int j = 0; j <= 20; ++j) {
                double x = box.x_min + (box.x_max - box.x_min) * i / 20.0;
                double xi = box.xi_min + (box.xi_max - box.xi_min) * j / 20.0;
                gamma = std::min(gamma, std::abs((*m.multiplier_q)(x, xi)));
            }
        EXPECT_GT(gamma, 0.5);
        // The reduced symbol has nonnegative real part, like the transport family.
        GevreySymbol r = effective_symbol(m);
        for(double x = -3; x <= 3; x += 0.25)
            for(double xi = -3; xi <= 3; xi += 0.25) EXPECT_GE(r(x, xi).real(), -1e-15);
    }
}

TEST(TaylorExtension, Examples)
{
    auto dav = make_davies();
    for(double tau : {0.1, 0.5, 2.0})
        EXPECT_NEAR(std::abs(taylor_extension(dav.symbol, 2, {0, 0}, {0, tau}) - cplx(-tau * tau)), 0.0, 1e-15);

    auto gt = make_gevrey_transport(2.0);
    // f(x) = exp(-1/(x^2-1)), f'(x) = 2x f(x) / (x^2-1)^2.
    double f2 = std::exp(-1.0 / 3.0);
    double fp2 = 4.0 * f2 / 9.0;
    double delta = 0.01;
    cplx want(f2, delta * fp2);
    EXPECT_LT(std::abs(taylor_extension(gt.symbol, 1, {2, 0}, {delta, 0}) - want), 1e-14);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    for(const auto& m : catalog()) {
        for(int i = 0; i < 20; ++i) {
            PhasePoint re{U(rng), U(rng)};
            EXPECT_EQ(taylor_extension(m.symbol, 1, re, {0, 0}), m.symbol(re.x, re.xi));
            EXPECT_EQ(taylor_extension(m.symbol, 2, re, {0, 0}), m.symbol(re.x, re.xi));
        }
    }
}

TEST(TaylorExtension, ExactForPolynomialsOfDegreeOrder)
{
    // Holomorphic extension of the Davies symbol: (xi + i b)^2 + i (x + i a)^2.
    auto dav = make_davies();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for(int i = 0; i < 50; ++i) {
        PhasePoint re{U(rng), U(rng)}, im{U(rng), U(rng)};
        cplx X(re.x, im.x), Xi(re.xi, im.xi);
        cplx exact = Xi * Xi + cplx(0, 1) * X * X;
        EXPECT_LT(std::abs(taylor_extension(dav.symbol, 2, re, im) - exact), 1e-13);
    }
    GevreySymbol lin = linear_combination(cplx(2, 1), position_symbol(), cplx(-1, 3), momentum_symbol());
    for(int i = 0; i < 50; ++i) {
        PhasePoint re{U(rng), U(rng)}, im{U(rng), U(rng)};
        cplx exact = cplx(2, 1) * cplx(re.x, im.x) + cplx(-1, 3) * cplx(re.xi, im.xi);
        EXPECT_LT(std::abs(taylor_extension(lin, 1, re, im) - exact), 1e-13);
    }
}

TEST(TaylorExtension, RejectsOrder)
{
    auto m = make_davies();
    EXPECT_THROW(taylor_extension(m.symbol, 3, {0, 0}, {0, 0}), std::invalid_argument);
    EXPECT_THROW(taylor_extension(m.symbol, 0, {0, 0}, {0, 0}), std::invalid_argument);
}

TEST(BandLimited, CutoffShape)
{
    GevreySymbol b = band_limited(momentum_symbol(), 1.0, 2.0);
    EXPECT_EQ(b(0.0, 0.7), cplx(0.7));
    EXPECT_EQ(b(0.0, -1.0), cplx(-1.0));
    EXPECT_EQ(b(0.0, 2.5), cplx(0.0));
    EXPECT_EQ(b.xi_extent(0.1), 2.0);
}
