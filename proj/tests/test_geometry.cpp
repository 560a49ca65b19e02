#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gps/error.hpp"
#include "gps/geometry.hpp"

using namespace gps;

namespace {

const EscapeField& gevrey2_field()
{
    static const EscapeField f = build_escape(make_gevrey_transport(2.0));
    return f;
}

} // namespace

TEST(Flow, TransportTranslatesAtUnitSpeed)
{
    auto m = make_gevrey_transport(2.0);
    Trajectory tr = flow(m.symbol, {0.0, 0.0}, 3.0);
    ASSERT_EQ(tr.points.size(), 301u);
    for(std::size_t k = 0; k < tr.points.size(); ++k) {
        EXPECT_NEAR(tr.points[k].x, tr.times[k], 1e-12);
        EXPECT_EQ(tr.points[k].xi, 0.0);
    }
    EXPECT_FALSE(tr.truncated);
}

TEST(Flow, ConservesImP)
{
    for(const auto& m : {make_gevrey_transport(2.0), make_rotated_transport(2.0, 0.5), make_analytic_transport()}) {
        Trajectory tr = flow(m.symbol, {0.3, 0.7}, 10.0);
        EXPECT_LT(tr.energy_drift, 1e-7) << m.tag();
        Trajectory tr2 = flow(m.symbol, {-1.2, 0.05}, 10.0);
        EXPECT_LT(tr2.energy_drift, 1e-7) << m.tag();
    }
}

TEST(Flow, Reversible)
{
    auto m = make_rotated_transport(2.0, 0.5);
    for(double t : {1.0, 5.0, 10.0}) {
        PhasePoint start{0.4, -0.3};
        PhasePoint end = flow(m.symbol, start, t).points.back();
        PhasePoint back = flow(m.symbol, end, -t).points.back();
        EXPECT_LT(std::hypot(back.x - start.x, back.xi - start.xi), 1e-8) << t;
    }
}

TEST(Flow, EscapeTimeMatchesClosedForm)
{
    // E_2(t^2 - 1) = e^{-1}/2  <=>  t^2 = 1 + 1/(1 + ln 2).
    double root = std::sqrt(1.0 + 1.0 / (1.0 + std::log(2.0)));
    auto m = make_gevrey_transport(2.0);
    const double dt = 1e-2;
    Trajectory tr = flow(m.symbol, {0.0, 0.0}, 3.0, dt);
    double hit = -1.0;
    for(std::size_t k = 0; k < tr.points.size(); ++k)
        if(m.symbol(tr.points[k].x, tr.points[k].xi).real() > std::exp(-1.0) / 2) {
            hit = tr.times[k];
            break;
        }
    EXPECT_GE(hit, root);
    EXPECT_LT(hit - root, dt);
}

TEST(Flow, TruncatesOutsideBox)
{
    auto m = make_gevrey_transport(2.0);
    Trajectory tr = flow(m.symbol, {45.0, 0.0}, 10.0);
    EXPECT_TRUE(tr.truncated);
    EXPECT_THROW(flow(m.symbol, {0, 0}, 1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(flow(m.symbol, {0, 0}, 1e5, 1e-2), std::invalid_argument);
}

TEST(Nontrapping, Catalog)
{
    NontrappingReport g = nontrapping_check(make_gevrey_transport(2.0), 1e-3, 0.05, 10.0);
    EXPECT_TRUE(g.ok);
    EXPECT_GT(g.zero_points, 0u);
    EXPECT_LT(g.worst_escape_time, 2.2);
    NontrappingReport a = nontrapping_check(make_analytic_transport(), 1e-3, 0.05, 10.0);
    EXPECT_TRUE(a.ok);
    EXPECT_LT(a.worst_escape_time, 0.5);
    NontrappingReport t = nontrapping_check(make_trapped_toy(), 1e-3, 0.05, 10.0);
    EXPECT_FALSE(t.ok);
    EXPECT_TRUE(t.trapped_point.has_value());
}

TEST(Nontrapping, NoZeroPointsIsConfigError)
{
    ModelInstance m = make_gevrey_transport(2.0);
    m.z0 = cplx(5.0, 5.0);
    EXPECT_THROW(nontrapping_check(m, 1e-3, 0.05, 10.0), ConfigError);
}

TEST(Escape, PositiveMarginForTransportModels)
{
    for(const auto& m : {make_gevrey_transport(1.5), make_gevrey_transport(3.0), make_analytic_transport(),
                         make_rotated_transport(2.0, 0.5)}) {
        EscapeField f = build_escape(m, {}, escape_lattice(m, 12));
        EXPECT_GT(f.margin_c, 0.0) << m.tag();
        EXPECT_FALSE(f.zero_points.empty());
    }
    EXPECT_GT(gevrey2_field().margin_c, 0.0);
}

TEST(Escape, TrappedToyFails)
{
    auto m = make_trapped_toy();
    EXPECT_THROW(build_escape(m, {}, escape_lattice(m, 8)), EscapeError);
}

TEST(Escape, CompactSupportAndBound)
{
    const EscapeField& f = gevrey2_field();
    for(int j = 0; j < f.lattice.nxi; ++j)
        for(int i = 0; i < f.lattice.nx; ++i) {
            PhasePoint p = f.lattice.node(i, j);
            if(std::hypot(p.x - f.cutoff.center.x, p.xi - f.cutoff.center.xi) >= f.cutoff.outer) EXPECT_EQ(f.at(i, j), 0.0);
        }
    EXPECT_EQ(f.value_at({10.0, 10.0}), 0.0);
    // sup Re p = 1 for the transport family.
    EXPECT_LE(f.sup_abs(), 2.0 * f.params.T * 1.0);
    EXPECT_GT(f.sup_abs(), 0.0);
}

TEST(Escape, FlowDerivativeMatchesClosedForm)
{
    auto m = make_gevrey_transport(2.0);
    EscapeParams params;
    BallCutoff cut = default_cutoff(m);
    for(PhasePoint p : {PhasePoint{0.0, 0.0}, PhasePoint{0.7, 0.05}, PhasePoint{-1.0, -0.08}, PhasePoint{1.3, 0.3}}) {
        EscapeSample s = escape_sample(m.symbol, cut, params, p);
        EXPECT_NEAR(s.HG, escape_derivative_closed_form(m.symbol, params, p), 1e-6);
    }
}

namespace {

double two_way_mismatch(const EscapeField& f)
{
    double worst = 0.0;
    for(int j = 2; j < f.lattice.nxi - 2; ++j)
        for(int i = 2; i < f.lattice.nx - 2; ++i) {
            PhasePoint p = f.lattice.node(i, j);
            double reach = 2.0 * std::hypot(f.lattice.dx(), f.lattice.dxi());
            if(std::hypot(p.x - f.cutoff.center.x, p.xi - f.cutoff.center.xi) + reach > f.cutoff.inner) continue;
            PhasePoint g = f.lattice_gradient(i, j);
            PhasePoint H = hamilton_field(f.symbol, p);
            worst = std::max(worst, std::abs(g.x * H.x + g.xi * H.xi - f.hg_at(i, j)));
        }
    return worst;
}

} // namespace

TEST(Escape, LatticeGradientAgreesWithFlowDerivative)
{
    // Smooth model: the default lattice resolves G.
    auto a = make_analytic_transport();
    EXPECT_LT(two_way_mismatch(build_escape(a, {}, escape_lattice(a, 20))), 1e-4);
    // Gevrey-flat switch-on near |x| = 1 needs a finer patch across the transition layer.
    auto g2 = make_gevrey_transport(2.0);
    EXPECT_LT(two_way_mismatch(build_escape(g2, {}, LatticeSpec{{0.7, 1.5, -0.1, 0.1}, 161, 21})), 1e-4);
    // For s = 3 the flow-direction difference also needs a shorter step than the default 1e-2.
    auto g3 = make_gevrey_transport(3.0);
    EscapeParams fine;
    fine.dt = 2.5e-3;
    EXPECT_LT(two_way_mismatch(build_escape(g3, fine, LatticeSpec{{0.95, 1.25, -0.04, 0.04}, 301, 9})), 1e-4);
}

TEST(Escape, ParallelMatchesReference)
{
    auto m = make_gevrey_transport(2.0);
    LatticeSpec lat = escape_lattice(m, 6);
    EscapeField a = build_escape(m, {}, lat);
    EscapeField b = build_escape_reference(m, {}, lat);
    EXPECT_TRUE(a.G == b.G);
    EXPECT_TRUE(a.HG == b.HG);
    EXPECT_EQ(a.margin_c, b.margin_c);
}

TEST(Escape, InterpolationReproducesNodes)
{
    const EscapeField& f = gevrey2_field();
    for(int j = 10; j < f.lattice.nxi - 10; j += 7)
        for(int i = 10; i < f.lattice.nx - 10; i += 7) EXPECT_NEAR(f.value_at(f.lattice.node(i, j)), f.at(i, j), 1e-12);
}

TEST(Deformation, RejectsNonNegativeT)
{
    auto m = make_gevrey_transport(2.0);
    EXPECT_THROW(check_deformed_ellipticity(m, gevrey2_field(), 0.0, 2), std::invalid_argument);
    EXPECT_THROW(check_deformed_ellipticity(m, gevrey2_field(), 0.1, 2), std::invalid_argument);
    EXPECT_THROW(check_deformed_ellipticity(m, gevrey2_field(), -0.9, 2), ConfigError);
}

TEST(Deformation, PositiveGammaAndFirstOrderDominance)
{
    auto m = make_gevrey_transport(2.0);
    DeformationCheck a = check_deformed_ellipticity(m, gevrey2_field(), -0.05, 2);
    DeformationCheck b = check_deformed_ellipticity(m, gevrey2_field(), -0.1, 2);
    EXPECT_GT(a.gamma_measured, 0.0);
    EXPECT_LT(std::abs(b.gamma_measured - a.gamma_measured), 0.5 * a.gamma_measured);
    EXPECT_GT(largest_valid_deformation(m, gevrey2_field(), 2), 0.05);
}
