#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gps/cli.hpp"
#include "gps/error.hpp"
#include "gps/experiments.hpp"

using namespace gps;

namespace {

std::filesystem::path scratch(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("gps_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<SweepRecord> synthetic(const std::function<double(double)>& r)
{
    std::vector<SweepRecord> out;
    for(double h : {0.2, 0.1, 0.05, 0.025, 0.0125}) out.push_back({h, r(h), 1.0, 1.0, 1.0, 1.0, 1.0});
    return out;
}

void write_synthetic_outputs(const std::filesystem::path& dir, const std::vector<SweepRecord>& rec,
                             const std::vector<double>& drift = {})
{
    std::ofstream csv(dir / "sweep.csv");
    write_sweep_csv_header(csv);
    for(const auto& r : rec) write_sweep_csv_row(csv, r);
    std::ofstream d(dir / "diagnostics.csv");
    d << "h,N,L,retained,boundary_filter,nearest_re,nearest_im,nearest_condition,norm_estimate,floor_limited,"
         "refined_r,refinement_drift,circle_argmin_re,circle_argmin_im,probe_re,probe_im,probe_moved,epsilon_used,t\n";
    for(std::size_t k = 0; k < rec.size(); ++k)
        d << rec[k].h << ",64,4,64,0,0,0,1,1,0,nan," << (k < drift.size() ? drift[k] : 0.0) << ",0,0,0,0,0,0.1,-0.01\n";
}

} // namespace

TEST(ModelTags, KnownTagsParse)
{
    EXPECT_EQ(parse_model("davies").family, ModelFamily::davies);
    EXPECT_EQ(parse_model("analytic-transport").family, ModelFamily::analytic_transport);
    EXPECT_EQ(parse_model("gevrey-transport:s=3").symbol.order_s, 3.0);
    EXPECT_EQ(parse_model("trapped-toy").tag(), "trapped-toy");
    ModelInstance rot = parse_model("rotated-transport:s=2,angle=0.5");
    ASSERT_TRUE(rot.multiplier_q.has_value());
    EXPECT_NEAR(std::arg(rot.symbol(0.0, 0.3)), 0.5 + std::arg(cplx(0.0, std::tanh(0.3))), 1e-12);
}

TEST(ModelTags, BadTagsAreConfigErrors)
{
    EXPECT_THROW(parse_model("unknown"), ConfigError);
    EXPECT_THROW(parse_model("gevrey-transport"), ConfigError);
    EXPECT_THROW(parse_model("gevrey-transport:s=1"), ConfigError);
    EXPECT_THROW(parse_model("gevrey-transport:s=2,q=1"), ConfigError);
    EXPECT_THROW(parse_model("rotated-transport:s=2"), ConfigError);
}

TEST(Config, ParsesKeysAndComments)
{
    std::istringstream in("# sweep\nmodel = gevrey-transport:s=3  # comment\nh_list = 0.2, 0.1,0.05\n"
                          "N = 512\nz0_re = -0.25\nseed = 0x10\nrun_toeplitz = false\nelliptic_box = -1, 1, -2, 2\n");
    SweepConfig c = parse_config(in);
    EXPECT_EQ(c.model_tag, "gevrey-transport:s=3");
    ASSERT_EQ(c.h_list.size(), 3u);
    EXPECT_EQ(c.h_list[1], 0.1);
    EXPECT_EQ(c.N, 512);
    EXPECT_EQ(c.z0, cplx(-0.25, 0.0));
    EXPECT_EQ(c.seed, 16u);
    EXPECT_FALSE(c.run_toeplitz);
    EXPECT_EQ(c.elliptic_box.im_max, 2.0);
}

TEST(Config, RejectsInvalidInput)
{
    auto parse = [](const std::string& s) {
        std::istringstream in(s);
        return parse_config(in);
    };
    EXPECT_THROW(parse("model = davies\n"), ConfigError);
    EXPECT_THROW(parse("h_list = 0.1, 0.2\n"), ConfigError);
    EXPECT_THROW(parse("h_list = 0.1, 0.1\n"), ConfigError);
    EXPECT_THROW(parse("h_list = 1.5\n"), ConfigError);
    EXPECT_THROW(parse("h_list = 0.1\ncolour = red\n"), ConfigError);
    EXPECT_THROW(parse("h_list = 0.1\nN = 100\n"), ConfigError);
    EXPECT_THROW(parse("h_list = 0.1\nL = abc\n"), ConfigError);
    EXPECT_THROW(parse("h_list = 0.1\nmodel = nope\n"), ConfigError);
}

TEST(Config, NyquistRule)
{
    SweepConfig c;
    auto m = make_gevrey_transport(2.0);
    EXPECT_EQ(c.points_for(0.1, m.symbol), 128);
    EXPECT_EQ(c.points_for(0.0125, m.symbol), 1024);
    c.N = 64;
    EXPECT_THROW(c.points_for(0.0125, m.symbol), ResolutionError);
}

TEST(Fit, RecoversExactPowerLaws)
{
    FitResult a = fit_power_law(synthetic([](double h) { return std::sqrt(h); }), [](const SweepRecord& r) { return r.r; });
    EXPECT_NEAR(a.slope, 0.5, 1e-12);
    EXPECT_NEAR(a.r_squared, 1.0, 1e-12);
    FitResult b = fit_power_law(synthetic([](double h) { return 3.0 * h; }), [](const SweepRecord& r) { return r.r; });
    EXPECT_NEAR(b.slope, 1.0, 1e-12);
    EXPECT_NEAR(b.intercept, std::log(3.0), 1e-12);
    EXPECT_EQ(b.n_points, 5);
}

TEST(Fit, ExcludesNonpositiveAndNeedsFourPoints)
{
    auto rec = synthetic([](double h) { return h; });
    rec[0].r = 0.0;
    FitResult f = fit_power_law(rec, [](const SweepRecord& r) { return r.r; });
    EXPECT_EQ(f.n_points, 4);
    rec[1].r = -1.0;
    EXPECT_THROW(fit_power_law(rec, [](const SweepRecord& r) { return r.r; }), NumericalError);
}

TEST(Growth, SyntheticExponential)
{
    std::vector<double> h{0.2, 0.1, 0.05, 0.025}, v;
    for(double x : h) v.push_back(std::exp(2.0 * std::pow(x, -0.5)));
    GrowthCheck g = resolvent_growth_check(h, v, 2.0);
    ASSERT_TRUE(g.fit.has_value());
    EXPECT_NEAR(g.fit->slope, 2.0, 1e-12);
    EXPECT_NEAR(g.fit->r_squared, 1.0, 1e-12);
    EXPECT_EQ(g.regime, "exponential");
    EXPECT_TRUE(g.pass);
}

TEST(Growth, BoundedAndInfiniteRegimes)
{
    std::vector<double> h{0.2, 0.1, 0.05, 0.025};
    GrowthCheck b = resolvent_growth_check(h, {5.0, 10.0, 20.0, 40.0}, 2.0);
    EXPECT_EQ(b.regime, "bounded");
    EXPECT_TRUE(b.pass);
    GrowthCheck i = resolvent_growth_check(h, {5.0, 10.0, std::numeric_limits<double>::infinity(), 40.0}, 2.0);
    EXPECT_EQ(i.regime, "infinite");
    EXPECT_FALSE(i.pass);
}

TEST(Sweep, DaviesFreeRadiusIsH)
{
    SweepConfig c;
    c.model_tag = "davies";
    c.h_list = {0.1, 0.05};
    c.run_escape = false;
    c.heatmap_res = 16;
    c.output_dir = scratch("davies");
    SweepResult r = run_sweep(c);
    ASSERT_EQ(r.records.size(), 2u);
    for(const SweepRecord& rec : r.records) {
        EXPECT_LT(std::abs(rec.r / rec.h - 1.0), 1e-3);
        EXPECT_GT(rec.resnorm, 0.0);
        EXPECT_TRUE(std::isfinite(rec.resnorm));
    }
    for(const SweepDiagnostics& d : r.diagnostics) EXPECT_TRUE(d.resolved()) << d.h;
    EXPECT_EQ(load_sweep_csv(c.output_dir / "sweep.csv").size(), 2u);
    ASSERT_EQ(r.heatmaps.size(), 2u);
    EXPECT_EQ(r.heatmaps[0].field.sigma_min.rows(), 16);

    auto summary = emit_outputs(c, r.heatmaps, r.skipped);
    auto j = nlohmann::json::parse(slurp(summary));
    EXPECT_EQ(j["rows"], 2);
    EXPECT_TRUE(j["criteria"]["spectrum_free_scaling"]["pass"].get<bool>());
    std::string svg = slurp(c.output_dir / "heatmap_0.svg");
    EXPECT_NE(svg.find("width=\"128\" height=\"128\""), std::string::npos);
}

TEST(Sweep, RerunIsBitIdentical)
{
    SweepConfig c;
    c.model_tag = "davies";
    c.h_list = {0.1, 0.05};
    c.run_escape = false;
    c.heatmap_res = 0;
    c.output_dir = scratch("rerun_a");
    run_sweep(c);
    std::string a = slurp(c.output_dir / "sweep.csv"), da = slurp(c.output_dir / "diagnostics.csv");
    c.output_dir = scratch("rerun_b");
    run_sweep(c);
    EXPECT_EQ(a, slurp(c.output_dir / "sweep.csv"));
    EXPECT_EQ(da, slurp(c.output_dir / "diagnostics.csv"));
}

TEST(Outputs, EmptySweepGivesEmptySummary)
{
    SweepConfig c;
    c.h_list = {0.1};
    c.output_dir = scratch("empty");
    write_synthetic_outputs(c.output_dir, {});
    auto j = nlohmann::json::parse(slurp(emit_outputs(c, {})));
    EXPECT_EQ(j["rows"], 0);
    EXPECT_TRUE(j["criteria"].empty());
}

TEST(Outputs, VerdictsDerivedFromCsv)
{
    SweepConfig c;
    c.model_tag = "gevrey-transport:s=2";
    c.h_list = {0.1};
    c.output_dir = scratch("verdicts");

    write_synthetic_outputs(c.output_dir, synthetic([](double h) { return 2.0 * std::sqrt(h); }));
    auto j = nlohmann::json::parse(slurp(emit_outputs(c, {})));
    auto sc = j["criteria"]["spectrum_free_scaling"];
    EXPECT_TRUE(sc["approaches_z0"].get<bool>());
    EXPECT_NEAR(sc["c_min"].get<double>(), 2.0, 1e-12);
    EXPECT_TRUE(sc["pass"].get<bool>());
    std::string first = slurp(c.output_dir / "summary.json");
    emit_outputs(c, {});
    EXPECT_EQ(first, slurp(c.output_dir / "summary.json"));

    write_synthetic_outputs(c.output_dir, synthetic([](double h) { return 2.0 * h; }));
    j = nlohmann::json::parse(slurp(emit_outputs(c, {})));
    EXPECT_FALSE(j["criteria"]["spectrum_free_scaling"]["pass"].get<bool>());

    write_synthetic_outputs(c.output_dir, synthetic([](double) { return 0.5; }));
    j = nlohmann::json::parse(slurp(emit_outputs(c, {})));
    EXPECT_FALSE(j["criteria"]["spectrum_free_scaling"]["approaches_z0"].get<bool>());
    EXPECT_TRUE(j["criteria"]["spectrum_free_scaling"]["pass"].get<bool>());
}

TEST(Outputs, UnconvergedRowsLeaveTheExponentFit)
{
    SweepConfig c;
    c.model_tag = "gevrey-transport:s=3";
    c.h_list = {0.1};
    c.output_dir = scratch("unconverged");
    auto rec = synthetic([](double h) { return h >= 0.05 ? 0.44 : 10.0 * h; });
    write_synthetic_outputs(c.output_dir, rec, {1e-4, 1e-4, 5e-3, 0.3, 0.3});
    auto j = nlohmann::json::parse(slurp(emit_outputs(c, {})));
    EXPECT_EQ(j["unconverged_rows"], 2);
    EXPECT_TRUE(j["refinement_checked"].get<bool>());
    auto sc = j["criteria"]["spectrum_free_scaling"];
    EXPECT_TRUE(sc["slope_reliable"].is_null());
    EXPECT_FALSE(sc["approaches_z0"].get<bool>());
    EXPECT_TRUE(sc["pass"].get<bool>());
    EXPECT_EQ(j["criteria"]["resolvent_growth"]["rows_used"], "resolved");
}

TEST(Outputs, RowsSurviveInterruption)
{
    // Each finished h is flushed, so a truncated sweep leaves a readable CSV with the finished rows.
    auto dir = scratch("partial");
    {
        std::ofstream csv(dir / "sweep.csv");
        write_sweep_csv_header(csv);
        write_sweep_csv_row(csv, {0.1, 0.5, 1e-3, 2.0, 1.9, 1.9, 0.01});
        csv.flush();
    }
    EXPECT_EQ(load_sweep_csv(dir / "sweep.csv").size(), 1u);
}

TEST(Cli, ExitCodes)
{
    auto run = [](std::vector<std::string> args) {
        args.insert(args.begin(), "gps");
        std::vector<char*> argv;
        for(auto& a : args) argv.push_back(a.data());
        return run_cli(static_cast<int>(argv.size()), argv.data());
    };
    auto dir = scratch("cli");
    EXPECT_EQ(run({"spectrum", "--model", "davies", "--h", "0.1", "--n", "128", "--out", (dir / "s.csv").string()}), 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "s.csv"));
    EXPECT_EQ(run({"spectrum", "--model", "nope", "--h", "0.1"}), 2);
    EXPECT_EQ(run({"spectrum", "--model", "davies", "--h", "0.1", "--n", "100"}), 2);
    EXPECT_EQ(run({"scaling", "--config", (dir / "missing.cfg").string()}), 2);
    EXPECT_EQ(run({"frobnicate"}), 2);
}
