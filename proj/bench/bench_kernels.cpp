// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include "gps/fbi.hpp"
#include "gps/geometry.hpp"
#include "gps/parallel.hpp"
#include "gps/quantize.hpp"
#include "gps/spectral.hpp"

using namespace gps;

namespace {

const ModelInstance& model()
{
    static const ModelInstance m = make_gevrey_transport(2.0);
    return m;
}

WeylMatrix matrix(int N)
{
    return assemble_weyl(model().symbol, RealGrid::make(4.0, N), 0.05);
}

ZWindow window(int res)
{
    return {cplx(0.0, 0.0), 0.5, 0.5, res, res};
}

void BM_AssembleWeyl(benchmark::State& st)
{
    RealGrid g = RealGrid::make(4.0, static_cast<int>(st.range(0)));
    for(auto _ : st) benchmark::DoNotOptimize(assemble_weyl(model().symbol, g, 0.05));
}

void BM_AssembleWeylReference(benchmark::State& st)
{
    RealGrid g = RealGrid::make(4.0, static_cast<int>(st.range(0)));
    for(auto _ : st) benchmark::DoNotOptimize(assemble_weyl_reference(model().symbol, g, 0.05));
}

void BM_Pseudospectrum(benchmark::State& st)
{
    WeylMatrix P = matrix(static_cast<int>(st.range(0)));
    for(auto _ : st) benchmark::DoNotOptimize(pseudospectrum(P, window(16)));
}

void BM_PseudospectrumReference(benchmark::State& st)
{
    WeylMatrix P = matrix(static_cast<int>(st.range(0)));
    for(auto _ : st) benchmark::DoNotOptimize(pseudospectrum_reference(P, window(16)));
}

void BM_BuildEscape(benchmark::State& st)
{
    LatticeSpec lat = escape_lattice(model(), static_cast<int>(st.range(0)));
    for(auto _ : st) benchmark::DoNotOptimize(build_escape(model(), {}, lat));
}

void BM_BuildEscapeReference(benchmark::State& st)
{
    LatticeSpec lat = escape_lattice(model(), static_cast<int>(st.range(0)));
    for(auto _ : st) benchmark::DoNotOptimize(build_escape_reference(model(), {}, lat));
}

struct FbiSetup {
    FBIOperator T;
    Eigen::VectorXcd u;
};

FbiSetup fbi_setup(double h)
{
    FBIOperator T = make_fbi(RealGrid::make(kFbiDefaultL, required_points(kFbiDefaultL, h, 4.0)),
                             ComplexGrid::covering(model(), h), h);
    Eigen::VectorXcd u = coherent_state(T.real_grid(), 0.0, 1.0, h);
    return {std::move(T), std::move(u)};
}

void BM_FbiApply(benchmark::State& st)
{
    FbiSetup s = fbi_setup(1.0 / static_cast<double>(st.range(0)));
    for(auto _ : st) benchmark::DoNotOptimize(s.T.apply(s.u));
}

void BM_FbiApplyReference(benchmark::State& st)
{
    FbiSetup s = fbi_setup(1.0 / static_cast<double>(st.range(0)));
    for(auto _ : st) benchmark::DoNotOptimize(s.T.apply_reference(s.u));
}

} // namespace

BENCHMARK(BM_AssembleWeyl)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssembleWeylReference)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Pseudospectrum)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PseudospectrumReference)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildEscape)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildEscapeReference)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
// Argument is 1/h.
BENCHMARK(BM_FbiApply)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FbiApplyReference)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv)
{
    configure_workers();
    benchmark::Initialize(&argc, argv);
    if(benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    return 0;
}
