#include "gps/quantize.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <fftw3.h>
#include <fmt/format.h>
#include <omp.h>

#include "gps/error.hpp"
#include "gps/parallel.hpp"

namespace gps {

static_assert(std::endian::native == std::endian::little, "binary matrix format assumes a little-endian host");

namespace {

constexpr int kStencil = 16;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// One FFTW plan shared by all workers; each worker owns aligned buffers.
class FftBuffers {
public:
    explicit FftBuffers(int n)
        : in_(fftw_alloc_complex(n)), out_(fftw_alloc_complex(n)) {}
    ~FftBuffers()
    {
        fftw_free(in_);
        fftw_free(out_);
    }
    FftBuffers(const FftBuffers&) = delete;
    FftBuffers& operator=(const FftBuffers&) = delete;

    cplx* in() { return reinterpret_cast<cplx*>(in_); }
    cplx* out() { return reinterpret_cast<cplx*>(out_); }
    void run(fftw_plan plan) { fftw_execute_dft(plan, in_, out_); }

private:
    fftw_complex* in_;
    fftw_complex* out_;
};

class FftPlan {
public:
    FftPlan(int n, int sign)
    {
        FftBuffers scratch(n);
        plan_ = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(scratch.in()),
                                 reinterpret_cast<fftw_complex*>(scratch.out()), sign, FFTW_ESTIMATE);
    }
    ~FftPlan() { fftw_destroy_plan(plan_); }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;
    fftw_plan get() const { return plan_; }

private:
    fftw_plan plan_;
};

void check_h(double h)
{
    if(!(h > 0.0 && h <= 1.0)) throw ConfigError(fmt::format("semiclassical parameter h = {} outside (0, 1]", h));
}

void check_nyquist(const RealGrid& grid, double h, double extent, const std::string& tag)
{
    if(extent > grid.nyquist(h)) {
        int need = required_points(grid.half_width_L, h, extent);
        throw ResolutionError(fmt::format("symbol '{}' needs xi extent {:.6g} but Nyquist frequency at N = {}, L = {}, h = {} "
                                          "is {:.6g}; use N >= {}",
                                          tag, extent, grid.n_points, grid.half_width_L, h, grid.nyquist(h), need),
                              need);
    }
}

// Lagrange weights at fractional position pos for integer nodes lo..lo+kStencil-1.
std::array<double, kStencil> lagrange_weights(double pos, int lo)
{
    std::array<double, kStencil> w;
    for(int a = 0; a < kStencil; ++a) {
        double v = 1.0;
        for(int b = 0; b < kStencil; ++b)
            if(a != b) v *= (pos - (lo + b)) / static_cast<double>(a - b);
        w[a] = v;
    }
    return w;
}

} // namespace

RealGrid RealGrid::make(double L, int N)
{
    if(!(L > 0.0)) throw GridError(fmt::format("grid half-width L = {} must be positive", L));
    if(!is_power_of_two(N)) throw GridError(fmt::format("grid size N = {} is not a power of two", N));
    return RealGrid{L, N};
}

double RealGrid::nyquist(double h) const
{
    return M_PI * h / spacing();
}

double RealGrid::theta(int m, double h) const
{
    return -nyquist(h) + m * (2.0 * M_PI * h / (n_points * spacing()));
}

int required_points(double L, double h, double xi_extent)
{
    int n = 8;
    while(M_PI * h * n / (2.0 * L) < xi_extent) n *= 2;
    return n;
}

WeylMatrix assemble_weyl(const GevreySymbol& sym, const RealGrid& grid, double h)
{
    return assemble_weyl(sym, grid, h, sym.xi_extent(h));
}

WeylMatrix assemble_weyl(const GevreySymbol& sym, const RealGrid& grid, double h, double xi_extent)
{
    check_h(h);
    check_nyquist(grid, h, xi_extent, sym.tag);
    configure_workers();
    const int N = grid.n_points;
    const double dx = grid.spacing();
    WeylMatrix P{Eigen::MatrixXcd(N, N), h, grid, sym.tag};
    std::vector<double> theta(N);
    for(int m = 0; m < N; ++m) theta[m] = grid.theta(m, h);
    FftPlan plan(N, FFTW_BACKWARD);
    const double inv_n = 1.0 / N;

#pragma omp parallel
    {
        FftBuffers buf(N);
#pragma omp for schedule(static)
        for(int s = 0; s < 2 * N - 1; ++s) {
            double mid = -grid.half_width_L + 0.5 * s * dx;
            for(int m = 0; m < N; ++m) buf.in()[m] = sym.eval(mid, theta[m]);
            buf.run(plan.get());
            int j_lo = std::max(0, s - (N - 1));
            int j_hi = std::min(N - 1, s);
            for(int j = j_lo; j <= j_hi; ++j) {
                int k = s - j;
                int d = j - k;
                double sign = (d & 1) ? -1.0 : 1.0;
                P.entries(j, k) = sign * inv_n * buf.out()[((d % N) + N) % N];
            }
        }
    }
    return P;
}

WeylMatrix assemble_weyl_reference(const GevreySymbol& sym, const RealGrid& grid, double h)
{
    check_h(h);
    check_nyquist(grid, h, sym.xi_extent(h), sym.tag);
    const int N = grid.n_points;
    WeylMatrix P{Eigen::MatrixXcd(N, N), h, grid, sym.tag};
    for(int j = 0; j < N; ++j) {
        for(int k = 0; k < N; ++k) {
            double xj = grid.node(j), xk = grid.node(k);
            cplx acc = 0.0;
            for(int m = 0; m < N; ++m) {
                double th = grid.theta(m, h);
                acc += std::polar(1.0, (xj - xk) * th / h) * sym.eval(0.5 * (xj + xk), th);
            }
            P.entries(j, k) = acc / static_cast<double>(N);
        }
    }
    return P;
}

SampledSymbol inverse_weyl(const WeylMatrix& P)
{
    const int N = P.size();
    if(N != P.grid.n_points) throw GridError(fmt::format("matrix size {} does not match grid size {}", N, P.grid.n_points));
    configure_workers();
    SampledSymbol out;
    out.h = P.h;
    out.mids.resize(2 * N - 1);
    out.thetas.resize(N);
    for(int s = 0; s < 2 * N - 1; ++s) out.mids[s] = -P.grid.half_width_L + 0.5 * s * P.grid.spacing();
    for(int m = 0; m < N; ++m) out.thetas[m] = P.grid.theta(m, P.h);
    out.values = Eigen::MatrixXcd::Zero(2 * N - 1, N);
    std::vector<char> valid(2 * N - 1, 1);

    const int half = kStencil / 2;
    const auto centered = lagrange_weights(half - 0.5, 0);
    FftPlan plan(N, FFTW_FORWARD);

#pragma omp parallel
    {
        FftBuffers buf(N);
#pragma omp for schedule(static)
        for(int s = 0; s < 2 * N - 1; ++s) {
            bool ok = true;
            for(int d = -N / 2; d < N / 2; ++d) {
                // Diagonal d holds P(k + d, k) for k in [k0, k1).
                int k0 = std::max(0, -d), k1 = std::min(N, N - d);
                int len = k1 - k0;
                cplx v = 0.0;
                if(((s - d) & 1) == 0) {
                    int k = (s - d) / 2;
                    if(k < k0 || k >= k1) {
                        ok = false;
                    } else {
                        v = P.entries(k + d, k);
                    }
                } else {
                    double pos = 0.5 * (s - d) - k0;
                    if(len < kStencil || pos < 0.0 || pos > len - 1) {
                        ok = false;
                    } else {
                        int lo = static_cast<int>(std::floor(pos)) - half + 1;
                        std::array<double, kStencil> w;
                        if(lo < 0 || lo > len - kStencil) {
                            lo = std::clamp(lo, 0, len - kStencil);
                            w = lagrange_weights(pos, lo);
                        } else {
                            w = centered;
                        }
                        for(int a = 0; a < kStencil; ++a) {
                            int k = k0 + lo + a;
                            v += w[a] * P.entries(k + d, k);
                        }
                    }
                }
                buf.in()[((d % N) + N) % N] = (d & 1) ? -v : v;
            }
            buf.run(plan.get());
            for(int m = 0; m < N; ++m) out.values(s, m) = buf.out()[m];
            valid[s] = ok ? 1 : 0;
        }
    }
    out.valid.assign(valid.begin(), valid.end());
    return out;
}

SampledSymbol sample_symbol(const GevreySymbol& sym, const RealGrid& grid, double h)
{
    const int N = grid.n_points;
    SampledSymbol out;
    out.h = h;
    out.mids.resize(2 * N - 1);
    out.thetas.resize(N);
    for(int s = 0; s < 2 * N - 1; ++s) out.mids[s] = -grid.half_width_L + 0.5 * s * grid.spacing();
    for(int m = 0; m < N; ++m) out.thetas[m] = grid.theta(m, h);
    out.values.resize(2 * N - 1, N);
    for(int s = 0; s < 2 * N - 1; ++s)
        for(int m = 0; m < N; ++m) out.values(s, m) = sym.eval(out.mids[s], out.thetas[m]);
    out.valid.assign(2 * N - 1, true);
    return out;
}

SampledSymbol compose_and_extract(const GevreySymbol& a, const GevreySymbol& b, const RealGrid& grid, double h)
{
    WeylMatrix A = assemble_weyl(a, grid, h);
    WeylMatrix B = assemble_weyl(b, grid, h);
    WeylMatrix C{A.entries * B.entries, h, grid, a.tag + "#" + b.tag};
    SampledSymbol c = inverse_weyl(C);
    SampledSymbol ab = sample_symbol(product(a, b), grid, h);
    c.values = (c.values - ab.values) / h;
    return c;
}

double window_sup(const SampledSymbol& field, double x_window, double theta_window)
{
    double sup = 0.0;
    for(std::size_t s = 0; s < field.mids.size(); ++s) {
        if(!field.valid[s] || std::abs(field.mids[s]) > x_window) continue;
        for(std::size_t m = 0; m < field.thetas.size(); ++m) {
            if(std::abs(field.thetas[m]) > theta_window) continue;
            sup = std::max(sup, std::abs(field.values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(m))));
        }
    }
    return sup;
}

void write_weyl_binary(const std::filesystem::path& path, const WeylMatrix& P)
{
    std::ofstream os(path, std::ios::binary);
    if(!os) throw ConfigError(fmt::format("cannot open '{}' for writing", path.string()));
    const char magic[4] = {'G', 'P', 'S', 'W'};
    std::uint32_t n = static_cast<std::uint32_t>(P.size());
    os.write(magic, 4);
    os.write(reinterpret_cast<const char*>(&n), sizeof n);
    os.write(reinterpret_cast<const char*>(&P.h), sizeof P.h);
    for(int j = 0; j < P.size(); ++j) {
        for(int k = 0; k < P.size(); ++k) {
            double re_im[2] = {P.entries(j, k).real(), P.entries(j, k).imag()};
            os.write(reinterpret_cast<const char*>(re_im), sizeof re_im);
        }
    }
    if(!os) throw ConfigError(fmt::format("write to '{}' failed", path.string()));
}

WeylMatrix read_weyl_binary(const std::filesystem::path& path, double L)
{
    std::ifstream is(path, std::ios::binary);
    if(!is) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
    char magic[4];
    std::uint32_t n = 0;
    double h = 0.0;
    is.read(magic, 4);
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    is.read(reinterpret_cast<char*>(&h), sizeof h);
    if(!is || std::memcmp(magic, "GPSW", 4) != 0) throw ConfigError(fmt::format("'{}' is not a matrix file", path.string()));
    WeylMatrix P{Eigen::MatrixXcd(n, n), h, RealGrid::make(L, static_cast<int>(n)), "file:" + path.filename().string()};
    for(std::uint32_t j = 0; j < n; ++j) {
        for(std::uint32_t k = 0; k < n; ++k) {
            double re_im[2];
            is.read(reinterpret_cast<char*>(re_im), sizeof re_im);
            P.entries(j, k) = cplx(re_im[0], re_im[1]);
        }
    }
    if(!is) throw ConfigError(fmt::format("'{}' is truncated", path.string()));
    return P;
}

} // namespace gps
