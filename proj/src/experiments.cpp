#include "gps/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "gps/error.hpp"
#include "gps/svg.hpp"

namespace gps {

namespace {

using json = nlohmann::ordered_json;

constexpr double kFloorRatio = 1e-3;
constexpr double kEpsMach = 2.220446049250313e-16;
constexpr double kApproachSlope = 0.15;
constexpr double kExponentBand = 0.15;
constexpr double kToeplitzSlope = 0.9;
constexpr double kGrowthR2 = 0.9;

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r\n");
    if(b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& text)
{
    std::string t = trim(text);
    double v = 0.0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if(ec != std::errc() || p != t.data() + t.size())
        throw ConfigError(fmt::format("'{}': cannot parse '{}' as a number", key, text));
    return v;
}

long long parse_int(const std::string& key, const std::string& text)
{
    std::string t = trim(text);
    long long v = 0;
    int base = 10;
    std::string_view sv = t;
    if(sv.starts_with("0x") || sv.starts_with("0X")) {
        base = 16;
        sv.remove_prefix(2);
    }
    auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v, base);
    if(ec != std::errc() || p != sv.data() + sv.size())
        throw ConfigError(fmt::format("'{}': cannot parse '{}' as an integer", key, text));
    return v;
}

bool parse_bool(const std::string& key, const std::string& text)
{
    std::string t = trim(text);
    if(t == "true" || t == "1" || t == "yes") return true;
    if(t == "false" || t == "0" || t == "no") return false;
    throw ConfigError(fmt::format("'{}': expected true or false, got '{}'", key, text));
}

std::vector<double> parse_list(const std::string& key, const std::string& text)
{
    std::vector<double> out;
    std::string item;
    std::stringstream ss(text);
    while(std::getline(ss, item, ',')) {
        if(trim(item).empty()) continue;
        out.push_back(parse_double(key, item));
    }
    return out;
}

std::string fmt_num(double v)
{
    if(std::isnan(v)) return "nan";
    if(std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{:.17g}", v);
}

double read_num(const std::string& s)
{
    std::string t = trim(s);
    if(t == "nan") return std::numeric_limits<double>::quiet_NaN();
    if(t == "inf") return std::numeric_limits<double>::infinity();
    if(t == "-inf") return -std::numeric_limits<double>::infinity();
    return parse_double("csv", t);
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(line);
    while(std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

json fit_json(const std::optional<FitResult>& f)
{
    if(!f) return nullptr;
    return json{{"slope", f->slope}, {"intercept", f->intercept}, {"r_squared", f->r_squared}, {"n_points", f->n_points}};
}

json num_json(double v)
{
    if(!std::isfinite(v)) return fmt_num(v);
    return v;
}

std::optional<FitResult> try_fit(const std::vector<double>& h, const std::vector<double>& v)
{
    std::vector<double> x, y;
    for(std::size_t k = 0; k < h.size(); ++k)
        if(std::isfinite(v[k]) && v[k] > 0) {
            x.push_back(std::log(h[k]));
            y.push_back(std::log(v[k]));
        }
    if(x.size() < 4) return std::nullopt;
    return fit_line(x, y);
}

double norm_estimate(const Eigen::MatrixXcd& A)
{
    double n1 = A.cwiseAbs().colwise().sum().maxCoeff();
    double ninf = A.cwiseAbs().rowwise().sum().maxCoeff();
    return std::sqrt(n1 * ninf);
}

bool applies_boundary_filter(const ModelInstance& m)
{
    // Transport eigenfunctions fill the whole interval, so the outer-window mass is not a truncation signal.
    return m.family == ModelFamily::davies || m.family == ModelFamily::custom;
}

} // namespace

ModelInstance parse_model(const std::string& tag)
{
    std::string name = tag, args;
    if(auto colon = tag.find(':'); colon != std::string::npos) {
        name = tag.substr(0, colon);
        args = tag.substr(colon + 1);
    }
    std::map<std::string, double> kv;
    std::stringstream ss(args);
    for(std::string item; std::getline(ss, item, ',');) {
        auto eq = item.find('=');
        if(eq == std::string::npos) throw ConfigError(fmt::format("model '{}': parameter '{}' is not key=value", tag, item));
        kv[trim(item.substr(0, eq))] = parse_double(tag, item.substr(eq + 1));
    }
    auto take = [&](const std::string& key) {
        auto it = kv.find(key);
        if(it == kv.end()) throw ConfigError(fmt::format("model '{}' needs parameter '{}'", tag, key));
        double v = it->second;
        kv.erase(it);
        return v;
    };
    ModelInstance m;
    if(name == "davies")
        m = make_davies();
    else if(name == "analytic-transport")
        m = make_analytic_transport();
    else if(name == "trapped-toy")
        m = make_trapped_toy();
    else if(name == "gevrey-transport" || name == "rotated-transport") {
        double s = take("s");
        if(!(s > 1.0)) throw ConfigError(fmt::format("model '{}': need s > 1", tag));
        m = name == "gevrey-transport" ? make_gevrey_transport(s) : make_rotated_transport(s, take("angle"));
    } else
        throw ConfigError(fmt::format("unknown model '{}' (known: davies, analytic-transport, gevrey-transport:s=S, "
                                      "trapped-toy, rotated-transport:s=S,angle=A)",
                                      tag));
    if(!kv.empty()) throw ConfigError(fmt::format("model '{}': unknown parameter '{}'", tag, kv.begin()->first));
    return m;
}

double gevrey_index(const GevreySymbol& sym)
{
    return sym.is_analytic() ? 1.0 : sym.order_s;
}

void SweepConfig::validate() const
{
    if(h_list.empty()) throw ConfigError("h_list is empty");
    for(std::size_t k = 0; k < h_list.size(); ++k) {
        if(!(h_list[k] > 0.0 && h_list[k] <= 1.0)) throw ConfigError(fmt::format("h = {} outside (0, 1]", h_list[k]));
        if(k > 0 && !(h_list[k] < h_list[k - 1])) throw ConfigError("h_list must be strictly decreasing");
    }
    if(!(L > 0.0)) throw ConfigError("L must be positive");
    if(N != 0 && (N < 8 || (N & (N - 1)) != 0)) throw ConfigError(fmt::format("N = {} is not a power of two >= 8", N));
    if(!(epsilon_deform > 0.0)) throw ConfigError("epsilon_deform must be positive");
    if(circle_samples < 1) throw ConfigError("circle_samples must be >= 1");
    if(heatmap_res < 0 || heatmap_res > kMaxPseudospectrumResolution)
        throw ConfigError(fmt::format("heatmap_res must be in [0, {}]", kMaxPseudospectrumResolution));
    parse_model(model_tag);
}

int SweepConfig::points_for(double h, const GevreySymbol& sym) const
{
    double extent = std::max(xi_extent, sym.xi_extent ? sym.xi_extent(h) : 0.0);
    int need = required_points(L, h, extent);
    if(N == 0) return need;
    if(N < need)
        throw ResolutionError(fmt::format("N = {} under-resolves xi extent {} at h = {}; need N >= {}", N, extent, h, need),
                              need);
    return N;
}

SweepConfig parse_config(std::istream& in, const std::filesystem::path& base_dir)
{
    SweepConfig c;
    bool have_h = false;
    int lineno = 0;
    for(std::string line; std::getline(in, line);) {
        ++lineno;
        if(auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        if(trim(line).empty()) continue;
        auto eq = line.find('=');
        if(eq == std::string::npos) throw ConfigError(fmt::format("config line {}: expected key = value", lineno));
        std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if(key == "model")
            c.model_tag = val;
        else if(key == "h_list") {
            c.h_list = parse_list(key, val);
            have_h = true;
        } else if(key == "L")
            c.L = parse_double(key, val);
        else if(key == "N")
            c.N = static_cast<int>(parse_int(key, val));
        else if(key == "xi_extent")
            c.xi_extent = parse_double(key, val);
        else if(key == "z0_re")
            c.z0.real(parse_double(key, val));
        else if(key == "z0_im")
            c.z0.imag(parse_double(key, val));
        else if(key == "epsilon_deform")
            c.epsilon_deform = parse_double(key, val);
        else if(key == "output_dir")
            c.output_dir = std::filesystem::path(val).is_absolute() || base_dir.empty() ? std::filesystem::path(val) : base_dir / val;
        else if(key == "seed")
            c.seed = static_cast<std::uint64_t>(parse_int(key, val));
        else if(key == "circle_samples")
            c.circle_samples = static_cast<int>(parse_int(key, val));
        else if(key == "run_escape")
            c.run_escape = parse_bool(key, val);
        else if(key == "run_toeplitz")
            c.run_toeplitz = parse_bool(key, val);
        else if(key == "check_refinement")
            c.check_refinement = parse_bool(key, val);
        else if(key == "heatmap_res")
            c.heatmap_res = static_cast<int>(parse_int(key, val));
        else if(key == "heatmap_max_n")
            c.heatmap_max_n = static_cast<int>(parse_int(key, val));
        else if(key == "fbi_L")
            c.fbi_L = parse_double(key, val);
        else if(key == "state_x")
            c.state_x = parse_double(key, val);
        else if(key == "state_xi")
            c.state_xi = parse_double(key, val);
        else if(key == "elliptic_box") {
            auto v = parse_list(key, val);
            if(v.size() != 4) throw ConfigError("elliptic_box needs re_min, re_max, im_min, im_max");
            c.elliptic_box = {v[0], v[1], v[2], v[3]};
        } else if(key == "elliptic_state_x")
            c.elliptic_state_x = parse_double(key, val);
        else if(key == "elliptic_state_xi")
            c.elliptic_state_xi = parse_double(key, val);
        else
            throw ConfigError(fmt::format("config line {}: unknown key '{}'", lineno, key));
    }
    if(!have_h) throw ConfigError("config is missing h_list");
    c.validate();
    return c;
}

SweepConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if(!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
    return parse_config(in, path.parent_path());
}

void write_sweep_csv_header(std::ostream& os)
{
    os << "h,r,sigma_min_probe,resnorm,margin_c,gamma,toeplitz_res\n";
}

void write_sweep_csv_row(std::ostream& os, const SweepRecord& r)
{
    os << fmt_num(r.h) << ',' << fmt_num(r.r) << ',' << fmt_num(r.sigma_min_probe) << ',' << fmt_num(r.resnorm) << ','
       << fmt_num(r.margin_c) << ',' << fmt_num(r.gamma) << ',' << fmt_num(r.toeplitz_res) << '\n';
}

namespace {

const char* kDiagHeader = "h,N,L,retained,boundary_filter,nearest_re,nearest_im,nearest_condition,norm_estimate,"
                          "floor_limited,refined_r,refinement_drift,circle_argmin_re,circle_argmin_im,probe_re,probe_im,probe_moved,"
                          "epsilon_used,t\n";

void write_diag_row(std::ostream& os, const SweepDiagnostics& d)
{
    os << fmt_num(d.h) << ',' << d.N << ',' << fmt_num(d.L) << ',' << d.retained << ',' << int(d.boundary_filter) << ','
       << fmt_num(d.nearest.real()) << ',' << fmt_num(d.nearest.imag()) << ',' << fmt_num(d.nearest_condition) << ','
       << fmt_num(d.norm_estimate) << ',' << int(d.floor_limited) << ',' << fmt_num(d.refined_r) << ','
       << fmt_num(d.refinement_drift) << ',' << fmt_num(d.circle_argmin.real()) << ','
       << fmt_num(d.circle_argmin.imag()) << ',' << fmt_num(d.probe.real()) << ',' << fmt_num(d.probe.imag()) << ','
       << int(d.probe_moved) << ',' << fmt_num(d.epsilon_used) << ',' << fmt_num(d.t) << '\n';
}

std::ofstream open_out(const std::filesystem::path& p)
{
    std::ofstream os(p);
    if(!os) throw ConfigError(fmt::format("cannot open '{}' for writing", p.string()));
    return os;
}

} // namespace

std::vector<SweepRecord> load_sweep_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if(!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
    std::string line;
    std::getline(in, line);
    if(trim(line) != "h,r,sigma_min_probe,resnorm,margin_c,gamma,toeplitz_res")
        throw ConfigError(fmt::format("'{}' is not a sweep CSV", path.string()));
    std::vector<SweepRecord> out;
    while(std::getline(in, line)) {
        if(trim(line).empty()) continue;
        auto f = split_csv(line);
        if(f.size() != 7) throw ConfigError(fmt::format("'{}': malformed row '{}'", path.string(), line));
        out.push_back({read_num(f[0]), read_num(f[1]), read_num(f[2]), read_num(f[3]), read_num(f[4]), read_num(f[5]),
                       read_num(f[6])});
    }
    return out;
}

std::vector<SweepDiagnostics> load_diagnostics_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if(!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
    std::string line;
    std::getline(in, line);
    std::vector<SweepDiagnostics> out;
    while(std::getline(in, line)) {
        if(trim(line).empty()) continue;
        auto f = split_csv(line);
        if(f.size() != 19) throw ConfigError(fmt::format("'{}': malformed row '{}'", path.string(), line));
        SweepDiagnostics d;
        d.h = read_num(f[0]);
        d.N = static_cast<int>(read_num(f[1]));
        d.L = read_num(f[2]);
        d.retained = static_cast<int>(read_num(f[3]));
        d.boundary_filter = read_num(f[4]) != 0.0;
        d.nearest = {read_num(f[5]), read_num(f[6])};
        d.nearest_condition = read_num(f[7]);
        d.norm_estimate = read_num(f[8]);
        d.floor_limited = read_num(f[9]) != 0.0;
        d.refined_r = read_num(f[10]);
        d.refinement_drift = read_num(f[11]);
        d.circle_argmin = {read_num(f[12]), read_num(f[13])};
        d.probe = {read_num(f[14]), read_num(f[15])};
        d.probe_moved = read_num(f[16]) != 0.0;
        d.epsilon_used = read_num(f[17]);
        d.t = read_num(f[18]);
        out.push_back(d);
    }
    return out;
}

namespace {

constexpr int kMaxDenseN = 2048;

// Distance from z0 to the nearest retained eigenvalue of the same model discretized with N points.
double refined_radius(const ModelInstance& model, double L, int N, double h, double extent, cplx z0, bool filter)
{
    WeylMatrix P = assemble_weyl(model.symbol, RealGrid::make(L, N), h, extent);
    double r = std::numeric_limits<double>::infinity();
    if(filter) {
        SpectrumResult spec = eigenvalues(P);
        for(std::size_t k = 0; k < spec.eigenvalues.size(); ++k)
            if(!spec.contaminated(k)) r = std::min(r, std::abs(spec.eigenvalues[k] - z0));
    } else {
        for(cplx l : eigenvalues_only(P)) r = std::min(r, std::abs(l - z0));
    }
    return r;
}

} // namespace

SweepResult run_sweep(const SweepConfig& cfg)
{
    cfg.validate();
    const ModelInstance model = parse_model(cfg.model_tag);
    const cplx z0 = cfg.z0;
    const double expo = free_radius_exponent(model.symbol);
    std::filesystem::create_directories(cfg.output_dir);

    SweepResult res;
    res.config = cfg;
    std::ofstream csv = open_out(cfg.output_dir / "sweep.csv");
    std::ofstream diag = open_out(cfg.output_dir / "diagnostics.csv");
    write_sweep_csv_header(csv);
    diag << kDiagHeader;
    csv.flush();
    diag.flush();

    std::optional<EscapeField> esc;
    double margin_c = std::numeric_limits<double>::quiet_NaN();
    if(cfg.run_escape) {
        try {
            esc = build_escape(model);
            margin_c = esc->margin_c;
        } catch(const std::exception& e) {
            fmt::print(stderr, "escape function unavailable for '{}': {}\n", model.tag(), e.what());
        }
    }

    std::mt19937_64 rng(cfg.seed);
    const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi / cfg.circle_samples)(rng);

    for(double h : cfg.h_list) {
        auto start = std::chrono::steady_clock::now();
        try {
            SweepRecord rec;
            SweepDiagnostics d;
            rec.h = d.h = h;
            d.L = cfg.L;
            d.N = cfg.points_for(h, model.symbol);
            RealGrid grid = RealGrid::make(cfg.L, d.N);
            double extent = std::max(cfg.xi_extent, model.symbol.xi_extent ? model.symbol.xi_extent(h) : 0.0);
            WeylMatrix P = assemble_weyl(model.symbol, grid, h, extent);
            SpectrumResult spec = eigenvalues(P);

            d.boundary_filter = applies_boundary_filter(model);
            std::size_t best = spec.eigenvalues.size();
            for(std::size_t k = 0; k < spec.eigenvalues.size(); ++k) {
                if(d.boundary_filter && spec.contaminated(k)) continue;
                ++d.retained;
                if(best == spec.eigenvalues.size() || std::abs(spec.eigenvalues[k] - z0) < std::abs(spec.eigenvalues[best] - z0))
                    best = k;
            }
            if(best == spec.eigenvalues.size())
                throw NumericalError(fmt::format("no eigenvalue passes the boundary-mass filter at h = {}", h));
            rec.r = std::abs(spec.eigenvalues[best] - z0);
            d.nearest = spec.eigenvalues[best];
            d.nearest_condition = spec.condition[best];
            d.norm_estimate = norm_estimate(P.entries);
            d.floor_limited = d.nearest_condition * kEpsMach * d.norm_estimate >= kFloorRatio * rec.r;
            if(cfg.check_refinement && 2 * d.N <= kMaxDenseN) {
                d.refined_r = refined_radius(model, cfg.L, 2 * d.N, h, extent, z0, d.boundary_filter);
                d.refinement_drift = std::abs(d.refined_r - rec.r) / rec.r;
            }

            ResolventSolver solver(P.entries);
            rec.sigma_min_probe = std::numeric_limits<double>::infinity();
            for(int k = 0; k < cfg.circle_samples; ++k) {
                cplx z = z0 + std::polar(rec.r / 2.0, phase + 2.0 * std::numbers::pi * k / cfg.circle_samples);
                double sv = solver.sigma_min(z);
                if(sv < rec.sigma_min_probe) {
                    rec.sigma_min_probe = sv;
                    d.circle_argmin = z;
                }
            }
            d.probe = z0 + model.outward * (rec.r / 2.0);
            ResolventNorm rn = resolvent_from_sigma(solver.sigma_min(d.probe));
            if(rn.in_spectrum) {
                d.probe_moved = true;
                d.probe = z0 + model.outward * (0.75 * rec.r);
                rn = resolvent_from_sigma(solver.sigma_min(d.probe));
            }
            rec.resnorm = rn.value;

            rec.margin_c = margin_c;
            rec.gamma = rec.toeplitz_res = std::numeric_limits<double>::quiet_NaN();
            d.epsilon_used = d.t = std::numeric_limits<double>::quiet_NaN();
            if(esc) {
                double eps = cfg.epsilon_deform;
                for(int attempt = 0; attempt <= 4; ++attempt, eps /= 2.0) {
                    double t = -eps * std::pow(h, expo);
                    try {
                        DeformationCheck chk = check_deformed_ellipticity(model, *esc, t, 2);
                        rec.gamma = chk.gamma_measured;
                        d.epsilon_used = eps;
                        d.t = t;
                        break;
                    } catch(const DeformationError& e) {
                        fmt::print(stderr, "h = {}: deformation failed at epsilon = {}: {}\n", h, eps, e.what());
                    }
                }
                if(cfg.run_toeplitz && std::isfinite(d.t)) {
                    BargmannContext ctx = make_bargmann_context(model, *esc, d.t, h, cfg.fbi_L);
                    Eigen::VectorXcd U = ctx.T.apply(coherent_state(ctx.real_grid, cfg.state_x, cfg.state_xi, h));
                    rec.toeplitz_res = toeplitz_residual(ctx, U, U);
                }
            }

            write_sweep_csv_row(csv, rec);
            write_diag_row(diag, d);
            csv.flush();
            diag.flush();
            if(!csv || !diag) throw ConfigError(fmt::format("write to '{}' failed", cfg.output_dir.string()));
            res.records.push_back(rec);
            res.diagnostics.push_back(d);

            if(cfg.heatmap_res > 1 && d.N <= cfg.heatmap_max_n) {
                ZWindow w{z0, 3.0 * rec.r, 3.0 * rec.r, cfg.heatmap_res, cfg.heatmap_res};
                HeatmapData hm{h, pseudospectrum(P, w), {}};
                for(cplx l : spec.eigenvalues)
                    if(std::abs(l.real() - z0.real()) <= 1.5 * rec.r && std::abs(l.imag() - z0.imag()) <= 1.5 * rec.r)
                        hm.eigenvalues.push_back(l);
                res.heatmaps.push_back(std::move(hm));
            }
            const char* flag = d.floor_limited ? " [floor]" : d.converged() ? "" : " [unconverged]";
            fmt::print(stderr, "h = {:<8} N = {:<5} r = {:.6g}{} ({:.1f} s)\n", h, d.N, rec.r, flag,
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        } catch(const NumericalError& e) {
            fmt::print(stderr, "h = {}: skipped: {}\n", h, e.what());
            res.skipped.emplace_back(h, e.what());
        }
    }
    return res;
}

FitResult fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
    const std::size_t n = x.size();
    if(n < 2 || y.size() != n) throw NumericalError("line fit needs at least two points");
    double mx = 0.0, my = 0.0;
    for(std::size_t k = 0; k < n; ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for(std::size_t k = 0; k < n; ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
        syy += (y[k] - my) * (y[k] - my);
    }
    if(!(sxx > 0.0)) throw NumericalError("line fit needs two distinct abscissae");
    FitResult f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
    f.n_points = static_cast<int>(n);
    return f;
}

FitResult fit_power_law(const std::vector<SweepRecord>& records, const std::function<double(const SweepRecord&)>& field)
{
    std::vector<double> x, y;
    for(const SweepRecord& r : records) {
        double v = field(r);
        if(!(std::isfinite(v) && v > 0.0) || !(r.h > 0.0)) {
            fmt::print(stderr, "warning: excluding h = {} from the fit (value {})\n", r.h, v);
            continue;
        }
        x.push_back(std::log(r.h));
        y.push_back(std::log(v));
    }
    if(x.size() < 4) throw NumericalError(fmt::format("power-law fit needs at least 4 valid records, have {}", x.size()));
    return fit_line(x, y);
}

GrowthCheck resolvent_growth_check(const std::vector<double>& h, const std::vector<double>& values, double s)
{
    GrowthCheck g;
    for(double v : values) {
        if(!std::isfinite(v)) g.finite = false;
        g.max_value = std::max(g.max_value, v);
    }
    if(!g.finite) {
        g.regime = "infinite";
        return g;
    }
    g.bounded = g.max_value <= kBoundedResolvent;
    std::vector<double> x, y;
    for(std::size_t k = 0; k < h.size(); ++k)
        if(values[k] > 0.0) {
            x.push_back(std::pow(h[k], -1.0 / s));
            y.push_back(std::log(values[k]));
        }
    if(x.size() >= 2) {
        try {
            g.fit = fit_line(x, y);
        } catch(const NumericalError&) {
        }
    }
    if(g.bounded)
        g.regime = "bounded";
    else if(g.fit && g.fit->r_squared >= kGrowthR2)
        g.regime = "exponential";
    else
        g.regime = "unexplained";
    g.pass = g.regime == "bounded" || g.regime == "exponential";
    return g;
}

GrowthCheck resolvent_growth_check(const std::vector<SweepRecord>& records, double s)
{
    std::vector<double> h, v;
    for(const SweepRecord& r : records) {
        h.push_back(r.h);
        v.push_back(r.resnorm);
    }
    return resolvent_growth_check(h, v, s);
}

namespace {

json growth_json(const GrowthCheck& g)
{
    return json{{"regime", g.regime}, {"pass", g.pass}, {"max", num_json(g.max_value)}, {"bounded_constant", kBoundedResolvent},
                {"fit_log_vs_h_pow_minus_1_over_s", fit_json(g.fit)}};
}

} // namespace

std::filesystem::path emit_outputs(const SweepConfig& cfg, const std::vector<HeatmapData>& heatmaps,
                                   const std::vector<std::pair<double, std::string>>& skipped)
{
    const ModelInstance model = parse_model(cfg.model_tag);
    const double s = gevrey_index(model.symbol);
    const double expo = free_radius_exponent(model.symbol);
    std::vector<SweepRecord> rec = load_sweep_csv(cfg.output_dir / "sweep.csv");
    std::vector<SweepDiagnostics> diag = load_diagnostics_csv(cfg.output_dir / "diagnostics.csv");
    if(diag.size() != rec.size()) throw ConfigError("sweep.csv and diagnostics.csv row counts differ");

    std::vector<double> hs, rs, rs_reliable, hs_reliable, circle, probe;
    double c_min = std::numeric_limits<double>::infinity(), r_min = c_min, r_max = 0.0;
    bool gamma_ok = !rec.empty(), margin_ok = !rec.empty(), davies_ok = !rec.empty();
    std::vector<double> th, tv;
    int floor_rows = 0, unconverged_rows = 0;
    bool refinement_checked = false;
    for(std::size_t k = 0; k < rec.size(); ++k) {
        const SweepRecord& r = rec[k];
        hs.push_back(r.h);
        rs.push_back(r.r);
        if(diag[k].resolved()) {
            hs_reliable.push_back(r.h);
            rs_reliable.push_back(r.r);
        }
        floor_rows += diag[k].floor_limited;
        unconverged_rows += !diag[k].converged();
        refinement_checked = refinement_checked || !std::isnan(diag[k].refinement_drift);
        c_min = std::min(c_min, r.r / std::pow(r.h, expo));
        r_min = std::min(r_min, r.r);
        r_max = std::max(r_max, r.r);
        circle.push_back(r.sigma_min_probe > 0.0 ? 1.0 / r.sigma_min_probe : std::numeric_limits<double>::infinity());
        probe.push_back(r.resnorm);
        gamma_ok = gamma_ok && r.gamma > 0.0;
        margin_ok = margin_ok && r.margin_c > 0.0;
        davies_ok = davies_ok && std::abs(r.r / r.h - 1.0) < 1e-3;
        if(std::isfinite(r.toeplitz_res)) {
            th.push_back(r.h);
            tv.push_back(r.toeplitz_res);
        }
    }

    json j;
    j["model"] = model.tag();
    j["gevrey_index"] = s;
    j["expected_exponent"] = expo;
    j["z0"] = {cfg.z0.real(), cfg.z0.imag()};
    j["rows"] = rec.size();
    json sk = json::array();
    for(const auto& [h, why] : skipped) sk.push_back({{"h", h}, {"reason", why}});
    j["skipped"] = sk;
    j["floor_limited_rows"] = floor_rows;
    j["unconverged_rows"] = unconverged_rows;
    j["refinement_checked"] = refinement_checked;

    std::optional<FitResult> fit_all = try_fit(hs, rs), fit_rel = try_fit(hs_reliable, rs_reliable);
    j["fits"] = {{"free_radius_all", fit_json(fit_all)},
                 {"free_radius_reliable", fit_json(fit_rel)},
                 {"toeplitz_residual", fit_json(try_fit(th, tv))}};
    double disk_c = rec.empty() ? 0.0 : c_min;
    j["disk_constant"] = num_json(disk_c);

    json crit = json::object();
    if(!rec.empty()) {
        json sc;
        if(model.family == ModelFamily::davies) {
            sc = {{"kind", "davies_ground_modulus"}, {"pass", davies_ok}};
        } else if(expo == 0.0) {
            sc = {{"kind", "h_independent_lower_bound"},
                  {"r_min", r_min},
                  {"r_max", r_max},
                  {"pass", r_min > 0.0 && std::isfinite(r_min)}};
        } else {
            bool approaches = fit_rel && fit_rel->slope > kApproachSlope;
            bool exponent_ok = !approaches || std::abs(fit_rel->slope - expo) <= kExponentBand;
            std::string regime = !fit_rel ? "too few resolved points to fit"
                                 : approaches ? "spectrum approaches z0"
                                              : "spectrum does not approach z0 in the resolved range";
            sc = {{"kind", "lower_bound_c_h_pow"},
                  {"c_min", num_json(c_min)},
                  {"approaches_z0", approaches},
                  {"regime", regime},
                  {"exponent_band", kExponentBand},
                  {"slope_reliable", fit_rel ? json(fit_rel->slope) : json(nullptr)},
                  {"slope_all_rows", fit_all ? json(fit_all->slope) : json(nullptr)},
                  {"pass", c_min > 0.0 && std::isfinite(c_min) && exponent_ok}};
        }
        crit["spectrum_free_scaling"] = sc;
        // Rows whose nearest eigenvalue is set by rounding or by the discretization place the probes at an
        // unphysical radius, so the verdict uses the resolved rows when at least three exist.
        std::vector<double> hg, cg, pg;
        for(std::size_t i = 0; i < rec.size(); ++i)
            if(diag[i].resolved()) {
                hg.push_back(hs[i]);
                cg.push_back(circle[i]);
                pg.push_back(probe[i]);
            }
        bool resolved = hg.size() >= 3;
        if(!resolved) {
            hg = hs;
            cg = circle;
            pg = probe;
        }
        GrowthCheck gc = resolvent_growth_check(hg, cg, s), gp = resolvent_growth_check(hg, pg, s);
        crit["resolvent_growth"] = {{"rows_used", resolved ? "resolved" : "all"},
                                    {"n_rows", hg.size()},
                                    {"circle_worst", growth_json(gc)},
                                    {"outward_probe", growth_json(gp)},
                                    {"circle_worst_all_rows", growth_json(resolvent_growth_check(hs, circle, s))},
                                    {"pass", gc.pass && gp.pass}};
        if(cfg.run_escape) {
            crit["escape"] = {{"pass", margin_ok}};
            crit["deformed_ellipticity"] = {{"pass", gamma_ok}};
        }
    }
    j["criteria"] = crit;

    int k = 0;
    for(const HeatmapData& hm : heatmaps) {
        auto path = cfg.output_dir / fmt::format("heatmap_{}.svg", k++);
        write_pseudospectrum_svg(path, hm, cfg.z0, disk_c * std::pow(hm.h, expo));
    }

    auto out = cfg.output_dir / "summary.json";
    std::ofstream os = open_out(out);
    os << j.dump(2) << '\n';
    if(!os) throw ConfigError(fmt::format("write to '{}' failed", out.string()));
    return out;
}

void write_pseudospectrum_svg(const std::filesystem::path& path, const HeatmapData& data, cplx z0, double disk_radius)
{
    const ZWindow& w = data.field.window;
    Eigen::MatrixXd v = data.field.sigma_min.unaryExpr([](double x) { return std::log10(std::max(x, 1e-300)); });
    HeatmapSpec spec;
    spec.cell = 8;
    spec.title = fmt::format("log10 sigma_min, h = {}", data.h);
    auto to_u = [&](cplx z) { return w.res_re > 1 ? (z.real() - w.node(0, 0).real()) / w.cell_re() + 0.5 : 0.5; };
    auto to_v = [&](cplx z) { return w.res_im > 1 ? (z.imag() - w.node(0, 0).imag()) / w.cell_im() + 0.5 : 0.5; };
    for(cplx l : data.eigenvalues) spec.markers.push_back({to_u(l), to_v(l)});
    if(disk_radius > 0.0 && w.cell_re() > 0.0) spec.circles.push_back({to_u(z0), to_v(z0), disk_radius / w.cell_re()});
    write_heatmap_svg(path, v, spec);
}

ToeplitzSweep run_toeplitz_sweep(const SweepConfig& cfg)
{
    cfg.validate();
    const ModelInstance model = parse_model(cfg.model_tag);
    const double expo = free_radius_exponent(model.symbol);
    std::filesystem::create_directories(cfg.output_dir);
    EscapeField esc = build_escape(model);

    ToeplitzSweep out;
    std::ofstream tcsv = open_out(cfg.output_dir / "toeplitz.csv");
    std::ofstream ecsv = open_out(cfg.output_dir / "elliptic.csv");
    tcsv << "h,t,residual,operator_re,operator_im,symbol_re,symbol_im\n";
    ecsv << "h,lhs,au_norm2,u_norm2\n";
    std::vector<double> h0, r0, h1, r1;
    out.exterior_floor = std::numeric_limits<double>::infinity();
    for(double h : cfg.h_list) {
        for(double t : {0.0, -cfg.epsilon_deform * std::pow(h, expo)}) {
            BargmannContext ctx = make_bargmann_context(model, esc, t, h, cfg.fbi_L);
            Eigen::VectorXcd U = ctx.T.apply(coherent_state(ctx.real_grid, cfg.state_x, cfg.state_xi, h));
            ToeplitzRow row{h, t, toeplitz_terms(ctx, U, U)};
            tcsv << fmt_num(h) << ',' << fmt_num(t) << ',' << fmt_num(row.terms.residual) << ','
                 << fmt_num(row.terms.operator_side.real()) << ',' << fmt_num(row.terms.operator_side.imag()) << ','
                 << fmt_num(row.terms.symbol_side.real()) << ',' << fmt_num(row.terms.symbol_side.imag()) << '\n';
            tcsv.flush();
            (t == 0.0 ? h0 : h1).push_back(h);
            (t == 0.0 ? r0 : r1).push_back(row.terms.residual);
            out.rows.push_back(row);
            if(t == 0.0) {
                out.exterior_floor = std::min(out.exterior_floor, exterior_symbol_floor(ctx, cfg.elliptic_box));
                Eigen::VectorXcd E = ctx.T.apply(coherent_state(ctx.real_grid, cfg.elliptic_state_x, cfg.elliptic_state_xi, h));
                EllipticTerms e = elliptic_terms(ctx, E, cfg.elliptic_box);
                ecsv << fmt_num(e.h) << ',' << fmt_num(e.lhs) << ',' << fmt_num(e.au_norm2) << ',' << fmt_num(e.u_norm2) << '\n';
                ecsv.flush();
                out.elliptic.push_back(e);
            }
            fmt::print(stderr, "h = {:<8} t = {:<10.4g} residual = {:.4e}\n", h, t, row.terms.residual);
        }
    }
    out.slope_flat = try_fit(h0, r0);
    out.slope_deformed = try_fit(h1, r1);
    if(!out.elliptic.empty())
        out.elliptic_fit = fit_elliptic_constants(out.elliptic, 1.0 / (out.exterior_floor * out.exterior_floor));

    json j;
    j["model"] = model.tag();
    j["state"] = {cfg.state_x, cfg.state_xi};
    j["epsilon"] = cfg.epsilon_deform;
    j["toeplitz"] = {{"flat", fit_json(out.slope_flat)},
                     {"deformed", fit_json(out.slope_deformed)},
                     {"pass", out.slope_flat && out.slope_deformed && out.slope_flat->slope >= kToeplitzSlope &&
                                  out.slope_deformed->slope >= kToeplitzSlope}};
    if(out.elliptic_fit)
        j["elliptic"] = {{"box", {cfg.elliptic_box.re_min, cfg.elliptic_box.re_max, cfg.elliptic_box.im_min, cfg.elliptic_box.im_max}},
                         {"exterior_floor", out.exterior_floor},
                         {"C1", out.elliptic_fit->C1},
                         {"C2", out.elliptic_fit->C2},
                         {"lhs", out.elliptic_fit->lhs},
                         {"rhs", out.elliptic_fit->rhs},
                         {"pass", out.elliptic_fit->pass}};
    std::ofstream os = open_out(cfg.output_dir / "toeplitz_summary.json");
    os << j.dump(2) << '\n';
    return out;
}

} // namespace gps
