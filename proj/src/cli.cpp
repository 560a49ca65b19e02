#include "gps/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gps/error.hpp"
#include "gps/experiments.hpp"
#include "gps/parallel.hpp"

namespace gps {

namespace {

cplx parse_complex(const std::string& text)
{
    auto comma = text.find(',');
    try {
        if(comma == std::string::npos) return {std::stod(text), 0.0};
        return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
    } catch(const std::exception&) {
        throw ConfigError(fmt::format("cannot parse '{}' as a complex number (use re or re,im)", text));
    }
}

RealGrid grid_for(const ModelInstance& m, double h, double L, int n)
{
    SweepConfig c;
    c.L = L;
    c.N = n;
    return RealGrid::make(L, c.points_for(h, m.symbol));
}

double extent_for(const ModelInstance& m, double h)
{
    return std::max(SweepConfig{}.xi_extent, m.symbol.xi_extent ? m.symbol.xi_extent(h) : 0.0);
}

} // namespace

int run_cli(int argc, char** argv)
{
    configure_workers();
    CLI::App app{"Spectra, pseudospectra and escape functions of semiclassical non-self-adjoint operators"};
    app.set_help_flag("--help", "Print help and exit");
    app.require_subcommand(1);

    std::string model_tag, out, config, center = "0", out_dir = ".";
    double h = 0.1, L = 4.0, span = 1.0, epsilon = 0.1;
    int n = 0, res = 64, ext_order = 2;

    auto add_model = [&](CLI::App* sub) {
        sub->add_option("--model", model_tag, "Model tag, e.g. gevrey-transport:s=2")->required();
    };
    auto add_grid = [&](CLI::App* sub) {
        sub->add_option("--h", h, "Semiclassical parameter in (0, 1]")->required();
        sub->add_option("--L", L, "Half-width of the real grid")->capture_default_str();
        sub->add_option("--n", n, "Grid points (power of two; default from the Nyquist rule)");
    };

    auto* quantize = app.add_subcommand("quantize", "Assemble the Weyl matrix and write it in binary form");
    quantize->set_help_flag("--help", "Print help and exit");
    add_model(quantize);
    add_grid(quantize);
    quantize->add_option("--out", out, "Output file")->required();

    auto* spectrum = app.add_subcommand("spectrum", "Eigenvalues with boundary mass and condition numbers");
    spectrum->set_help_flag("--help", "Print help and exit");
    add_model(spectrum);
    add_grid(spectrum);
    spectrum->add_option("--out", out, "CSV output (default: stdout)");

    auto* pseudo = app.add_subcommand("pseudospectrum", "Smallest singular value of P - z on a window");
    pseudo->set_help_flag("--help", "Print help and exit");
    add_model(pseudo);
    add_grid(pseudo);
    pseudo->add_option("--center", center, "Window centre, re or re,im")->capture_default_str();
    pseudo->add_option("--span", span, "Full window width and height")->capture_default_str();
    pseudo->add_option("--res", res, "Points per axis (at most 512)")->capture_default_str();
    pseudo->add_option("--out", out, "CSV output (default: stdout)");
    std::string svg;
    pseudo->add_option("--svg", svg, "Also write a log10 sigma_min heatmap");

    auto* scaling = app.add_subcommand("scaling", "Run an h-sweep from a config file");
    scaling->set_help_flag("--help", "Print help and exit");
    scaling->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);

    auto* toeplitz = app.add_subcommand("toeplitz", "Toeplitz and elliptic residual sweep from a config file");
    toeplitz->set_help_flag("--help", "Print help and exit");
    toeplitz->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);

    auto* escape = app.add_subcommand("escape", "Build the escape function and write escape.csv, escape_summary.json");
    escape->set_help_flag("--help", "Print help and exit");
    add_model(escape);
    escape->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

    auto* deform = app.add_subcommand("deform-check", "Deformed ellipticity at t = -epsilon h^(1-1/s)");
    deform->set_help_flag("--help", "Print help and exit");
    add_model(deform);
    deform->add_option("--h", h, "Semiclassical parameter")->required();
    deform->add_option("--epsilon", epsilon, "Deformation size")->capture_default_str();
    deform->add_option("--ext-order", ext_order, "Order of the Taylor extension (1 or 2)")->capture_default_str();
    deform->add_option("--out-dir", out_dir, "Output directory for escape_summary.json")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch(const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if(*quantize) {
            ModelInstance m = parse_model(model_tag);
            RealGrid g = grid_for(m, h, L, n);
            WeylMatrix P = assemble_weyl(m.symbol, g, h, extent_for(m, h));
            write_weyl_binary(out, P);
            fmt::print("wrote {} x {} Weyl matrix of '{}' at h = {} to {}\n", g.n_points, g.n_points, m.tag(), h, out);
        } else if(*spectrum) {
            ModelInstance m = parse_model(model_tag);
            RealGrid g = grid_for(m, h, L, n);
            SpectrumResult s = eigenvalues(assemble_weyl(m.symbol, g, h, extent_for(m, h)));
            if(out.empty()) {
                std::cout << "re,im,boundary_mass\n";
                for(std::size_t k = 0; k < s.eigenvalues.size(); ++k)
                    std::cout << fmt::format("{:.17g},{:.17g},{:.17g}\n", s.eigenvalues[k].real(), s.eigenvalues[k].imag(),
                                             s.boundary_mass[k]);
            } else {
                write_spectrum_csv(out, s);
                std::size_t near = nearest_retained(s, m.z0);
                fmt::print("N = {}, nearest retained eigenvalue to z0: {:.10g}{:+.10g}i (distance {:.6g})\n", g.n_points,
                           s.eigenvalues[near].real(), s.eigenvalues[near].imag(), std::abs(s.eigenvalues[near] - m.z0));
            }
        } else if(*pseudo) {
            ModelInstance m = parse_model(model_tag);
            RealGrid g = grid_for(m, h, L, n);
            WeylMatrix P = assemble_weyl(m.symbol, g, h, extent_for(m, h));
            ZWindow w{parse_complex(center), span, span, res, res};
            PseudospectrumField f = pseudospectrum(P, w);
            if(out.empty()) {
                std::cout << "re,im,sigma_min\n";
                for(int j = 0; j < w.res_im; ++j)
                    for(int i = 0; i < w.res_re; ++i) {
                        cplx z = w.node(i, j);
                        std::cout << fmt::format("{:.17g},{:.17g},{:.17g}\n", z.real(), z.imag(), f.sigma_min(j, i));
                    }
            } else
                write_pseudospectrum_csv(out, f);
            if(!svg.empty()) {
                SpectrumResult s = eigenvalues(P);
                HeatmapData hm{h, f, {}};
                for(cplx l : s.eigenvalues)
                    if(std::abs(l.real() - w.center.real()) <= span / 2 && std::abs(l.imag() - w.center.imag()) <= span / 2)
                        hm.eigenvalues.push_back(l);
                write_pseudospectrum_svg(svg, hm, m.z0, 0.0);
            }
        } else if(*scaling) {
            SweepConfig cfg = load_config(config);
            SweepResult r = run_sweep(cfg);
            auto summary = emit_outputs(cfg, r.heatmaps, r.skipped);
            fmt::print("{} rows written to {}; summary {}\n", r.records.size(), (cfg.output_dir / "sweep.csv").string(),
                       summary.string());
        } else if(*toeplitz) {
            SweepConfig cfg = load_config(config);
            ToeplitzSweep t = run_toeplitz_sweep(cfg);
            if(t.slope_flat) fmt::print("Toeplitz residual slope (t = 0): {:.4f}\n", t.slope_flat->slope);
            if(t.slope_deformed) fmt::print("Toeplitz residual slope (deformed): {:.4f}\n", t.slope_deformed->slope);
            if(t.elliptic_fit) fmt::print("elliptic estimate: C1 = {:.4g}, C2 = {:.4g}\n", t.elliptic_fit->C1, t.elliptic_fit->C2);
        } else if(*escape) {
            ModelInstance m = parse_model(model_tag);
            EscapeField esc = build_escape(m);
            std::filesystem::create_directories(out_dir);
            write_escape_csv(std::filesystem::path(out_dir) / "escape.csv", esc);
            write_escape_summary(std::filesystem::path(out_dir) / "escape_summary.json", esc, std::nullopt);
            fmt::print("margin_c = {:.6g} at ({:.4g}, {:.4g}); {} zero points\n", esc.margin_c, esc.worst_zero_point.x,
                       esc.worst_zero_point.xi, esc.zero_points.size());
        } else if(*deform) {
            ModelInstance m = parse_model(model_tag);
            EscapeField esc = build_escape(m);
            double t = -epsilon * std::pow(h, free_radius_exponent(m.symbol));
            DeformationCheck chk = check_deformed_ellipticity(m, esc, t, ext_order);
            std::filesystem::create_directories(out_dir);
            write_escape_summary(std::filesystem::path(out_dir) / "escape_summary.json", esc, chk);
            fmt::print("t = {:.6g}, gamma = {:.6g} (minimum at ({:.4g}, {:.4g}))\n", t, chk.gamma_measured, chk.argmin.x,
                       chk.argmin.xi);
        }
    } catch(const ConfigError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    } catch(const std::invalid_argument& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    } catch(const std::exception& e) {
        fmt::print(stderr, "numerical failure: {}\n", e.what());
        return 3;
    }
    return 0;
}

} // namespace gps
