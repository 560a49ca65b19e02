#include "gps/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "gps/error.hpp"

namespace gps {

namespace {

// Five-stop viridis approximation.
std::string color(double s)
{
    static const std::array<std::array<double, 3>, 5> stops{{{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
    s = std::clamp(s, 0.0, 1.0) * 4.0;
    int k = std::min(3, static_cast<int>(s));
    double f = s - k;
    int rgb[3];
    for(int c = 0; c < 3; ++c) rgb[c] = static_cast<int>(std::lround(stops[k][c] + f * (stops[k + 1][c] - stops[k][c])));
    return fmt::format("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2]);
}

} // namespace

void write_heatmap_svg(const std::filesystem::path& path, const Eigen::MatrixXd& values, const HeatmapSpec& spec)
{
    const int rows = static_cast<int>(values.rows()), cols = static_cast<int>(values.cols());
    const int W = cols * spec.cell, H = rows * spec.cell;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for(int r = 0; r < rows; ++r)
        for(int c = 0; c < cols; ++c)
            if(std::isfinite(values(r, c))) {
                lo = std::min(lo, values(r, c));
                hi = std::max(hi, values(r, c));
            }
    if(!(hi > lo)) hi = lo + 1.0;

    std::ofstream os(path);
    if(!os) throw ConfigError(fmt::format("cannot open '{}' for writing", path.string()));
    os << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n", W, H, W, H);
    if(!spec.title.empty()) os << fmt::format("<title>{}</title>\n", spec.title);
    for(int r = 0; r < rows; ++r)
        for(int c = 0; c < cols; ++c) {
            double v = values(r, c);
            std::string fill = std::isfinite(v) ? color((v - lo) / (hi - lo)) : "#000000";
            os << fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n", c * spec.cell,
                              (rows - 1 - r) * spec.cell, spec.cell, spec.cell, fill);
        }
    for(const SvgCircle& c : spec.circles)
        os << fmt::format("<circle cx=\"{:.3f}\" cy=\"{:.3f}\" r=\"{:.3f}\" fill=\"none\" stroke=\"#ffffff\" stroke-width=\"1.5\"/>\n",
                          c.u * spec.cell, H - c.v * spec.cell, c.radius * spec.cell);
    for(const SvgMarker& m : spec.markers) {
        if(m.u < 0 || m.v < 0 || m.u > cols || m.v > rows) continue;
        os << fmt::format("<circle cx=\"{:.3f}\" cy=\"{:.3f}\" r=\"2.5\" fill=\"#ff3030\"/>\n", m.u * spec.cell, H - m.v * spec.cell);
    }
    os << fmt::format("<text x=\"4\" y=\"12\" font-size=\"10\" fill=\"#ffffff\">range [{:.3g}, {:.3g}]</text>\n", lo, hi);
    os << "</svg>\n";
    if(!os) throw ConfigError(fmt::format("write to '{}' failed", path.string()));
}

} // namespace gps
