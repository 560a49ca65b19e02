#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gps {

struct SvgMarker {
    double u = 0.0; // column coordinate in cell units (0 = left edge of column 0)
    double v = 0.0; // row coordinate in cell units (0 = bottom edge of row 0)
};

struct SvgCircle {
    double u = 0.0;
    double v = 0.0;
    double radius = 0.0; // cell units
};

struct HeatmapSpec {
    int cell = 8;
    std::string title;
    std::vector<SvgMarker> markers;
    std::vector<SvgCircle> circles;
};

// values: rows x cols, row 0 drawn at the bottom. Image size = cols * cell by rows * cell.
void write_heatmap_svg(const std::filesystem::path& path, const Eigen::MatrixXd& values, const HeatmapSpec& spec);

} // namespace gps
