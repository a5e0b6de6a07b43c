#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mlmon::plot {

struct Rgb {
    unsigned char r = 0, g = 0, b = 0;
};

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
    Rgb color{31, 119, 180};
    /// Draw as a staircase (value held until the next point).
    bool step = false;
    /// Draw markers only.
    bool markers = false;
};

struct Rect {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    Rgb fill;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    std::vector<Rect> rects;
    int width = 900;
    int height = 420;
};

/// Deterministic SVG document.
std::string render_svg(const Chart& chart);

/// Rasterizes the chart and writes a PNG. Throws Error on I/O failure.
void write_png(const Chart& chart, const std::filesystem::path& path);

}  // namespace mlmon::plot
