#include "mlmon/plot.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "mlmon/common.hpp"

namespace mlmon::plot {

namespace {

constexpr int kLeft = 78, kRight = 24, kTop = 40, kBottom = 52;

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void settle() {
        if (!std::isfinite(lo)) lo = 0, hi = 1;
        if (hi - lo < 1e-12) {
            const double pad = std::abs(lo) > 0 ? std::abs(lo) * 0.1 : 1.0;
            lo -= pad;
            hi += pad;
        }
    }
};

double nice_step(double span, int target) {
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / mag;
    const double nice = f <= 1 ? 1 : f <= 2 ? 2 : f <= 5 ? 5 : 10;
    return nice * mag;
}

std::vector<double> ticks(Range& r, int target) {
    const double step = nice_step(r.hi - r.lo, target);
    r.lo = std::floor(r.lo / step) * step;
    r.hi = std::ceil(r.hi / step) * step;
    std::vector<double> out;
    for (double v = r.lo; v <= r.hi + step * 1e-6; v += step) out.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
    return out;
}

std::string tick_label(double v) {
    char buf[32];
    if (std::abs(v) >= 1e5 || (std::abs(v) < 1e-3 && v != 0)) std::snprintf(buf, sizeof buf, "%.3g", v);
    else std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::vector<std::pair<double, double>> expand(const Series& s) {
    if (!s.step || s.points.size() < 2) return s.points;
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        if (i) out.emplace_back(s.points[i].first, s.points[i - 1].second);
        out.push_back(s.points[i]);
    }
    return out;
}

struct Layout {
    int width, height;
    Range x, y;
    std::vector<double> x_ticks, y_ticks;

    explicit Layout(const Chart& c) : width(c.width), height(c.height) {
        for (const auto& s : c.series)
            for (const auto& [px, py] : s.points) {
                x.add(px);
                y.add(py);
            }
        for (const auto& r : c.rects) {
            x.add(r.x0), x.add(r.x1);
            y.add(r.y0), y.add(r.y1);
        }
        x.settle();
        y.settle();
        x_ticks = ticks(x, 8);
        y_ticks = ticks(y, 6);
    }
    double px(double v) const { return kLeft + (v - x.lo) / (x.hi - x.lo) * (width - kLeft - kRight); }
    double py(double v) const { return height - kBottom - (v - y.lo) / (y.hi - y.lo) * (height - kTop - kBottom); }
};

std::string hex(Rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

std::string xml_text(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

std::string f2(double v) { return format_fixed(v, 2); }

// 5x7 glyphs, rows top to bottom, bit 4 = leftmost column.
const std::map<char, std::array<unsigned char, 7>>& font() {
    static const std::map<char, std::array<unsigned char, 7>> glyphs{
        {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
        {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
        {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
        {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
        {'A', {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
        {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
        {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
        {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
        {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
        {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
        {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
        {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
        {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
        {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
        {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
        {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
        {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
        {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}}, {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
        {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}}, {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
        {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}}, {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
        {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}}, {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
        {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}}, {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
        {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}}, {' ', {0, 0, 0, 0, 0, 0, 0}},
        {'?', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04}},
    };
    return glyphs;
}

class Canvas {
public:
    Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w * h * 3), 255) {}

    void set(int x, int y, Rgb c) {
        if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
        auto* p = &px_[static_cast<std::size_t>((y * w_ + x) * 3)];
        p[0] = c.r, p[1] = c.g, p[2] = c.b;
    }

    void fill(double x0, double y0, double x1, double y1, Rgb c) {
        const int ax = static_cast<int>(std::lround(std::min(x0, x1))), bx = static_cast<int>(std::lround(std::max(x0, x1)));
        const int ay = static_cast<int>(std::lround(std::min(y0, y1))), by = static_cast<int>(std::lround(std::max(y0, y1)));
        for (int y = ay; y <= by; ++y)
            for (int x = ax; x <= bx; ++x) set(x, y, c);
    }

    void line(double x0, double y0, double x1, double y1, Rgb c, int thickness = 1) {
        const double len = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
        const int n = std::max(1, static_cast<int>(std::ceil(len)));
        for (int i = 0; i <= n; ++i) {
            const double t = static_cast<double>(i) / n;
            const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
            const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
            for (int dx = 0; dx < thickness; ++dx)
                for (int dy = 0; dy < thickness; ++dy) set(x + dx, y + dy, c);
        }
    }

    /// Left-aligned at (x, y) top; `vertical` runs bottom to top.
    void text(int x, int y, const std::string& s, Rgb c, bool vertical = false) {
        const auto& f = font();
        int cursor = 0;
        for (char raw : s) {
            const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
            const auto it = f.count(ch) ? f.find(ch) : f.find('?');
            for (int row = 0; row < 7; ++row)
                for (int col = 0; col < 5; ++col) {
                    if (!(it->second[row] & (0x10 >> col))) continue;
                    const int gx = cursor + col, gy = row;
                    if (vertical) set(x + gy, y - gx, c);
                    else set(x + gx, y + gy, c);
                }
            cursor += 6;
        }
    }

    static int text_width(const std::string& s) { return static_cast<int>(s.size()) * 6; }

    const std::vector<unsigned char>& pixels() const { return px_; }
    int width() const { return w_; }
    int height() const { return h_; }

private:
    int w_, h_;
    std::vector<unsigned char> px_;
};

constexpr Rgb kAxis{60, 60, 60};
constexpr Rgb kGrid{225, 225, 225};

}  // namespace

std::string render_svg(const Chart& chart) {
    Layout L(chart);
    std::string o;
    o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(chart.width) + "\" height=\"" +
         std::to_string(chart.height) + "\" viewBox=\"0 0 " + std::to_string(chart.width) + " " +
         std::to_string(chart.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    o += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    o += "<text x=\"" + std::to_string(chart.width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         xml_text(chart.title) + "</text>\n";
    for (double v : L.y_ticks) {
        const auto y = f2(L.py(v));
        o += "<line x1=\"" + std::to_string(kLeft) + "\" y1=\"" + y + "\" x2=\"" + std::to_string(chart.width - kRight) +
             "\" y2=\"" + y + "\" stroke=\"" + hex(kGrid) + "\"/>\n";
        o += "<text x=\"" + std::to_string(kLeft - 6) + "\" y=\"" + y + "\" text-anchor=\"end\" dy=\"4\">" +
             tick_label(v) + "</text>\n";
    }
    for (double v : L.x_ticks) {
        const auto x = f2(L.px(v));
        o += "<text x=\"" + x + "\" y=\"" + std::to_string(chart.height - kBottom + 16) + "\" text-anchor=\"middle\">" +
             tick_label(v) + "</text>\n";
    }
    for (const auto& r : chart.rects) {
        const double x0 = L.px(std::min(r.x0, r.x1)), x1 = L.px(std::max(r.x0, r.x1));
        const double y0 = L.py(std::max(r.y0, r.y1)), y1 = L.py(std::min(r.y0, r.y1));
        o += "<rect x=\"" + f2(x0) + "\" y=\"" + f2(y0) + "\" width=\"" + f2(x1 - x0) + "\" height=\"" + f2(y1 - y0) +
             "\" fill=\"" + hex(r.fill) + "\"/>\n";
    }
    for (const auto& s : chart.series) {
        const auto pts = expand(s);
        if (s.markers) {
            for (const auto& [x, y] : pts)
                o += "<circle cx=\"" + f2(L.px(x)) + "\" cy=\"" + f2(L.py(y)) + "\" r=\"2\" fill=\"" + hex(s.color) +
                     "\"/>\n";
            continue;
        }
        o += "<polyline fill=\"none\" stroke=\"" + hex(s.color) + "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) o += ' ';
            o += f2(L.px(pts[i].first)) + "," + f2(L.py(pts[i].second));
        }
        o += "\"/>\n";
    }
    const auto plot_bottom = std::to_string(chart.height - kBottom);
    o += "<line x1=\"" + std::to_string(kLeft) + "\" y1=\"" + plot_bottom + "\" x2=\"" +
         std::to_string(chart.width - kRight) + "\" y2=\"" + plot_bottom + "\" stroke=\"" + hex(kAxis) + "\"/>\n";
    o += "<line x1=\"" + std::to_string(kLeft) + "\" y1=\"" + std::to_string(kTop) + "\" x2=\"" + std::to_string(kLeft) +
         "\" y2=\"" + plot_bottom + "\" stroke=\"" + hex(kAxis) + "\"/>\n";
    o += "<text x=\"" + std::to_string(chart.width / 2) + "\" y=\"" + std::to_string(chart.height - 12) +
         "\" text-anchor=\"middle\">" + xml_text(chart.x_label) + "</text>\n";
    o += "<text transform=\"translate(16," + std::to_string(chart.height / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">" + xml_text(chart.y_label) + "</text>\n";
    int ly = kTop + 4;
    for (const auto& s : chart.series) {
        if (s.label.empty()) continue;
        const int lx = chart.width - kRight - 150;
        o += "<rect x=\"" + std::to_string(lx) + "\" y=\"" + std::to_string(ly) + "\" width=\"12\" height=\"3\" fill=\"" +
             hex(s.color) + "\"/>\n";
        o += "<text x=\"" + std::to_string(lx + 18) + "\" y=\"" + std::to_string(ly + 5) + "\">" + xml_text(s.label) +
             "</text>\n";
        ly += 16;
    }
    o += "</svg>\n";
    return o;
}

void write_png(const Chart& chart, const std::filesystem::path& path) {
    Layout L(chart);
    Canvas cv(chart.width, chart.height);
    const int right = chart.width - kRight, bottom = chart.height - kBottom;
    for (double v : L.y_ticks) {
        const double y = L.py(v);
        cv.line(kLeft, y, right, y, kGrid);
        const auto label = tick_label(v);
        cv.text(kLeft - 6 - Canvas::text_width(label), static_cast<int>(std::lround(y)) - 3, label, kAxis);
    }
    for (double v : L.x_ticks) {
        const auto label = tick_label(v);
        cv.text(static_cast<int>(std::lround(L.px(v))) - Canvas::text_width(label) / 2, bottom + 8, label, kAxis);
    }
    for (const auto& r : chart.rects) cv.fill(L.px(r.x0), L.py(r.y0), L.px(r.x1), L.py(r.y1), r.fill);
    for (const auto& s : chart.series) {
        const auto pts = expand(s);
        if (s.markers) {
            for (const auto& [x, y] : pts) cv.fill(L.px(x) - 1, L.py(y) - 1, L.px(x) + 1, L.py(y) + 1, s.color);
            continue;
        }
        for (std::size_t i = 1; i < pts.size(); ++i)
            cv.line(L.px(pts[i - 1].first), L.py(pts[i - 1].second), L.px(pts[i].first), L.py(pts[i].second), s.color, 2);
    }
    cv.line(kLeft, bottom, right, bottom, kAxis);
    cv.line(kLeft, kTop, kLeft, bottom, kAxis);
    cv.text(chart.width / 2 - Canvas::text_width(chart.title) / 2, 14, chart.title, kAxis);
    cv.text(chart.width / 2 - Canvas::text_width(chart.x_label) / 2, chart.height - 18, chart.x_label, kAxis);
    cv.text(10, chart.height / 2 + Canvas::text_width(chart.y_label) / 2, chart.y_label, kAxis, true);
    int ly = kTop + 4;
    for (const auto& s : chart.series) {
        if (s.label.empty()) continue;
        const int lx = right - 150;
        cv.fill(lx, ly + 2, lx + 12, ly + 4, s.color);
        cv.text(lx + 18, ly, s.label, kAxis);
        ly += 14;
    }

    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw Error("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw Error("PNG encoding failed for " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(cv.width()), static_cast<png_uint_32>(cv.height()), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < cv.height(); ++y)
        png_write_row(png, const_cast<png_bytep>(&cv.pixels()[static_cast<std::size_t>(y * cv.width() * 3)]));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace mlmon::plot
