#include "mlmon/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace mlmon::coverage {

std::string_view to_string(Zone z) {
    switch (z) {
        case Zone::Excellent: return "Excellent";
        case Zone::Good: return "Good";
        case Zone::Mid: return "Mid";
        case Zone::CellEdge: return "CellEdge";
    }
    return "CellEdge";
}

std::string_view color(Zone z) {
    switch (z) {
        case Zone::Excellent: return "green";
        case Zone::Good: return "yellow";
        case Zone::Mid: return "orange";
        case Zone::CellEdge: return "red";
    }
    return "red";
}

Zone classify_rsrp(double rsrp_dbm) {
    if (!(rsrp_dbm >= radio::kRsrpMin && rsrp_dbm <= radio::kRsrpMax))
        throw DomainError("rsrp " + format_number(rsrp_dbm) + " dBm outside the reporting range");
    if (rsrp_dbm > -80.0) return Zone::Excellent;
    if (rsrp_dbm > -90.0) return Zone::Good;
    if (rsrp_dbm > -100.0) return Zone::Mid;
    return Zone::CellEdge;
}

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Projection {
    GeoPoint origin;
    double m_per_deg_lat = kEarthRadiusM * kDegToRad;
    double m_per_deg_lon = 0.0;

    explicit Projection(GeoPoint sw) : origin(sw), m_per_deg_lon(m_per_deg_lat * std::cos(sw.lat * kDegToRad)) {}

    std::pair<double, double> forward(const GeoPoint& p) const {
        return {(p.lon - origin.lon) * m_per_deg_lon, (p.lat - origin.lat) * m_per_deg_lat};
    }
    GeoPoint inverse(double x, double y) const {
        return {origin.lat + y / m_per_deg_lat, origin.lon + x / m_per_deg_lon};
    }
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<CoverageCell> build_coverage(std::span<const radio::RadioSample> samples, double cell_size_m) {
    if (!(cell_size_m > 0.0) || !std::isfinite(cell_size_m)) throw DomainError("cell size must be positive");
    std::vector<const radio::RadioSample*> positioned;
    for (const auto& s : samples)
        if (valid_geo(s.position)) positioned.push_back(&s);
    if (positioned.empty()) throw Error("no positioned samples");

    GeoPoint sw{90.0, 180.0};
    for (const auto* s : positioned) {
        sw.lat = std::min(sw.lat, s->position.lat);
        sw.lon = std::min(sw.lon, s->position.lon);
    }
    const Projection proj(sw);
    if (!(proj.m_per_deg_lon > 0.0)) throw DomainError("grid undefined at the poles");

    std::map<CellId, std::vector<double>> buckets;
    for (const auto* s : positioned) {
        const auto [x, y] = proj.forward(s->position);
        const CellId id{static_cast<long>(std::floor(x / cell_size_m)), static_cast<long>(std::floor(y / cell_size_m))};
        buckets[id].push_back(s->rsrp_dbm);
    }

    std::vector<CoverageCell> cells;
    cells.reserve(buckets.size());
    for (auto& [id, values] : buckets) {
        CoverageCell c;
        c.id = id;
        const double x0 = static_cast<double>(id.i) * cell_size_m;
        const double y0 = static_cast<double>(id.j) * cell_size_m;
        c.center = proj.inverse(x0 + 0.5 * cell_size_m, y0 + 0.5 * cell_size_m);
        c.corners[0] = proj.inverse(x0, y0);
        c.corners[1] = proj.inverse(x0 + cell_size_m, y0);
        c.corners[2] = proj.inverse(x0 + cell_size_m, y0 + cell_size_m);
        c.corners[3] = proj.inverse(x0, y0 + cell_size_m);
        c.sample_count = values.size();
        c.rsrp_median = median(std::move(values));
        c.zone = classify_rsrp(c.rsrp_median);
        cells.push_back(c);
    }
    return cells;
}

std::string to_geojson(std::span<const CoverageCell> cells) {
    std::string out = R"({"features":[)";
    bool first = true;
    for (const auto& c : cells) {
        if (!first) out += ',';
        first = false;
        out += R"({"geometry":{"coordinates":[[)";
        for (int k = 0; k <= 4; ++k) {
            const auto& p = c.corners[k % 4];
            if (k) out += ',';
            out += '[' + format_fixed(p.lon, 6) + ',' + format_fixed(p.lat, 6) + ']';
        }
        out += R"(]],"type":"Polygon"},"properties":{)";
        out += R"("cell_i":)" + std::to_string(c.id.i);
        out += R"(,"cell_j":)" + std::to_string(c.id.j);
        out += R"(,"color":")" + std::string(color(c.zone)) + '"';
        out += R"(,"rsrp_median":)" + format_fixed(c.rsrp_median, 2);
        out += R"(,"sample_count":)" + std::to_string(c.sample_count);
        out += R"(,"zone":")" + std::string(to_string(c.zone)) + '"';
        out += R"(},"type":"Feature"})";
    }
    out += R"(],"type":"FeatureCollection"})";
    out += '\n';
    return out;
}

}  // namespace mlmon::coverage
