#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlmon/radio.hpp"

namespace mlmon::coverage {

/// Ordered best to worst.
enum class Zone { Excellent, Good, Mid, CellEdge };

std::string_view to_string(Zone z);
std::string_view color(Zone z);

/// Excellent > -80 >= Good > -90 >= Mid > -100 >= CellEdge.
/// Throws DomainError outside the RSRP reporting range.
Zone classify_rsrp(double rsrp_dbm);

struct CellId {
    long i = 0;  // east
    long j = 0;  // north

    friend auto operator<=>(const CellId&, const CellId&) = default;
};

struct CoverageCell {
    CellId id;
    GeoPoint center;
    /// Corners SW, SE, NE, NW.
    GeoPoint corners[4];
    std::size_t sample_count = 0;
    double rsrp_median = 0.0;
    Zone zone = Zone::CellEdge;
};

/// Local equirectangular grid anchored at the bounding box's southwest
/// corner. Cells are ordered by (i, j). Throws DomainError for a
/// non-positive cell size and Error when no sample has a valid position.
std::vector<CoverageCell> build_coverage(std::span<const radio::RadioSample> samples, double cell_size_m);

/// RFC 7946 FeatureCollection; keys sorted, coordinates with 6 decimals.
std::string to_geojson(std::span<const CoverageCell> cells);

}  // namespace mlmon::coverage
