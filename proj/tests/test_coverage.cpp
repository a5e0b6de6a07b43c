#include <gtest/gtest.h>

#include <cmath>

#include "json.hpp"
#include "mlmon/coverage.hpp"
#include "support.hpp"

using namespace mlmon;
using namespace mlmon::coverage;
using nlohmann::json;

namespace {

radio::RadioSample at(double lat, double lon, double rsrp, double t = 0.0) {
    return {t, rsrp, -10.0, 10.0, GeoPoint{lat, lon}, radio::Source::trace_file};
}

/// Meters north/east of a reference point, as degrees.
GeoPoint offset(const GeoPoint& ref, double north_m, double east_m) {
    constexpr double kPi = 3.14159265358979323846;
    const double dlat = north_m / kEarthRadiusM * 180.0 / kPi;
    const double dlon = east_m / (kEarthRadiusM * std::cos(ref.lat * kPi / 180.0)) * 180.0 / kPi;
    return {ref.lat + dlat, ref.lon + dlon};
}

const GeoPoint kRef{43.31, -1.98};

}  // namespace

TEST(Classify, DocumentedExamples) {
    EXPECT_EQ(classify_rsrp(-75), Zone::Excellent);
    EXPECT_EQ(classify_rsrp(-85), Zone::Good);
    EXPECT_EQ(classify_rsrp(-95), Zone::Mid);
    EXPECT_EQ(classify_rsrp(-105), Zone::CellEdge);
}

TEST(Classify, HalfOpenBoundaries) {
    EXPECT_EQ(classify_rsrp(-80), Zone::Good);
    EXPECT_EQ(classify_rsrp(-79.9), Zone::Excellent);
    EXPECT_EQ(classify_rsrp(-90), Zone::Mid);
    EXPECT_EQ(classify_rsrp(-100), Zone::CellEdge);
    EXPECT_EQ(classify_rsrp(-99.99), Zone::Mid);
}

TEST(Classify, OutOfRangeIsDomainError) {
    EXPECT_THROW(classify_rsrp(-157), DomainError);
    EXPECT_THROW(classify_rsrp(-30), DomainError);
    EXPECT_THROW(classify_rsrp(std::nan("")), DomainError);
    EXPECT_NO_THROW(classify_rsrp(-156));
    EXPECT_NO_THROW(classify_rsrp(-31));
}

TEST(Classify, SweepIsMonotone) {
    Zone prev = Zone::CellEdge;
    for (int k = -1560; k <= -310; ++k) {
        const Zone z = classify_rsrp(k / 10.0);
        EXPECT_LE(static_cast<int>(z), static_cast<int>(prev)) << k;
        prev = z;
    }
}

TEST(Colors, PaperPalette) {
    EXPECT_EQ(color(Zone::Excellent), "green");
    EXPECT_EQ(color(Zone::Good), "yellow");
    EXPECT_EQ(color(Zone::Mid), "orange");
    EXPECT_EQ(color(Zone::CellEdge), "red");
}

TEST(BuildCoverage, SinglePointSingleCell) {
    const std::vector<radio::RadioSample> samples(5, at(kRef.lat, kRef.lon, -85));
    const auto cells = build_coverage(samples, 25);
    ASSERT_EQ(cells.size(), 1u);
    EXPECT_EQ(cells[0].zone, Zone::Good);
    EXPECT_EQ(cells[0].sample_count, 5u);
    EXPECT_EQ(cells[0].rsrp_median, -85.0);
}

TEST(BuildCoverage, TwoClustersTwoDisjointCells) {
    std::vector<radio::RadioSample> samples;
    const auto far = offset(kRef, 0, 100);
    for (int i = 0; i < 4; ++i) samples.push_back(at(kRef.lat, kRef.lon, -75));
    for (int i = 0; i < 4; ++i) samples.push_back(at(far.lat, far.lon, -105));
    const auto cells = build_coverage(samples, 25);
    ASSERT_EQ(cells.size(), 2u);
    EXPECT_NE(cells[0].id, cells[1].id);
    EXPECT_EQ(cells[0].zone, Zone::Excellent);
    EXPECT_EQ(cells[1].zone, Zone::CellEdge);
    // East edge of the first cell lies west of the second cell's west edge.
    EXPECT_LE(cells[0].corners[1].lon, cells[1].corners[0].lon + 1e-12);
    EXPECT_GT(haversine_m(cells[0].center, cells[1].center), 50.0);
}

TEST(BuildCoverage, MedianDecidesZone) {
    std::vector<radio::RadioSample> samples{at(kRef.lat, kRef.lon, -70), at(kRef.lat, kRef.lon, -95),
                                            at(kRef.lat, kRef.lon, -120)};
    const auto cells = build_coverage(samples, 25);
    ASSERT_EQ(cells.size(), 1u);
    EXPECT_EQ(cells[0].rsrp_median, -95.0);
    EXPECT_EQ(cells[0].zone, Zone::Mid);
}

TEST(BuildCoverage, Errors) {
    EXPECT_THROW(build_coverage({}, 25), Error);
    const std::vector<radio::RadioSample> one{at(kRef.lat, kRef.lon, -85)};
    EXPECT_THROW(build_coverage(one, 0), DomainError);
    EXPECT_THROW(build_coverage(one, -5), DomainError);
}

TEST(BuildCoverage, WeakerSignalNeverImprovesZones) {
    std::vector<radio::RadioSample> samples;
    for (int i = 0; i < 200; ++i) {
        const auto p = offset(kRef, (i % 20) * 7.0, (i / 20) * 9.0);
        samples.push_back(at(p.lat, p.lon, -70 - (i * 37 % 45)));
    }
    const auto base = build_coverage(samples, 25);
    for (auto& s : samples) s.rsrp_dbm -= 3.0;
    const auto weaker = build_coverage(samples, 25);
    ASSERT_EQ(base.size(), weaker.size());
    for (std::size_t k = 0; k < base.size(); ++k) {
        EXPECT_EQ(base[k].id, weaker[k].id);
        EXPECT_GE(static_cast<int>(weaker[k].zone), static_cast<int>(base[k].zone));
    }
}

TEST(BuildCoverage, TranslationPreservesCellStructure) {
    std::vector<radio::RadioSample> samples;
    for (int i = 0; i < 60; ++i) {
        const auto p = offset(kRef, i * 3.0, i * 2.0);
        samples.push_back(at(p.lat, p.lon, -60 - i));
    }
    auto shifted = samples;
    for (auto& s : shifted) s.position = offset(s.position, 0, 500);
    const auto a = build_coverage(samples, 25);
    const auto b = build_coverage(shifted, 25);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].id, b[k].id);
        EXPECT_EQ(a[k].sample_count, b[k].sample_count);
        EXPECT_EQ(a[k].zone, b[k].zone);
    }
}

TEST(GeoJson, OneGoodCellIsYellow) {
    const std::vector<radio::RadioSample> samples{at(kRef.lat, kRef.lon, -85)};
    const auto j = json::parse(to_geojson(build_coverage(samples, 25)));
    EXPECT_EQ(j["type"], "FeatureCollection");
    ASSERT_EQ(j["features"].size(), 1u);
    const auto& f = j["features"][0];
    EXPECT_EQ(f["properties"]["color"], "yellow");
    EXPECT_EQ(f["geometry"]["type"], "Polygon");
    const auto& ring = f["geometry"]["coordinates"][0];
    ASSERT_EQ(ring.size(), 5u);
    EXPECT_EQ(ring.front(), ring.back());
    EXPECT_LT(ring[0][0].get<double>(), ring[1][0].get<double>());  // [lon, lat] order
}

TEST(GeoJson, EmptyCollection) {
    const auto j = json::parse(to_geojson({}));
    EXPECT_EQ(j["type"], "FeatureCollection");
    EXPECT_TRUE(j["features"].empty());
}

TEST(GeoJson, Deterministic) {
    const auto samples = radio::read_drive_trace(test::source("fixtures/traces/near_322s.csv"));
    const auto a = to_geojson(build_coverage(samples, 25));
    const auto b = to_geojson(build_coverage(samples, 25));
    EXPECT_EQ(a, b);
    EXPECT_GT(json::parse(a)["features"].size(), 5u);
}
