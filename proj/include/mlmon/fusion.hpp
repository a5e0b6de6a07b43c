#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "mlmon/qoe.hpp"
#include "mlmon/radio.hpp"
#include "mlmon/segment_record.hpp"

namespace mlmon::fusion {

enum class Layer { L1, L3, L7, QoE };

std::string_view to_string(Layer l);
Layer layer_from_string(std::string_view s);

struct SeriesKey {
    Layer layer = Layer::L1;
    std::string metric;
    std::optional<std::string> session_id;
    std::map<std::string, std::string> labels;

    friend auto operator<=>(const SeriesKey&, const SeriesKey&) = default;
    friend bool operator==(const SeriesKey&, const SeriesKey&) = default;
};

/// Exposition name: layer prefix (radio_, link_, media_, qoe_) + metric.
std::string exposition_name(const SeriesKey& key);

/// File stem used for JSONL persistence, unique per key.
std::string file_stem(const SeriesKey& key);

struct Point {
    Seconds t = 0.0;
    double value = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

struct IngestResult {
    bool duplicate = false;
};

struct QueryResult {
    std::vector<Point> points;
    bool unknown_series = false;
};

struct AlignedRecord {
    proxy::SegmentRecord segment;
    std::optional<radio::RadioSample> radio;
    std::vector<radio::LinkSample> link_window;
    /// |segment midpoint - radio.t|, when a radio sample exists.
    std::optional<Seconds> gap;
    bool aligned = false;
};

struct Correlation {
    double r = 0.0;
    std::size_t points = 0;
    /// One of the series is constant over the common grid; `r` is meaningless.
    bool degenerate = false;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

inline constexpr Seconds kStaleness = 5.0;
inline constexpr Seconds kAlignTolerance = 1.0;
/// Longest link-sample window considered by align().
inline constexpr Seconds kMaxLinkWindow = 60.0;

// Metric names fed by the typed ingest overloads.
namespace metric {
inline constexpr const char* rsrp = "rsrp_dbm";
inline constexpr const char* rsrq = "rsrq_db";
inline constexpr const char* sinr = "sinr_db";
inline constexpr const char* rx_throughput = "rx_throughput_mbps";
inline constexpr const char* tx_throughput = "tx_throughput_mbps";
inline constexpr const char* rx_bytes = "rx_bytes_delta";
inline constexpr const char* segment_bitrate = "segment_bitrate_kbps";
inline constexpr const char* segment_throughput = "segment_throughput_mbps";
inline constexpr const char* segment_bytes = "segment_bytes";
inline constexpr const char* selected_bitrate = "selected_bitrate_kbps";
inline constexpr const char* stall_total = "stall_total_s";
inline constexpr const char* buffer_level = "buffer_level_s";
inline constexpr const char* mos = "mos";
inline constexpr const char* video_quality = "video_quality_mean";
inline constexpr const char* stall_count = "stall_count";
}  // namespace metric

SeriesKey radio_key(const char* metric);
SeriesKey link_key(const char* metric);
SeriesKey media_key(const char* metric, const std::string& session_id);
SeriesKey qoe_key(const char* metric, const std::string& session_id);

/// Timestamp-keyed multi-layer store. Every ingest is idempotent on
/// (series, t); when two ingests disagree at the same key the smaller value
/// is kept, so results do not depend on arrival order.
class Store {
public:
    Store() = default;
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;
    Store(Store&&) noexcept;
    Store& operator=(Store&&) noexcept;

    IngestResult ingest(const radio::RadioSample& s);
    IngestResult ingest(const radio::LinkSample& s);
    IngestResult ingest(const proxy::SegmentRecord& r);
    IngestResult ingest(const std::string& session_id, const qoe::QoeScore& s);
    IngestResult ingest_point(const SeriesKey& key, Point p);
    IngestResult record_event(const proxy::SessionEvent& e);

    /// LOCF resample onto t0, t0 + step, ... <= t1. A grid instant with no
    /// observation in the preceding kStaleness seconds is absent.
    QueryResult query_range(const SeriesKey& key, Seconds t0, Seconds t1, Seconds step) const;

    /// Nearest radio sample to the segment midpoint (earlier wins ties)
    /// and every link sample whose window overlaps the request span.
    AlignedRecord align(const proxy::SegmentRecord& r, Seconds tolerance = kAlignTolerance) const;

    /// Pearson r over grid instants where both series have a value.
    /// Throws InsufficientData below three common points.
    Correlation correlate(const SeriesKey& a, const SeriesKey& b, Seconds t0, Seconds t1, Seconds step) const;

    /// One line per series with its latest point, sorted, newline-terminated.
    std::string exposition() const;

    std::vector<SeriesKey> keys() const;
    std::vector<Point> points(const SeriesKey& key) const;
    std::vector<radio::RadioSample> radio_samples() const;
    std::vector<radio::LinkSample> link_samples() const;
    /// Ordered by (session, t_request, rep_id, segment_index).
    std::vector<proxy::SegmentRecord> segments(const std::optional<std::string>& session_id = {}) const;
    std::vector<proxy::SessionEvent> events() const;
    std::vector<std::string> sessions() const;

    /// Writes `<dir>/<series>.jsonl` per series plus record files.
    void persist(const std::filesystem::path& dir) const;
    static Store load(const std::filesystem::path& dir);

private:
    using SegmentKey = std::tuple<std::string, double, std::string, std::size_t, double>;
    using EventKey = std::tuple<double, std::string, int>;

    bool put(const SeriesKey& key, Point p);

    mutable std::shared_mutex mu_;
    std::map<SeriesKey, std::map<double, double>> series_;
    std::map<double, radio::RadioSample> radio_;
    std::map<double, radio::LinkSample> link_;
    std::map<SegmentKey, proxy::SegmentRecord> segments_;
    std::map<EventKey, proxy::SessionEvent> events_;
};

}  // namespace mlmon::fusion
