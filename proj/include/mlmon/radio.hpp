#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mlmon/common.hpp"

namespace mlmon::radio {

enum class Source { modem_log, trace_file, simulated };

std::string_view to_string(Source s);
Source source_from_string(std::string_view s);

// 3GPP reporting ranges.
inline constexpr double kRsrpMin = -156.0, kRsrpMax = -31.0;
inline constexpr double kRsrqMin = -43.0, kRsrqMax = 20.0;
inline constexpr double kSinrMin = -23.0, kSinrMax = 40.0;

/// One L1 + GPS observation.
struct RadioSample {
    Seconds t = 0.0;
    double rsrp_dbm = 0.0;
    double rsrq_db = 0.0;
    double sinr_db = 0.0;
    GeoPoint position;
    Source source = Source::trace_file;

    friend bool operator==(const RadioSample&, const RadioSample&) = default;
};

/// Throws RangeError naming the first offending field.
void validate(const RadioSample& s);

/// One L3 observation over `window` seconds ending at `t`.
struct LinkSample {
    Seconds t = 0.0;
    std::uint64_t rx_bytes_delta = 0;
    std::uint64_t tx_bytes_delta = 0;
    Seconds window = 1.0;

    double rx_throughput_mbps() const { return 8.0 * static_cast<double>(rx_bytes_delta) / window / 1e6; }
    double tx_throughput_mbps() const { return 8.0 * static_cast<double>(tx_bytes_delta) / window / 1e6; }

    friend bool operator==(const LinkSample&, const LinkSample&) = default;
};

void validate(const LinkSample& s);

/// Radio fields carried by one modem status response.
struct RfReading {
    double rsrp_dbm = 0.0;
    double rsrq_db = 0.0;
    double sinr_db = 0.0;
};

/// Parses a `#RFSTS:` response:
///
///     #RFSTS: <plmn>,<arfcn>,<rsrp>,<rsrq>,<sinr>[,<ignored>...]
///
/// Fields may be double-quoted. Lines that do not follow the grammar
/// (including `OK`, echoes and other URCs) yield nullopt. A well-formed line
/// with a value outside its reporting range throws RangeError("rsrp" | ...).
std::optional<RfReading> parse_modem_status_line(std::string_view line);

class ChecksumError : public Error {
public:
    using Error::Error;
};

/// Decodes GGA/RMC sentences from any talker ($GP, $GN, ...). Sentences of
/// other types, without a checksum, without a fix, or with empty coordinates
/// yield nullopt. A checksum mismatch throws ChecksumError.
std::optional<GeoPoint> parse_nmea(std::string_view line);

struct Counters {
    std::uint64_t rx_bytes = 0;
    std::uint64_t tx_bytes = 0;
};

enum class CounterWidth : unsigned { bits32 = 32, bits64 = 64 };

/// Delta between two interface counter snapshots taken `dt` seconds apart,
/// using modular subtraction at the given counter width.
LinkSample sample_link(const Counters& prev, const Counters& curr, Seconds dt, Seconds t = 0.0,
                       CounterWidth width = CounterWidth::bits64);

/// Drive-trace CSV: header `t_s,lat_deg,lon_deg,rsrp_dbm,rsrq_db,sinr_db`.
/// Timestamps must be strictly increasing; all sample invariants enforced.
/// Throws ParseError/RangeError annotated with the 1-based line number.
std::vector<RadioSample> read_drive_trace(const std::filesystem::path& path);
std::vector<RadioSample> read_drive_trace(std::istream& in);

inline constexpr std::string_view kDriveTraceHeader = "t_s,lat_deg,lon_deg,rsrp_dbm,rsrq_db,sinr_db";

void write_drive_trace(std::ostream& out, const std::vector<RadioSample>& samples);

struct TimedLine {
    Seconds t = 0.0;
    std::string payload;
};

/// Logged lines of the form `<t_s><whitespace><payload>`; blank lines and
/// lines without a numeric timestamp are skipped.
std::vector<TimedLine> read_timed_lines(std::istream& in);

struct JoinStats {
    std::size_t rf_lines = 0;
    std::size_t skipped_lines = 0;
    std::size_t checksum_errors = 0;
    std::size_t range_errors = 0;
    std::size_t unpositioned = 0;
};

/// Pairs each RF reading with the GPS fix nearest in time (within
/// `tolerance`); readings without a fix in tolerance are counted and dropped.
std::vector<RadioSample> join_modem_and_gps(const std::vector<TimedLine>& modem,
                                            const std::vector<TimedLine>& nmea, JoinStats& stats,
                                            Seconds tolerance = 0.5);

struct CounterSnapshot {
    Seconds t = 0.0;
    Counters counters;
};

/// Counter snapshot CSV: header `t_s,rx_bytes,tx_bytes`.
std::vector<CounterSnapshot> read_counter_snapshots(std::istream& in);

/// Consecutive-snapshot deltas.
std::vector<LinkSample> link_samples(const std::vector<CounterSnapshot>& snapshots,
                                     CounterWidth width = CounterWidth::bits64);

/// Reads /sys/class/net/<iface>/statistics/{rx,tx}_bytes.
Counters read_interface_counters(const std::string& iface);

}  // namespace mlmon::radio
