#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mlmon/common.hpp"

namespace mlmon::trial {

struct Waypoint {
    Seconds t = 0.0;
    GeoPoint position;
};

struct PathLoss {
    double p0_dbm_at_d0 = -60.0;
    double d0_m = 10.0;
    double exponent = 2.2;
    double shadow_sigma_db = 0.0;
    /// Distance travelled over which shadowing decorrelates to 1/e;
    /// 0 draws independent values every second.
    double shadow_decorrelation_m = 0.0;
};

struct Link {
    double bandwidth_mhz = 100.0;
    double efficiency = 0.1;
    double max_mbps = 150.0;
    double noise_floor_dbm = -95.0;
    double interference_db = 3.0;
    /// rsrq = rsrq_offset_db + rsrq_slope * sinr, clamped to range.
    double rsrq_offset_db = -15.0;
    double rsrq_slope = 0.4;
    /// Fixed per-request delay before the first byte.
    Seconds latency_s = 0.0;
    /// Wire bytes per payload byte (headers, framing).
    double overhead = 1.03;
};

struct Abr {
    double safety = 0.8;
    double ewma_alpha = 0.3;
    /// Buffer level at which playback starts and resumes after a stall.
    Seconds buffer_target_s = 4.0;
    Seconds buffer_max_s = 20.0;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 42;
    GeoPoint antenna;
    std::vector<Waypoint> waypoints;
    PathLoss pathloss;
    Link link;
    Abr abr;
    /// MPD fixture, resolved against the scenario file's directory.
    std::filesystem::path manifest;
};

/// Throws RangeError naming the first out-of-range field.
void validate(const Scenario& s);

/// Parses the TOML scenario format documented in the README.
/// Throws ParseError on syntax errors and SemanticError/RangeError otherwise.
Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace mlmon::trial
