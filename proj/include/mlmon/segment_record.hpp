#pragma once

#include <cstdint>
#include <string>

#include "mlmon/common.hpp"

namespace mlmon::proxy {

/// One L7 observation: a segment request relayed by the proxy.
struct SegmentRecord {
    std::string session_id;
    std::string rep_id;
    double rep_bitrate_kbps = 0.0;
    std::size_t segment_index = 0;
    std::uint64_t bytes = 0;
    Seconds t_request = 0.0;
    Seconds t_first_byte = 0.0;
    Seconds t_complete = 0.0;
    int origin_status = 0;
    /// Wall-clock (epoch seconds) at completion, for cross-host alignment.
    double wall_clock = 0.0;

    bool ok() const { return origin_status >= 200 && origin_status < 300; }
    Seconds midpoint() const { return 0.5 * (t_request + t_complete); }
    /// 8 * bytes / (t_complete - t_request), in Mbit/s.
    double l7_throughput_mbps() const;

    friend bool operator==(const SegmentRecord&, const SegmentRecord&) = default;
};

/// Throws RangeError naming the violated field.
void validate(const SegmentRecord& r);

struct SessionEvent {
    enum class Kind { open, close };
    Kind kind = Kind::open;
    std::string session_id;
    std::string client_key;
    Seconds t = 0.0;

    friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

}  // namespace mlmon::proxy
