#include "mlmon/codec.hpp"

#include <cmath>

namespace mlmon {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* name) {
    const auto it = j.find(name);
    if (it == j.end()) throw SemanticError(std::string("missing field '") + name + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw SemanticError(std::string("field '") + name + "' has the wrong type");
    }
}

template <typename T>
T field_or(const json& j, const char* name, T fallback) {
    const auto it = j.find(name);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw SemanticError(std::string("field '") + name + "' has the wrong type");
    }
}

}  // namespace

namespace radio {

void to_json(json& j, const RadioSample& s) {
    j = json{{"t", s.t},
             {"rsrp_dbm", s.rsrp_dbm},
             {"rsrq_db", s.rsrq_db},
             {"sinr_db", s.sinr_db},
             {"lat_deg", s.position.lat},
             {"lon_deg", s.position.lon},
             {"source", std::string(to_string(s.source))}};
}

void from_json(const json& j, RadioSample& s) {
    s.t = field<double>(j, "t");
    s.rsrp_dbm = field<double>(j, "rsrp_dbm");
    s.rsrq_db = field<double>(j, "rsrq_db");
    s.sinr_db = field<double>(j, "sinr_db");
    s.position = {field<double>(j, "lat_deg"), field<double>(j, "lon_deg")};
    s.source = source_from_string(field_or<std::string>(j, "source", "trace_file"));
    validate(s);
}

void to_json(json& j, const LinkSample& s) {
    j = json{{"t", s.t},
             {"rx_bytes_delta", s.rx_bytes_delta},
             {"tx_bytes_delta", s.tx_bytes_delta},
             {"window_s", s.window},
             {"rx_throughput_mbps", s.rx_throughput_mbps()}};
}

void from_json(const json& j, LinkSample& s) {
    s.t = field<double>(j, "t");
    s.rx_bytes_delta = field<std::uint64_t>(j, "rx_bytes_delta");
    s.tx_bytes_delta = field_or<std::uint64_t>(j, "tx_bytes_delta", 0);
    s.window = field_or<double>(j, "window_s", 1.0);
    validate(s);
}

}  // namespace radio

namespace proxy {

void to_json(json& j, const SegmentRecord& r) {
    j = json{{"session_id", r.session_id},
             {"rep_id", r.rep_id},
             {"rep_bitrate_kbps", r.rep_bitrate_kbps},
             {"segment_index", r.segment_index},
             {"bytes", r.bytes},
             {"t_request", r.t_request},
             {"t_first_byte", r.t_first_byte},
             {"t_complete", r.t_complete},
             {"origin_status", r.origin_status},
             {"wall_clock", r.wall_clock}};
}

void from_json(const json& j, SegmentRecord& r) {
    r.session_id = field<std::string>(j, "session_id");
    r.rep_id = field<std::string>(j, "rep_id");
    r.rep_bitrate_kbps = field<double>(j, "rep_bitrate_kbps");
    r.segment_index = field<std::size_t>(j, "segment_index");
    r.bytes = field<std::uint64_t>(j, "bytes");
    r.t_request = field<double>(j, "t_request");
    r.t_first_byte = field<double>(j, "t_first_byte");
    r.t_complete = field<double>(j, "t_complete");
    r.origin_status = field<int>(j, "origin_status");
    r.wall_clock = field_or<double>(j, "wall_clock", 0.0);
    validate(r);
}

void to_json(json& j, const SessionEvent& e) {
    j = json{{"kind", e.kind == SessionEvent::Kind::open ? "open" : "close"},
             {"session_id", e.session_id},
             {"client_key", e.client_key},
             {"t", e.t}};
}

void from_json(const json& j, SessionEvent& e) {
    const auto kind = field<std::string>(j, "kind");
    if (kind == "open") e.kind = SessionEvent::Kind::open;
    else if (kind == "close") e.kind = SessionEvent::Kind::close;
    else throw SemanticError("field 'kind' must be open or close");
    e.session_id = field<std::string>(j, "session_id");
    e.client_key = field_or<std::string>(j, "client_key", "");
    e.t = field<double>(j, "t");
}

}  // namespace proxy

namespace qoe {

void to_json(json& j, const QoeScore& s) {
    j = json{{"t", s.t},
             {"mos", s.mos},
             {"video_quality_mean", s.video_quality_mean},
             {"stall_count", s.stall_count},
             {"stall_total_s", s.stall_total}};
}

void from_json(const json& j, QoeScore& s) {
    s.t = field<double>(j, "t");
    s.mos = field<double>(j, "mos");
    s.video_quality_mean = field_or<double>(j, "video_quality_mean", s.mos);
    s.stall_count = field_or<int>(j, "stall_count", 0);
    s.stall_total = field_or<double>(j, "stall_total_s", 0.0);
    if (!std::isfinite(s.mos) || s.mos < 1.0 || s.mos > 5.0) throw RangeError("mos", "mos out of range");
    if (s.stall_count < 0) throw RangeError("stall_count", "stall_count out of range");
    if (!(s.stall_total >= 0.0)) throw RangeError("stall_total_s", "stall_total_s out of range");
}

void to_json(json& j, const StallEvent& s) { j = json{{"t_start", s.t_start}, {"duration", s.duration}}; }

void from_json(const json& j, StallEvent& s) {
    s.t_start = field<double>(j, "t_start");
    s.duration = field<double>(j, "duration");
}

}  // namespace qoe

namespace codec {

json parse_body(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw ParseError(e.byte, "json body malformed");
    }
}

}  // namespace codec

namespace proxy {

double SegmentRecord::l7_throughput_mbps() const {
    const double span = t_complete - t_request;
    if (!(span > 0.0)) return 0.0;
    return 8.0 * static_cast<double>(bytes) / span / 1e6;
}

void validate(const SegmentRecord& r) {
    if (r.session_id.empty()) throw RangeError("session_id", "session_id empty");
    if (!std::isfinite(r.t_request) || !std::isfinite(r.t_first_byte) || !std::isfinite(r.t_complete))
        throw RangeError("t_request", "timestamps must be finite");
    if (r.t_first_byte < r.t_request) throw RangeError("t_first_byte", "t_first_byte before t_request");
    if (r.t_complete < r.t_first_byte) throw RangeError("t_complete", "t_complete before t_first_byte");
    if (r.origin_status < 100 || r.origin_status > 599) throw RangeError("origin_status");
    if (r.ok() && r.bytes == 0) throw RangeError("bytes", "bytes must be positive for a successful download");
    if (r.ok() && !(r.t_complete > r.t_request))
        throw RangeError("t_complete", "successful download must take positive time");
    if (!(r.rep_bitrate_kbps >= 0.0)) throw RangeError("rep_bitrate_kbps");
}

}  // namespace proxy

}  // namespace mlmon
