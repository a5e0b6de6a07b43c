#pragma once

// JSON bodies exchanged between the exporter, the proxy and the fusion
// service. Decoders validate and throw SemanticError/RangeError naming the
// offending field.

#include <string>

#include "json.hpp"
#include "mlmon/qoe.hpp"
#include "mlmon/radio.hpp"
#include "mlmon/segment_record.hpp"

namespace mlmon::radio {
void to_json(nlohmann::json& j, const RadioSample& s);
void from_json(const nlohmann::json& j, RadioSample& s);
void to_json(nlohmann::json& j, const LinkSample& s);
void from_json(const nlohmann::json& j, LinkSample& s);
}  // namespace mlmon::radio

namespace mlmon::proxy {
void to_json(nlohmann::json& j, const SegmentRecord& r);
void from_json(const nlohmann::json& j, SegmentRecord& r);
void to_json(nlohmann::json& j, const SessionEvent& e);
void from_json(const nlohmann::json& j, SessionEvent& e);
}  // namespace mlmon::proxy

namespace mlmon::qoe {
void to_json(nlohmann::json& j, const QoeScore& s);
void from_json(const nlohmann::json& j, QoeScore& s);
void to_json(nlohmann::json& j, const StallEvent& s);
void from_json(const nlohmann::json& j, StallEvent& s);
}  // namespace mlmon::qoe

namespace mlmon::codec {

/// Parses a request body, rethrowing JSON syntax errors as ParseError.
nlohmann::json parse_body(const std::string& body);

template <typename T>
T decode(const std::string& body) {
    const auto j = parse_body(body);
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw SemanticError(e.what());
    }
}

}  // namespace mlmon::codec
