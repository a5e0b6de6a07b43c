#pragma once

// Golden QoE corpus loading shared by the unit tests and the acceptance binary.

#include <string>
#include <algorithm>
#include <vector>

#include "json.hpp"
#include "mlmon/qoe.hpp"
#include "support.hpp"

namespace mlmon::test {

inline nlohmann::json golden(const std::string& name) {
    return nlohmann::json::parse(slurp(source("golden/qoe/" + name)))["cases"];
}

struct SessionCase {
    qoe::ModelConfig config;
    std::vector<qoe::SegmentScore> segments;
    std::vector<qoe::StallEvent> stalls;
    double horizon = 0.0;
};

inline SessionCase session_case(const nlohmann::json& input) {
    SessionCase c;
    c.config.display = {input["display_width"].get<int>(), input["display_height"].get<int>()};
    c.config.device = qoe::device_from_string(input["device"].get<std::string>());
    for (const auto& s : input["segments"]) {
        const double score = qoe::segment_video_quality(s["bitrate_kbps"].get<double>(), s["width"].get<int>(),
                                                        s["height"].get<int>(), s["framerate"].get<double>(),
                                                        c.config.display, c.config.device);
        c.segments.push_back({s["start"].get<double>(), s["duration"].get<double>(), score});
    }
    for (const auto& e : input["stalls"]) c.stalls.push_back({e["t_start"].get<double>(), e["duration"].get<double>()});
    c.horizon = input["horizon"].get<double>();
    return c;
}

/// Inserts a one-second freeze at the first whole-second media position no
/// existing event uses.
inline std::vector<qoe::StallEvent> with_synthetic_stall(std::vector<qoe::StallEvent> stalls) {
    double at = 1.0;
    for (bool taken = true; taken;) {
        taken = false;
        for (const auto& e : stalls)
            if (e.t_start == at) taken = true;
        if (taken) at += 1.0;
    }
    stalls.push_back({at, 1.0});
    std::sort(stalls.begin(), stalls.end(),
              [](const qoe::StallEvent& a, const qoe::StallEvent& b) { return a.t_start < b.t_start; });
    return stalls;
}

}  // namespace mlmon::test
