#include "mlmon/player.hpp"

#include <algorithm>

namespace mlmon::trial {

std::size_t abr_select(std::span<const double> ladder_kbps, double throughput_est_mbps, double safety) {
    if (ladder_kbps.empty()) throw DomainError("empty ladder");
    const double budget = safety * throughput_est_mbps * 1000.0;
    std::size_t pick = 0;
    for (std::size_t i = 0; i < ladder_kbps.size(); ++i)
        if (ladder_kbps[i] <= budget) pick = i;
    return pick;
}

Seconds PlayerState::stall_total() const {
    Seconds total = 0.0;
    for (const auto& s : stalls) total += s.duration;
    if (stall_open) total += now - *stall_open;
    return total;
}

PlayerState step(PlayerState s, Seconds dt, const PlayerConfig&) {
    if (!(dt > 0.0)) throw DomainError("dt must be positive");
    const Seconds t0 = s.now;
    s.now += dt;
    if (!s.playing || s.stall_open) return s;
    if (s.buffer_level > dt) {
        s.buffer_level -= dt;
        s.position_in_media += dt;
        return s;
    }
    const Seconds empty_at = t0 + s.buffer_level;
    s.position_in_media += s.buffer_level;
    s.buffer_level = 0.0;
    if (s.download_complete) s.playing = false;
    else s.stall_open = empty_at;
    return s;
}

PlayerState on_segment(PlayerState s, Seconds media_duration, double measured_mbps, const PlayerConfig& c) {
    s.buffer_level = std::min(c.buffer_max, s.buffer_level + media_duration);
    s.throughput_est_mbps = s.throughput_est_mbps
                                ? c.ewma_alpha * measured_mbps + (1.0 - c.ewma_alpha) * *s.throughput_est_mbps
                                : measured_mbps;
    if (s.buffer_level >= c.resume_threshold || s.download_complete) {
        if (s.stall_open) {
            s.stalls.push_back({*s.stall_open, s.now - *s.stall_open});
            s.stall_open.reset();
        }
        if (s.position_in_media == 0.0 && !s.playing) s.playing = true;
    }
    return s;
}

Seconds wait_before_request(const PlayerState& s, Seconds media_duration, const PlayerConfig& c) {
    if (!s.playing || s.stall_open) return 0.0;
    return std::max(0.0, s.buffer_level + media_duration - c.buffer_max);
}

}  // namespace mlmon::trial
