#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mlmon/qoe.hpp"

namespace mlmon::trial {

/// Highest rung <= safety * throughput_est * 1000 kbps, else the lowest
/// rung. Returns an index into `ladder_kbps` (ascending, non-empty).
std::size_t abr_select(std::span<const double> ladder_kbps, double throughput_est_mbps, double safety);

struct PlayerConfig {
    Seconds buffer_max = 20.0;
    /// Level at which playback starts, and resumes after a stall.
    Seconds resume_threshold = 4.0;
    double ewma_alpha = 0.3;
};

struct PlayerState {
    Seconds now = 0.0;
    Seconds buffer_level = 0.0;
    /// EWMA of measured segment throughput; empty before the first download.
    std::optional<double> throughput_est_mbps;
    /// Playback has started (and is not over).
    bool playing = false;
    /// Every segment has been downloaded.
    bool download_complete = false;
    Seconds position_in_media = 0.0;
    std::optional<Seconds> stall_open;
    std::vector<qoe::WallStall> stalls;

    bool stalled() const { return stall_open.has_value(); }
    /// Closed durations plus the open stall's elapsed time.
    Seconds stall_total() const;
};

/// Advances time by dt > 0. Playback drains the buffer; reaching zero
/// before the download completes opens a stall, after it ends playback.
PlayerState step(PlayerState s, Seconds dt, const PlayerConfig& c);

/// A segment of `media_duration` arrived (buffer capped at buffer_max).
/// Starts playback or closes a stall once the resume threshold is reached.
PlayerState on_segment(PlayerState s, Seconds media_duration, double measured_mbps, const PlayerConfig& c);

/// Seconds to wait before requesting a segment of `media_duration` so the
/// buffer never exceeds buffer_max; 0 when not playing.
Seconds wait_before_request(const PlayerState& s, Seconds media_duration, const PlayerConfig& c);

}  // namespace mlmon::trial
