#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlmon/common.hpp"

namespace mlmon::qoe {

/// Playback interruption. For integration, `t_start` is the media position
/// at which playback froze; `duration` is the wall-clock length of the freeze.
struct StallEvent {
    Seconds t_start = 0.0;
    Seconds duration = 0.0;

    friend bool operator==(const StallEvent&, const StallEvent&) = default;
};

struct QoeScore {
    Seconds t = 0.0;
    double mos = 1.0;
    double video_quality_mean = 1.0;
    int stall_count = 0;
    Seconds stall_total = 0.0;
};

enum class Device { pc, mobile };

Device device_from_string(std::string_view s);
std::string_view to_string(Device d);

/// Mode-0 video and integration coefficients. The committed
/// coefficients/p1203_mode0.json must equal `standard()`.
struct Coefficients {
    std::string version;
    // per-segment coding quality
    double a1, a2, a3, a4;
    double q1, q2, q3;
    // upscaling, frame-rate degradation
    double u1, u2;
    double t1, t2, t3;
    // handheld mapping
    double htv1, htv2, htv3, htv4;
    // R <-> MOS
    double mos_min, mos_max;
    // temporal weighting
    double w_t1, w_t2, w_t3, w_t4, w_t5;
    // audiovisual mixing (only with audio pinned to its maximum)
    double av1, av2, av3, av4;
    // stalling
    double s1, s2, s3;
    // output mapping
    double out_offset, out_scale;

    static const Coefficients& standard();
    static Coefficients load(const std::filesystem::path& path);
    std::string to_json() const;

    friend bool operator==(const Coefficients&, const Coefficients&) = default;
};

struct Display {
    int width = 3840;
    int height = 2160;
};

struct ModelConfig {
    Coefficients coefficients = Coefficients::standard();
    Display display;
    Device device = Device::pc;
    /// Mix an audio stream pinned at its best score into each second.
    /// Off by default: the monitored streams are video-only.
    bool audio_at_max = false;
};

/// Quality of the cubic R (0..100) to MOS mapping.
double mos_from_r(double r, const Coefficients& c = Coefficients::standard());
/// Inverse of mos_from_r on its increasing branch (closed-form root).
double r_from_mos(double mos, const Coefficients& c = Coefficients::standard());

/// Per-segment coding quality in [1, 5] from representation metadata.
/// Throws DomainError for non-positive inputs.
double segment_video_quality(double bitrate_kbps, int width, int height, double framerate,
                             const Display& display = {}, Device device = Device::pc,
                             const Coefficients& c = Coefficients::standard());

/// Stalling impact D >= 0; integration scales quality above 1 by exp(-D).
/// Events at media position 0 are initial loading and count a third of
/// their length. Throws InputError when starts are not strictly increasing,
/// a duration is not positive, or a start lies outside [0, playback_duration].
double stall_degradation(std::span<const StallEvent> events, Seconds playback_duration,
                         const Coefficients& c = Coefficients::standard());

class InputError : public Error {
public:
    using Error::Error;
};

/// Per-segment score placed on the media timeline.
struct SegmentScore {
    Seconds start = 0.0;
    Seconds duration = 0.0;
    double score = 1.0;
};

/// Integrates per-second quality and stalling over segments that end at or
/// before `horizon`. Returns nullopt (insufficient data) when none do.
std::optional<QoeScore> integrate_mos(std::span<const SegmentScore> segments, std::span<const StallEvent> events,
                                      Seconds horizon, const ModelConfig& config = {});

/// One downloaded segment as seen by the session (wall-clock completion).
struct SessionSegment {
    Seconds media_start = 0.0;
    Seconds t_complete = 0.0;
    Seconds duration = 0.0;  // media seconds
    double bitrate_kbps = 0.0;
    int width = 0;
    int height = 0;
    double framerate = 0.0;
};

/// Wall-clock stall, as recorded by the player.
struct WallStall {
    Seconds t_start = 0.0;
    Seconds duration = 0.0;
};

/// Growing-prefix QoE: one score per `step` from `t0`, each computed over
/// the segments completed and the stalls begun by that instant. The final
/// point is pinned to the end of the session.
std::vector<QoeScore> qoe_series(std::span<const SessionSegment> segments, std::span<const WallStall> stalls,
                                 Seconds step, const ModelConfig& config = {}, Seconds t0 = 0.0);

}  // namespace mlmon::qoe
