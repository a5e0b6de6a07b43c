#include "mlmon/qoe.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"

namespace mlmon::qoe {

using nlohmann::json;

Device device_from_string(std::string_view s) {
    if (s == "pc") return Device::pc;
    if (s == "mobile" || s == "handheld") return Device::mobile;
    throw DomainError("unknown device type '" + std::string(s) + "'");
}

std::string_view to_string(Device d) { return d == Device::pc ? "pc" : "mobile"; }

const Coefficients& Coefficients::standard() {
    static const Coefficients c{
        .version = "p1203-mode0-parametric/1",
        .a1 = 11.99835, .a2 = -2.99992, .a3 = 41.24751, .a4 = 0.13183,
        .q1 = 4.66, .q2 = -0.07, .q3 = 4.06,
        .u1 = 72.61, .u2 = 0.32,
        .t1 = 30.98, .t2 = 1.29, .t3 = 64.65,
        .htv1 = -0.60293, .htv2 = 2.12382, .htv3 = -0.36936, .htv4 = 0.03409,
        .mos_min = 1.05, .mos_max = 4.9,
        .w_t1 = 0.00666620027943848, .w_t2 = 0.0000404018840273729, .w_t3 = 0.156497800436237,
        .w_t4 = 0.143179744942738, .w_t5 = 0.0238641564518876,
        .av1 = -0.00069084, .av2 = 0.15374283, .av3 = 0.97153861, .av4 = 0.02461776,
        .s1 = 9.35158117, .s2 = 0.91890318, .s3 = 11.0567558,
        .out_offset = 0.02833052, .out_scale = 0.98117059,
    };
    return c;
}

namespace {

#define MLMON_COEFF_FIELDS(X)                                                                                    \
    X(a1) X(a2) X(a3) X(a4) X(q1) X(q2) X(q3) X(u1) X(u2) X(t1) X(t2) X(t3) X(htv1) X(htv2) X(htv3) X(htv4)   \
        X(mos_min) X(mos_max) X(w_t1) X(w_t2) X(w_t3) X(w_t4) X(w_t5) X(av1) X(av2) X(av3) X(av4) X(s1) X(s2) \
            X(s3) X(out_offset) X(out_scale)

double clamp(double v, double lo, double hi) { return std::max(lo, std::min(hi, v)); }

// Shape constant of the R -> MOS cubic.
constexpr double kCubic = 7.0e-6;

}  // namespace

Coefficients Coefficients::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open coefficient file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(e.byte, std::string("coefficient file: ") + e.what());
    }
    Coefficients c{};
    try {
        c.version = j.at("version").get<std::string>();
        const auto& v = j.at("coefficients");
#define X(name) c.name = v.at(#name).get<double>();
        MLMON_COEFF_FIELDS(X)
#undef X
    } catch (const json::exception& e) {
        throw SemanticError(std::string("coefficient file: ") + e.what());
    }
    return c;
}

std::string Coefficients::to_json() const {
    json v = json::object();
#define X(name) v[#name] = name;
    MLMON_COEFF_FIELDS(X)
#undef X
    json j{{"version", version}, {"coefficients", v}};
    return j.dump(2) + "\n";
}

double mos_from_r(double r, const Coefficients& c) {
    if (r <= 0.0) return c.mos_min;
    if (r >= 100.0) return c.mos_max;
    return c.mos_min + (c.mos_max - c.mos_min) / 100.0 * r + r * (r - 60.0) * (100.0 - r) * kCubic;
}

double r_from_mos(double mos, const Coefficients& c) {
    mos = clamp(mos, c.mos_min, c.mos_max);
    const double k = kCubic;
    const double m = (c.mos_max - c.mos_min) / 100.0;
    // -k r^3 + 160k r^2 + (m - 6000k) r + (mos_min - mos) = 0, made monic.
    const double B = -160.0;
    const double C = -(m - 6000.0 * k) / k;
    const double D = -(c.mos_min - mos) / k;
    // Increasing branch starts at the cubic's local minimum.
    const double r_lo = (320.0 * k - std::sqrt(320.0 * k * 320.0 * k + 12.0 * k * (m - 6000.0 * k))) / (6.0 * k);
    if (mos <= mos_from_r(r_lo, c)) return r_lo;
    const double p = C - B * B / 3.0;
    const double q = 2.0 * B * B * B / 27.0 - B * C / 3.0 + D;
    std::array<double, 3> roots{};
    if (p < 0.0) {
        const double amp = 2.0 * std::sqrt(-p / 3.0);
        const double arg = clamp(3.0 * q / (2.0 * p) * std::sqrt(-3.0 / p), -1.0, 1.0);
        const double phi = std::acos(arg) / 3.0;
        for (int i = 0; i < 3; ++i) roots[i] = amp * std::cos(phi - 2.0 * std::numbers::pi * i / 3.0) - B / 3.0;
    } else {
        return 100.0;
    }
    std::sort(roots.begin(), roots.end());
    return clamp(roots[1], r_lo, 100.0);
}

double segment_video_quality(double bitrate_kbps, int width, int height, double framerate, const Display& display,
                             Device device, const Coefficients& c) {
    if (!(bitrate_kbps > 0.0) || width < 1 || height < 1 || !(framerate > 0.0) || display.width < 1 ||
        display.height < 1)
        throw DomainError("segment_video_quality: inputs must be positive");
    const double coded = static_cast<double>(width) * height;
    const double shown = static_cast<double>(display.width) * display.height;

    const double quant =
        c.a1 + c.a2 * std::log(c.a3 + std::log(bitrate_kbps) +
                               std::log(bitrate_kbps * bitrate_kbps / (coded * framerate) + c.a4));
    const double mos_cod = clamp(c.q1 + c.q2 * std::exp(c.q3 * quant), 1.0, 5.0);
    const double deg_cod = clamp(100.0 - r_from_mos(mos_cod, c), 0.0, 100.0);

    const double scale = std::max(shown / coded, 1.0);
    const double deg_scal = clamp(c.u1 * std::log10(c.u2 * (scale - 1.0) + 1.0), 0.0, 100.0);

    double deg_fr = 0.0;
    if (framerate < 24.0) deg_fr = (100.0 - deg_cod - deg_scal) * (c.t1 - c.t2 * framerate) / (c.t3 + framerate);
    deg_fr = clamp(deg_fr, 0.0, 100.0);

    const double quality = 100.0 - clamp(deg_cod + deg_scal + deg_fr, 0.0, 100.0);
    double score = mos_from_r(quality, c);
    if (device == Device::mobile)
        score = c.htv1 + c.htv2 * score + c.htv3 * score * score + c.htv4 * score * score * score;
    return clamp(score, 1.0, 5.0);
}

double stall_degradation(std::span<const StallEvent> events, Seconds playback_duration, const Coefficients& c) {
    if (!(playback_duration > 0.0)) throw InputError("stall_degradation: playback duration must be positive");
    if (events.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        if (!(e.duration > 0.0)) throw InputError("stall_degradation: stall duration must be positive");
        if (e.t_start < 0.0 || e.t_start > playback_duration + 1e-9)
            throw InputError("stall_degradation: stall outside playback");
        if (i > 0 && !(e.t_start > events[i - 1].t_start))
            throw InputError("stall_degradation: overlapping or unordered stalls");
        total += e.t_start == 0.0 ? e.duration / 3.0 : e.duration;
    }
    const double n = static_cast<double>(events.size());
    const double interval = events.size() > 1 ? (events.back().t_start - events.front().t_start) / (n - 1.0) : 0.0;
    return n / c.s1 + (total / playback_duration) / c.s2 + (interval / playback_duration) / c.s3;
}

std::optional<QoeScore> integrate_mos(std::span<const SegmentScore> segments, std::span<const StallEvent> events,
                                      Seconds horizon, const ModelConfig& config) {
    if (!(horizon > 0.0)) throw InputError("integrate_mos: horizon must be positive");
    const auto& c = config.coefficients;
    std::vector<SegmentScore> inside;
    for (const auto& s : segments)
        if (s.start + s.duration <= horizon + 1e-9 && s.duration > 0.0) inside.push_back(s);
    if (inside.empty()) return std::nullopt;
    std::stable_sort(inside.begin(), inside.end(), [](const auto& a, const auto& b) { return a.start < b.start; });

    double media = 0.0;
    for (const auto& s : inside) media += s.duration;

    // Per-second video quality, sampled at the start of each second.
    const auto seconds = static_cast<std::size_t>(std::ceil(media - 1e-9));
    std::vector<double> per_second;
    per_second.reserve(seconds);
    std::size_t cursor = 0;
    for (std::size_t t = 0; t < seconds; ++t) {
        const double at = static_cast<double>(t);
        while (cursor + 1 < inside.size() && at >= inside[cursor].start + inside[cursor].duration - 1e-9) ++cursor;
        per_second.push_back(inside[cursor].score);
    }

    double num = 0.0, den = 0.0, sum = 0.0;
    for (std::size_t t = 0; t < per_second.size(); ++t) {
        const double video = per_second[t];
        sum += video;
        double q = video;
        if (config.audio_at_max) {
            constexpr double audio = 5.0;
            q = clamp(c.av1 + c.av2 * audio + c.av3 * video + c.av4 * audio * video, 1.0, 5.0);
        }
        const double w1 = c.w_t1 + c.w_t2 * std::exp((static_cast<double>(t) / media) / c.w_t3);
        const double w2 = c.w_t4 - c.w_t5 * q;
        num += w1 * w2 * q;
        den += w1 * w2;
    }
    const double baseline = clamp(num / den, 1.0, 5.0);

    std::vector<StallEvent> in_range;
    for (const auto& e : events)
        if (e.t_start <= media + 1e-9) in_range.push_back(e);
    const double deg = stall_degradation(in_range, media, c);
    const double integrated = 1.0 + (baseline - 1.0) * std::exp(-deg);

    QoeScore out;
    out.t = horizon;
    out.mos = clamp(c.out_offset + c.out_scale * integrated, 1.0, 5.0);
    out.video_quality_mean = sum / static_cast<double>(per_second.size());
    out.stall_count = static_cast<int>(in_range.size());
    for (const auto& e : in_range) out.stall_total += e.duration;
    return out;
}

std::vector<QoeScore> qoe_series(std::span<const SessionSegment> segments, std::span<const WallStall> stalls,
                                 Seconds step, const ModelConfig& config, Seconds t0) {
    if (!(step > 0.0)) throw InputError("qoe_series: step must be positive");
    std::vector<SessionSegment> segs(segments.begin(), segments.end());
    std::stable_sort(segs.begin(), segs.end(), [](const auto& a, const auto& b) { return a.t_complete < b.t_complete; });
    std::vector<WallStall> st(stalls.begin(), stalls.end());
    std::stable_sort(st.begin(), st.end(), [](const auto& a, const auto& b) { return a.t_start < b.t_start; });
    for (std::size_t i = 1; i < st.size(); ++i)
        if (st[i].t_start < st[i - 1].t_start + st[i - 1].duration - 1e-9)
            throw InputError("qoe_series: overlapping stalls");

    Seconds end = t0;
    for (const auto& s : segs) end = std::max(end, s.t_complete);
    for (const auto& s : st) end = std::max(end, s.t_start + s.duration);
    if (segs.empty()) return {};

    std::vector<double> scores;
    scores.reserve(segs.size());
    for (const auto& s : segs)
        scores.push_back(segment_video_quality(s.bitrate_kbps, s.width, s.height, s.framerate, config.display,
                                               config.device, config.coefficients));

    std::vector<Seconds> grid;
    for (std::size_t k = 1;; ++k) {
        const Seconds t = t0 + static_cast<double>(k) * step;
        if (t >= end - 1e-9) break;
        grid.push_back(t);
    }
    grid.push_back(end);

    std::vector<QoeScore> out;
    for (const Seconds t : grid) {
        std::vector<SegmentScore> prefix;
        double media = 0.0;
        for (std::size_t i = 0; i < segs.size(); ++i) {
            if (segs[i].t_complete > t + 1e-9) continue;
            prefix.push_back({segs[i].media_start, segs[i].duration, scores[i]});
            media += segs[i].duration;
        }
        if (prefix.empty()) continue;
        // A stall freezes playback at the media position downloaded so far.
        std::vector<StallEvent> events;
        double stall_total = 0.0;
        for (const auto& s : st) {
            if (s.t_start > t + 1e-9) continue;
            double position = 0.0;
            for (const auto& seg : segs)
                if (seg.t_complete <= s.t_start + 1e-9) position += seg.duration;
            const double length = std::min(s.duration, t - s.t_start);
            stall_total += std::max(0.0, length);
            if (length <= 0.0) continue;
            // Clipping can leave two freezes at one media position; keep starts strictly ordered.
            if (!events.empty() && position <= events.back().t_start) position = events.back().t_start + 1e-6;
            events.push_back({std::min(position, media), length});
        }
        auto score = integrate_mos(prefix, events, media, config);
        if (!score) continue;
        score->t = t;
        score->stall_total = stall_total;
        out.push_back(*score);
    }
    return out;
}

}  // namespace mlmon::qoe
