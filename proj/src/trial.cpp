#include "mlmon/trial.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include "httplib.h"
#include "mlmon/channel.hpp"
#include "mlmon/codec.hpp"
#include "mlmon/player.hpp"
#include "mlmon/proxy.hpp"
#include "mlmon/url.hpp"

namespace mlmon::trial {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

void fill_pattern(std::string& out, const std::string& rep_id, std::size_t size) {
    out.resize(size);
    const std::uint64_t seed = fnv1a(rep_id);
    for (std::size_t j = 0; j < size; j += 8) {
        const std::uint64_t w = splitmix64(seed + j / 8);
        for (std::size_t b = 0; b < 8 && j + b < size; ++b) out[j + b] = static_cast<char>((w >> (8 * b)) & 0xFF);
    }
}

char stamp(char c, std::size_t offset, std::size_t index) {
    return offset < 8 ? static_cast<char>(c ^ static_cast<char>((index >> (8 * offset)) & 0xFF)) : c;
}

}  // namespace

std::string segment_body(const std::string& rep_id, std::size_t index, std::size_t size) {
    std::string out;
    fill_pattern(out, rep_id, size);
    for (std::size_t j = 0; j < std::min<std::size_t>(8, size); ++j) out[j] = stamp(out[j], j, index);
    return out;
}

std::size_t segment_size(const dash::Manifest& m, const dash::Representation& rep, std::size_t index) {
    return static_cast<std::size_t>(std::llround(rep.bitrate_kbps * 1000.0 * m.segment_length(index) / 8.0));
}

struct FixtureOrigin::Cache {
    std::mutex mu;
    std::map<std::string, std::shared_ptr<const std::string>> patterns;
};

FixtureOrigin::FixtureOrigin(dash::Manifest manifest, std::string mpd_path)
    : manifest_(std::move(manifest)),
      mpd_path_(std::move(mpd_path)),
      server_(std::make_unique<httplib::Server>()),
      cache_(std::make_unique<Cache>()) {
    dash::validate(manifest_);
}

FixtureOrigin::~FixtureOrigin() { stop(); }

std::string FixtureOrigin::base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

int FixtureOrigin::start(const std::string& host) {
    port_ = server_->bind_to_any_port(host);
    if (port_ <= 0) throw Error("cannot bind fixture origin");
    served_ = dash::rewrite_base_url(manifest_, "http://" + host + ":" + std::to_string(port_));
    const auto base = parse_absolute_url(served_.base_url);
    const std::string base_path = base ? base->path : "/";
    auto matcher = std::make_shared<dash::SegmentMatcher>(served_);
    const std::string mpd_body = dash::serialize_mpd(served_);

    server_->Get(R"(/.*)", [this, base_path, matcher, mpd_body](const httplib::Request& req, httplib::Response& res) {
        if (req.path == mpd_path_) {
            res.set_content(mpd_body, "application/dash+xml");
            return;
        }
        std::optional<dash::SegmentRef> ref;
        if (req.path.compare(0, base_path.size(), base_path) == 0)
            ref = matcher->match(std::string_view(req.path).substr(base_path.size()));
        const auto* rep = ref ? served_.find(ref->rep_id) : nullptr;
        if (!rep) {
            res.status = 404;
            res.set_content("not found", "text/plain");
            return;
        }
        const std::size_t size = segment_size(served_, *rep, ref->index);
        std::shared_ptr<const std::string> pattern;
        {
            std::lock_guard lock(cache_->mu);
            auto& slot = cache_->patterns[rep->id];
            if (!slot || slot->size() < size) {
                auto fresh = std::make_shared<std::string>();
                fill_pattern(*fresh, rep->id, segment_size(served_, *rep, 1));
                if (fresh->size() < size) fill_pattern(*fresh, rep->id, size);
                slot = std::move(fresh);
            }
            pattern = slot;
        }
        const std::size_t index = ref->index;
        res.set_content_provider(size, "video/iso.segment",
                                 [pattern, index](std::size_t offset, std::size_t length, httplib::DataSink& sink) {
                                     const std::size_t n = std::min<std::size_t>(length, 256 * 1024);
                                     if (offset < 8) {
                                         std::string head = pattern->substr(offset, std::min<std::size_t>(n, 8 - offset));
                                         for (std::size_t j = 0; j < head.size(); ++j)
                                             head[j] = stamp(head[j], offset + j, index);
                                         return sink.write(head.data(), head.size());
                                     }
                                     return sink.write(pattern->data() + offset, n);
                                 });
    });
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void FixtureOrigin::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

std::vector<fusion::Point> selected_bitrate_series(const std::vector<Completion>& completions, std::size_t last,
                                                   Seconds hold, Seconds download_complete_at) {
    std::vector<fusion::Point> out;
    std::size_t j = 0;
    const Completion* latest = nullptr;
    for (std::size_t k = 1; k <= last; ++k) {
        const double t = static_cast<double>(k);
        while (j < completions.size() && completions[j].t <= t) latest = &completions[j++];
        double v = 0.0;
        if (latest && (t - latest->t <= hold || t >= download_complete_at)) v = latest->bitrate_kbps;
        out.push_back({t, v});
    }
    return out;
}

namespace {

// Feeds proxy records straight into the store and keeps them for the player.
class HarnessSink : public proxy::RecordSink {
public:
    explicit HarnessSink(fusion::Store& store) : store_(store) {}

    void on_segment(const proxy::SegmentRecord& r) override {
        store_.ingest(r);
        std::lock_guard lock(mu_);
        records_.push_back(r);
    }
    void on_session(const proxy::SessionEvent& e) override {
        store_.record_event(e);
        std::lock_guard lock(mu_);
        events_.push_back(e);
    }
    std::optional<proxy::SegmentRecord> find(const std::string& rep_id, std::size_t index) const {
        std::lock_guard lock(mu_);
        for (auto it = records_.rbegin(); it != records_.rend(); ++it)
            if (it->rep_id == rep_id && it->segment_index == index) return *it;
        return std::nullopt;
    }
    std::vector<proxy::SegmentRecord> records() const {
        std::lock_guard lock(mu_);
        return records_;
    }
    std::vector<proxy::SessionEvent> events() const {
        std::lock_guard lock(mu_);
        return events_;
    }

private:
    fusion::Store& store_;
    mutable std::mutex mu_;
    std::vector<proxy::SegmentRecord> records_;
    std::vector<proxy::SessionEvent> events_;
};

std::vector<radio::RadioSample> round_trip(const std::vector<radio::RadioSample>& samples) {
    std::stringstream buf;
    radio::write_drive_trace(buf, samples);
    return radio::read_drive_trace(buf);
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

}  // namespace

TrialResult run_trial(const Scenario& scenario, const TrialOptions& options) {
    validate(scenario);
    if (scenario.waypoints.front().t > 0.0) throw DomainError("route must start at or before t = 0");

    std::ifstream mpd_in(scenario.manifest, std::ios::binary);
    if (!mpd_in) throw Error("cannot read manifest " + scenario.manifest.string());
    std::ostringstream mpd_text;
    mpd_text << mpd_in.rdbuf();
    const auto fixture = dash::parse_mpd(mpd_text.str());

    // Radio: the trace as the exporter will read it back drives the link.
    std::vector<radio::RadioSample> full_trace;
    for (const auto& s : round_trip(generate_trace(scenario)))
        if (s.t >= 0.0) full_trace.push_back(s);
    if (full_trace.empty() || full_trace.front().t != 0.0) throw DomainError("route must cover t = 0");
    std::vector<double> capacity;
    for (const auto& s : full_trace) capacity.push_back(link_capacity(s.sinr_db, scenario.link));
    TraceShaper shaper(capacity, scenario.link);

    TrialResult result;
    HarnessSink sink(result.store);
    auto clock = std::make_shared<proxy::SimClock>(0.0);

    FixtureOrigin origin(fixture);
    origin.start();
    proxy::ProxyOptions popts;
    popts.origin = origin.base_url();
    popts.reap_interval = 0.0;
    proxy::MediaProxy media_proxy(popts, sink, clock, &shaper);
    const int proxy_port = media_proxy.start("127.0.0.1", 0);

    httplib::Client client("127.0.0.1", proxy_port);
    client.set_keep_alive(true);
    client.set_read_timeout(60);

    auto mpd = client.Get(origin.mpd_path());
    if (!mpd || mpd->status != 200) throw Error("manifest request through the proxy failed");
    const auto manifest = dash::parse_mpd(mpd->body);
    const auto ladder = manifest.ladder_kbps();
    const std::size_t n_segments = manifest.segment_count();

    PlayerConfig cfg;
    cfg.buffer_max = scenario.abr.buffer_max_s;
    cfg.resume_threshold = scenario.abr.buffer_target_s;
    cfg.ewma_alpha = scenario.abr.ewma_alpha;
    PlayerState state;

    std::vector<fusion::Point> buffer_series, stall_series;
    auto sample = [&] {
        buffer_series.push_back({state.now, state.buffer_level});
        stall_series.push_back({state.now, state.stall_total()});
    };
    // Advances the player, sampling at every whole second crossed.
    auto advance_to = [&](Seconds target) {
        while (state.now < target) {
            const double next = std::floor(state.now) + 1.0;
            if (next <= target) {
                state = step(state, next - state.now, cfg);
                state.now = next;
                sample();
            } else {
                state = step(state, target - state.now, cfg);
                state.now = target;
            }
        }
    };

    std::vector<Completion> completions;
    std::vector<qoe::SessionSegment> session_segments;
    Seconds media_start = 0.0;
    Seconds download_complete_at = 0.0;
    for (std::size_t i = 1; i <= n_segments; ++i) {
        const double dur = manifest.segment_length(i);
        if (const Seconds w = wait_before_request(state, dur, cfg); w > 0.0) advance_to(state.now + w);
        const std::size_t pick =
            state.throughput_est_mbps ? abr_select(ladder, *state.throughput_est_mbps, scenario.abr.safety) : 0;
        const auto& rep = manifest.representations[pick];
        const auto url = parse_absolute_url(dash::segment_url(manifest, rep.id, i));
        if (!url) throw Error("segment URL is not absolute");

        clock->set(state.now);
        std::uint64_t received = 0;
        auto res = client.Get(url->target(), [&](const char*, std::size_t n) {
            received += n;
            return true;
        });
        if (!res || res->status != 200) throw Error("segment request failed: " + url->target());
        const auto record = sink.find(rep.id, i);
        if (!record || record->bytes != received) throw Error("proxy record missing for " + url->target());

        advance_to(record->t_complete);
        if (i == n_segments) {
            state.download_complete = true;
            download_complete_at = record->t_complete;
        }
        state = on_segment(state, dur, record->l7_throughput_mbps(), cfg);
        completions.push_back({record->t_complete, rep.bitrate_kbps});
        session_segments.push_back(
            {media_start, record->t_complete, dur, rep.bitrate_kbps, rep.width, rep.height, rep.framerate});
        media_start += dur;
    }
    advance_to(state.now + state.buffer_level);
    result.session_end = state.now;
    result.horizon = static_cast<std::size_t>(std::ceil(result.session_end - 1e-9));
    advance_to(static_cast<double>(result.horizon));

    if (result.horizon > static_cast<std::size_t>(full_trace.back().t))
        throw DomainError("route ends before the session (" + format_number(result.session_end) + " s)");

    const auto sessions = media_proxy.sessions();
    const Seconds last_activity = sessions.empty() ? result.session_end : sessions.front().last_activity;
    media_proxy.expire_sessions(last_activity + popts.session_timeout + 1.0);
    client.stop();
    media_proxy.stop();
    origin.stop();

    result.manifest = manifest;
    result.segments = sink.records();
    std::sort(result.segments.begin(), result.segments.end(),
              [](const auto& a, const auto& b) { return a.t_request < b.t_request; });
    result.session_id = result.segments.empty() ? std::string() : result.segments.front().session_id;
    result.stalls = state.stalls;

    // Exporter path: trace rows up to the horizon, then L3 counters.
    for (const auto& s : full_trace)
        if (s.t <= static_cast<double>(result.horizon)) result.trace.push_back(s);
    for (const auto& s : result.trace) result.store.ingest(s);
    for (const auto& l : radio::link_samples(shaper.snapshots(result.horizon))) result.store.ingest(l);

    const auto sid = result.session_id;
    for (const auto& p : selected_bitrate_series(completions, result.horizon, 2.0 * manifest.segment_duration,
                                                 download_complete_at))
        result.store.ingest_point(fusion::media_key(fusion::metric::selected_bitrate, sid), p);
    for (const auto& p : stall_series) result.store.ingest_point(fusion::media_key(fusion::metric::stall_total, sid), p);
    for (const auto& p : buffer_series)
        result.store.ingest_point(fusion::media_key(fusion::metric::buffer_level, sid), p);
    for (const auto& q : qoe::qoe_series(session_segments, result.stalls, options.qoe_step, options.qoe))
        result.store.ingest(sid, q);

    if (!options.out_dir.empty()) {
        fs::create_directories(options.out_dir);
        {
            std::ofstream out(options.out_dir / files::trace, std::ios::binary);
            radio::write_drive_trace(out, result.trace);
        }
        // session.jsonl: events, segments and stalls in time order.
        std::vector<std::pair<double, std::string>> lines;
        for (const auto& e : sink.events()) {
            json j = e;
            j["type"] = "session";
            lines.emplace_back(e.t, j.dump());
        }
        for (const auto& r : result.segments) {
            json j = r;
            j["type"] = "segment";
            lines.emplace_back(r.t_request, j.dump());
        }
        for (const auto& s : result.stalls)
            lines.emplace_back(s.t_start, json{{"type", "stall"}, {"t_start", s.t_start}, {"duration", s.duration}}.dump());
        std::stable_sort(lines.begin(), lines.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        std::string session_text;
        for (const auto& [_, l] : lines) session_text += l + "\n";
        write_file(options.out_dir / files::session, session_text);

        const auto store_dir = options.out_dir / files::store;
        fs::remove_all(store_dir);
        result.store.persist(store_dir);

        double stall_total = 0.0;
        for (const auto& s : result.stalls) stall_total += s.duration;
        json run{{"complete", true},
                 {"scenario", scenario.name},
                 {"seed", scenario.seed},
                 {"manifest", scenario.manifest.filename().string()},
                 {"session_id", sid},
                 {"segments", result.segments.size()},
                 {"session_end_s", result.session_end},
                 {"horizon_s", result.horizon},
                 {"stall_count", result.stalls.size()},
                 {"stall_total_s", stall_total},
                 {"segment_duration_s", manifest.segment_duration},
                 {"ladder_kbps", ladder},
                 {"qoe",
                  {{"coefficients", options.qoe.coefficients.version},
                   {"device", std::string(qoe::to_string(options.qoe.device))},
                   {"display", {options.qoe.display.width, options.qoe.display.height}},
                   {"audio", options.qoe.audio_at_max ? "pinned at model maximum" : "video-only"},
                   {"window", "growing prefix"},
                   {"step_s", options.qoe_step}}},
                 {"files",
                  {{"trace", files::trace}, {"session", files::session}, {"store", files::store}}}};
        write_file(options.out_dir / files::manifest, run.dump(2) + "\n");
    }
    return result;
}

}  // namespace mlmon::trial
