#include "mlmon/proxy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>

#include "httplib.h"
#include "mlmon/url.hpp"

namespace mlmon::proxy {

SteadyClock::SteadyClock() {
    using namespace std::chrono;
    epoch_at_start_ = duration<double>(system_clock::now().time_since_epoch()).count();
    steady_at_start_ns_ = duration_cast<nanoseconds>(steady_clock::now().time_since_epoch()).count();
}

Seconds SteadyClock::now() const {
    using namespace std::chrono;
    const auto ns = duration_cast<nanoseconds>(steady_clock::now().time_since_epoch()).count();
    return epoch_at_start_ + static_cast<double>(ns - steady_at_start_ns_) * 1e-9;
}

double SteadyClock::wall() const {
    using namespace std::chrono;
    return duration<double>(system_clock::now().time_since_epoch()).count();
}

struct MediaProxy::Registration {
    std::string mpd_path;
    dash::Manifest manifest;  // as served by the origin, BaseURL absolute
    std::string base_path;    // path component of the BaseURL
    dash::SegmentMatcher matcher;

    Registration(std::string path, dash::Manifest m, std::string base)
        : mpd_path(std::move(path)), manifest(std::move(m)), base_path(std::move(base)), matcher(manifest) {}
};

// Origin-to-client hand-off for one streamed response.
struct MediaProxy::Relay {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::string> chunks;
    std::size_t window = 64;
    bool headers = false;
    bool finished = false;
    bool cancelled = false;
    int status = 0;
    std::optional<std::size_t> length;
    std::string content_type = "application/octet-stream";
    std::string error;
    std::optional<Seconds> first_byte;
    std::uint64_t relayed = 0;
    bool emitted = false;
};

namespace {

std::string client_key(const std::string& addr, const std::string& mpd_path) { return addr + mpd_path; }

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string join_path(const std::string& prefix, const std::string& path) {
    std::string p = prefix;
    while (!p.empty() && p.back() == '/') p.pop_back();
    return p + path;
}

}  // namespace

MediaProxy::MediaProxy(ProxyOptions options, RecordSink& sink, std::shared_ptr<const Clock> clock, LinkShaper* shaper)
    : options_(std::move(options)),
      sink_(sink),
      clock_(clock ? std::move(clock) : std::make_shared<SteadyClock>()),
      shaper_(shaper),
      server_(std::make_unique<httplib::Server>()) {
    if (!parse_absolute_url(options_.origin)) throw DomainError("origin must be an absolute URL: " + options_.origin);
    if (!(options_.session_timeout > 0.0)) throw DomainError("session timeout must be positive");
    server_->Get(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) { route(req, res); });
}

MediaProxy::~MediaProxy() { stop(); }

int MediaProxy::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) bound = server_->bind_to_any_port(host);
    else if (!server_->bind_to_port(host, port)) bound = -1;
    if (bound <= 0) throw Error("cannot bind proxy to " + host + ":" + std::to_string(port));
    server_thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    if (options_.reap_interval > 0.0) reaper_ = std::thread([this] { reap_loop(); });
    return bound;
}

bool MediaProxy::listen(const std::string& host, int port) {
    if (options_.reap_interval > 0.0 && !reaper_.joinable()) reaper_ = std::thread([this] { reap_loop(); });
    return server_->listen(host, port);
}

void MediaProxy::stop() {
    stopping_ = true;
    reap_cv_.notify_all();
    if (server_) server_->stop();
    if (server_thread_.joinable()) server_thread_.join();
    if (reaper_.joinable()) reaper_.join();
}

void MediaProxy::reap_loop() {
    const auto period = std::chrono::duration<double>(options_.reap_interval);
    std::unique_lock lock(reap_mu_);
    while (!stopping_) {
        reap_cv_.wait_for(lock, period, [this] { return stopping_.load(); });
        if (stopping_) break;
        expire_sessions(clock_->now());
    }
}

std::vector<std::string> MediaProxy::expire_sessions(Seconds now) {
    std::vector<SessionEvent> closed;
    {
        std::lock_guard lock(mu_);
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            if (now - it->second.last_activity > options_.session_timeout) {
                closed.push_back({SessionEvent::Kind::close, it->second.session_id, it->second.client_key, now});
                it = sessions_.erase(it);
            } else {
                ++it;
            }
        }
    }
    std::sort(closed.begin(), closed.end(), [](const auto& a, const auto& b) { return a.session_id < b.session_id; });
    std::vector<std::string> ids;
    for (const auto& e : closed) {
        sink_.on_session(e);
        ids.push_back(e.session_id);
    }
    return ids;
}

std::vector<Session> MediaProxy::sessions() const {
    std::lock_guard lock(mu_);
    std::vector<Session> out;
    for (const auto& [_, s] : sessions_) out.push_back(s);
    return out;
}

void MediaProxy::route(const httplib::Request& req, httplib::Response& res) {
    if (ends_with(req.path, ".mpd")) {
        handle_manifest_request(req, res);
        return;
    }
    handle_segment_request(req, res);
}

void MediaProxy::handle_manifest_request(const httplib::Request& req, httplib::Response& res) {
    const auto origin = *parse_absolute_url(options_.origin);
    const std::string target = join_path(origin.path, req.path);
    httplib::Client client(origin.origin());
    client.set_connection_timeout(5);
    client.set_read_timeout(30);
    auto upstream = client.Get(target);
    if (!upstream) {
        res.status = 502;
        res.set_content("origin unreachable: " + httplib::to_string(upstream.error()), "text/plain");
        return;
    }
    if (upstream->status < 200 || upstream->status >= 300) {
        res.status = upstream->status;
        res.set_content(upstream->body, upstream->get_header_value("Content-Type"));
        return;
    }
    dash::Manifest manifest;
    try {
        manifest = dash::parse_mpd(upstream->body, origin.origin() + target);
        dash::validate(manifest);
    } catch (const Error&) {
        res.status = 502;
        res.set_content("upstream manifest invalid", "text/plain");
        return;
    }
    const auto base = parse_absolute_url(manifest.base_url);
    if (!base) {
        res.status = 502;
        res.set_content("upstream manifest invalid", "text/plain");
        return;
    }
    std::string host = req.get_header_value("Host");
    if (host.empty()) host = req.local_addr + ":" + std::to_string(req.local_port);
    const std::string proxy_origin = "http://" + host;
    const auto rewritten = dash::rewrite_base_url(manifest, proxy_origin);

    const Seconds now = clock_->now();
    std::vector<SessionEvent> events;
    {
        std::lock_guard lock(mu_);
        manifests_[req.path] = std::make_shared<const Registration>(req.path, manifest, base->path);
        const auto key = client_key(req.remote_addr, req.path);
        auto it = sessions_.find(key);
        if (it != sessions_.end() && now - it->second.last_activity > options_.session_timeout) {
            events.push_back({SessionEvent::Kind::close, it->second.session_id, key, now});
            sessions_.erase(it);
            it = sessions_.end();
        }
        if (it == sessions_.end()) {
            Session s{"s" + std::to_string(next_session_++), key, req.path, now, now};
            events.push_back({SessionEvent::Kind::open, s.session_id, key, now});
            sessions_.emplace(key, std::move(s));
        } else {
            it->second.last_activity = std::max(it->second.last_activity, now);
        }
    }
    for (const auto& e : events) sink_.on_session(e);
    res.status = 200;
    res.set_content(dash::serialize_mpd(rewritten), "application/dash+xml");
}

std::optional<MediaProxy::Target> MediaProxy::resolve_segment(const std::string& path) const {
    std::lock_guard lock(mu_);
    std::optional<Target> best;
    for (const auto& [_, reg] : manifests_) {
        if (path.compare(0, reg->base_path.size(), reg->base_path) != 0) continue;
        if (best && best->reg->base_path.size() >= reg->base_path.size()) continue;
        if (auto ref = reg->matcher.match(std::string_view(path).substr(reg->base_path.size())))
            best = Target{reg, *ref};
    }
    return best;
}

std::string MediaProxy::session_for_segment(const std::string& client, const Target& target) {
    const Seconds now = clock_->now();
    std::lock_guard lock(mu_);
    // Any live session of this client on a manifest sharing the base path.
    for (const auto& [path, reg] : manifests_) {
        if (reg->base_path != target.reg->base_path) continue;
        auto it = sessions_.find(client_key(client, path));
        if (it == sessions_.end() || now - it->second.last_activity > options_.session_timeout) continue;
        it->second.last_activity = std::max(it->second.last_activity, now);
        return it->second.session_id;
    }
    return "orphan-" + client_key(client, target.reg->mpd_path);
}

void MediaProxy::emit(const SegmentRecord& r) {
    std::lock_guard lock(emit_mu_);
    sink_.on_segment(r);
    ++records_;
}

void MediaProxy::handle_segment_request(const httplib::Request& req, httplib::Response& res) {
    const Seconds t_request = clock_->now();
    const auto target = resolve_segment(req.path);
    if (!target) {
        // Not part of a known presentation: plain pass-through, unrecorded.
        const auto origin = *parse_absolute_url(options_.origin);
        relay(origin.origin() + join_path(origin.path, req.target), res, nullptr);
        return;
    }
    auto record = std::make_shared<SegmentRecord>();
    record->session_id = session_for_segment(req.remote_addr, *target);
    record->rep_id = target->ref.rep_id;
    if (const auto* rep = target->reg->manifest.find(target->ref.rep_id)) record->rep_bitrate_kbps = rep->bitrate_kbps;
    record->segment_index = target->ref.index;
    record->t_request = t_request;
    const std::string relative = req.path.substr(target->reg->base_path.size());
    relay(resolve_url(target->reg->manifest.base_url, relative), res, std::move(record));
}

void MediaProxy::relay(const std::string& url, httplib::Response& res, std::shared_ptr<SegmentRecord> record) {
    const auto parsed = parse_absolute_url(url);
    auto state = std::make_shared<Relay>();
    state->window = std::max<std::size_t>(1, options_.relay_window);
    auto clock = clock_;

    auto finish_record = [this, state, record, clock](int status) {
        // Caller holds state->mu.
        if (!record || state->emitted) return;
        state->emitted = true;
        SegmentRecord r = *record;
        r.origin_status = status;
        r.bytes = state->relayed;
        if (shaper_) {
            r.t_first_byte = shaper_->delivered_at(r.t_request, std::min<std::uint64_t>(r.bytes, 1));
            r.t_complete = shaper_->delivered_at(r.t_request, r.bytes);
            shaper_->commit(r.t_request, r.bytes);
        } else {
            const Seconds now = clock->now();
            r.t_first_byte = state->first_byte.value_or(now);
            r.t_complete = std::max(now, r.t_first_byte);
            r.t_first_byte = std::max(r.t_first_byte, r.t_request);
            r.t_complete = std::max(r.t_complete, r.t_first_byte);
        }
        r.wall_clock = clock->wall();
        if (r.ok() && r.bytes == 0) r.origin_status = 502;  // nothing relayed
        if (r.ok() && !(r.t_complete > r.t_request)) r.t_complete = std::nextafter(r.t_request, 1e300);
        emit(r);
    };

    if (!parsed) {
        std::lock_guard lock(state->mu);
        finish_record(502);
        res.status = 502;
        res.set_content("bad upstream url", "text/plain");
        return;
    }

    std::thread([state, origin = parsed->origin(), target = parsed->target(), clock] {
        httplib::Client client(origin);
        client.set_connection_timeout(5);
        client.set_read_timeout(30);
        auto result = client.Get(
            target,
            [&](const httplib::Response& r) {
                std::lock_guard lock(state->mu);
                state->status = r.status;
                if (r.has_header("Content-Length")) state->length = std::stoull(r.get_header_value("Content-Length"));
                if (r.has_header("Content-Type")) state->content_type = r.get_header_value("Content-Type");
                state->headers = true;
                state->cv.notify_all();
                return true;
            },
            [&](const char* data, std::size_t n) {
                std::unique_lock lock(state->mu);
                state->cv.wait(lock, [&] { return state->cancelled || state->chunks.size() < state->window; });
                if (state->cancelled) return false;
                if (!state->first_byte) state->first_byte = clock->now();
                state->chunks.emplace_back(data, n);
                state->cv.notify_all();
                return true;
            });
        std::lock_guard lock(state->mu);
        if (!result && !state->headers) state->error = httplib::to_string(result.error());
        state->finished = true;
        state->cv.notify_all();
    }).detach();

    {
        std::unique_lock lock(state->mu);
        state->cv.wait(lock, [&] { return state->headers || state->finished; });
        if (!state->headers) {
            finish_record(502);
            res.status = 502;
            res.set_content("origin unreachable: " + state->error, "text/plain");
            return;
        }
        res.status = state->status;
    }

    const int status = state->status;
    const auto type = state->content_type;
    // Pops the next chunk; the record is emitted before the last byte leaves.
    auto next = [state, finish_record, status](std::string& out, bool& last) {
        std::unique_lock lock(state->mu);
        state->cv.wait(lock, [&] { return !state->chunks.empty() || state->finished; });
        if (state->chunks.empty()) {
            finish_record(status);
            last = true;
            return false;
        }
        out = std::move(state->chunks.front());
        state->chunks.pop_front();
        state->cv.notify_all();
        state->relayed += out.size();
        last = state->length && state->relayed >= *state->length;
        if (last) finish_record(status);
        return true;
    };
    auto release = [state, finish_record, status](bool) {
        {
            std::lock_guard lock(state->mu);
            state->cancelled = true;
            finish_record(status);
        }
        state->cv.notify_all();
    };

    if (state->length) {
        res.set_content_provider(
            *state->length, type,
            [next, state](std::size_t, std::size_t, httplib::DataSink& sink) {
                std::string chunk;
                bool last = false;
                if (!next(chunk, last)) return false;  // origin ended short
                return sink.write(chunk.data(), chunk.size());
            },
            release);
    } else {
        res.set_chunked_content_provider(
            type,
            [next](std::size_t, httplib::DataSink& sink) {
                std::string chunk;
                bool last = false;
                if (!next(chunk, last)) {
                    sink.done();
                    return true;
                }
                return sink.write(chunk.data(), chunk.size());
            },
            release);
    }
}

}  // namespace mlmon::proxy
