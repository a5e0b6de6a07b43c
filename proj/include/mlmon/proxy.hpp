#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mlmon/dash.hpp"
#include "mlmon/publisher.hpp"
#include "mlmon/segment_record.hpp"

namespace httplib {
class Server;
struct Request;
struct Response;
}  // namespace httplib

namespace mlmon::proxy {

class Clock {
public:
    virtual ~Clock() = default;
    /// Monotonic seconds.
    virtual Seconds now() const = 0;
    /// Epoch seconds, attached to records for cross-host alignment.
    virtual double wall() const = 0;
};

/// Monotonic time anchored to the system clock at construction.
class SteadyClock : public Clock {
public:
    SteadyClock();
    Seconds now() const override;
    double wall() const override;

private:
    double epoch_at_start_;
    std::int64_t steady_at_start_ns_;
};

/// Externally driven time; wall() mirrors now().
class SimClock : public Clock {
public:
    explicit SimClock(Seconds t = 0.0) : t_(t) {}
    void set(Seconds t) { t_.store(t); }
    Seconds now() const override { return t_.load(); }
    double wall() const override { return t_.load(); }

private:
    std::atomic<double> t_;
};

/// Computes delivery times for relayed bytes on a modeled link, in the
/// proxy clock's timebase. Used in place of measured times when present.
class LinkShaper {
public:
    virtual ~LinkShaper() = default;
    /// Instant at which the first `bytes` payload bytes of a response to a
    /// request issued at `t_request` have been delivered.
    virtual Seconds delivered_at(Seconds t_request, std::uint64_t bytes) const = 0;
    /// Accounts a finished transfer on the link.
    virtual void commit(Seconds t_request, std::uint64_t bytes) = 0;
};

class RecordSink {
public:
    virtual ~RecordSink() = default;
    virtual void on_segment(const SegmentRecord& r) = 0;
    virtual void on_session(const SessionEvent& e) = 0;
};

/// Forwards records to a fusion service through a Publisher.
class PublisherSink : public RecordSink {
public:
    explicit PublisherSink(publish::Publisher& publisher) : publisher_(publisher) {}
    void on_segment(const SegmentRecord& r) override { publisher_.publish(r); }
    void on_session(const SessionEvent& e) override { publisher_.publish(e); }

private:
    publish::Publisher& publisher_;
};

struct ProxyOptions {
    /// Origin base URL; manifest paths are fetched from origin + request path.
    std::string origin;
    Seconds session_timeout = 30.0;
    /// Background expiry period in seconds; 0 leaves expiry to the caller.
    Seconds reap_interval = 1.0;
    /// Chunks buffered between origin and client per request.
    std::size_t relay_window = 64;
};

struct Session {
    std::string session_id;
    std::string client_key;
    std::string mpd_path;
    Seconds opened_at = 0.0;
    Seconds last_activity = 0.0;
};

/// Edge proxy: serves rewritten MPDs and relays segments byte-for-byte,
/// emitting one SegmentRecord per segment request.
class MediaProxy {
public:
    MediaProxy(ProxyOptions options, RecordSink& sink, std::shared_ptr<const Clock> clock = nullptr,
               LinkShaper* shaper = nullptr);
    ~MediaProxy();

    MediaProxy(const MediaProxy&) = delete;
    MediaProxy& operator=(const MediaProxy&) = delete;

    /// Binds and serves on background threads; port 0 picks a free port.
    int start(const std::string& host, int port);
    /// Serves on the calling thread until stop().
    bool listen(const std::string& host, int port);
    void stop();

    /// Closes sessions idle for longer than the timeout, emitting close
    /// events. Returns the closed ids in id order.
    std::vector<std::string> expire_sessions(Seconds now);

    std::vector<Session> sessions() const;
    std::uint64_t records_emitted() const { return records_.load(); }

    void handle_manifest_request(const httplib::Request& req, httplib::Response& res);
    void handle_segment_request(const httplib::Request& req, httplib::Response& res);

private:
    struct Registration;
    struct Relay;
    struct Target {
        std::shared_ptr<const Registration> reg;
        dash::SegmentRef ref;
    };

    void route(const httplib::Request& req, httplib::Response& res);
    std::optional<Target> resolve_segment(const std::string& path) const;
    std::string session_for_segment(const std::string& client, const Target& target);
    void relay(const std::string& url, httplib::Response& res, std::shared_ptr<SegmentRecord> record);
    void emit(const SegmentRecord& r);
    void reap_loop();

    ProxyOptions options_;
    RecordSink& sink_;
    std::shared_ptr<const Clock> clock_;
    LinkShaper* shaper_;
    std::unique_ptr<httplib::Server> server_;
    std::thread server_thread_;
    std::thread reaper_;
    std::atomic<bool> stopping_{false};
    std::mutex reap_mu_;
    std::condition_variable reap_cv_;

    mutable std::mutex mu_;
    std::map<std::string, Session> sessions_;  // by client_key
    std::map<std::string, std::shared_ptr<const Registration>> manifests_;  // by MPD path
    std::uint64_t next_session_ = 1;
    std::mutex emit_mu_;
    std::atomic<std::uint64_t> records_{0};
};

}  // namespace mlmon::proxy
