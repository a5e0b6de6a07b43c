#include "mlmon/publisher.hpp"

#include <algorithm>

#include "httplib.h"
#include "mlmon/codec.hpp"

namespace mlmon::publish {

struct HttpTransport::Impl {
    httplib::Client client;
    explicit Impl(const std::string& base) : client(base) {}
};

HttpTransport::HttpTransport(const std::string& base_url, std::chrono::milliseconds timeout)
    : impl_(std::make_unique<Impl>(base_url)) {
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    impl_->client.set_connection_timeout(secs, usecs);
    impl_->client.set_read_timeout(secs, usecs);
    impl_->client.set_write_timeout(secs, usecs);
    impl_->client.set_keep_alive(true);
}

HttpTransport::~HttpTransport() = default;

Delivery HttpTransport::send(const std::string& path, const std::string& body) {
    auto res = impl_->client.Post(path, body, "application/json");
    if (!res) return Delivery::unavailable;
    if (res->status >= 200 && res->status < 300) return Delivery::acked;
    if (res->status >= 400 && res->status < 500) return Delivery::rejected;
    return Delivery::unavailable;
}

Publisher::Publisher(std::shared_ptr<Transport> transport, PublisherOptions options)
    : transport_(std::move(transport)), options_(options) {
    if (options_.capacity == 0) options_.capacity = 1;
    worker_ = std::thread([this] { run(); });
}

Publisher::~Publisher() {
    {
        std::lock_guard lock(mu_);
        stop_ = true;
    }
    cv_.notify_all();
    worker_.join();
}

void Publisher::publish(const radio::RadioSample& s) {
    publish_raw("/ingest/radio", nlohmann::json(s).dump());
}

void Publisher::publish(const radio::LinkSample& s) {
    publish_raw("/ingest/link", nlohmann::json(s).dump());
}

void Publisher::publish(const proxy::SegmentRecord& r) {
    publish_raw("/ingest/segment", nlohmann::json(r).dump());
}

void Publisher::publish(const proxy::SessionEvent& e) {
    publish_raw("/ingest/event", nlohmann::json(e).dump());
}

void Publisher::publish(const std::string& session_id, const qoe::QoeScore& s) {
    nlohmann::json j = s;
    j["session_id"] = session_id;
    publish_raw("/ingest/qoe", j.dump());
}

void Publisher::publish_raw(std::string path, std::string body) {
    {
        std::lock_guard lock(mu_);
        if (queue_.size() >= options_.capacity) {
            // The head may be mid-send; drop the oldest entry behind it.
            const auto victim = in_flight_ && queue_.size() > 1 ? queue_.begin() + 1 : queue_.begin();
            if (!(in_flight_ && queue_.size() == 1)) {
                queue_.erase(victim);
                ++stats_.dropped;
            }
        }
        queue_.push_back({std::move(path), std::move(body)});
    }
    cv_.notify_all();
}

bool Publisher::flush(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return drained_.wait_for(lock, timeout, [this] { return queue_.empty() && !in_flight_; });
}

PublisherStats Publisher::stats() const {
    std::lock_guard lock(mu_);
    auto s = stats_;
    s.pending = queue_.size();
    return s;
}

void Publisher::run() {
    auto backoff = options_.retry_initial;
    std::unique_lock lock(mu_);
    while (true) {
        cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
        if (stop_) return;
        Item item = queue_.front();
        in_flight_ = true;
        lock.unlock();
        const Delivery d = transport_->send(item.path, item.body);
        lock.lock();
        in_flight_ = false;
        if (d == Delivery::unavailable) {
            ++stats_.retries;
            if (cv_.wait_for(lock, backoff, [this] { return stop_; })) return;
            backoff = std::min(backoff * 2, options_.retry_max);
            continue;
        }
        backoff = options_.retry_initial;
        queue_.pop_front();
        if (d == Delivery::acked) ++stats_.delivered;
        else ++stats_.rejected;
        if (queue_.empty()) drained_.notify_all();
    }
}

}  // namespace mlmon::publish
