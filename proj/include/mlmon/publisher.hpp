#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "mlmon/qoe.hpp"
#include "mlmon/radio.hpp"
#include "mlmon/segment_record.hpp"

namespace mlmon::publish {

enum class Delivery {
    acked,        // stored (or recognized as a duplicate)
    rejected,     // the receiver refused the body; retrying cannot help
    unavailable,  // transient; retry later
};

/// Delivers one JSON body to an ingestion path such as `/ingest/radio`.
class Transport {
public:
    virtual ~Transport() = default;
    virtual Delivery send(const std::string& path, const std::string& body) = 0;
};

/// POSTs to a fusion service base URL (`http://host:port`).
class HttpTransport : public Transport {
public:
    explicit HttpTransport(const std::string& base_url,
                           std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));
    ~HttpTransport() override;
    Delivery send(const std::string& path, const std::string& body) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct PublisherOptions {
    std::size_t capacity = 8192;
    std::chrono::milliseconds retry_initial{50};
    std::chrono::milliseconds retry_max{1000};
};

struct PublisherStats {
    std::uint64_t delivered = 0;
    std::uint64_t rejected = 0;
    std::uint64_t dropped = 0;
    std::uint64_t retries = 0;
    std::size_t pending = 0;
};

/// Bounded FIFO drained by a background thread. Failed sends are retried
/// with exponential backoff without reordering; when the queue is full the
/// oldest entry is dropped and counted.
class Publisher {
public:
    explicit Publisher(std::shared_ptr<Transport> transport, PublisherOptions options = {});
    ~Publisher();

    Publisher(const Publisher&) = delete;
    Publisher& operator=(const Publisher&) = delete;

    void publish(const radio::RadioSample& s);
    void publish(const radio::LinkSample& s);
    void publish(const proxy::SegmentRecord& r);
    void publish(const proxy::SessionEvent& e);
    void publish(const std::string& session_id, const qoe::QoeScore& s);
    void publish_raw(std::string path, std::string body);

    /// Waits until the queue is empty; false on timeout.
    bool flush(std::chrono::milliseconds timeout);
    PublisherStats stats() const;

private:
    struct Item {
        std::string path;
        std::string body;
    };

    void run();

    std::shared_ptr<Transport> transport_;
    PublisherOptions options_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable drained_;
    std::deque<Item> queue_;
    bool in_flight_ = false;
    bool stop_ = false;
    PublisherStats stats_;
    std::thread worker_;
};

}  // namespace mlmon::publish
