#pragma once

#include <memory>
#include <string>
#include <thread>

#include "mlmon/fusion.hpp"
#include "mlmon/publisher.hpp"

namespace httplib {
class Server;
}

namespace mlmon::fusion {

struct HttpReply {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Applies one ingestion body to `store`. Paths: /ingest/radio, /ingest/link,
/// /ingest/segment, /ingest/qoe, /ingest/event, /ingest/point.
/// 200 {"status":"ok","duplicate":bool}; 400 {"error":..,"field":..}; 404.
HttpReply handle_ingest(Store& store, const std::string& path, const std::string& body);

/// GET /query parameters: layer, metric, session (optional), t0, t1, step.
/// Labels are passed as `label.<name>=<value>`.
HttpReply handle_query(const Store& store, const std::multimap<std::string, std::string>& params);

/// Serves ingestion, /metrics and /query for one store.
class FusionServer {
public:
    explicit FusionServer(Store& store);
    ~FusionServer();

    /// Binds and serves on a background thread; port 0 picks a free port.
    /// Returns the bound port; throws Error when binding fails.
    int start(const std::string& host, int port);
    /// Serves on the calling thread until stop().
    bool listen(const std::string& host, int port);
    void stop();

private:
    Store& store_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

/// Ingests directly into an in-process store through handle_ingest.
class StoreTransport : public publish::Transport {
public:
    explicit StoreTransport(Store& store) : store_(store) {}
    publish::Delivery send(const std::string& path, const std::string& body) override;

private:
    Store& store_;
};

}  // namespace mlmon::fusion
