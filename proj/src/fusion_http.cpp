#include "mlmon/fusion_http.hpp"

#include <charconv>

#include "httplib.h"
#include "mlmon/codec.hpp"

namespace mlmon::fusion {

using nlohmann::json;

namespace {

HttpReply ok(bool duplicate) { return {200, json{{"status", "ok"}, {"duplicate", duplicate}}.dump()}; }

HttpReply bad_request(const std::string& error, const std::string& field = {}) {
    json j{{"error", error}};
    if (!field.empty()) j["field"] = field;
    return {400, j.dump()};
}

SeriesKey point_key(const json& j) {
    SeriesKey key;
    const auto layer = j.find("layer");
    const auto metric = j.find("metric");
    if (layer == j.end() || !layer->is_string()) throw SemanticError("missing field 'layer'");
    if (metric == j.end() || !metric->is_string()) throw SemanticError("missing field 'metric'");
    key.layer = layer_from_string(layer->get<std::string>());
    key.metric = metric->get<std::string>();
    if (auto s = j.find("session_id"); s != j.end() && !s->is_null()) key.session_id = s->get<std::string>();
    if (auto l = j.find("labels"); l != j.end() && !l->is_null())
        key.labels = l->get<std::map<std::string, std::string>>();
    return key;
}

double number_param(const std::multimap<std::string, std::string>& params, const std::string& name) {
    const auto it = params.find(name);
    if (it == params.end()) throw SemanticError("missing parameter '" + name + "'");
    double v = 0;
    const auto& s = it->second;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) throw RangeError(name, "parameter '" + name + "' is not a number");
    return v;
}

}  // namespace

HttpReply handle_ingest(Store& store, const std::string& path, const std::string& body) {
    try {
        if (path == "/ingest/radio") return ok(store.ingest(codec::decode<radio::RadioSample>(body)).duplicate);
        if (path == "/ingest/link") return ok(store.ingest(codec::decode<radio::LinkSample>(body)).duplicate);
        if (path == "/ingest/segment") return ok(store.ingest(codec::decode<proxy::SegmentRecord>(body)).duplicate);
        if (path == "/ingest/event") return ok(store.record_event(codec::decode<proxy::SessionEvent>(body)).duplicate);
        if (path == "/ingest/qoe") {
            const auto j = codec::parse_body(body);
            const auto session = j.find("session_id");
            if (session == j.end() || !session->is_string()) throw SemanticError("missing field 'session_id'");
            return ok(store.ingest(session->get<std::string>(), j.get<qoe::QoeScore>()).duplicate);
        }
        if (path == "/ingest/point") {
            const auto j = codec::parse_body(body);
            const auto t = j.find("t");
            const auto v = j.find("value");
            if (t == j.end() || !t->is_number()) throw SemanticError("missing field 't'");
            if (v == j.end() || !v->is_number()) throw SemanticError("missing field 'value'");
            return ok(store.ingest_point(point_key(j), {t->get<double>(), v->get<double>()}).duplicate);
        }
        return {404, json{{"error", "unknown ingestion path"}}.dump()};
    } catch (const RangeError& e) {
        return bad_request(e.what(), e.field());
    } catch (const Error& e) {
        return bad_request(e.what());
    } catch (const json::exception& e) {
        return bad_request(e.what());
    }
}

HttpReply handle_query(const Store& store, const std::multimap<std::string, std::string>& params) {
    try {
        json spec;
        for (const auto& name : {"layer", "metric", "session"}) {
            if (auto it = params.find(name); it != params.end()) spec[name == std::string("session") ? "session_id" : name] = it->second;
        }
        std::map<std::string, std::string> labels;
        for (const auto& [k, v] : params)
            if (k.rfind("label.", 0) == 0) labels[k.substr(6)] = v;
        spec["labels"] = labels;
        const auto key = point_key(spec);
        const auto res = store.query_range(key, number_param(params, "t0"), number_param(params, "t1"),
                                           number_param(params, "step"));
        json pts = json::array();
        for (const auto& p : res.points) pts.push_back({p.t, p.value});
        return {200, json{{"unknown_series", res.unknown_series}, {"points", pts}}.dump()};
    } catch (const RangeError& e) {
        return bad_request(e.what(), e.field());
    } catch (const Error& e) {
        return bad_request(e.what());
    }
}

FusionServer::FusionServer(Store& store) : store_(store), server_(std::make_unique<httplib::Server>()) {
    server_->Post(R"(/ingest/[a-z]+)", [this](const httplib::Request& req, httplib::Response& res) {
        const auto reply = handle_ingest(store_, req.path, req.body);
        res.status = reply.status;
        res.set_content(reply.body, reply.content_type);
    });
    server_->Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(store_.exposition(), "text/plain; version=0.0.4");
    });
    server_->Get("/query", [this](const httplib::Request& req, httplib::Response& res) {
        const auto reply = handle_query(store_, req.params);
        res.status = reply.status;
        res.set_content(reply.body, reply.content_type);
    });
}

FusionServer::~FusionServer() { stop(); }

int FusionServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) bound = server_->bind_to_any_port(host);
    else if (!server_->bind_to_port(host, port)) bound = -1;
    if (bound <= 0) throw Error("cannot bind fusion service to " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

bool FusionServer::listen(const std::string& host, int port) { return server_->listen(host, port); }

void FusionServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

publish::Delivery StoreTransport::send(const std::string& path, const std::string& body) {
    const auto reply = handle_ingest(store_, path, body);
    if (reply.status == 200) return publish::Delivery::acked;
    return publish::Delivery::rejected;
}

}  // namespace mlmon::fusion
