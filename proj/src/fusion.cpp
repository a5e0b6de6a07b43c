#include "mlmon/fusion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include "mlmon/codec.hpp"

namespace mlmon::fusion {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Layer l) {
    switch (l) {
        case Layer::L1: return "L1";
        case Layer::L3: return "L3";
        case Layer::L7: return "L7";
        case Layer::QoE: return "QoE";
    }
    return "L1";
}

Layer layer_from_string(std::string_view s) {
    if (s == "L1") return Layer::L1;
    if (s == "L3") return Layer::L3;
    if (s == "L7") return Layer::L7;
    if (s == "QoE") return Layer::QoE;
    throw RangeError("layer", "unknown layer '" + std::string(s) + "'");
}

namespace {

std::string sanitize_name(std::string_view raw) {
    std::string name;
    for (char c : raw) {
        if (c >= 'A' && c <= 'Z') name += static_cast<char>(c - 'A' + 'a');
        else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_') name += c;
        else name += '_';
    }
    if (name.empty() || (name[0] >= '0' && name[0] <= '9')) name.insert(name.begin(), '_');
    return name;
}

}  // namespace

std::string exposition_name(const SeriesKey& key) {
    std::string prefix;
    switch (key.layer) {
        case Layer::L1: prefix = "radio_"; break;
        case Layer::L3: prefix = "link_"; break;
        case Layer::L7: prefix = "media_"; break;
        case Layer::QoE: prefix = "qoe_"; break;
    }
    return prefix + sanitize_name(key.metric);
}

namespace {

std::string encode_component(std::string_view s) {
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        const bool plain = std::isalnum(c) || c == '_' || c == '-' || c == '.';
        if (plain) {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 15];
        }
    }
    return out;
}

std::string escape_label(std::string_view v) {
    std::string out;
    for (char c : v) {
        if (c == '\\') out += "\\\\";
        else if (c == '"') out += "\\\"";
        else if (c == '\n') out += "\\n";
        else out += c;
    }
    return out;
}

json key_to_json(const SeriesKey& k) {
    json j{{"layer", std::string(to_string(k.layer))}, {"metric", k.metric}, {"labels", k.labels}};
    j["session_id"] = k.session_id ? json(*k.session_id) : json(nullptr);
    return j;
}

SeriesKey key_from_json(const json& j) {
    SeriesKey k;
    k.layer = layer_from_string(j.at("layer").get<std::string>());
    k.metric = j.at("metric").get<std::string>();
    if (j.contains("session_id") && !j["session_id"].is_null()) k.session_id = j["session_id"].get<std::string>();
    if (j.contains("labels")) k.labels = j["labels"].get<std::map<std::string, std::string>>();
    return k;
}

auto radio_tuple(const radio::RadioSample& s) {
    return std::tuple(s.rsrp_dbm, s.rsrq_db, s.sinr_db, s.position.lat, s.position.lon, static_cast<int>(s.source));
}

auto link_tuple(const radio::LinkSample& s) { return std::tuple(s.rx_bytes_delta, s.tx_bytes_delta, s.window); }

auto segment_tuple(const proxy::SegmentRecord& r) {
    return std::tuple(r.rep_bitrate_kbps, r.bytes, r.t_first_byte, r.origin_status, r.wall_clock);
}

// Keeps the smaller of two conflicting entries; true if `key` was present.
template <typename Map, typename Value, typename Proj>
bool put_min(Map& m, const typename Map::key_type& key, const Value& v, Proj proj) {
    auto [it, inserted] = m.try_emplace(key, v);
    if (inserted) return false;
    if (proj(v) < proj(it->second)) it->second = v;
    return true;
}

}  // namespace

std::string file_stem(const SeriesKey& key) {
    std::string stem = std::string(to_string(key.layer)) + "." + encode_component(key.metric);
    if (key.session_id) stem += "@" + encode_component(*key.session_id);
    for (const auto& [k, v] : key.labels) stem += "+" + encode_component(k) + "=" + encode_component(v);
    return stem;
}

SeriesKey radio_key(const char* metric) { return {Layer::L1, metric, std::nullopt, {}}; }
SeriesKey link_key(const char* metric) { return {Layer::L3, metric, std::nullopt, {}}; }
SeriesKey media_key(const char* metric, const std::string& session_id) { return {Layer::L7, metric, session_id, {}}; }
SeriesKey qoe_key(const char* metric, const std::string& session_id) { return {Layer::QoE, metric, session_id, {}}; }

Store::Store(Store&& other) noexcept {
    std::unique_lock lock(other.mu_);
    series_ = std::move(other.series_);
    radio_ = std::move(other.radio_);
    link_ = std::move(other.link_);
    segments_ = std::move(other.segments_);
    events_ = std::move(other.events_);
}

Store& Store::operator=(Store&& other) noexcept {
    if (this != &other) {
        std::scoped_lock lock(mu_, other.mu_);
        series_ = std::move(other.series_);
        radio_ = std::move(other.radio_);
        link_ = std::move(other.link_);
        segments_ = std::move(other.segments_);
        events_ = std::move(other.events_);
    }
    return *this;
}

bool Store::put(const SeriesKey& key, Point p) {
    auto& s = series_[key];
    auto [it, inserted] = s.try_emplace(p.t, p.value);
    if (inserted) return false;
    it->second = std::min(it->second, p.value);
    return true;
}

IngestResult Store::ingest(const radio::RadioSample& s) {
    radio::validate(s);
    std::unique_lock lock(mu_);
    const bool dup = put_min(radio_, s.t, s, radio_tuple);
    const auto& kept = radio_.at(s.t);
    series_[radio_key(metric::rsrp)][s.t] = kept.rsrp_dbm;
    series_[radio_key(metric::rsrq)][s.t] = kept.rsrq_db;
    series_[radio_key(metric::sinr)][s.t] = kept.sinr_db;
    return {dup};
}

IngestResult Store::ingest(const radio::LinkSample& s) {
    radio::validate(s);
    std::unique_lock lock(mu_);
    const bool dup = put_min(link_, s.t, s, link_tuple);
    const auto& kept = link_.at(s.t);
    series_[link_key(metric::rx_throughput)][s.t] = kept.rx_throughput_mbps();
    series_[link_key(metric::tx_throughput)][s.t] = kept.tx_throughput_mbps();
    series_[link_key(metric::rx_bytes)][s.t] = static_cast<double>(kept.rx_bytes_delta);
    return {dup};
}

IngestResult Store::ingest(const proxy::SegmentRecord& r) {
    proxy::validate(r);
    std::unique_lock lock(mu_);
    const SegmentKey key{r.session_id, r.t_request, r.rep_id, r.segment_index, r.t_complete};
    const bool dup = put_min(segments_, key, r, segment_tuple);
    const auto& kept = segments_.at(key);
    put(media_key(metric::segment_bitrate, r.session_id), {r.t_complete, kept.ok() ? kept.rep_bitrate_kbps : 0.0});
    put(media_key(metric::segment_bytes, r.session_id), {r.t_complete, static_cast<double>(kept.bytes)});
    if (kept.ok()) put(media_key(metric::segment_throughput, r.session_id), {r.t_complete, kept.l7_throughput_mbps()});
    return {dup};
}

IngestResult Store::ingest(const std::string& session_id, const qoe::QoeScore& s) {
    if (session_id.empty()) throw RangeError("session_id", "session_id empty");
    if (!std::isfinite(s.mos) || s.mos < 1.0 || s.mos > 5.0) throw RangeError("mos", "mos out of range");
    std::unique_lock lock(mu_);
    bool dup = put(qoe_key(metric::mos, session_id), {s.t, s.mos});
    put(qoe_key(metric::video_quality, session_id), {s.t, s.video_quality_mean});
    put(qoe_key(metric::stall_count, session_id), {s.t, static_cast<double>(s.stall_count)});
    put(qoe_key(metric::stall_total, session_id), {s.t, s.stall_total});
    return {dup};
}

IngestResult Store::ingest_point(const SeriesKey& key, Point p) {
    if (key.metric.empty()) throw RangeError("metric", "metric empty");
    if (!std::isfinite(p.t)) throw RangeError("t", "t must be finite");
    if (!std::isfinite(p.value)) throw RangeError("value", "value must be finite");
    std::unique_lock lock(mu_);
    return {put(key, p)};
}

IngestResult Store::record_event(const proxy::SessionEvent& e) {
    if (e.session_id.empty()) throw RangeError("session_id", "session_id empty");
    std::unique_lock lock(mu_);
    const EventKey key{e.t, e.session_id, static_cast<int>(e.kind)};
    const bool dup = put_min(events_, key, e, [](const proxy::SessionEvent& x) { return x.client_key; });
    return {dup};
}

QueryResult Store::query_range(const SeriesKey& key, Seconds t0, Seconds t1, Seconds step) const {
    if (!(step > 0.0)) throw DomainError("step must be positive");
    if (!(t0 < t1)) throw DomainError("t0 must precede t1");
    std::shared_lock lock(mu_);
    QueryResult out;
    const auto it = series_.find(key);
    if (it == series_.end()) {
        out.unknown_series = true;
        return out;
    }
    const auto& pts = it->second;
    const double n_steps = std::floor((t1 - t0) / step + 1e-9);
    for (long k = 0; k <= static_cast<long>(n_steps); ++k) {
        const double t = t0 + static_cast<double>(k) * step;
        auto ub = pts.upper_bound(t + 1e-9);
        if (ub == pts.begin()) continue;
        --ub;
        if (t - ub->first > kStaleness) continue;
        out.points.push_back({t, ub->second});
    }
    return out;
}

AlignedRecord Store::align(const proxy::SegmentRecord& r, Seconds tolerance) const {
    std::shared_lock lock(mu_);
    AlignedRecord out;
    out.segment = r;
    const double mid = r.midpoint();
    const radio::RadioSample* best = nullptr;
    auto it = radio_.lower_bound(mid);
    if (it != radio_.end()) best = &it->second;
    if (it != radio_.begin()) {
        const auto& prev = std::prev(it)->second;
        if (!best || mid - prev.t <= best->t - mid) best = &prev;
    }
    if (best) {
        out.radio = *best;
        out.gap = std::abs(mid - best->t);
        out.aligned = *out.gap <= tolerance;
    }
    for (auto lt = link_.upper_bound(r.t_request); lt != link_.end(); ++lt) {
        const auto& ls = lt->second;
        if (ls.t - r.t_complete > kMaxLinkWindow) break;
        if (ls.t - ls.window < r.t_complete) out.link_window.push_back(ls);
    }
    return out;
}

Correlation Store::correlate(const SeriesKey& a, const SeriesKey& b, Seconds t0, Seconds t1, Seconds step) const {
    const auto qa = query_range(a, t0, t1, step);
    const auto qb = query_range(b, t0, t1, step);
    std::vector<std::pair<double, double>> common;
    std::size_t j = 0;
    for (const auto& p : qa.points) {
        while (j < qb.points.size() && qb.points[j].t < p.t - 1e-9) ++j;
        if (j < qb.points.size() && std::abs(qb.points[j].t - p.t) <= 1e-9) common.emplace_back(p.value, qb.points[j].value);
    }
    if (common.size() < 3) throw InsufficientData("correlation needs at least 3 common grid points");
    double ma = 0, mb = 0;
    for (const auto& [x, y] : common) {
        ma += x;
        mb += y;
    }
    ma /= static_cast<double>(common.size());
    mb /= static_cast<double>(common.size());
    double sab = 0, saa = 0, sbb = 0;
    for (const auto& [x, y] : common) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    Correlation c;
    c.points = common.size();
    if (saa <= 0.0 || sbb <= 0.0) {
        c.degenerate = true;
        return c;
    }
    c.r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
    return c;
}

std::string Store::exposition() const {
    std::shared_lock lock(mu_);
    std::vector<std::pair<std::string, std::string>> lines;
    for (const auto& [key, pts] : series_) {
        if (pts.empty()) continue;
        std::map<std::string, std::string> labels = key.labels;
        labels["session"] = key.session_id.value_or("");
        std::string lab;
        for (const auto& [k, v] : labels) {
            if (!lab.empty()) lab += ',';
            lab += sanitize_name(k) + "=\"" + escape_label(v) + "\"";
        }
        const auto& [t, v] = *pts.rbegin();
        const auto name = exposition_name(key);
        lines.emplace_back(name + "{" + lab + "}",
                           format_number(v) + " " + std::to_string(std::llround(t * 1000.0)));
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& [head, tail] : lines) out += head + " " + tail + "\n";
    if (out.empty()) out = "\n";
    return out;
}

std::vector<SeriesKey> Store::keys() const {
    std::shared_lock lock(mu_);
    std::vector<SeriesKey> out;
    for (const auto& [k, _] : series_) out.push_back(k);
    return out;
}

std::vector<Point> Store::points(const SeriesKey& key) const {
    std::shared_lock lock(mu_);
    std::vector<Point> out;
    if (auto it = series_.find(key); it != series_.end())
        for (const auto& [t, v] : it->second) out.push_back({t, v});
    return out;
}

std::vector<radio::RadioSample> Store::radio_samples() const {
    std::shared_lock lock(mu_);
    std::vector<radio::RadioSample> out;
    for (const auto& [_, s] : radio_) out.push_back(s);
    return out;
}

std::vector<radio::LinkSample> Store::link_samples() const {
    std::shared_lock lock(mu_);
    std::vector<radio::LinkSample> out;
    for (const auto& [_, s] : link_) out.push_back(s);
    return out;
}

std::vector<proxy::SegmentRecord> Store::segments(const std::optional<std::string>& session_id) const {
    std::shared_lock lock(mu_);
    std::vector<proxy::SegmentRecord> out;
    for (const auto& [_, r] : segments_)
        if (!session_id || r.session_id == *session_id) out.push_back(r);
    return out;
}

std::vector<proxy::SessionEvent> Store::events() const {
    std::shared_lock lock(mu_);
    std::vector<proxy::SessionEvent> out;
    for (const auto& [_, e] : events_) out.push_back(e);
    return out;
}

std::vector<std::string> Store::sessions() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, _] : series_)
        if (k.session_id) out.push_back(*k.session_id);
    for (const auto& [_, e] : events_) out.push_back(e.session_id);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

template <typename Range>
void write_jsonl(const fs::path& path, const Range& items) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& item : items) out << json(item).dump() << '\n';
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::vector<json> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw ParseError(e.byte, path.filename().string() + " line " + std::to_string(lineno));
        }
    }
    return out;
}

constexpr const char* kRadioFile = "_radio.jsonl";
constexpr const char* kLinkFile = "_link.jsonl";
constexpr const char* kSegmentFile = "_segments.jsonl";
constexpr const char* kEventFile = "_events.jsonl";

}  // namespace

void Store::persist(const fs::path& dir) const {
    fs::create_directories(dir);
    std::shared_lock lock(mu_);
    for (const auto& [key, pts] : series_) {
        std::ofstream out(dir / (file_stem(key) + ".jsonl"), std::ios::binary);
        if (!out) throw Error("cannot write series file in " + dir.string());
        out << json{{"series", key_to_json(key)}}.dump() << '\n';
        for (const auto& [t, v] : pts) out << json{{"t", t}, {"v", v}}.dump() << '\n';
    }
    std::vector<radio::RadioSample> radio;
    for (const auto& [_, s] : radio_) radio.push_back(s);
    write_jsonl(dir / kRadioFile, radio);
    std::vector<radio::LinkSample> link;
    for (const auto& [_, s] : link_) link.push_back(s);
    write_jsonl(dir / kLinkFile, link);
    std::vector<proxy::SegmentRecord> segs;
    for (const auto& [_, r] : segments_) segs.push_back(r);
    write_jsonl(dir / kSegmentFile, segs);
    std::vector<proxy::SessionEvent> evs;
    for (const auto& [_, e] : events_) evs.push_back(e);
    write_jsonl(dir / kEventFile, evs);
}

Store Store::load(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error("store directory not found: " + dir.string());
    Store store;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        const auto name = path.filename().string();
        const auto rows = read_jsonl(path);
        if (name == kRadioFile) {
            for (const auto& j : rows) store.radio_.emplace(j.at("t").get<double>(), j.get<radio::RadioSample>());
        } else if (name == kLinkFile) {
            for (const auto& j : rows) store.link_.emplace(j.at("t").get<double>(), j.get<radio::LinkSample>());
        } else if (name == kSegmentFile) {
            for (const auto& j : rows) {
                auto r = j.get<proxy::SegmentRecord>();
                store.segments_.emplace(SegmentKey{r.session_id, r.t_request, r.rep_id, r.segment_index, r.t_complete}, r);
            }
        } else if (name == kEventFile) {
            for (const auto& j : rows) {
                auto e = j.get<proxy::SessionEvent>();
                store.events_.emplace(EventKey{e.t, e.session_id, static_cast<int>(e.kind)}, e);
            }
        } else {
            if (rows.empty() || !rows.front().contains("series")) continue;
            auto& pts = store.series_[key_from_json(rows.front()["series"])];
            for (std::size_t i = 1; i < rows.size(); ++i) pts[rows[i].at("t").get<double>()] = rows[i].at("v").get<double>();
        }
    }
    return store;
}

}  // namespace mlmon::fusion
