#include "mlmon/radio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mlmon::radio {

std::string_view to_string(Source s) {
    switch (s) {
        case Source::modem_log: return "modem_log";
        case Source::trace_file: return "trace_file";
        case Source::simulated: return "simulated";
    }
    return "trace_file";
}

Source source_from_string(std::string_view s) {
    if (s == "modem_log") return Source::modem_log;
    if (s == "trace_file") return Source::trace_file;
    if (s == "simulated") return Source::simulated;
    throw RangeError("source", "unknown radio sample source '" + std::string(s) + "'");
}

namespace {

void check(double v, double lo, double hi, const char* field) {
    if (!std::isfinite(v) || v < lo || v > hi)
        throw RangeError(field, std::string(field) + " out of range (" + format_number(v) + ")");
}

std::optional<double> to_double(std::string_view s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    const char* b = t.data();
    if (*b == '+') ++b;
    double v = 0.0;
    auto [p, ec] = std::from_chars(b, t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size()) return std::nullopt;
    return v;
}

std::vector<std::string> split_csv(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : s) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

}  // namespace

void validate(const RadioSample& s) {
    if (!std::isfinite(s.t)) throw RangeError("t");
    check(s.rsrp_dbm, kRsrpMin, kRsrpMax, "rsrp");
    check(s.rsrq_db, kRsrqMin, kRsrqMax, "rsrq");
    check(s.sinr_db, kSinrMin, kSinrMax, "sinr");
    check(s.position.lat, -90.0, 90.0, "lat");
    check(s.position.lon, -180.0, 180.0, "lon");
}

void validate(const LinkSample& s) {
    if (!std::isfinite(s.t)) throw RangeError("t");
    if (!(s.window > 0.0) || !std::isfinite(s.window)) throw RangeError("window", "window must be positive");
}

std::optional<RfReading> parse_modem_status_line(std::string_view line) {
    const std::string text = trim(line);
    constexpr std::string_view prefix = "#RFSTS:";
    if (!std::string_view(text).starts_with(prefix)) return std::nullopt;
    const auto fields = split_csv(std::string_view(text).substr(prefix.size()));
    if (fields.size() < 5) return std::nullopt;
    const auto rsrp = to_double(fields[2]);
    const auto rsrq = to_double(fields[3]);
    const auto sinr = to_double(fields[4]);
    if (!rsrp || !rsrq || !sinr) return std::nullopt;
    check(*rsrp, kRsrpMin, kRsrpMax, "rsrp");
    check(*rsrq, kRsrqMin, kRsrqMax, "rsrq");
    check(*sinr, kSinrMin, kSinrMax, "sinr");
    return RfReading{*rsrp, *rsrq, *sinr};
}

namespace {

std::optional<double> nmea_coordinate(std::string_view value, std::string_view hemisphere, int degree_digits) {
    if (value.size() <= static_cast<std::size_t>(degree_digits) || hemisphere.size() != 1) return std::nullopt;
    const auto deg = to_double(value.substr(0, degree_digits));
    const auto min = to_double(value.substr(degree_digits));
    if (!deg || !min || *min < 0.0 || *min >= 60.0) return std::nullopt;
    double v = *deg + *min / 60.0;
    const char h = hemisphere[0];
    if (h == 'S' || h == 'W') v = -v;
    else if (h != 'N' && h != 'E') return std::nullopt;
    return v;
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

}  // namespace

std::optional<GeoPoint> parse_nmea(std::string_view line) {
    const std::string text = trim(line);
    if (text.size() < 7 || text[0] != '$') return std::nullopt;
    const auto star = text.rfind('*');
    if (star == std::string::npos || star + 3 != text.size()) return std::nullopt;
    const int hi = hex_value(text[star + 1]);
    const int lo = hex_value(text[star + 2]);
    if (hi < 0 || lo < 0) return std::nullopt;
    unsigned char sum = 0;
    for (std::size_t i = 1; i < star; ++i) sum ^= static_cast<unsigned char>(text[i]);
    if (sum != static_cast<unsigned char>(hi * 16 + lo)) throw ChecksumError("NMEA checksum mismatch");

    const auto fields = split_csv(std::string_view(text).substr(1, star - 1));
    if (fields.empty() || fields[0].size() != 5) return std::nullopt;
    const std::string_view type = std::string_view(fields[0]).substr(2);
    std::size_t lat_i = 0;
    if (type == "GGA") {
        if (fields.size() < 7 || fields[6].empty() || fields[6] == "0") return std::nullopt;
        lat_i = 2;
    } else if (type == "RMC") {
        if (fields.size() < 7 || fields[2] != "A") return std::nullopt;
        lat_i = 3;
    } else {
        return std::nullopt;
    }
    const auto lat = nmea_coordinate(fields[lat_i], fields[lat_i + 1], 2);
    const auto lon = nmea_coordinate(fields[lat_i + 2], fields[lat_i + 3], 3);
    if (!lat || !lon) return std::nullopt;
    GeoPoint p{*lat, *lon};
    if (!valid_geo(p)) return std::nullopt;
    return p;
}

LinkSample sample_link(const Counters& prev, const Counters& curr, Seconds dt, Seconds t, CounterWidth width) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("sample_link: dt must be positive");
    const auto bits = static_cast<unsigned>(width);
    const std::uint64_t mask = bits >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << bits) - 1);
    LinkSample s;
    s.t = t;
    s.window = dt;
    s.rx_bytes_delta = (curr.rx_bytes - prev.rx_bytes) & mask;
    s.tx_bytes_delta = (curr.tx_bytes - prev.tx_bytes) & mask;
    return s;
}

std::vector<RadioSample> read_drive_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open drive trace " + path.string());
    return read_drive_trace(in);
}

std::vector<RadioSample> read_drive_trace(std::istream& in) {
    std::vector<RadioSample> out;
    std::string line;
    std::size_t lineno = 0;
    std::size_t offset = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t line_offset = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
        if (trim(line).empty()) continue;
        if (!header_seen) {
            if (trim(line) != kDriveTraceHeader)
                throw ParseError(line_offset, "drive trace line " + std::to_string(lineno) + ": expected header '" +
                                                  std::string(kDriveTraceHeader) + "'");
            header_seen = true;
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != 6)
            throw ParseError(line_offset, "drive trace line " + std::to_string(lineno) + ": expected 6 fields, got " +
                                              std::to_string(fields.size()));
        double v[6];
        for (int i = 0; i < 6; ++i) {
            const auto d = to_double(fields[i]);
            if (!d) throw ParseError(line_offset, "drive trace line " + std::to_string(lineno) + ": field " +
                                                      std::to_string(i + 1) + " not a number");
            v[i] = *d;
        }
        RadioSample s{v[0], v[3], v[4], v[5], GeoPoint{v[1], v[2]}, Source::trace_file};
        try {
            validate(s);
        } catch (const RangeError& e) {
            throw RangeError(e.field(), "drive trace line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!out.empty() && !(s.t > out.back().t))
            throw ParseError(line_offset, "drive trace line " + std::to_string(lineno) +
                                              ": timestamp not strictly increasing");
        out.push_back(s);
    }
    if (!header_seen && lineno > 0 && !out.empty()) throw ParseError(0, "drive trace: missing header");
    return out;
}

void write_drive_trace(std::ostream& out, const std::vector<RadioSample>& samples) {
    out << kDriveTraceHeader << '\n';
    for (const auto& s : samples) {
        out << format_fixed(s.t, 3) << ',' << format_fixed(s.position.lat, 7) << ','
            << format_fixed(s.position.lon, 7) << ',' << format_fixed(s.rsrp_dbm, 2) << ','
            << format_fixed(s.rsrq_db, 2) << ',' << format_fixed(s.sinr_db, 2) << '\n';
    }
}

std::vector<TimedLine> read_timed_lines(std::istream& in) {
    std::vector<TimedLine> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto sep = line.find_first_of(" \t");
        if (sep == std::string::npos) continue;
        const auto t = to_double(std::string_view(line).substr(0, sep));
        if (!t) continue;
        out.push_back({*t, trim(std::string_view(line).substr(sep + 1))});
    }
    return out;
}

std::vector<RadioSample> join_modem_and_gps(const std::vector<TimedLine>& modem, const std::vector<TimedLine>& nmea,
                                            JoinStats& stats, Seconds tolerance) {
    struct Fix {
        Seconds t;
        GeoPoint p;
    };
    std::vector<Fix> fixes;
    for (const auto& l : nmea) {
        try {
            if (auto p = parse_nmea(l.payload)) fixes.push_back({l.t, *p});
        } catch (const ChecksumError&) {
            ++stats.checksum_errors;
        }
    }
    std::stable_sort(fixes.begin(), fixes.end(), [](const Fix& a, const Fix& b) { return a.t < b.t; });

    std::vector<RadioSample> out;
    for (const auto& l : modem) {
        std::optional<RfReading> rf;
        try {
            rf = parse_modem_status_line(l.payload);
        } catch (const RangeError&) {
            ++stats.range_errors;
            continue;
        }
        if (!rf) {
            ++stats.skipped_lines;
            continue;
        }
        ++stats.rf_lines;
        auto it = std::lower_bound(fixes.begin(), fixes.end(), l.t, [](const Fix& f, Seconds t) { return f.t < t; });
        const Fix* best = nullptr;
        if (it != fixes.end()) best = &*it;
        if (it != fixes.begin()) {
            const Fix* before = &*std::prev(it);
            if (!best || l.t - before->t <= best->t - l.t) best = before;
        }
        if (!best || std::fabs(best->t - l.t) > tolerance) {
            ++stats.unpositioned;
            continue;
        }
        RadioSample s{l.t, rf->rsrp_dbm, rf->rsrq_db, rf->sinr_db, best->p, Source::modem_log};
        if (!out.empty() && !(s.t > out.back().t)) {
            ++stats.skipped_lines;
            continue;
        }
        out.push_back(s);
    }
    return out;
}

std::vector<CounterSnapshot> read_counter_snapshots(std::istream& in) {
    std::vector<CounterSnapshot> out;
    std::string line;
    std::size_t lineno = 0;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t line_offset = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (lineno == 1 && line.starts_with("t_s")) continue;
        const auto f = split_csv(line);
        if (f.size() != 3)
            throw ParseError(line_offset, "counter snapshot line " + std::to_string(lineno) + ": expected 3 fields");
        const auto t = to_double(f[0]);
        std::uint64_t rx = 0, tx = 0;
        const std::string rxs = trim(f[1]), txs = trim(f[2]);
        auto r1 = std::from_chars(rxs.data(), rxs.data() + rxs.size(), rx);
        auto r2 = std::from_chars(txs.data(), txs.data() + txs.size(), tx);
        if (!t || r1.ec != std::errc{} || r2.ec != std::errc{} || r1.ptr != rxs.data() + rxs.size() ||
            r2.ptr != txs.data() + txs.size())
            throw ParseError(line_offset, "counter snapshot line " + std::to_string(lineno) + ": malformed");
        out.push_back({*t, {rx, tx}});
    }
    return out;
}

std::vector<LinkSample> link_samples(const std::vector<CounterSnapshot>& snapshots, CounterWidth width) {
    std::vector<LinkSample> out;
    for (std::size_t i = 1; i < snapshots.size(); ++i) {
        const double dt = snapshots[i].t - snapshots[i - 1].t;
        out.push_back(sample_link(snapshots[i - 1].counters, snapshots[i].counters, dt, snapshots[i].t, width));
    }
    return out;
}

Counters read_interface_counters(const std::string& iface) {
    auto read = [&](const char* name) {
        const auto path = std::filesystem::path("/sys/class/net") / iface / "statistics" / name;
        std::ifstream in(path);
        std::uint64_t v = 0;
        if (!(in >> v)) throw Error("cannot read " + path.string());
        return v;
    };
    return Counters{read("rx_bytes"), read("tx_bytes")};
}

}  // namespace mlmon::radio
