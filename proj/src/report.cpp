#include "mlmon/report.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include "json.hpp"

#include "mlmon/common.hpp"
#include "mlmon/coverage.hpp"
#include "mlmon/fusion.hpp"
#include "mlmon/plot.hpp"
#include "mlmon/radio.hpp"
#include "mlmon/trial.hpp"

namespace mlmon::report {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::pair<Output, std::string_view> kOutputNames[] = {
    {Output::bitrate, "bitrate"}, {Output::stalls, "stalls"}, {Output::qoe, "qoe"},
    {Output::throughput_l3_l7, "throughput_l3_l7"}, {Output::rf, "rf"}, {Output::coverage, "coverage"},
};

constexpr std::pair<Format, std::string_view> kFormatNames[] = {
    {Format::csv, "csv"}, {Format::png, "png"}, {Format::svg, "svg"}};

constexpr plot::Rgb kBlue{31, 119, 180}, kOrange{255, 127, 14}, kGreen{44, 160, 44}, kRed{214, 39, 40};

plot::Rgb zone_rgb(coverage::Zone z) {
    switch (z) {
        case coverage::Zone::Excellent: return {0, 170, 0};
        case coverage::Zone::Good: return {230, 210, 0};
        case coverage::Zone::Mid: return {255, 140, 0};
        case coverage::Zone::CellEdge: return {210, 0, 0};
    }
    return {};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

std::string cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

struct Run {
    std::string session_id;
    fusion::Store store;
    std::vector<radio::RadioSample> trace;
};

class Emitter {
public:
    Emitter(const ReportSpec& spec, fs::path out_dir, ReportResult& result)
        : spec_(spec), out_(std::move(out_dir)), result_(result) {}

    void csv(std::string_view stem, const std::string& text) {
        const auto path = out_ / (std::string(stem) + ".csv");
        write_text(path, text);
        result_.written.push_back(path);
    }

    void chart(std::string_view stem, const plot::Chart& c) {
        if (spec_.formats.count(Format::svg)) {
            const auto path = out_ / (std::string(stem) + ".svg");
            write_text(path, plot::render_svg(c));
            result_.written.push_back(path);
        }
        if (spec_.formats.count(Format::png)) {
            const auto path = out_ / (std::string(stem) + ".png");
            plot::write_png(c, path);
            result_.written.push_back(path);
        }
    }

    void warn(Output o, const std::string& what) {
        result_.warnings.push_back(std::string(to_string(o)) + ": " + what);
    }

private:
    const ReportSpec& spec_;
    fs::path out_;
    ReportResult& result_;
};

std::vector<std::pair<double, double>> xy(const std::vector<fusion::Point>& pts, double scale = 1.0) {
    std::vector<std::pair<double, double>> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.emplace_back(p.t, p.value * scale);
    return out;
}

void emit_bitrate(const Run& run, Emitter& e) {
    auto pts = run.store.points(fusion::media_key(fusion::metric::selected_bitrate, run.session_id));
    if (pts.empty()) pts = run.store.points(fusion::media_key(fusion::metric::segment_bitrate, run.session_id));
    if (pts.empty()) return e.warn(Output::bitrate, "no selected or segment bitrate series");
    std::string text(schema::bitrate);
    text += '\n';
    for (const auto& p : pts) text += format_number(p.t) + "," + format_number(p.value) + "\n";
    e.csv("bitrate", text);
    e.chart("bitrate", {"Selected bitrate", "time (s)", "bitrate (Mbps)",
                        {{"selected", xy(pts, 1e-3), kBlue, true, false}}, {}});
}

void emit_stalls(const Run& run, Emitter& e) {
    const auto pts = run.store.points(fusion::media_key(fusion::metric::stall_total, run.session_id));
    if (pts.empty()) return e.warn(Output::stalls, "no stall_total series");
    std::string text(schema::stalls);
    text += '\n';
    for (const auto& p : pts) text += format_number(p.t) + "," + format_number(p.value) + "\n";
    e.csv("stalls", text);
    e.chart("stalls", {"Total stall duration", "time (s)", "stall (s)", {{"stall total", xy(pts), kRed, true, false}}, {}});
}

void emit_qoe(const Run& run, Emitter& e) {
    const char* metrics[] = {fusion::metric::mos, fusion::metric::video_quality, fusion::metric::stall_count,
                             fusion::metric::stall_total};
    std::map<double, std::array<std::optional<double>, 4>> rows;
    for (std::size_t i = 0; i < 4; ++i)
        for (const auto& p : run.store.points(fusion::qoe_key(metrics[i], run.session_id))) rows[p.t][i] = p.value;
    if (rows.empty()) return e.warn(Output::qoe, "no QoE series");
    std::string text(schema::qoe);
    text += '\n';
    std::vector<std::pair<double, double>> mos;
    for (const auto& [t, v] : rows) {
        text += format_number(t);
        for (const auto& c : v) text += "," + cell(c);
        text += '\n';
        if (v[0]) mos.emplace_back(t, *v[0]);
    }
    e.csv("qoe", text);
    e.chart("qoe", {"QoE", "time (s)", "MOS", {{"mos", mos, kGreen, false, false}}, {}});
}

void emit_throughput(const Run& run, Emitter& e) {
    const auto links = run.store.link_samples();
    const auto segments = run.store.segments(run.session_id);
    if (links.empty() && segments.empty()) return e.warn(Output::throughput_l3_l7, "no link samples or segments");
    if (links.empty()) e.warn(Output::throughput_l3_l7, "no link samples, l3 column empty");

    // Rows keyed by time; l3 at every link sample, l7 at every completion.
    std::map<double, std::pair<std::optional<double>, std::optional<double>>> rows;
    for (const auto& l : links) rows[l.t].first = l.rx_throughput_mbps();
    std::vector<std::pair<double, double>> l7_points;
    for (const auto& r : segments) {
        if (!r.ok()) continue;
        auto& row = rows[r.t_complete];
        row.second = r.l7_throughput_mbps();
        l7_points.emplace_back(r.t_complete, *row.second);
        if (row.first) continue;
        // Link window covering the completion instant.
        const auto it = std::find_if(links.begin(), links.end(),
                                     [&](const radio::LinkSample& l) { return l.t >= r.t_complete && l.t - l.window < r.t_complete; });
        if (it != links.end()) row.first = it->rx_throughput_mbps();
    }
    std::string text(schema::throughput);
    text += '\n';
    for (const auto& [t, v] : rows) text += format_number(t) + "," + cell(v.first) + "," + cell(v.second) + "\n";
    e.csv("throughput_l3_l7", text);

    std::vector<std::pair<double, double>> l3_points;
    for (const auto& l : links) l3_points.emplace_back(l.t, l.rx_throughput_mbps());
    e.chart("throughput_l3_l7", {"L3 vs L7 throughput", "time (s)", "throughput (Mbps)",
                                 {{"L3", l3_points, kBlue, false, false}, {"L7", l7_points, kOrange, false, true}},
                                 {}});
}

void emit_rf(const Run& run, Emitter& e) {
    if (run.trace.empty()) return e.warn(Output::rf, "no radio samples");
    std::ostringstream out;
    radio::write_drive_trace(out, run.trace);
    e.csv("rf", out.str());
    std::vector<std::pair<double, double>> rsrp, rsrq, sinr;
    for (const auto& s : run.trace) {
        rsrp.emplace_back(s.t, s.rsrp_dbm);
        rsrq.emplace_back(s.t, s.rsrq_db);
        sinr.emplace_back(s.t, s.sinr_db);
    }
    e.chart("rf", {"RF metrics", "time (s)", "dBm / dB",
                   {{"RSRP (dBm)", rsrp, kBlue, false, false},
                    {"RSRQ (dB)", rsrq, kOrange, false, false},
                    {"SINR (dB)", sinr, kGreen, false, false}},
                   {}});
}

void emit_coverage(const Run& run, const ReportSpec& spec, const fs::path& out_dir, Emitter& e,
                   ReportResult& result) {
    if (run.trace.empty()) return e.warn(Output::coverage, "no radio samples");
    const auto cells = coverage::build_coverage(run.trace, spec.cell_size_m);
    const auto path = out_dir / "coverage.geojson";
    write_text(path, coverage::to_geojson(cells));
    result.written.push_back(path);
    plot::Chart c{"RSRP coverage", "longitude", "latitude", {}, {}, 700, 700};
    for (const auto& cell : cells)
        c.rects.push_back({cell.corners[0].lon, cell.corners[0].lat, cell.corners[2].lon, cell.corners[2].lat,
                           zone_rgb(cell.zone)});
    e.chart("coverage", c);
}

Run load_run(const fs::path& dir) {
    const auto manifest_path = dir / trial::files::manifest;
    std::ifstream in(manifest_path);
    if (!in) throw SemanticError("no run manifest in " + dir.string());
    json m;
    try {
        m = json::parse(in);
    } catch (const json::exception& ex) {
        throw SemanticError("unreadable run manifest: " + std::string(ex.what()));
    }
    if (!m.value("complete", false)) throw SemanticError("run in " + dir.string() + " is not complete");
    Run run;
    const auto store_dir = dir / m.value(json::json_pointer("/files/store"), std::string(trial::files::store));
    if (fs::is_directory(store_dir)) run.store = fusion::Store::load(store_dir);
    run.session_id = m.value("session_id", std::string());
    if (run.session_id.empty()) {
        const auto sessions = run.store.sessions();
        if (!sessions.empty()) run.session_id = sessions.front();
    }
    const auto trace_path = dir / m.value(json::json_pointer("/files/trace"), std::string(trial::files::trace));
    if (fs::exists(trace_path)) run.trace = radio::read_drive_trace(trace_path);
    else run.trace = run.store.radio_samples();
    return run;
}

}  // namespace

std::string_view to_string(Output o) {
    for (const auto& [k, v] : kOutputNames)
        if (k == o) return v;
    return "?";
}

Output output_from_string(std::string_view s) {
    for (const auto& [k, v] : kOutputNames)
        if (v == s) return k;
    throw SemanticError("unknown output '" + std::string(s) + "'");
}

std::string_view to_string(Format f) {
    for (const auto& [k, v] : kFormatNames)
        if (k == f) return v;
    return "?";
}

Format format_from_string(std::string_view s) {
    for (const auto& [k, v] : kFormatNames)
        if (v == s) return k;
    throw SemanticError("unknown format '" + std::string(s) + "'");
}

ReportResult report(const ReportSpec& spec) {
    if (spec.outputs.empty()) throw SemanticError("no outputs requested");
    const Run run = load_run(spec.run_dir);
    const fs::path out_dir = spec.out_dir.empty() ? spec.run_dir : spec.out_dir;
    fs::create_directories(out_dir);
    ReportResult result;
    Emitter e(spec, out_dir, result);
    for (Output o : spec.outputs) {
        switch (o) {
            case Output::bitrate: emit_bitrate(run, e); break;
            case Output::stalls: emit_stalls(run, e); break;
            case Output::qoe: emit_qoe(run, e); break;
            case Output::throughput_l3_l7: emit_throughput(run, e); break;
            case Output::rf: emit_rf(run, e); break;
            case Output::coverage: emit_coverage(run, spec, out_dir, e, result); break;
        }
    }
    return result;
}

}  // namespace mlmon::report
