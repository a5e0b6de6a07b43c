#include "mlmon/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "toml.hpp"

namespace mlmon::trial {

namespace {

void require(bool ok, const char* field, const std::string& why) {
    if (!ok) throw RangeError(field, std::string(field) + " " + why);
}

double number(const toml::table& t, std::string_view table, std::string_view key, double fallback) {
    const auto node = t[table][key];
    if (!node) return fallback;
    if (auto v = node.value<double>()) return *v;
    throw SemanticError(std::string(table) + "." + std::string(key) + " must be a number");
}

}  // namespace

void validate(const Scenario& s) {
    require(valid_geo(s.antenna), "antenna", "is not a valid position");
    require(s.waypoints.size() >= 2, "route.waypoints", "needs at least two entries");
    for (std::size_t i = 0; i < s.waypoints.size(); ++i) {
        require(valid_geo(s.waypoints[i].position), "route.waypoints", "holds an invalid position");
        require(std::isfinite(s.waypoints[i].t), "route.waypoints", "holds a non-finite time");
        if (i) require(s.waypoints[i].t > s.waypoints[i - 1].t, "route.waypoints", "times must strictly increase");
    }
    require(s.pathloss.d0_m > 0, "pathloss.d0_m", "must be positive");
    require(s.pathloss.exponent > 0, "pathloss.exponent", "must be positive");
    require(s.pathloss.shadow_sigma_db >= 0, "pathloss.shadow_sigma_db", "must be non-negative");
    require(s.pathloss.shadow_decorrelation_m >= 0, "pathloss.shadow_decorrelation_m", "must be non-negative");
    require(s.link.bandwidth_mhz > 0, "link.bandwidth_mhz", "must be positive");
    require(s.link.efficiency > 0, "link.efficiency", "must be positive");
    require(s.link.max_mbps > 0, "link.max_mbps", "must be positive");
    require(s.link.latency_s >= 0, "link.latency_s", "must be non-negative");
    require(s.link.overhead >= 1.0, "link.overhead", "must be at least 1");
    require(s.abr.safety > 0 && s.abr.safety <= 1, "abr.safety", "must lie in (0, 1]");
    require(s.abr.ewma_alpha > 0 && s.abr.ewma_alpha <= 1, "abr.ewma_alpha", "must lie in (0, 1]");
    require(s.abr.buffer_max_s > 0, "abr.buffer_max_s", "must be positive");
    require(s.abr.buffer_target_s > 0 && s.abr.buffer_target_s <= s.abr.buffer_max_s, "abr.buffer_target_s",
            "must lie in (0, buffer_max_s]");
}

Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir) {
    toml::table t;
    try {
        t = toml::parse(text);
    } catch (const toml::parse_error& e) {
        const auto& src = e.source().begin;
        // Report a byte offset for the failing line.
        std::size_t offset = 0, line = 1;
        while (offset < text.size() && line < src.line) {
            if (text[offset] == '\n') ++line;
            ++offset;
        }
        throw ParseError(offset + (src.column ? src.column - 1 : 0), std::string("scenario: ") + std::string(e.description()));
    }

    Scenario s;
    s.name = t["name"].value_or(std::string{});
    if (auto seed = t["seed"].value<std::int64_t>()) {
        require(*seed >= 0, "seed", "must be non-negative");
        s.seed = static_cast<std::uint64_t>(*seed);
    }
    s.antenna = {number(t, "antenna", "lat", NAN), number(t, "antenna", "lon", NAN)};

    const auto* points = t["route"]["waypoints"].as_array();
    if (!points) throw SemanticError("route.waypoints missing");
    for (const auto& row : *points) {
        const auto* a = row.as_array();
        if (!a || a->size() != 3) throw SemanticError("route.waypoints entries must be [t_s, lat_deg, lon_deg]");
        const auto tv = (*a)[0].value<double>(), lat = (*a)[1].value<double>(), lon = (*a)[2].value<double>();
        if (!tv || !lat || !lon) throw SemanticError("route.waypoints entries must be numeric");
        s.waypoints.push_back({*tv, {*lat, *lon}});
    }

    const PathLoss pl;
    s.pathloss = {number(t, "pathloss", "p0_dbm_at_d0", pl.p0_dbm_at_d0), number(t, "pathloss", "d0_m", pl.d0_m),
                  number(t, "pathloss", "exponent", pl.exponent),
                  number(t, "pathloss", "shadow_sigma_db", pl.shadow_sigma_db),
                  number(t, "pathloss", "shadow_decorrelation_m", pl.shadow_decorrelation_m)};
    const Link ln;
    s.link = {number(t, "link", "bandwidth_mhz", ln.bandwidth_mhz),
              number(t, "link", "efficiency", ln.efficiency),
              number(t, "link", "max_mbps", ln.max_mbps),
              number(t, "link", "noise_floor_dbm", ln.noise_floor_dbm),
              number(t, "link", "interference_db", ln.interference_db),
              number(t, "link", "rsrq_offset_db", ln.rsrq_offset_db),
              number(t, "link", "rsrq_slope", ln.rsrq_slope),
              number(t, "link", "latency_s", ln.latency_s),
              number(t, "link", "overhead", ln.overhead)};
    const Abr ab;
    s.abr = {number(t, "abr", "safety", ab.safety), number(t, "abr", "ewma_alpha", ab.ewma_alpha),
             number(t, "abr", "buffer_target_s", ab.buffer_target_s),
             number(t, "abr", "buffer_max_s", ab.buffer_max_s)};

    const auto manifest = t["dataset"]["manifest"].value<std::string>();
    if (!manifest) throw SemanticError("dataset.manifest missing");
    s.manifest = std::filesystem::path(*manifest);
    if (s.manifest.is_relative() && !base_dir.empty()) s.manifest = (base_dir / s.manifest).lexically_normal();

    validate(s);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read scenario " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    auto s = parse_scenario(buf.str(), path.parent_path());
    if (s.name.empty()) s.name = path.stem().string();
    return s;
}

}  // namespace mlmon::trial
