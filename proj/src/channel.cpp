#include "mlmon/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mlmon::trial {

double Rng::uniform() {
    // 53 random bits, shifted off zero.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal(double mean, double sigma) {
    if (has_spare_) {
        has_spare_ = false;
        return mean + sigma * spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + sigma * r * std::cos(theta);
}

GeoPoint position(const Scenario& s, Seconds t) {
    const auto& w = s.waypoints;
    if (w.empty() || !(t >= w.front().t && t <= w.back().t))
        throw DomainError("t = " + format_number(t) + " s lies outside the route");
    auto hi = std::lower_bound(w.begin(), w.end(), t, [](const Waypoint& p, Seconds v) { return p.t < v; });
    if (hi->t == t) return hi->position;
    const auto lo = std::prev(hi);
    const double f = (t - lo->t) / (hi->t - lo->t);
    return {lo->position.lat + f * (hi->position.lat - lo->position.lat),
            lo->position.lon + f * (hi->position.lon - lo->position.lon)};
}

double rsrp_at(const PathLoss& p, double distance_m, double shadow_db) {
    if (!(distance_m >= 1.0)) throw DomainError("distance must be at least 1 m");
    const double v = p.p0_dbm_at_d0 - 10.0 * p.exponent * std::log10(distance_m / p.d0_m) + shadow_db;
    return std::clamp(v, radio::kRsrpMin, radio::kRsrpMax);
}

double rsrp_at(const PathLoss& p, double distance_m, Rng& rng) {
    return rsrp_at(p, distance_m, rng.normal(0.0, p.shadow_sigma_db));
}

double sinr_from_rsrp(double rsrp_dbm, const Link& l) {
    return std::clamp(rsrp_dbm - l.noise_floor_dbm - l.interference_db, radio::kSinrMin, radio::kSinrMax);
}

double rsrq_from_sinr(double sinr_db, const Link& l) {
    return std::clamp(l.rsrq_offset_db + l.rsrq_slope * sinr_db, radio::kRsrqMin, radio::kRsrqMax);
}

double link_capacity(double sinr_db, const Link& l) {
    const double shannon = l.efficiency * l.bandwidth_mhz * std::log2(1.0 + std::pow(10.0, sinr_db / 10.0));
    return std::clamp(shannon, 0.0, l.max_mbps);
}

std::vector<radio::RadioSample> generate_trace(const Scenario& s) {
    Rng rng(s.seed);
    std::vector<radio::RadioSample> out;
    const auto t0 = static_cast<long>(std::ceil(s.waypoints.front().t));
    const auto t1 = static_cast<long>(std::floor(s.waypoints.back().t));
    double shadow = 0.0;
    GeoPoint prev{};
    for (long k = t0; k <= t1; ++k) {
        const auto p = position(s, static_cast<double>(k));
        const double z = rng.normal();
        if (k == t0) {
            shadow = s.pathloss.shadow_sigma_db * z;
        } else {
            const double moved = haversine_m(prev, p);
            const double rho = s.pathloss.shadow_decorrelation_m > 0.0
                                   ? std::exp(-moved / s.pathloss.shadow_decorrelation_m)
                                   : 0.0;
            shadow = rho * shadow + std::sqrt(1.0 - rho * rho) * s.pathloss.shadow_sigma_db * z;
        }
        prev = p;
        const double d = std::max(1.0, haversine_m(p, s.antenna));
        radio::RadioSample r;
        r.t = static_cast<double>(k);
        r.position = p;
        r.rsrp_dbm = rsrp_at(s.pathloss, d, shadow);
        r.sinr_db = sinr_from_rsrp(r.rsrp_dbm, s.link);
        r.rsrq_db = rsrq_from_sinr(r.sinr_db, s.link);
        r.source = radio::Source::simulated;
        out.push_back(r);
    }
    return out;
}

TraceShaper::TraceShaper(std::vector<double> capacity_mbps, const Link& link, std::uint64_t request_bytes)
    : capacity_mbps_(std::move(capacity_mbps)), link_(link), request_bytes_(request_bytes) {
    if (capacity_mbps_.empty()) throw DomainError("capacity profile is empty");
    for (double c : capacity_mbps_)
        if (!(c > 0.0)) throw DomainError("capacity must be positive");
}

double TraceShaper::capacity(std::size_t k) const { return capacity_mbps_[std::min(k, capacity_mbps_.size() - 1)]; }

Seconds TraceShaper::delivered_at(Seconds t_request, std::uint64_t bytes) const {
    double t = t_request + link_.latency_s;
    double remaining = static_cast<double>(bytes) * link_.overhead * 8.0 / 1e6;  // Mbit
    while (remaining > 0.0) {
        const auto k = static_cast<std::size_t>(std::floor(t));
        const double cap = capacity(k);
        const double room = (static_cast<double>(k + 1) - t) * cap;
        if (room >= remaining) return t + remaining / cap;
        remaining -= room;
        t = static_cast<double>(k + 1);
    }
    return t;
}

void TraceShaper::commit(Seconds t_request, std::uint64_t bytes) {
    std::lock_guard lock(mu_);
    auto add = [](std::vector<double>& bins, std::size_t k, double v) {
        if (bins.size() <= k) bins.resize(k + 1, 0.0);
        bins[k] += v;
    };
    add(tx_bins_, static_cast<std::size_t>(std::floor(t_request)), static_cast<double>(request_bytes_));
    double t = t_request + link_.latency_s;
    double remaining = static_cast<double>(bytes) * link_.overhead * 8.0 / 1e6;
    while (remaining > 0.0) {
        const auto k = static_cast<std::size_t>(std::floor(t));
        const double cap = capacity(k);
        const double room = (static_cast<double>(k + 1) - t) * cap;
        const double moved = std::min(room, remaining);
        add(rx_bins_, k, moved * 1e6 / 8.0);
        remaining -= moved;
        t = static_cast<double>(k + 1);
    }
}

std::vector<radio::CounterSnapshot> TraceShaper::snapshots(std::size_t until) const {
    std::lock_guard lock(mu_);
    std::vector<radio::CounterSnapshot> out;
    double rx = 0.0, tx = 0.0;
    for (std::size_t k = 0; k <= until; ++k) {
        out.push_back({static_cast<double>(k), {static_cast<std::uint64_t>(std::llround(rx)),
                                                static_cast<std::uint64_t>(std::llround(tx))}});
        if (k < rx_bins_.size()) rx += rx_bins_[k];
        if (k < tx_bins_.size()) tx += tx_bins_[k];
    }
    return out;
}

}  // namespace mlmon::trial
