#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mlmon/proxy.hpp"
#include "mlmon/radio.hpp"
#include "mlmon/scenario.hpp"

namespace mlmon::trial {

/// Seeded generator whose normal draws are identical on every platform
/// (Box-Muller over mt19937_64 rather than std::normal_distribution).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    /// Uniform on (0, 1).
    double uniform();
    double normal(double mean = 0.0, double sigma = 1.0);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Linear interpolation along the route. Throws DomainError outside the
/// waypoint span.
GeoPoint position(const Scenario& s, Seconds t);

/// Log-distance path loss plus a shadowing term, clamped to the RSRP
/// reporting range. Throws DomainError for distance < 1 m.
double rsrp_at(const PathLoss& p, double distance_m, double shadow_db);
/// As above with shadowing drawn from N(0, shadow_sigma_db).
double rsrp_at(const PathLoss& p, double distance_m, Rng& rng);

double sinr_from_rsrp(double rsrp_dbm, const Link& l);
double rsrq_from_sinr(double sinr_db, const Link& l);

/// min(max_mbps, efficiency * bandwidth * log2(1 + SINR)), never negative.
double link_capacity(double sinr_db, const Link& l);

/// One simulated sample per second over [first waypoint, last waypoint],
/// with spatially correlated shadowing. Depends only on the scenario.
std::vector<radio::RadioSample> generate_trace(const Scenario& s);

/// Transfers over a per-second capacity profile. Delivery times depend
/// only on (request time, byte count), never on how the relay chunks data.
class TraceShaper : public proxy::LinkShaper {
public:
    /// `capacity_mbps[k]` applies to [k, k+1); the last entry extends forever.
    TraceShaper(std::vector<double> capacity_mbps, const Link& link, std::uint64_t request_bytes = 350);

    Seconds delivered_at(Seconds t_request, std::uint64_t bytes) const override;
    void commit(Seconds t_request, std::uint64_t bytes) override;

    /// Interface counters at t = 0, 1, ..., `until` seconds.
    std::vector<radio::CounterSnapshot> snapshots(std::size_t until) const;

private:
    double capacity(std::size_t k) const;

    std::vector<double> capacity_mbps_;
    Link link_;
    std::uint64_t request_bytes_;
    mutable std::mutex mu_;
    std::vector<double> rx_bins_;
    std::vector<double> tx_bins_;
};

}  // namespace mlmon::trial
