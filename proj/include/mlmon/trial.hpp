#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mlmon/dash.hpp"
#include "mlmon/fusion.hpp"
#include "mlmon/qoe.hpp"
#include "mlmon/scenario.hpp"

namespace httplib {
class Server;
}

namespace mlmon::trial {

/// Deterministic body of segment `index` of representation `rep_id`.
std::string segment_body(const std::string& rep_id, std::size_t index, std::size_t size);

/// Exact constant-bitrate size: bitrate * segment length / 8.
std::size_t segment_size(const dash::Manifest& m, const dash::Representation& rep, std::size_t index);

/// Local HTTP origin serving one manifest and synthetic segments.
class FixtureOrigin {
public:
    /// The manifest is served at `mpd_path` with its BaseURL rewritten to
    /// this server; segment paths keep the original BaseURL path.
    explicit FixtureOrigin(dash::Manifest manifest, std::string mpd_path = "/dataset/manifest.mpd");
    ~FixtureOrigin();

    int start(const std::string& host = "127.0.0.1");
    void stop();
    std::string base_url() const;
    const std::string& mpd_path() const { return mpd_path_; }
    /// Manifest as served (BaseURL pointing at this origin).
    const dash::Manifest& served() const { return served_; }

private:
    struct Cache;

    dash::Manifest manifest_;
    dash::Manifest served_;
    std::string mpd_path_;
    std::unique_ptr<httplib::Server> server_;
    std::unique_ptr<Cache> cache_;
    std::thread thread_;
    int port_ = 0;
};

struct Completion {
    Seconds t = 0.0;
    double bitrate_kbps = 0.0;
};

/// Player-side selected bitrate at t = 1..last: the bitrate of the latest
/// completion at or before t if it is at most `hold` seconds old, or if all
/// segments had been downloaded by then; 0 otherwise.
std::vector<fusion::Point> selected_bitrate_series(const std::vector<Completion>& completions, std::size_t last,
                                                   Seconds hold, Seconds download_complete_at);

struct TrialOptions {
    std::filesystem::path out_dir;
    qoe::ModelConfig qoe;
    Seconds qoe_step = 1.0;
};

struct TrialResult {
    std::string session_id;
    dash::Manifest manifest;
    std::vector<radio::RadioSample> trace;
    std::vector<proxy::SegmentRecord> segments;
    std::vector<qoe::WallStall> stalls;
    Seconds session_end = 0.0;
    /// Last whole second covered by the per-second series.
    std::size_t horizon = 0;
    fusion::Store store;
};

/// Runs the scenario end to end and, when `out_dir` is set, writes
/// trace.csv, session.jsonl, store/ and run.json there.
TrialResult run_trial(const Scenario& scenario, const TrialOptions& options = {});

/// File names inside a run directory.
namespace files {
inline constexpr const char* trace = "trace.csv";
inline constexpr const char* session = "session.jsonl";
inline constexpr const char* store = "store";
inline constexpr const char* manifest = "run.json";
}  // namespace files

}  // namespace mlmon::trial
