#include <CLI11.hpp>
#include <toml.hpp>

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "mlmon/codec.hpp"
#include "mlmon/coverage.hpp"
#include "mlmon/fusion.hpp"
#include "mlmon/fusion_http.hpp"
#include "mlmon/proxy.hpp"
#include "mlmon/publisher.hpp"
#include "mlmon/radio.hpp"
#include "mlmon/report.hpp"
#include "mlmon/scenario.hpp"
#include "mlmon/trial.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mlmon;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

/// Innermost subcommand named by argv, ignoring option tokens.
CLI::App* leaf_for(CLI::App& app, const std::vector<std::string>& args) {
    CLI::App* cur = &app;
    bool value_next = false;
    for (const auto& a : args) {
        if (value_next) {
            value_next = false;
            continue;
        }
        if (a.starts_with("-")) {
            value_next = a == "--config";
            continue;
        }
        CLI::App* next = nullptr;
        for (auto* sub : cur->get_subcommands({}))
            if (sub->get_name() == a) next = sub;
        if (!next) break;
        cur = next;
    }
    return cur;
}

std::string path_of(const CLI::App* app) {
    std::vector<std::string> parts;
    for (auto* a = app; a && a->get_parent(); a = a->get_parent()) parts.push_back(a->get_name());
    std::string out;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) out += (out.empty() ? "" : ".") + *it;
    return out;
}

std::string snake(std::string name) {
    std::replace(name.begin(), name.end(), '-', '_');
    return name;
}

std::string env_name(const std::string& long_name) {
    std::string out = "MLMON_";
    for (char c : long_name) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::optional<std::string> toml_value(const toml::node& n) {
    if (auto s = n.value<std::string>()) return *s;
    if (n.is_boolean()) return *n.value<bool>() ? "true" : "false";
    if (n.is_integer()) return std::to_string(*n.value<std::int64_t>());
    if (n.is_floating_point()) return format_number(*n.value<double>());
    if (const auto* arr = n.as_array()) {
        std::string joined;
        for (const auto& e : *arr)
            if (auto v = toml_value(e)) joined += (joined.empty() ? "" : ",") + *v;
        return joined;
    }
    return std::nullopt;
}

/// Appends option values from the environment, then the config file, for
/// options absent from argv. Config keys live in a table named after the
/// subcommand path, e.g. [serve.proxy] origin = "...".
std::vector<std::string> with_defaults(CLI::App& app, std::vector<std::string> args) {
    CLI::App* leaf = leaf_for(app, args);
    std::optional<toml::table> config;
    std::string config_path;
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
        if (args[i] == "--config") config_path = args[i + 1];
    if (config_path.empty())
        if (const char* e = std::getenv("MLMON_CONFIG")) config_path = e;
    if (!config_path.empty()) {
        try {
            config = toml::parse_file(config_path);
        } catch (const toml::parse_error& e) {
            throw CLI::ValidationError("--config", std::string(e.description()));
        }
    }
    const std::string section = path_of(leaf);
    std::vector<std::string> extra;
    for (const auto* opt : leaf->get_options()) {
        if (opt->get_lnames().empty()) continue;
        const std::string name = opt->get_lnames().front();
        if (name == "help" || name == "config") continue;
        const std::string flag = "--" + name;
        const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == flag || a.starts_with(flag + "=");
        });
        if (given) continue;
        std::optional<std::string> value;
        if (const char* e = std::getenv(env_name(name).c_str()); e && *e) value = e;
        else if (config)
            for (const auto& key : {name, snake(name)})
                if (const auto* node = config->at_path(section + "." + key).node()) {
                    value = toml_value(*node);
                    break;
                }
        if (!value) continue;
        if (opt->get_type_size() == 0) {
            if (*value == "true" || *value == "1") extra.push_back(flag);
            continue;
        }
        extra.push_back(flag + "=" + *value);
    }
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
}

/// First argv token that names neither a subcommand nor an option, with the
/// command it was given to.
std::optional<std::pair<std::string, CLI::App*>> first_unknown(CLI::App& app, const std::vector<std::string>& args) {
    CLI::App* cur = &app;
    for (const auto& a : args) {
        if (a.starts_with("-")) {
            const auto name = a.substr(0, a.find('='));
            if (!cur->get_option_no_throw(name) && !app.get_option_no_throw(name)) return std::pair{a, cur};
            continue;
        }
        if (auto* sub = cur->get_subcommand_no_throw(a)) {
            cur = sub;
            continue;
        }
        if (!cur->get_subcommands({}).empty()) return std::pair{a, cur};
    }
    return std::nullopt;
}

std::string suggestion(CLI::App& cmd, const std::string& unknown) {
    std::vector<std::string> candidates;
    for (auto* sub : cmd.get_subcommands({})) candidates.push_back(sub->get_name());
    for (const auto* opt : cmd.get_options())
        for (const auto& l : opt->get_lnames()) candidates.push_back("--" + l);
    std::string best;
    std::size_t best_d = 3;
    const std::string token = unknown.substr(0, unknown.find('='));
    for (const auto& c : candidates) {
        const auto d = levenshtein(token, c);
        if (d < best_d) best_d = d, best = c;
    }
    return best;
}

std::pair<std::string, int> split_listen(const std::string& s) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) throw CLI::ValidationError("--listen", "expected host:port");
    try {
        return {s.substr(0, colon), std::stoi(s.substr(colon + 1))};
    } catch (const std::exception&) {
        throw CLI::ValidationError("--listen", "bad port in '" + s + "'");
    }
}

/// Blocks SIGINT/SIGTERM for all threads started afterwards.
sigset_t block_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    return set;
}

void wait_for_signal(const sigset_t& set) {
    int sig = 0;
    sigwait(&set, &sig);
}

class StdoutSink : public proxy::RecordSink {
public:
    void on_segment(const proxy::SegmentRecord& r) override { line("segment", json(r)); }
    void on_session(const proxy::SessionEvent& e) override { line("session", json(e)); }

private:
    void line(const char* type, json j) {
        j["type"] = type;
        std::lock_guard lock(mu_);
        std::cout << j.dump() << '\n' << std::flush;
    }
    std::mutex mu_;
};

struct ProxyArgs {
    std::string listen = "127.0.0.1:8080";
    std::string origin;
    double session_timeout = 30.0;
    std::string fusion_url;
};

int serve_proxy(const ProxyArgs& a) {
    const auto [host, port] = split_listen(a.listen);
    const auto signals = block_signals();
    std::unique_ptr<publish::Publisher> publisher;
    std::unique_ptr<proxy::RecordSink> sink;
    if (a.fusion_url.empty()) {
        sink = std::make_unique<StdoutSink>();
    } else {
        publisher = std::make_unique<publish::Publisher>(std::make_shared<publish::HttpTransport>(a.fusion_url));
        sink = std::make_unique<proxy::PublisherSink>(*publisher);
    }
    proxy::ProxyOptions options;
    options.origin = a.origin;
    options.session_timeout = a.session_timeout;
    proxy::MediaProxy server(options, *sink);
    const int bound = server.start(host, port);
    std::cerr << "proxy listening on " << host << ":" << bound << " origin " << a.origin << "\n";
    wait_for_signal(signals);
    server.stop();
    if (publisher) publisher->flush(std::chrono::seconds(5));
    return 0;
}

struct FusionArgs {
    std::string listen = "127.0.0.1:9090";
    std::string data_dir;
};

int serve_fusion(const FusionArgs& a) {
    const auto [host, port] = split_listen(a.listen);
    const auto signals = block_signals();
    fusion::Store store;
    if (!a.data_dir.empty() && fs::is_directory(a.data_dir)) store = fusion::Store::load(a.data_dir);
    fusion::FusionServer server(store);
    const int bound = server.start(host, port);
    std::cerr << "fusion listening on " << host << ":" << bound << "\n";
    wait_for_signal(signals);
    server.stop();
    if (!a.data_dir.empty()) {
        fs::remove_all(a.data_dir);
        store.persist(a.data_dir);
    }
    return 0;
}

struct ExportArgs {
    std::string trace;
    std::string modem_log;
    std::string nmea;
    std::string iface_counters;
    std::string fusion_url;
    double rate_hz = 0.0;
    double duration_s = 0.0;
    double join_tolerance_s = 0.5;
    unsigned counter_width = 64;
};

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return in;
}

int export_radio(const ExportArgs& a) {
    if (a.trace.empty() && a.modem_log.empty() && a.iface_counters.empty())
        throw CLI::ValidationError("export radio", "one of --trace, --modem-log or --iface-counters is required");
    if (!a.modem_log.empty() && a.nmea.empty()) throw CLI::ValidationError("--modem-log", "requires --nmea");
    const auto width = a.counter_width == 32 ? radio::CounterWidth::bits32 : radio::CounterWidth::bits64;

    std::vector<radio::RadioSample> radio_samples;
    if (!a.trace.empty()) radio_samples = radio::read_drive_trace(a.trace);
    if (!a.modem_log.empty()) {
        auto modem_in = open_input(a.modem_log);
        auto nmea_in = open_input(a.nmea);
        radio::JoinStats stats;
        auto joined = radio::join_modem_and_gps(radio::read_timed_lines(modem_in), radio::read_timed_lines(nmea_in),
                                                stats, a.join_tolerance_s);
        std::cerr << "modem log: " << stats.rf_lines << " rf lines, " << stats.skipped_lines << " skipped, "
                  << stats.checksum_errors << " checksum errors, " << stats.range_errors << " range errors, "
                  << stats.unpositioned << " without fix\n";
        radio_samples.insert(radio_samples.end(), joined.begin(), joined.end());
        std::stable_sort(radio_samples.begin(), radio_samples.end(),
                         [](const auto& x, const auto& y) { return x.t < y.t; });
    }
    std::vector<radio::LinkSample> link;
    const bool live_iface = a.iface_counters.starts_with("sys:");
    if (!a.iface_counters.empty() && !live_iface) {
        auto in = open_input(a.iface_counters);
        link = radio::link_samples(radio::read_counter_snapshots(in), width);
    }

    std::unique_ptr<publish::Publisher> publisher;
    if (!a.fusion_url.empty())
        publisher = std::make_unique<publish::Publisher>(std::make_shared<publish::HttpTransport>(a.fusion_url));
    auto emit = [&](const auto& sample, const char* type) {
        if (publisher) return publisher->publish(sample);
        json j = sample;
        j["type"] = type;
        std::cout << j.dump() << '\n';
    };

    // Replay in timestamp order, paced at rate_hz samples per second of trace time.
    std::size_t ri = 0, li = 0;
    const auto start = std::chrono::steady_clock::now();
    std::optional<double> t_first;
    while (ri < radio_samples.size() || li < link.size()) {
        const bool take_radio =
            li >= link.size() || (ri < radio_samples.size() && radio_samples[ri].t <= link[li].t);
        const double t = take_radio ? radio_samples[ri].t : link[li].t;
        if (!t_first) t_first = t;
        if (a.rate_hz > 0)
            std::this_thread::sleep_until(start + std::chrono::duration<double>((t - *t_first) / a.rate_hz));
        if (take_radio) emit(radio_samples[ri++], "radio");
        else emit(link[li++], "link");
    }

    if (live_iface) {
        const std::string iface = a.iface_counters.substr(4);
        const double period = 1.0 / (a.rate_hz > 0 ? a.rate_hz : 1.0);
        const auto signals = block_signals();
        std::atomic<bool> stop{false};
        std::thread watcher([&] {
            wait_for_signal(signals);
            stop = true;
        });
        watcher.detach();
        auto prev = radio::read_interface_counters(iface);
        auto prev_at = std::chrono::steady_clock::now();
        const auto began = prev_at;
        for (std::size_t k = 1; !stop; ++k) {
            std::this_thread::sleep_until(began + std::chrono::duration<double>(k * period));
            const auto now = std::chrono::steady_clock::now();
            const auto curr = radio::read_interface_counters(iface);
            const double dt = std::chrono::duration<double>(now - prev_at).count();
            const double wall = std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
            emit(radio::sample_link(prev, curr, dt, wall, width), "link");
            std::cout << std::flush;
            prev = curr, prev_at = now;
            if (a.duration_s > 0 && std::chrono::duration<double>(now - began).count() >= a.duration_s) break;
        }
    }

    if (publisher) {
        const bool drained = publisher->flush(std::chrono::seconds(30));
        const auto s = publisher->stats();
        std::cerr << "published " << s.delivered << ", rejected " << s.rejected << ", dropped " << s.dropped
                  << ", pending " << s.pending << "\n";
        if (!drained || s.rejected || s.dropped) return kExitRuntime;
    }
    return 0;
}

struct TrialArgs {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int trial_run(const TrialArgs& a) {
    auto scenario = trial::load_scenario(a.scenario);
    if (a.seed) scenario.seed = *a.seed;
    trial::TrialOptions options;
    options.out_dir = a.out;
    const auto r = trial::run_trial(scenario, options);
    double stall_total = 0.0;
    for (const auto& s : r.stalls) stall_total += s.duration;
    std::cout << "session " << r.session_id << ": " << r.segments.size() << " segments, " << r.stalls.size()
              << " stalls (" << format_fixed(stall_total, 2) << " s), ended at " << format_fixed(r.session_end, 2)
              << " s; artifacts in " << a.out << "\n";
    return 0;
}

struct ReportArgs {
    std::string run;
    std::vector<std::string> outputs;
    std::vector<std::string> formats;
    std::string out;
    double cell_size_m = 25.0;
};

int run_report(const ReportArgs& a) {
    report::ReportSpec spec;
    spec.run_dir = a.run;
    spec.out_dir = a.out;
    spec.cell_size_m = a.cell_size_m;
    if (a.outputs.empty()) spec.outputs = report::kAllOutputs;
    for (const auto& o : a.outputs) spec.outputs.insert(report::output_from_string(o));
    for (const auto& f : a.formats) spec.formats.insert(report::format_from_string(f));
    const auto result = report::report(spec);
    for (const auto& p : result.written) std::cout << p.string() << "\n";
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

struct CoverageArgs {
    std::string trace;
    double cell_size_m = 25.0;
    std::string out;
};

int run_coverage(const CoverageArgs& a) {
    const auto samples = radio::read_drive_trace(a.trace);
    const auto text = coverage::to_geojson(coverage::build_coverage(samples, a.cell_size_m));
    if (a.out.empty() || a.out == "-") {
        std::cout << text;
        return 0;
    }
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw Error("cannot write " + a.out);
    out << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-layer monitoring for DASH streaming: proxy, exporters, fusion store, trials and reports",
                 "mlmon"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "TOML file with per-subcommand defaults ([serve.proxy] origin = ...)");
    app.footer("Option values resolve as flags > MLMON_<OPTION> environment variables > --config file.");

    auto* serve = app.add_subcommand("serve", "Run a long-lived component");
    serve->require_subcommand(1);

    ProxyArgs proxy_args;
    auto* proxy_cmd = serve->add_subcommand("proxy", "DASH-aware media proxy");
    proxy_cmd->add_option("--listen", proxy_args.listen, "host:port to bind")->capture_default_str();
    proxy_cmd->add_option("--origin", proxy_args.origin, "Origin base URL, e.g. http://cdn.example")->required();
    proxy_cmd->add_option("--session-timeout-s", proxy_args.session_timeout, "Idle time before a session closes")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    proxy_cmd->add_option("--fusion-url", proxy_args.fusion_url,
                          "Fusion service base URL; records go to stdout as JSON lines when unset");

    FusionArgs fusion_args;
    auto* fusion_cmd = serve->add_subcommand("fusion", "Fusion store with ingest, query and metrics endpoints");
    fusion_cmd->add_option("--listen", fusion_args.listen, "host:port to bind")->capture_default_str();
    fusion_cmd->add_option("--data-dir", fusion_args.data_dir, "Loaded at start when present, written on shutdown");

    auto* export_cmd = app.add_subcommand("export", "Export observations");
    export_cmd->require_subcommand(1);
    ExportArgs export_args;
    auto* radio_cmd = export_cmd->add_subcommand("radio", "L1/GPS and L3 exporter");
    radio_cmd->add_option("--trace", export_args.trace, "Drive-trace CSV")->check(CLI::ExistingFile);
    radio_cmd->add_option("--modem-log", export_args.modem_log, "Timestamped #RFSTS modem responses")
        ->check(CLI::ExistingFile);
    radio_cmd->add_option("--nmea", export_args.nmea, "Timestamped NMEA GGA/RMC sentences")->check(CLI::ExistingFile);
    radio_cmd->add_option("--iface-counters", export_args.iface_counters,
                          "Counter snapshot CSV (t_s,rx_bytes,tx_bytes) or sys:<iface> for live sampling");
    radio_cmd->add_option("--fusion-url", export_args.fusion_url,
                          "Fusion service base URL; samples go to stdout as JSON lines when unset");
    radio_cmd->add_option("--rate-hz", export_args.rate_hz,
                          "Replay speed in trace seconds per second, live sampling rate; 0 replays unpaced")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    radio_cmd->add_option("--duration-s", export_args.duration_s, "Live sampling duration; 0 runs until interrupted")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    radio_cmd->add_option("--join-tolerance-s", export_args.join_tolerance_s, "Max RF to GPS time gap")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    radio_cmd->add_option("--counter-width", export_args.counter_width, "Interface counter width in bits")
        ->capture_default_str()
        ->check(CLI::IsMember({32u, 64u}));

    auto* trial_cmd = app.add_subcommand("trial", "Deterministic field-trial replay");
    trial_cmd->require_subcommand(1);
    TrialArgs trial_args;
    auto* run_cmd = trial_cmd->add_subcommand("run", "Run a scenario end to end");
    run_cmd->add_option("--scenario", trial_args.scenario, "Scenario TOML")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--seed", trial_args.seed, "Override the scenario seed");
    run_cmd->add_option("--out", trial_args.out, "Run directory")->required();

    ReportArgs report_args;
    auto* report_cmd = app.add_subcommand("report", "Emit figure data (CSV) and plots from a run directory");
    report_cmd->add_option("--run", report_args.run, "Run directory written by trial run")
        ->required()
        ->check(CLI::ExistingDirectory);
    report_cmd->add_option("--outputs", report_args.outputs,
                           "bitrate,stalls,qoe,throughput_l3_l7,rf,coverage (default: all)")
        ->delimiter(',')
        ->check(CLI::IsMember({"bitrate", "stalls", "qoe", "throughput_l3_l7", "rf", "coverage"}));
    report_cmd->add_option("--format", report_args.formats, "Extra plot formats: png,svg (CSV is always written)")
        ->delimiter(',')
        ->check(CLI::IsMember({"csv", "png", "svg"}));
    report_cmd->add_option("--out", report_args.out, "Output directory (default: the run directory)");
    report_cmd->add_option("--cell-size-m", report_args.cell_size_m, "Coverage grid cell size")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    CoverageArgs coverage_args;
    auto* coverage_cmd = app.add_subcommand("coverage", "RSRP coverage grid as GeoJSON");
    coverage_cmd->add_option("--trace", coverage_args.trace, "Drive-trace CSV")->required()->check(CLI::ExistingFile);
    coverage_cmd->add_option("--cell-size-m", coverage_args.cell_size_m, "Grid cell size")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    coverage_cmd->add_option("--out", coverage_args.out, "GeoJSON path (default: stdout)");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        auto full = with_defaults(app, args);
        std::reverse(full.begin(), full.end());
        app.parse(full);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        if (const auto unknown = first_unknown(app, args)) {
            std::cerr << "error: unknown argument '" << unknown->first << "'\n";
            if (const auto s = suggestion(*unknown->second, unknown->first); !s.empty())
                std::cerr << "did you mean '" << s << "'?\n";
        } else {
            std::cerr << "error: " << e.what() << "\n";
        }
        std::cerr << "run 'mlmon --help' for usage\n";
        return kExitUsage;
    }

    try {
        if (*proxy_cmd) return serve_proxy(proxy_args);
        if (*fusion_cmd) return serve_fusion(fusion_args);
        if (*radio_cmd) return export_radio(export_args);
        if (*run_cmd) return trial_run(trial_args);
        if (*report_cmd) return run_report(report_args);
        if (*coverage_cmd) return run_coverage(coverage_args);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
