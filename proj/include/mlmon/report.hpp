#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mlmon::report {

enum class Output { bitrate, stalls, qoe, throughput_l3_l7, rf, coverage };
enum class Format { csv, png, svg };

std::string_view to_string(Output o);
Output output_from_string(std::string_view s);
std::string_view to_string(Format f);
Format format_from_string(std::string_view s);

inline const std::set<Output> kAllOutputs{Output::bitrate, Output::stalls,           Output::qoe,
                                          Output::throughput_l3_l7, Output::rf, Output::coverage};

/// CSV column schemas.
namespace schema {
inline constexpr std::string_view bitrate = "t_s,selected_bitrate_kbps";
inline constexpr std::string_view stalls = "t_s,stall_total_s";
inline constexpr std::string_view qoe = "t_s,mos,video_quality_mean,stall_count,stall_total_s";
inline constexpr std::string_view throughput = "t_s,l3_mbps,l7_mbps";
}  // namespace schema

struct ReportSpec {
    std::filesystem::path run_dir;
    std::set<Output> outputs;
    /// CSV is always written; png and svg add a plot per output.
    std::set<Format> formats{Format::csv};
    /// Defaults to run_dir when empty.
    std::filesystem::path out_dir;
    double cell_size_m = 25.0;
};

struct ReportResult {
    std::vector<std::filesystem::path> written;
    /// One entry per output skipped for missing data.
    std::vector<std::string> warnings;
};

/// Throws SemanticError for an empty output set or an incomplete run.
ReportResult report(const ReportSpec& spec);

}  // namespace mlmon::report
