#pragma once

#include <cstddef>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace mlmon::dash {

struct Representation {
    std::string id;
    double bitrate_kbps = 0.0;
    int width = 0;
    int height = 0;
    double framerate = 0.0;
    std::string codec;

    friend bool operator==(const Representation&, const Representation&) = default;
};

/// Static, single-period, single-adaptation-set presentation with
/// number-based SegmentTemplate addressing.
struct Manifest {
    double media_duration = 0.0;
    double segment_duration = 0.0;
    std::string base_url;
    /// Strictly ascending by bitrate.
    std::vector<Representation> representations;
    std::string segment_template;
    std::string init_template;
    long start_number = 1;

    /// Elements and attributes the parser skipped, as slash-separated paths.
    /// Diagnostic only: not serialized and not part of equality.
    std::vector<std::string> ignored;

    std::size_t segment_count() const;
    /// Media duration of the 1-based segment `index` (the last one may be short).
    double segment_length(std::size_t index) const;
    const Representation* find(std::string_view rep_id) const;
    std::vector<double> ladder_kbps() const;

    bool operator==(const Manifest& other) const;
};

/// Throws SemanticError on any invariant violation.
void validate(const Manifest& m);

/// Parses MPD XML. `document_url`, when given, resolves a relative BaseURL.
/// Throws ParseError (with byte offset) on malformed XML and SemanticError
/// naming the missing or unsupported element otherwise.
Manifest parse_mpd(std::string_view xml, std::string_view document_url = {});

/// Canonical MPD text; parse_mpd(serialize_mpd(m)) == m.
std::string serialize_mpd(const Manifest& m);

/// Copy of `m` whose BaseURL points at `proxy_origin` (scheme://host[:port])
/// and keeps the original path.
Manifest rewrite_base_url(const Manifest& m, std::string_view proxy_origin);

/// Absolute URL of segment `index` (1-based) of representation `rep_id`.
/// Throws RangeError for an unknown id or an index outside [1, segment_count].
std::string segment_url(const Manifest& m, std::string_view rep_id, std::size_t index);

/// Expands the media template for (rep, number) without the base URL.
std::string expand_template(std::string_view tmpl, const Representation& rep, long number);

struct SegmentRef {
    std::string rep_id;
    std::size_t index = 0;  // 1-based
};

/// Reverse of segment_url: recognizes request paths relative to the base URL.
class SegmentMatcher {
public:
    explicit SegmentMatcher(const Manifest& m);
    std::optional<SegmentRef> match(std::string_view relative_path) const;

private:
    std::regex pattern_;
    int rep_group_ = 0;
    int number_group_ = 0;
    int bandwidth_group_ = 0;
    std::vector<Representation> reps_;
    std::size_t segment_count_ = 0;
    long start_number_ = 1;
};

/// ISO 8601 durations restricted to PnDTnHnMnS.
double parse_iso_duration(std::string_view text);
std::string format_iso_duration(double seconds);

}  // namespace mlmon::dash
