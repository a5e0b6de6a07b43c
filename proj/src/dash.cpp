#include "mlmon/dash.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "mlmon/common.hpp"
#include "mlmon/url.hpp"
#include "mlmon/xml.hpp"

namespace mlmon::dash {

std::size_t Manifest::segment_count() const {
    if (segment_duration <= 0.0) return 0;
    // Tolerate durations like 322.0000000001 produced by timescale division.
    const double n = media_duration / segment_duration;
    return static_cast<std::size_t>(std::ceil(n - 1e-9));
}

double Manifest::segment_length(std::size_t index) const {
    const double start = static_cast<double>(index - 1) * segment_duration;
    return std::min(segment_duration, media_duration - start);
}

const Representation* Manifest::find(std::string_view rep_id) const {
    for (const auto& r : representations)
        if (r.id == rep_id) return &r;
    return nullptr;
}

std::vector<double> Manifest::ladder_kbps() const {
    std::vector<double> out;
    out.reserve(representations.size());
    for (const auto& r : representations) out.push_back(r.bitrate_kbps);
    return out;
}

bool Manifest::operator==(const Manifest& o) const {
    return media_duration == o.media_duration && segment_duration == o.segment_duration &&
           base_url == o.base_url && representations == o.representations &&
           segment_template == o.segment_template && init_template == o.init_template &&
           start_number == o.start_number;
}

void validate(const Manifest& m) {
    if (!(m.media_duration > 0.0)) throw SemanticError("mediaPresentationDuration must be positive");
    if (!(m.segment_duration > 0.0)) throw SemanticError("segment duration must be positive");
    if (m.segment_count() < 1) throw SemanticError("segment count must be at least 1");
    if (m.representations.empty()) throw SemanticError("Representation absent");
    if (m.base_url.empty()) throw SemanticError("BaseURL absent");
    if (!is_absolute_url(m.base_url)) throw SemanticError("BaseURL not absolute: " + m.base_url);
    if (m.segment_template.empty()) throw SemanticError("SegmentTemplate@media absent");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < m.representations.size(); ++i) {
        const auto& r = m.representations[i];
        if (r.id.empty()) throw SemanticError("Representation@id absent");
        if (!ids.insert(r.id).second) throw SemanticError("duplicate Representation@id " + r.id);
        if (!(r.bitrate_kbps > 0.0)) throw SemanticError("Representation " + r.id + ": bandwidth must be positive");
        if (r.width < 1 || r.height < 1) throw SemanticError("Representation " + r.id + ": width/height must be >= 1");
        if (!(r.framerate > 0.0)) throw SemanticError("Representation " + r.id + ": frameRate must be positive");
        if (i > 0 && !(m.representations[i - 1].bitrate_kbps < r.bitrate_kbps))
            throw SemanticError("representations not strictly ascending by bandwidth at " + r.id);
    }
}

double parse_iso_duration(std::string_view text) {
    const std::string s = trim(text);
    if (s.size() < 2 || s[0] != 'P') throw SemanticError("invalid ISO 8601 duration '" + s + "'");
    double total = 0.0;
    bool in_time = false;
    bool any = false;
    std::size_t i = 1;
    while (i < s.size()) {
        if (s[i] == 'T') {
            in_time = true;
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
        if (j == i || j >= s.size()) throw SemanticError("invalid ISO 8601 duration '" + s + "'");
        double v = 0.0;
        auto [p, ec] = std::from_chars(s.data() + i, s.data() + j, v);
        if (ec != std::errc{} || p != s.data() + j) throw SemanticError("invalid ISO 8601 duration '" + s + "'");
        switch (s[j]) {
            case 'D': if (in_time) throw SemanticError("invalid ISO 8601 duration '" + s + "'"); total += v * 86400; break;
            case 'H': total += v * 3600; break;
            case 'M': total += in_time ? v * 60 : v * 30 * 86400; break;
            case 'S': total += v; break;
            case 'Y': total += v * 365 * 86400; break;
            default: throw SemanticError("invalid ISO 8601 duration '" + s + "'");
        }
        any = true;
        i = j + 1;
    }
    if (!any) throw SemanticError("invalid ISO 8601 duration '" + s + "'");
    return total;
}

std::string format_iso_duration(double seconds) { return "PT" + format_number(seconds) + "S"; }

namespace {

double parse_number(const std::string& s, const std::string& what) {
    double v = 0.0;
    const auto t = trim(s);
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size()) throw SemanticError("invalid " + what + " '" + s + "'");
    return v;
}

long parse_long(const std::string& s, const std::string& what) {
    long v = 0;
    const auto t = trim(s);
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size()) throw SemanticError("invalid " + what + " '" + s + "'");
    return v;
}

double parse_frame_rate(const std::string& s) {
    const auto slash = s.find('/');
    if (slash == std::string::npos) return parse_number(s, "frameRate");
    const double num = parse_number(s.substr(0, slash), "frameRate");
    const double den = parse_number(s.substr(slash + 1), "frameRate");
    if (den == 0.0) throw SemanticError("invalid frameRate '" + s + "'");
    return num / den;
}

void note_ignored(const xml::Element& el, const std::string& path, const std::set<std::string_view>& known_children,
                  const std::set<std::string_view>& known_attrs, std::vector<std::string>& out) {
    for (const auto& [k, v] : el.attributes) {
        if (k.starts_with("xmlns")) continue;
        std::string_view key = k;
        if (auto c = key.find(':'); c != std::string_view::npos) key = key.substr(c + 1);
        if (!known_attrs.count(key)) out.push_back(path + "@" + k);
    }
    for (const auto& c : el.children)
        if (!known_children.count(c.local_name())) out.push_back(path + "/" + c.name);
}

std::string base_url_of(const xml::Element& el) {
    if (const auto* b = el.child("BaseURL")) return trim(b->text);
    return {};
}

std::string join_base(const std::string& parent, const std::string& child) {
    if (child.empty()) return parent;
    if (parent.empty()) return child;
    return resolve_url(parent, child);
}

bool is_video_set(const xml::Element& as) {
    const auto mime = as.attribute("mimeType").value_or("");
    const auto content = as.attribute("contentType").value_or("");
    if (content == "video" || mime.starts_with("video/")) return true;
    if (!content.empty() || !mime.empty()) return false;
    for (const auto* rep : as.children_named("Representation")) {
        if (rep->attribute("mimeType").value_or("").starts_with("video/")) return true;
        if (rep->attribute("width")) return true;
    }
    return false;
}

}  // namespace

Manifest parse_mpd(std::string_view text, std::string_view document_url) {
    const xml::Element root = xml::parse(text);
    if (root.local_name() != "MPD") throw SemanticError("root element is <" + root.name + ">, expected MPD");
    Manifest m;

    if (root.attribute("type").value_or("static") != "static")
        throw SemanticError("MPD@type dynamic unsupported");
    note_ignored(root, "MPD", {"BaseURL", "Period"},
                 {"type", "mediaPresentationDuration", "minBufferTime", "profiles", "schemaLocation"}, m.ignored);

    const auto periods = root.children_named("Period");
    if (periods.empty()) throw SemanticError("Period absent");
    if (periods.size() > 1) throw SemanticError("multi-period MPD unsupported");
    const xml::Element& period = *periods.front();
    note_ignored(period, "MPD/Period", {"BaseURL", "AdaptationSet"}, {"id", "start", "duration"}, m.ignored);

    if (auto d = root.attribute("mediaPresentationDuration")) {
        m.media_duration = parse_iso_duration(*d);
    } else if (auto pd = period.attribute("duration")) {
        m.media_duration = parse_iso_duration(*pd);
    } else {
        throw SemanticError("mediaPresentationDuration absent");
    }

    const xml::Element* set = nullptr;
    for (const auto* as : period.children_named("AdaptationSet")) {
        if (is_video_set(*as)) {
            if (!set) set = as;
            else m.ignored.push_back("MPD/Period/AdaptationSet[video, extra]");
        } else {
            m.ignored.push_back("MPD/Period/AdaptationSet[" + as->attribute("contentType").value_or(as->attribute("mimeType").value_or("?")) + "]");
        }
    }
    if (!set) throw SemanticError("AdaptationSet absent");
    note_ignored(*set, "MPD/Period/AdaptationSet", {"BaseURL", "SegmentTemplate", "Representation"},
                 {"id", "mimeType", "contentType", "segmentAlignment", "startWithSAP", "codecs", "frameRate",
                  "maxWidth", "maxHeight", "par", "bitstreamSwitching"},
                 m.ignored);

    std::string base = document_url.empty() ? std::string() : std::string(document_url);
    const std::string root_base = base_url_of(root);
    const std::string period_base = base_url_of(period);
    const std::string set_base = base_url_of(*set);
    if (root_base.empty() && period_base.empty() && set_base.empty()) throw SemanticError("BaseURL absent");
    base = join_base(join_base(join_base(base, root_base), period_base), set_base);
    m.base_url = base;

    const xml::Element* tmpl = set->child("SegmentTemplate");
    const auto reps = set->children_named("Representation");
    if (!tmpl) {
        for (const auto* r : reps)
            if ((tmpl = r->child("SegmentTemplate"))) break;
    }
    if (!tmpl) throw SemanticError("SegmentTemplate absent");
    if (tmpl->child("SegmentTimeline")) throw SemanticError("SegmentTimeline addressing unsupported");
    note_ignored(*tmpl, "MPD/Period/AdaptationSet/SegmentTemplate", {},
                 {"media", "initialization", "timescale", "duration", "startNumber", "presentationTimeOffset"},
                 m.ignored);
    m.segment_template = tmpl->attribute("media").value_or("");
    if (m.segment_template.empty()) throw SemanticError("SegmentTemplate@media absent");
    m.init_template = tmpl->attribute("initialization").value_or("");
    const double timescale = parse_number(tmpl->attribute("timescale").value_or("1"), "timescale");
    if (!(timescale > 0)) throw SemanticError("SegmentTemplate@timescale must be positive");
    const auto dur = tmpl->attribute("duration");
    if (!dur) throw SemanticError("SegmentTemplate@duration absent");
    m.segment_duration = parse_number(*dur, "SegmentTemplate@duration") / timescale;
    m.start_number = parse_long(tmpl->attribute("startNumber").value_or("1"), "startNumber");

    const auto set_rate = set->attribute("frameRate");
    const auto set_codecs = set->attribute("codecs");
    if (reps.empty()) throw SemanticError("Representation absent");
    for (const auto* r : reps) {
        Representation rep;
        rep.id = r->attribute("id").value_or("");
        const auto bw = r->attribute("bandwidth");
        if (!bw) throw SemanticError("Representation@bandwidth absent");
        rep.bitrate_kbps = parse_number(*bw, "bandwidth") / 1000.0;
        const auto w = r->attribute("width");
        const auto h = r->attribute("height");
        if (!w || !h) throw SemanticError("Representation@width/height absent");
        rep.width = static_cast<int>(parse_long(*w, "width"));
        rep.height = static_cast<int>(parse_long(*h, "height"));
        const auto fr = r->attribute("frameRate") ? r->attribute("frameRate") : set_rate;
        if (!fr) throw SemanticError("Representation@frameRate absent");
        rep.framerate = parse_frame_rate(*fr);
        rep.codec = r->attribute("codecs").value_or(set_codecs.value_or(""));
        note_ignored(*r, "MPD/Period/AdaptationSet/Representation", {"SegmentTemplate"},
                     {"id", "bandwidth", "width", "height", "frameRate", "codecs", "mimeType", "sar", "scanType"},
                     m.ignored);
        m.representations.push_back(std::move(rep));
    }
    std::stable_sort(m.representations.begin(), m.representations.end(),
                     [](const auto& a, const auto& b) { return a.bitrate_kbps < b.bitrate_kbps; });
    validate(m);
    return m;
}

std::string serialize_mpd(const Manifest& m) {
    validate(m);
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<MPD xmlns=\"urn:mpeg:dash:schema:mpd:2011\" type=\"static\" profiles=\"urn:mpeg:dash:profile:isoff-live:2011\""
        << " mediaPresentationDuration=\"" << format_iso_duration(m.media_duration) << "\""
        << " minBufferTime=\"" << format_iso_duration(m.segment_duration) << "\">\n";
    out << "  <BaseURL>" << xml::escape(m.base_url) << "</BaseURL>\n";
    out << "  <Period id=\"0\" start=\"PT0S\">\n";
    out << "    <AdaptationSet mimeType=\"video/mp4\" contentType=\"video\" segmentAlignment=\"true\">\n";
    out << "      <SegmentTemplate media=\"" << xml::escape(m.segment_template) << "\"";
    if (!m.init_template.empty()) out << " initialization=\"" << xml::escape(m.init_template) << "\"";
    // Integer ticks at 1 ms keep the common cases exact; fall back to the
    // shortest seconds representation when that would lose precision.
    const double ticks = m.segment_duration * 1000.0;
    if (ticks == std::round(ticks) && ticks / 1000.0 == m.segment_duration) {
        out << " timescale=\"1000\" duration=\"" << static_cast<long long>(ticks) << "\"";
    } else {
        out << " timescale=\"1\" duration=\"" << format_number(m.segment_duration) << "\"";
    }
    out << " startNumber=\"" << m.start_number << "\"/>\n";
    for (const auto& r : m.representations) {
        out << "      <Representation id=\"" << xml::escape(r.id) << "\" bandwidth=\""
            << format_number(r.bitrate_kbps * 1000.0) << "\" width=\"" << r.width << "\" height=\"" << r.height
            << "\" frameRate=\"" << format_number(r.framerate) << "\"";
        if (!r.codec.empty()) out << " codecs=\"" << xml::escape(r.codec) << "\"";
        out << "/>\n";
    }
    out << "    </AdaptationSet>\n  </Period>\n</MPD>\n";
    return out.str();
}

Manifest rewrite_base_url(const Manifest& m, std::string_view proxy_origin) {
    const auto proxy = parse_absolute_url(proxy_origin);
    if (!proxy) throw DomainError("proxy origin not absolute: " + std::string(proxy_origin));
    if (proxy->path != "/" || !proxy->query.empty())
        throw DomainError("proxy origin must not carry a path: " + std::string(proxy_origin));
    const auto original = parse_absolute_url(m.base_url);
    if (!original) throw DomainError("manifest BaseURL not absolute: " + m.base_url);
    Manifest out = m;
    out.base_url = proxy->origin() + original->target();
    return out;
}

std::string expand_template(std::string_view tmpl, const Representation& rep, long number) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] != '$') {
            out += tmpl[i++];
            continue;
        }
        const auto end = tmpl.find('$', i + 1);
        if (end == std::string_view::npos) {
            out.append(tmpl.substr(i));
            break;
        }
        const std::string_view ident = tmpl.substr(i + 1, end - i - 1);
        if (ident.empty()) {
            out += '$';
        } else {
            std::string_view name = ident;
            std::string_view fmt;
            if (const auto pct = ident.find('%'); pct != std::string_view::npos) {
                name = ident.substr(0, pct);
                fmt = ident.substr(pct);
            }
            auto formatted = [&](long long v) {
                if (fmt.empty()) return std::to_string(v);
                int width = 0;
                if (fmt.size() >= 3 && fmt[1] == '0') {
                    std::from_chars(fmt.data() + 2, fmt.data() + fmt.size() - 1, width);
                }
                std::string digits = std::to_string(v);
                if (static_cast<int>(digits.size()) < width) digits.insert(0, width - digits.size(), '0');
                return digits;
            };
            if (name == "RepresentationID") out += rep.id;
            else if (name == "Number") out += formatted(number);
            else if (name == "Bandwidth") out += formatted(std::llround(rep.bitrate_kbps * 1000.0));
            else out.append(tmpl.substr(i, end - i + 1));
        }
        i = end + 1;
    }
    return out;
}

std::string segment_url(const Manifest& m, std::string_view rep_id, std::size_t index) {
    const Representation* rep = m.find(rep_id);
    if (!rep) throw RangeError("rep_id", "unknown representation '" + std::string(rep_id) + "'");
    if (index < 1 || index > m.segment_count())
        throw RangeError("index", "segment index " + std::to_string(index) + " outside [1, " +
                                      std::to_string(m.segment_count()) + "]");
    const long number = m.start_number + static_cast<long>(index) - 1;
    return resolve_url(m.base_url, expand_template(m.segment_template, *rep, number));
}

SegmentMatcher::SegmentMatcher(const Manifest& m)
    : reps_(m.representations), segment_count_(m.segment_count()), start_number_(m.start_number) {
    std::string re = "^";
    const std::string_view tmpl = m.segment_template;
    int group = 0;
    std::size_t i = 0;
    auto literal = [&](char c) {
        if (std::string_view("\\^$.|?*+()[]{}").find(c) != std::string_view::npos) re += '\\';
        re += c;
    };
    while (i < tmpl.size()) {
        if (tmpl[i] != '$') {
            literal(tmpl[i++]);
            continue;
        }
        const auto end = tmpl.find('$', i + 1);
        if (end == std::string_view::npos) {
            for (; i < tmpl.size(); ++i) literal(tmpl[i]);
            break;
        }
        std::string_view ident = tmpl.substr(i + 1, end - i - 1);
        if (const auto pct = ident.find('%'); pct != std::string_view::npos) ident = ident.substr(0, pct);
        if (ident.empty()) {
            literal('$');
        } else if (ident == "RepresentationID") {
            re += "([^/]+)";
            rep_group_ = ++group;
        } else if (ident == "Number") {
            re += "([0-9]+)";
            number_group_ = ++group;
        } else if (ident == "Bandwidth") {
            re += "([0-9]+)";
            bandwidth_group_ = ++group;
        } else {
            for (std::size_t k = i; k <= end; ++k) literal(tmpl[k]);
        }
        i = end + 1;
    }
    re += "$";
    pattern_ = std::regex(re);
}

std::optional<SegmentRef> SegmentMatcher::match(std::string_view relative_path) const {
    if (number_group_ == 0) return std::nullopt;
    std::match_results<std::string_view::const_iterator> mr;
    if (!std::regex_match(relative_path.begin(), relative_path.end(), mr, pattern_)) return std::nullopt;
    const Representation* rep = nullptr;
    if (rep_group_) {
        const std::string id = mr[rep_group_].str();
        for (const auto& r : reps_)
            if (r.id == id) rep = &r;
    } else if (bandwidth_group_) {
        const long long bw = std::stoll(mr[bandwidth_group_].str());
        for (const auto& r : reps_)
            if (std::llround(r.bitrate_kbps * 1000.0) == bw) rep = &r;
    } else if (reps_.size() == 1) {
        rep = &reps_.front();
    }
    if (!rep) return std::nullopt;
    const auto digits = mr[number_group_].str();
    if (digits.size() > 12) return std::nullopt;
    const long number = std::stol(digits);
    const long index = number - start_number_ + 1;
    if (index < 1 || static_cast<std::size_t>(index) > segment_count_) return std::nullopt;
    return SegmentRef{rep->id, static_cast<std::size_t>(index)};
}

}  // namespace mlmon::dash
