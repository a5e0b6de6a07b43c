#include <gtest/gtest.h>

#include <random>
#include <set>

#include "mlmon/common.hpp"
#include "mlmon/dash.hpp"
#include "mlmon/url.hpp"
#include "support.hpp"

using namespace mlmon;
using mlmon::test::slurp;
using mlmon::test::source;

namespace {

dash::Manifest fixture(const std::string& name) { return dash::parse_mpd(slurp(source("fixtures/mpd/" + name))); }

}  // namespace

TEST(ParseMpd, DatasetFixtureLadderAndTiming) {
    const auto m = fixture("stc_hevc_15rep.mpd");
    ASSERT_EQ(m.representations.size(), 15u);
    EXPECT_EQ(m.representations.front().bitrate_kbps, 145.0);
    EXPECT_EQ(m.representations.back().bitrate_kbps, 27500.0);
    EXPECT_EQ(m.representations.front().width, 320);
    EXPECT_EQ(m.representations.front().height, 180);
    EXPECT_EQ(m.representations.back().width, 7680);
    EXPECT_EQ(m.representations.back().height, 4320);
    EXPECT_EQ(m.segment_duration, 4.0);
    EXPECT_EQ(m.media_duration, 322.0);
    EXPECT_EQ(m.segment_count(), 81u);
    EXPECT_EQ(m.segment_length(81), 2.0);
    EXPECT_EQ(m.base_url, "http://cdn.example/v/");
    for (std::size_t i = 1; i < m.representations.size(); ++i)
        EXPECT_LT(m.representations[i - 1].bitrate_kbps, m.representations[i].bitrate_kbps);
}

TEST(ParseMpd, MinimalSingleSegment) {
    const auto m = fixture("minimal_1rep.mpd");
    EXPECT_EQ(m.representations.size(), 1u);
    EXPECT_EQ(m.segment_count(), 1u);
}

TEST(ParseMpd, MissingBaseUrlIsSemanticError) {
    try {
        fixture("no_baseurl.mpd");
        FAIL() << "expected SemanticError";
    } catch (const SemanticError& e) {
        EXPECT_NE(std::string(e.what()).find("BaseURL absent"), std::string::npos);
    }
}

TEST(ParseMpd, DocumentUrlResolvesRelativeBaseUrl) {
    const std::string xml =
        R"(<MPD type="static" mediaPresentationDuration="PT8S"><BaseURL>media/</BaseURL><Period><AdaptationSet>)"
        R"(<SegmentTemplate duration="4" media="$Number$.m4s"/>)"
        R"(<Representation id="a" bandwidth="500000" width="640" height="360" frameRate="25"/>)"
        R"(</AdaptationSet></Period></MPD>)";
    const auto m = dash::parse_mpd(xml, "http://origin.example/path/manifest.mpd");
    EXPECT_EQ(m.base_url, "http://origin.example/path/media/");
    EXPECT_EQ(m.segment_count(), 2u);
}

TEST(ParseMpd, NestedBaseUrlsSelectVideoAdaptationSet) {
    const auto m = fixture("nested_baseurl_audio.mpd");
    EXPECT_EQ(m.base_url, "https://media.example.org/content/title/");
    ASSERT_EQ(m.representations.size(), 2u);
    EXPECT_EQ(m.representations[0].id, "lo");
    EXPECT_EQ(m.representations[1].id, "hi");
    EXPECT_NEAR(m.representations[0].framerate, 30000.0 / 1001.0, 1e-9);
    EXPECT_EQ(m.segment_duration, 2.0);
    EXPECT_EQ(m.media_duration, 60.5);
    EXPECT_EQ(m.segment_count(), 31u);
    EXPECT_EQ(m.segment_length(31), 0.5);
}

TEST(ParseMpd, ZeroRepresentationsIsSemanticError) {
    const std::string xml =
        R"(<MPD type="static" mediaPresentationDuration="PT4S"><BaseURL>http://a/</BaseURL><Period><AdaptationSet mimeType="video/mp4">)"
        R"(<SegmentTemplate duration="4" media="$Number$.m4s"/></AdaptationSet></Period></MPD>)";
    try {
        dash::parse_mpd(xml);
        FAIL() << "expected SemanticError";
    } catch (const SemanticError& e) {
        EXPECT_NE(std::string(e.what()).find("Representation"), std::string::npos) << e.what();
    }
}

TEST(ParseMpd, MalformedXmlReportsByteOffset) {
    const std::string xml = "<MPD><BaseURL>http://a/</BaseURL><Period></MPD>";
    try {
        dash::parse_mpd(xml);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_GT(e.offset(), 0u);
        EXPECT_LE(e.offset(), xml.size());
    }
}

TEST(ParseMpd, UnknownElementsAreIgnoredButListed) {
    const auto m = fixture("stc_hevc_15rep.mpd");
    EXPECT_FALSE(m.ignored.empty());
}

TEST(ParseMpd, ArbitraryBytesNeverCrash) {
    const auto base = slurp(source("fixtures/mpd/stc_hevc_15rep.mpd"));
    std::mt19937_64 rng(7);
    for (int round = 0; round < 400; ++round) {
        std::string text = base;
        const int edits = 1 + static_cast<int>(rng() % 8);
        for (int e = 0; e < edits; ++e) {
            const std::size_t at = rng() % text.size();
            switch (rng() % 3) {
                case 0: text[at] = static_cast<char>(rng() % 256); break;
                case 1: text.erase(at, 1 + rng() % 16); break;
                default: text.insert(at, 1, "<>&\"'$/="[rng() % 8]); break;
            }
        }
        try {
            const auto m = dash::parse_mpd(text);
            dash::validate(m);
        } catch (const Error&) {
        }
    }
}

TEST(RewriteBaseUrl, SubstitutesOriginAndKeepsPath) {
    const auto m = fixture("stc_hevc_15rep.mpd");
    const auto r = dash::rewrite_base_url(m, "http://mec.local:8080/");
    EXPECT_EQ(r.base_url, "http://mec.local:8080/v/");
    EXPECT_EQ(m.base_url, "http://cdn.example/v/");
    EXPECT_EQ(r.representations, m.representations);
    EXPECT_EQ(r.segment_template, m.segment_template);
    EXPECT_EQ(r.media_duration, m.media_duration);
    EXPECT_EQ(r.segment_duration, m.segment_duration);
}

TEST(RewriteBaseUrl, Idempotent) {
    const auto m = fixture("stc_hevc_15rep.mpd");
    const auto once = dash::rewrite_base_url(m, "http://mec.local:8080");
    EXPECT_EQ(dash::rewrite_base_url(once, "http://mec.local:8080"), once);
}

TEST(RewriteBaseUrl, RoundTripsThroughSerialization) {
    for (const char* name : {"stc_hevc_15rep.mpd", "minimal_1rep.mpd", "nested_baseurl_audio.mpd"}) {
        const auto r = dash::rewrite_base_url(fixture(name), "http://mec.local:8080/");
        EXPECT_EQ(dash::parse_mpd(dash::serialize_mpd(r)), r) << name;
    }
}

TEST(SerializeMpd, RoundTripLawOnFixtures) {
    for (const char* name : {"stc_hevc_15rep.mpd", "minimal_1rep.mpd", "nested_baseurl_audio.mpd"}) {
        const auto m = fixture(name);
        const auto text = dash::serialize_mpd(m);
        EXPECT_EQ(dash::parse_mpd(text), m) << name;
        EXPECT_EQ(dash::serialize_mpd(dash::parse_mpd(text)), text) << name;
    }
}

TEST(SerializeMpd, FifteenRepresentationElements) {
    const auto text = dash::serialize_mpd(fixture("stc_hevc_15rep.mpd"));
    std::size_t count = 0;
    for (auto at = text.find("<Representation "); at != std::string::npos; at = text.find("<Representation ", at + 1))
        ++count;
    EXPECT_EQ(count, 15u);
}

TEST(SerializeMpd, EmptyManifestIsRejected) {
    dash::Manifest m;
    m.media_duration = 4;
    m.segment_duration = 4;
    m.base_url = "http://a/";
    m.segment_template = "$Number$.m4s";
    EXPECT_THROW(dash::serialize_mpd(m), SemanticError);
}

TEST(SegmentUrl, SubstitutesTemplate) {
    const auto m = fixture("stc_hevc_15rep.mpd");
    EXPECT_EQ(dash::segment_url(m, "rep15", 1), "http://cdn.example/v/rep15/seg_1.m4s");
    EXPECT_EQ(dash::segment_url(m, "rep1", 81), "http://cdn.example/v/rep1/seg_81.m4s");
}

TEST(SegmentUrl, RangeErrors) {
    const auto m = fixture("stc_hevc_15rep.mpd");
    EXPECT_THROW(dash::segment_url(m, "rep15", 0), RangeError);
    EXPECT_THROW(dash::segment_url(m, "rep15", m.segment_count() + 1), RangeError);
    EXPECT_THROW(dash::segment_url(m, "rep99", 1), RangeError);
}

TEST(SegmentUrl, FormatWidthAndBandwidth) {
    const auto m = fixture("nested_baseurl_audio.mpd");
    EXPECT_EQ(dash::segment_url(m, "hi", 1), "https://media.example.org/content/title/video/3000000/00000.mp4");
    const auto one = fixture("minimal_1rep.mpd");
    EXPECT_EQ(dash::segment_url(one, "only", 1), "http://origin.example/clip/only-001.m4s");
}

TEST(SegmentUrl, InjectiveOverRepAndIndex) {
    const auto m = fixture("stc_hevc_15rep.mpd");
    std::set<std::string> urls;
    for (const auto& r : m.representations)
        for (std::size_t i = 1; i <= m.segment_count(); ++i) urls.insert(dash::segment_url(m, r.id, i));
    EXPECT_EQ(urls.size(), m.representations.size() * m.segment_count());
}

TEST(SegmentMatcher, InvertsSegmentUrl) {
    for (const char* name : {"stc_hevc_15rep.mpd", "minimal_1rep.mpd", "nested_baseurl_audio.mpd"}) {
        const auto m = fixture(name);
        const dash::SegmentMatcher matcher(m);
        for (const auto& r : m.representations)
            for (std::size_t i = 1; i <= m.segment_count(); ++i) {
                const auto url = dash::segment_url(m, r.id, i);
                const auto ref = matcher.match(url.substr(m.base_url.size()));
                ASSERT_TRUE(ref) << url;
                EXPECT_EQ(ref->rep_id, r.id);
                EXPECT_EQ(ref->index, i);
            }
        EXPECT_FALSE(matcher.match("nonsense"));
    }
}

TEST(IsoDuration, ParsesAndFormats) {
    EXPECT_EQ(dash::parse_iso_duration("PT5M22S"), 322.0);
    EXPECT_EQ(dash::parse_iso_duration("PT1M0.5S"), 60.5);
    EXPECT_EQ(dash::parse_iso_duration("P1DT1H"), 90000.0);
    EXPECT_THROW(dash::parse_iso_duration("5M"), SemanticError);
    EXPECT_THROW(dash::parse_iso_duration("PT"), SemanticError);
    EXPECT_EQ(dash::parse_iso_duration(dash::format_iso_duration(322.0)), 322.0);
}

TEST(Url, ResolveForms) {
    EXPECT_EQ(resolve_url("http://a/b/c.mpd", "d/e"), "http://a/b/d/e");
    EXPECT_EQ(resolve_url("http://a/b/c.mpd", "/x"), "http://a/x");
    EXPECT_EQ(resolve_url("http://a/b/c.mpd", "//h/y"), "http://h/y");
    EXPECT_EQ(resolve_url("http://a/b/c.mpd", "https://z/"), "https://z/");
    const auto u = parse_absolute_url("http://mec.local:8080/v/x?q=1");
    ASSERT_TRUE(u);
    EXPECT_EQ(u->origin(), "http://mec.local:8080");
    EXPECT_EQ(u->target(), "/v/x?q=1");
    EXPECT_FALSE(parse_absolute_url("/relative"));
}
