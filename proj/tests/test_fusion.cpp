#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "json.hpp"
#include "mlmon/codec.hpp"
#include "mlmon/fusion.hpp"
#include "mlmon/fusion_http.hpp"
#include "support.hpp"

using namespace mlmon;
using namespace mlmon::fusion;
using nlohmann::json;

namespace {

radio::RadioSample radio_at(double t, double rsrp) {
    return {t, rsrp, -10.0, 12.0, GeoPoint{43.31, -1.98}, radio::Source::simulated};
}

proxy::SegmentRecord segment(const std::string& session, double t0, double t1, std::size_t index = 1) {
    proxy::SegmentRecord r;
    r.session_id = session;
    r.rep_id = "rep15";
    r.rep_bitrate_kbps = 27500;
    r.segment_index = index;
    r.bytes = 1'000'000;
    r.t_request = t0;
    r.t_first_byte = t0 + 0.01;
    r.t_complete = t1;
    r.origin_status = 200;
    return r;
}

}  // namespace

TEST(Ingest, ValidRadioSampleIsQueryable) {
    Store store;
    EXPECT_FALSE(store.ingest(radio_at(10, -85)).duplicate);
    const auto res = store.query_range(radio_key(metric::rsrp), 10, 11, 1);
    EXPECT_FALSE(res.unknown_series);
    ASSERT_EQ(res.points.size(), 2u);
    EXPECT_EQ(res.points[0], (Point{10, -85}));
}

TEST(Ingest, DuplicateStoresOnePoint) {
    Store store;
    store.ingest(radio_at(10, -85));
    EXPECT_TRUE(store.ingest(radio_at(10, -85)).duplicate);
    EXPECT_EQ(store.points(radio_key(metric::rsrp)).size(), 1u);
    EXPECT_EQ(store.radio_samples().size(), 1u);
}

TEST(Ingest, OutOfRangeRsrpRejected) {
    Store store;
    try {
        store.ingest(radio_at(10, -200));
        FAIL() << "expected RangeError";
    } catch (const RangeError& e) {
        EXPECT_EQ(e.field(), "rsrp");
        EXPECT_NE(std::string(e.what()).find("rsrp out of range"), std::string::npos) << e.what();
    }
    EXPECT_TRUE(store.keys().empty());
}

TEST(Ingest, ArrivalOrderDoesNotMatter) {
    std::vector<radio::RadioSample> samples;
    for (int i = 0; i < 50; ++i) samples.push_back(radio_at(i, -70 - i % 30));
    samples.push_back(radio_at(7, -120));  // conflicting value at an existing key
    Store a;
    for (const auto& s : samples) a.ingest(s);
    std::mt19937 rng(3);
    for (int round = 0; round < 5; ++round) {
        std::shuffle(samples.begin(), samples.end(), rng);
        Store b;
        for (const auto& s : samples) b.ingest(s);
        EXPECT_EQ(b.exposition(), a.exposition());
        EXPECT_EQ(b.points(radio_key(metric::rsrp)), a.points(radio_key(metric::rsrp)));
    }
    EXPECT_EQ(a.points(radio_key(metric::rsrp))[7].value, -120.0);
}

TEST(QueryRange, OneHertzAtStepOne) {
    Store store;
    for (int i = 0; i < 10; ++i) store.ingest(radio_at(i, -70 - i));
    const auto res = store.query_range(radio_key(metric::rsrp), 0, 9, 1);
    ASSERT_EQ(res.points.size(), 10u);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(res.points[i], (Point{double(i), -70.0 - i}));
}

TEST(QueryRange, BeforeAnyDataIsEmpty) {
    Store store;
    for (int i = 100; i < 110; ++i) store.ingest(radio_at(i, -80));
    const auto res = store.query_range(radio_key(metric::rsrp), 0, 50, 1);
    EXPECT_TRUE(res.points.empty());
    EXPECT_FALSE(res.unknown_series);
}

TEST(QueryRange, StepTwoTakesEverySecondPoint) {
    Store store;
    for (int i = 0; i < 10; ++i) store.ingest(radio_at(i, -70 - i));
    const auto res = store.query_range(radio_key(metric::rsrp), 0, 9, 2);
    ASSERT_EQ(res.points.size(), 5u);
    for (int k = 0; k < 5; ++k) EXPECT_EQ(res.points[k], (Point{2.0 * k, -70.0 - 2 * k}));
}

TEST(QueryRange, LocfStopsAtStaleness) {
    Store store;
    store.ingest(radio_at(0, -80));
    const auto res = store.query_range(radio_key(metric::rsrp), 0, 10, 1);
    ASSERT_EQ(res.points.size(), 6u);
    EXPECT_EQ(res.points.back(), (Point{5, -80}));
}

TEST(QueryRange, UnknownSeriesFlag) {
    Store store;
    const auto res = store.query_range(radio_key("nope"), 0, 1, 1);
    EXPECT_TRUE(res.unknown_series);
    EXPECT_TRUE(res.points.empty());
}

TEST(Align, MidpointGapZero) {
    Store store;
    store.ingest(radio_at(10.0, -85));
    const auto a = store.align(segment("s", 9.6, 10.4));
    ASSERT_TRUE(a.radio);
    ASSERT_TRUE(a.gap);
    EXPECT_DOUBLE_EQ(*a.gap, 0.0);
    EXPECT_TRUE(a.aligned);
}

TEST(Align, NoRadioIsUnaligned) {
    Store store;
    const auto a = store.align(segment("s", 9.6, 10.4));
    EXPECT_FALSE(a.aligned);
    EXPECT_FALSE(a.radio);
    EXPECT_EQ(a.segment, segment("s", 9.6, 10.4));
}

TEST(Align, EarlierSampleWinsTieAndLinkWindowsOverlap) {
    Store store;
    store.ingest(radio_at(9.5, -80));
    store.ingest(radio_at(10.5, -90));
    store.ingest(radio::LinkSample{10.0, 100, 0, 1.0});
    store.ingest(radio::LinkSample{11.0, 200, 0, 1.0});
    store.ingest(radio::LinkSample{13.0, 300, 0, 1.0});
    const auto a = store.align(segment("s", 9.6, 10.4));
    ASSERT_TRUE(a.radio);
    EXPECT_EQ(a.radio->t, 9.5);
    ASSERT_EQ(a.link_window.size(), 2u);
    EXPECT_EQ(a.link_window[0].t, 10.0);
    EXPECT_EQ(a.link_window[1].t, 11.0);
}

TEST(Correlate, SelfAndNegation) {
    Store store;
    SeriesKey a{Layer::L1, "x", std::nullopt, {}};
    SeriesKey b{Layer::L1, "neg", std::nullopt, {}};
    for (int i = 0; i < 20; ++i) {
        const double v = std::sin(i * 0.7) * 10 + i;
        store.ingest_point(a, {double(i), v});
        store.ingest_point(b, {double(i), -v});
    }
    EXPECT_NEAR(store.correlate(a, a, 0, 19, 1).r, 1.0, 1e-12);
    EXPECT_NEAR(store.correlate(a, b, 0, 19, 1).r, -1.0, 1e-12);
    EXPECT_EQ(store.correlate(a, b, 0, 19, 1).points, 20u);
}

TEST(Correlate, DegenerateAndInsufficient) {
    Store store;
    SeriesKey a{Layer::L1, "flat", std::nullopt, {}};
    SeriesKey b{Layer::L1, "ramp", std::nullopt, {}};
    for (int i = 0; i < 5; ++i) {
        store.ingest_point(a, {double(i), 3.0});
        store.ingest_point(b, {double(i), double(i)});
    }
    EXPECT_TRUE(store.correlate(a, b, 0, 4, 1).degenerate);
    EXPECT_THROW(store.correlate(a, b, 0, 1, 1), InsufficientData);
}

TEST(Exposition, SingleRsrpPoint) {
    Store store;
    store.ingest(radio_at(1700000000.0, -85));
    const auto page = store.exposition();
    EXPECT_NE(page.find("radio_rsrp_dbm{session=\"\"} -85 1700000000000\n"), std::string::npos) << page;
}

TEST(Exposition, EmptyStoreIsNewline) {
    Store store;
    EXPECT_EQ(store.exposition(), "\n");
}

TEST(Exposition, TwoSessionsSortedByLabel) {
    Store store;
    store.ingest_point(media_key(metric::selected_bitrate, "zeta"), {1, 145});
    store.ingest_point(media_key(metric::selected_bitrate, "alpha"), {1, 27500});
    const auto page = store.exposition();
    EXPECT_EQ(page,
              "media_selected_bitrate_kbps{session=\"alpha\"} 27500 1000\n"
              "media_selected_bitrate_kbps{session=\"zeta\"} 145 1000\n");
}

TEST(Persistence, RoundTrip) {
    test::TempDir dir("fusion");
    Store store;
    for (int i = 0; i < 5; ++i) store.ingest(radio_at(i, -80 - i));
    store.ingest(radio::LinkSample{1.0, 1000, 10, 1.0});
    store.ingest(segment("s1", 0.5, 1.5));
    store.ingest("s1", qoe::QoeScore{2.0, 4.2, 4.4, 1, 0.5});
    store.record_event({proxy::SessionEvent::Kind::open, "s1", "127.0.0.1", 0.1});
    store.persist(dir.path());
    const auto loaded = Store::load(dir.path());
    EXPECT_EQ(loaded.exposition(), store.exposition());
    EXPECT_EQ(loaded.radio_samples(), store.radio_samples());
    EXPECT_EQ(loaded.link_samples(), store.link_samples());
    EXPECT_EQ(loaded.segments(), store.segments());
    EXPECT_EQ(loaded.events(), store.events());
    EXPECT_EQ(loaded.keys(), store.keys());
}

TEST(Http, IngestAndQuery) {
    Store store;
    const auto body = json(radio_at(5, -85)).dump();
    auto r = handle_ingest(store, "/ingest/radio", body);
    EXPECT_EQ(r.status, 200);
    EXPECT_FALSE(json::parse(r.body)["duplicate"].get<bool>());
    r = handle_ingest(store, "/ingest/radio", body);
    EXPECT_TRUE(json::parse(r.body)["duplicate"].get<bool>());

    const std::multimap<std::string, std::string> params{
        {"layer", "L1"}, {"metric", "rsrp_dbm"}, {"t0", "5"}, {"t1", "6"}, {"step", "1"}};
    const auto q = handle_query(store, params);
    ASSERT_EQ(q.status, 200) << q.body;
    const auto j = json::parse(q.body);
    EXPECT_FALSE(j["unknown_series"].get<bool>());
    ASSERT_EQ(j["points"].size(), 2u);
    EXPECT_EQ(j["points"][0][1].get<double>(), -85.0);
}

TEST(Http, RejectionsNameField) {
    Store store;
    const auto r = handle_ingest(store, "/ingest/radio", json(radio_at(5, -200)).dump());
    EXPECT_EQ(r.status, 400);
    EXPECT_EQ(json::parse(r.body)["field"], "rsrp");
    EXPECT_EQ(handle_ingest(store, "/ingest/radio", "{not json").status, 400);
    EXPECT_EQ(handle_ingest(store, "/ingest/nothing", "{}").status, 404);
    EXPECT_EQ(handle_query(store, {{"layer", "L1"}, {"metric", "rsrp_dbm"}}).status, 400);
}

TEST(Codec, RecordsRoundTrip) {
    const auto s = radio_at(3.25, -91.5);
    EXPECT_EQ(codec::decode<radio::RadioSample>(json(s).dump()), s);
    const radio::LinkSample l{4.0, 123456, 789, 1.0};
    EXPECT_EQ(codec::decode<radio::LinkSample>(json(l).dump()), l);
    const auto seg = segment("sess", 1.0, 2.5, 7);
    EXPECT_EQ(codec::decode<proxy::SegmentRecord>(json(seg).dump()), seg);
    const proxy::SessionEvent e{proxy::SessionEvent::Kind::close, "sess", "10.0.0.2", 31.0};
    EXPECT_EQ(codec::decode<proxy::SessionEvent>(json(e).dump()), e);
    EXPECT_THROW(codec::parse_body("[1,"), ParseError);
}
