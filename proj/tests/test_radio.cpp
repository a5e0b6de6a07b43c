#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "mlmon/radio.hpp"
#include "support.hpp"

using namespace mlmon;
using namespace mlmon::radio;
using mlmon::test::source;

namespace {

std::string with_checksum(const std::string& body) {
    unsigned char sum = 0;
    for (char c : body) sum ^= static_cast<unsigned char>(c);
    char hex[4];
    std::snprintf(hex, sizeof hex, "%02X", sum);
    return "$" + body + "*" + hex;
}

std::vector<TimedLine> timed(const std::string& rel) {
    std::ifstream in(source(rel));
    return read_timed_lines(in);
}

}  // namespace

TEST(ModemStatus, ParsesQuotedPlmnLine) {
    const auto r = parse_modem_status_line(R"(#RFSTS: "001 01",1300,-85,-11,18,0050,FF)");
    ASSERT_TRUE(r);
    EXPECT_EQ(r->rsrp_dbm, -85.0);
    EXPECT_EQ(r->rsrq_db, -11.0);
    EXPECT_EQ(r->sinr_db, 18.0);
}

TEST(ModemStatus, NonStatusLinesYieldNothing) {
    EXPECT_FALSE(parse_modem_status_line("OK"));
    EXPECT_FALSE(parse_modem_status_line("AT#RFSTS"));
    EXPECT_FALSE(parse_modem_status_line(""));
    EXPECT_FALSE(parse_modem_status_line("#RFSTS: garbage"));
}

TEST(ModemStatus, OutOfRangeRsrpNamesField) {
    try {
        parse_modem_status_line(R"(#RFSTS: "001 01",1300,-200,-11,18)");
        FAIL() << "expected RangeError";
    } catch (const RangeError& e) {
        EXPECT_EQ(e.field(), "rsrp");
    }
}

TEST(ModemStatus, RangeBoundsAreInclusive) {
    EXPECT_TRUE(parse_modem_status_line("#RFSTS: 00101,1300,-156,-43,-23"));
    EXPECT_TRUE(parse_modem_status_line("#RFSTS: 00101,1300,-31,20,40"));
    EXPECT_THROW(parse_modem_status_line("#RFSTS: 00101,1300,-30,20,40"), RangeError);
    EXPECT_THROW(parse_modem_status_line("#RFSTS: 00101,1300,-80,21,10"), RangeError);
    EXPECT_THROW(parse_modem_status_line("#RFSTS: 00101,1300,-80,-10,41"), RangeError);
}

TEST(Nmea, GgaDecodesDegreesMinutes) {
    const auto p = parse_nmea(with_checksum("GPGGA,123519,4315.642,N,00158.934,W,1,08,0.9,545.4,M,46.9,M,,"));
    ASSERT_TRUE(p);
    EXPECT_NEAR(p->lat, 43.2607, 1e-6);
    EXPECT_NEAR(p->lon, -1.98223, 5e-6);
}

TEST(Nmea, RmcAndOtherTalkers) {
    const auto p = parse_nmea(with_checksum("GNRMC,123519,A,4315.642,N,00158.934,W,0.5,54.7,191094,,"));
    ASSERT_TRUE(p);
    EXPECT_NEAR(p->lat, 43.2607, 1e-6);
    EXPECT_FALSE(parse_nmea(with_checksum("GNRMC,123519,V,4315.642,N,00158.934,W,0.5,54.7,191094,,")));
}

TEST(Nmea, BadChecksumThrows) {
    auto line = with_checksum("GPGGA,123519,4315.642,N,00158.934,W,1,08,0.9,545.4,M,46.9,M,,");
    line.back() = line.back() == '0' ? '1' : '0';
    EXPECT_THROW(parse_nmea(line), ChecksumError);
}

TEST(Nmea, IgnoredSentences) {
    EXPECT_FALSE(parse_nmea(with_checksum("GPGSV,3,1,11,01,40,083,46,02,17,308,41,12,07,344,39,14,22,228,45")));
    EXPECT_FALSE(parse_nmea(with_checksum("GPGGA,123519,,,,,0,00,,,M,,M,,")));
    EXPECT_FALSE(parse_nmea("$GPGGA,123519,4315.642,N,00158.934,W,1,08,0.9,545.4,M,46.9,M,,"));
    EXPECT_FALSE(parse_nmea("not nmea"));
}

TEST(SampleLink, ThroughputFromDelta) {
    const auto s = sample_link({0, 0}, {12'500'000, 0}, 1.0);
    EXPECT_EQ(s.rx_bytes_delta, 12'500'000u);
    EXPECT_DOUBLE_EQ(s.rx_throughput_mbps(), 100.0);
}

TEST(SampleLink, UnchangedCountersGiveZero) {
    const auto s = sample_link({5000, 700}, {5000, 700}, 1.0);
    EXPECT_EQ(s.rx_bytes_delta, 0u);
    EXPECT_EQ(s.rx_throughput_mbps(), 0.0);
}

TEST(SampleLink, ThirtyTwoBitWrap) {
    const auto s = sample_link({4'294'967'000, 0}, {704, 0}, 1.0, 0.0, CounterWidth::bits32);
    EXPECT_EQ(s.rx_bytes_delta, 1000u);
}

TEST(SampleLink, NonPositiveWindowRejected) {
    EXPECT_THROW(sample_link({0, 0}, {1, 1}, 0.0), Error);
}

TEST(CounterSnapshots, FixtureWrapsOnce) {
    std::ifstream in(source("fixtures/modem/iface_counters_10s.csv"));
    const auto snaps = read_counter_snapshots(in);
    ASSERT_GE(snaps.size(), 4u);
    const auto links = link_samples(snaps, CounterWidth::bits32);
    ASSERT_EQ(links.size(), snaps.size() - 1);
    EXPECT_EQ(links[1].rx_bytes_delta, 1'250'000u);
    EXPECT_EQ(links[2].rx_bytes_delta, 2'500'000u);
    for (const auto& l : links) EXPECT_LE(l.rx_throughput_mbps(), 20.0);
}

TEST(DriveTrace, FixtureHas322Samples) {
    const auto samples = read_drive_trace(source("fixtures/traces/near_322s.csv"));
    ASSERT_EQ(samples.size(), 322u);
    EXPECT_EQ(samples.front().t, 0.0);
    EXPECT_EQ(samples.back().t, 321.0);
    for (const auto& s : samples) EXPECT_NO_THROW(validate(s));
}

TEST(DriveTrace, HeaderOnlyIsEmpty) {
    std::istringstream in(std::string(kDriveTraceHeader) + "\n");
    EXPECT_TRUE(read_drive_trace(in).empty());
    std::istringstream none("");
    EXPECT_TRUE(read_drive_trace(none).empty());
}

TEST(DriveTrace, OutOfOrderNamesLine) {
    std::istringstream in(std::string(kDriveTraceHeader) +
                          "\n0,43.31,-1.98,-80,-10,12\n2,43.31,-1.98,-80,-10,12\n1,43.31,-1.98,-80,-10,12\n");
    try {
        read_drive_trace(in);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
    }
}

TEST(DriveTrace, OutOfRangeValueNamesField) {
    std::istringstream in(std::string(kDriveTraceHeader) + "\n0,43.31,-1.98,-80,-10,55\n");
    try {
        read_drive_trace(in);
        FAIL() << "expected RangeError";
    } catch (const RangeError& e) {
        EXPECT_EQ(e.field(), "sinr");
    }
}

TEST(DriveTrace, WriteReadRoundTrip) {
    const auto samples = read_drive_trace(source("fixtures/traces/near_322s.csv"));
    std::ostringstream out;
    write_drive_trace(out, samples);
    std::istringstream in(out.str());
    EXPECT_EQ(read_drive_trace(in), samples);
    EXPECT_EQ(out.str(), mlmon::test::slurp(source("fixtures/traces/near_322s.csv")));
}

TEST(Join, FixtureLogs) {
    JoinStats stats;
    const auto samples = join_modem_and_gps(timed("fixtures/modem/rfsts_30s.log"),
                                            timed("fixtures/modem/nmea_30s.log"), stats, 0.5);
    EXPECT_EQ(stats.rf_lines, 30u);
    EXPECT_EQ(stats.skipped_lines, 60u);
    EXPECT_EQ(stats.checksum_errors, 1u);
    EXPECT_EQ(stats.range_errors, 1u);
    EXPECT_EQ(stats.unpositioned, 1u);
    ASSERT_EQ(samples.size(), 29u);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        EXPECT_EQ(samples[i].source, Source::modem_log);
        EXPECT_NO_THROW(validate(samples[i]));
        if (i) EXPECT_GT(samples[i].t, samples[i - 1].t);
    }
    EXPECT_NEAR(samples.front().position.lat, 43.0 + 18.6187 / 60.0, 1e-9);
}

TEST(Join, NoFixWithinToleranceDrops) {
    JoinStats stats;
    const std::vector<TimedLine> modem{{10.0, "#RFSTS: 00101,1300,-85,-11,18"}};
    const std::vector<TimedLine> nmea{
        {12.0, with_checksum("GPGGA,123519,4315.642,N,00158.934,W,1,08,0.9,545.4,M,46.9,M,,")}};
    EXPECT_TRUE(join_modem_and_gps(modem, nmea, stats, 0.5).empty());
    EXPECT_EQ(stats.unpositioned, 1u);
    EXPECT_EQ(join_modem_and_gps(modem, nmea, stats, 2.0).size(), 1u);
}

TEST(Parsers, RandomInputNeverCrashes) {
    std::mt19937_64 rng(11);
    const std::string seeds[] = {R"(#RFSTS: "214 07",6300,-77,-9,15,0050,FF)",
                                 with_checksum("GPGGA,123519,4315.642,N,00158.934,W,1,08,0.9,545.4,M,46.9,M,,"),
                                 "0,43.31,-1.98,-80,-10,12"};
    for (int round = 0; round < 3000; ++round) {
        std::string s = seeds[round % 3];
        const int edits = 1 + static_cast<int>(rng() % 5);
        for (int e = 0; e < edits && !s.empty(); ++e) {
            const std::size_t at = rng() % s.size();
            if (rng() % 2) s[at] = static_cast<char>(rng() % 256);
            else s.erase(at, 1 + rng() % 4);
        }
        try {
            parse_modem_status_line(s);
        } catch (const Error&) {
        }
        try {
            parse_nmea(s);
        } catch (const Error&) {
        }
        try {
            std::istringstream in(std::string(kDriveTraceHeader) + "\n" + s + "\n");
            read_drive_trace(in);
        } catch (const Error&) {
        }
    }
}
