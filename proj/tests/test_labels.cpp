#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "t4c/errors.hpp"
#include "t4c/labels.hpp"

using namespace t4c;
using namespace t4c::labels;

namespace {

Edge plain_edge(NodeId u, NodeId v, double length, double maxspeed) {
    Edge e;
    e.u = u;
    e.v = v;
    e.length_m = length;
    e.maxspeed_kph = maxspeed;
    e.highway_class = "residential";
    return e;
}

}  // namespace

TEST_CASE("congestion class truth table") {
    const double ff = 100.0;
    for (const auto& [factor, row] : testing::kCcTable) {
        for (int vol = 0; vol <= 6; ++vol) {
            CAPTURE(factor);
            CAPTURE(vol);
            CHECK(extract_cc(testing::speed_stat(factor * ff, vol), ff) == row[vol] - '0');
            CHECK(extract_cc(testing::speed_stat(factor * ff, vol, 0), ff) == 0);
            CHECK(extract_cc(testing::speed_stat(factor * ff, vol, 255), ff) == 0);
        }
    }
    CHECK(extract_cc(testing::speed_stat(30, 5), 100) == 3);
    CHECK(extract_cc(testing::speed_stat(50, 2), 100) == 0);
    CHECK_THROWS_AS(extract_cc(testing::speed_stat(50, 5), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(extract_cc(testing::speed_stat(50, 5), -1.0), std::invalid_argument);
    // sentinels win over a bad free-flow speed
    CHECK(extract_cc(testing::speed_stat(50, 5, 255), 0.0) == 0);
}

TEST_CASE("speed schedule defaults") {
    const std::vector<Edge> edges{plain_edge(1, 2, 100, 50), plain_edge(2, 3, 100, 30)};
    SUBCASE("free flow, then maxspeed") {
        auto s = build_edge_speed_schedule(edges, {{1, 2, 50.0}}, {});
        for (int t = 0; t < 96; ++t) {
            CHECK(s.find({1, 2})->speeds[t] == 50.0);
            CHECK(s.find({1, 2})->sources[t] == SpeedSource::kFreeFlow);
            CHECK(s.find({2, 3})->speeds[t] == 30.0);
            CHECK(s.find({2, 3})->sources[t] == SpeedSource::kMaxspeed);
        }
        CHECK(s.maxspeed_only == 1);
    }
    SUBCASE("current speed overrides one bin") {
        auto s = build_edge_speed_schedule(edges, {{1, 2, 50.0}}, {testing::speed_stat(12.0, 4, 100, 10)});
        const EdgeSpeeds& e = *s.find({1, 2});
        CHECK(e.speeds[10] == 12.0);
        CHECK(e.sources[10] == SpeedSource::kCurrent);
        CHECK(e.speeds[9] == 50.0);
        CHECK(e.sources[11] == SpeedSource::kFreeFlow);
    }
    SUBCASE("zero speeds and unknown edges are counted, not applied") {
        auto s = build_edge_speed_schedule(edges, {{1, 2, 50.0}},
                                           {testing::speed_stat(0.0, 4, 0, 10), testing::speed_stat(20.0, 4, 100, 3, 7, 8)});
        CHECK(s.find({1, 2})->speeds[10] == 50.0);
        CHECK(s.zero_speed_stats == 1);
        CHECK(s.unknown_stats == 1);
    }
    SUBCASE("duplicate stats are rejected") {
        CHECK_THROWS_AS(build_edge_speed_schedule(edges, {}, {testing::speed_stat(12, 4, 100, 10), testing::speed_stat(13, 4, 100, 10)}),
                        ValidationError);
    }
}

TEST_CASE("worked ETA examples") {
    SuperSegment ss;
    auto a = testing::schedule_of({1000.0}, {std::vector<double>(96, 36.0)}, &ss);
    CHECK(compute_eta(ss, a, 40) == 100.0);

    auto b = testing::schedule_of({100.0}, {std::vector<double>(96, 0.2)}, &ss);
    CHECK(compute_eta(ss, b, 40) == doctest::Approx(720.0).epsilon(1e-15));
    CHECK(compute_eta(ss, b, 40) == testing::reference_eta({100.0}, {std::vector<double>(96, 0.2)}, 40));

    auto c = testing::schedule_of({1000.0}, {std::vector<double>(96, 1.0)}, &ss);
    CHECK(compute_eta(ss, c, 40) == doctest::Approx(5400.0).epsilon(1e-15));
    // window truncates at both ends of the day
    CHECK(compute_eta(ss, c, 0) == doctest::Approx(5400.0).epsilon(1e-15));
    CHECK(compute_eta(ss, c, 95) == doctest::Approx(5400.0).epsilon(1e-15));

    // the fallback averages unclipped speeds
    auto d = testing::schedule_of({1000.0}, {std::vector<double>(96, 0.2)}, &ss);
    CHECK(compute_eta(ss, d, 40) == doctest::Approx(1800.0 + 1000.0 / (0.2 / 3.6)).epsilon(1e-15));
    auto z = testing::schedule_of({1000.0}, {std::vector<double>(96, 0.0)}, &ss);
    CHECK_THROWS_AS(compute_eta(ss, z, 40), std::domain_error);

    CHECK_THROWS_AS(compute_eta(ss, c, 96), std::out_of_range);
    CHECK_THROWS_AS(compute_eta(ss, c, -1), std::out_of_range);
    SuperSegment missing{"m", {{5, 6}}};
    CHECK_THROWS_AS(compute_eta(missing, c, 3), std::invalid_argument);
}

TEST_CASE("ETA matches the reference procedure on random schedules") {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 500; ++rep) {
        const int n = testing::uniform_int(rng, 1, 6);
        std::vector<double> lengths;
        std::vector<std::vector<double>> speeds;
        for (int i = 0; i < n; ++i) {
            lengths.push_back(testing::uniform(rng, 5, 3000));
            std::vector<double> s(96);
            for (auto& x : s) x = uniform01(rng) < 0.2 ? testing::uniform(rng, 0.01, 3) : testing::uniform(rng, 1, 120);
            speeds.push_back(s);
        }
        SuperSegment ss;
        auto sch = testing::schedule_of(lengths, speeds, &ss);
        const int t = testing::uniform_int(rng, 0, 95);
        CHECK(std::abs(compute_eta(ss, sch, t) - testing::reference_eta(lengths, speeds, t)) < 1e-6);
    }
}

TEST_CASE("ETA properties") {
    std::mt19937_64 rng(37);
    for (int rep = 0; rep < 200; ++rep) {
        EdgeSpeeds e;
        e.length_m = testing::uniform(rng, 10, 3000);
        for (auto& s : e.speeds) s = testing::uniform(rng, 0.1, 100);
        const int t = testing::uniform_int(rng, 0, 95);
        const double base = edge_eta(e, t);
        double slowest = e.speeds[t];
        for (int s = std::max(t - 1, 0); s <= std::min(t + 1, 95); ++s) slowest = std::min(slowest, e.speeds[s]);
        CHECK(base <= 1800.0 + e.length_m / (slowest / 3.6) + 1e-9);

        // monotone non-increasing in any one speed
        const int slot = std::clamp(t + testing::uniform_int(rng, -1, 1), 0, 95);
        EdgeSpeeds faster = e;
        faster.speeds[slot] *= testing::uniform(rng, 1.0, 5.0);
        CHECK(edge_eta(faster, t) <= base + 1e-9);
    }

    // additivity over concatenated paths
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> lengths;
        std::vector<std::vector<double>> speeds;
        for (int i = 0; i < 6; ++i) {
            lengths.push_back(testing::uniform(rng, 10, 2000));
            std::vector<double> s(96);
            for (auto& x : s) x = testing::uniform(rng, 0.2, 90);
            speeds.push_back(s);
        }
        SuperSegment whole;
        auto sch = testing::schedule_of(lengths, speeds, &whole);
        SuperSegment p1{"p1", {whole.edges.begin(), whole.edges.begin() + 2}};
        SuperSegment p2{"p2", {whole.edges.begin() + 2, whole.edges.end()}};
        const int t = testing::uniform_int(rng, 0, 95);
        CHECK(compute_eta(whole, sch, t) ==
              doctest::Approx(compute_eta(p1, sch, t) + compute_eta(p2, sch, t)).epsilon(1e-12));
    }
}

TEST_CASE("label_city on a small fixture day") {
    RoadGraph g;
    for (NodeId i = 1; i <= 3; ++i) g.nodes.emplace(i, testing::make_node(i, testing::offset(testing::kOrigin, 300.0 * i, 0)));
    g.edges = {plain_edge(1, 2, 500, 50), plain_edge(2, 3, 250, 30)};
    const std::vector<FreeFlow> ff{{1, 2, 40.0}};
    const std::vector<SegmentSpeedStats> stats{testing::speed_stat(10.0, 6, 100, 8), testing::speed_stat(30.0, 3, 100, 9), testing::speed_stat(36.0, 1, 100, 10),
                                               testing::speed_stat(20.0, 9, 100, 8, 2, 3)};
    const std::vector<SuperSegment> sss{{"a", {{1, 2}, {2, 3}}}};
    auto r = label_city(g, sss, stats, ff, "2022-01-03");

    CHECK(r.cc_labels.size() == 2 * 96);
    CHECK(r.eta_labels.size() == 96);
    std::map<std::pair<EdgeKey, int>, int> cc;
    for (const auto& l : r.cc_labels) {
        CHECK(l.day == "2022-01-03");
        cc[{l.key(), l.t}] = l.cc;
    }
    CHECK(cc[{{1, 2}, 8}] == 3);   // 10/40 = 0.25, volume 6
    CHECK(cc[{{1, 2}, 9}] == 2);   // 0.75, volume 3
    CHECK(cc[{{1, 2}, 10}] == 1);  // 0.9, volume 1
    CHECK(cc[{{1, 2}, 11}] == 0);  // no stats
    CHECK(cc[{{2, 3}, 8}] == 0);   // no free-flow speed
    CHECK(r.stats_without_free_flow == 1);

    std::map<int, double> eta;
    for (const auto& l : r.eta_labels) eta[l.t] = l.eta_s;
    CHECK(eta[0] == doctest::Approx(500 / (40 / 3.6) + 250 / (30 / 3.6)));
    CHECK(eta[8] == doctest::Approx(500 / (10 / 3.6) + 250 / (20 / 3.6)));
    CHECK(eta[9] == doctest::Approx(500 / (30 / 3.6) + 250 / (30 / 3.6)));

    const std::vector<SuperSegment> bad{{"b", {{3, 1}}}};
    CHECK_THROWS_AS(label_city(g, bad, stats, ff), ValidationError);
}

TEST_CASE("stats days") {
    std::vector<SegmentSpeedStats> s{testing::speed_stat(1, 1), testing::speed_stat(2, 2), testing::speed_stat(3, 3)};
    s[0].day = "2022-01-04";
    s[1].day = "2022-01-03";
    s[2].day = "2022-01-04";
    CHECK(stats_days(s) == std::vector<std::string>{"2022-01-03", "2022-01-04"});
    CHECK(stats_for_day(s, "2022-01-04").size() == 2);
}
