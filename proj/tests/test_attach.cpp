#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "t4c/attach.hpp"
#include "t4c/errors.hpp"

using namespace t4c;
using namespace t4c::attach;
using testing::kOrigin;
using testing::long_road;
using testing::offset;
using testing::sum_counts;

TEST_CASE("5-minute windows sum into 15-minute bins") {
    RawDetectorSeries raw;
    raw.detector_id = "d";
    raw.interval_minutes = 5;
    raw.values.assign(288, std::nullopt);
    raw.values[0] = 2;
    raw.values[1] = 3;
    raw.values[2] = 4;
    raw.values[4] = 7;  // bin 1 partly missing
    DetectorDay d = normalize_counts(raw);
    CHECK(d.counts[0] == 9.0);
    CHECK(d.counts[1] == 7.0);
    CHECK_FALSE(d.counts[2].has_value());

    RawDetectorSeries binned;
    binned.interval_minutes = 15;
    for (int i = 0; i < 96; ++i) binned.values.push_back(i % 5 == 0 ? std::nullopt : std::optional<double>(i));
    DetectorDay p = normalize_counts(binned);
    for (int i = 0; i < 96; ++i) CHECK(p.counts[i] == binned.values[i]);

    binned.values.pop_back();
    CHECK_THROWS_AS(normalize_counts(binned), std::invalid_argument);
}

TEST_CASE("snap thresholds on boundary fixtures") {
    const RoadGraph g = long_road();
    const AttachConfig cfg;

    SUBCASE("39.9 m from a node assigns to it") {
        auto d = snap_detector(g, offset(kOrigin, 39.9, 0), cfg);
        CHECK(d.action == SnapAction::kAssignNode);
        CHECK(d.node == 1);
    }
    SUBCASE("40.1 m from a node on the road splits") {
        auto d = snap_detector(g, offset(kOrigin, 40.1, 0), cfg);
        CHECK(d.action == SnapAction::kSplitEdge);
        CHECK(d.fraction == doctest::Approx(40.1 / 400.0).epsilon(1e-4));
    }
    SUBCASE("19.9 m beside the midpoint splits") {
        auto d = snap_detector(g, offset(kOrigin, 200, 19.9), cfg);
        CHECK(d.action == SnapAction::kSplitEdge);
        CHECK(d.distance_m == doctest::Approx(19.9).epsilon(1e-3));
    }
    SUBCASE("20.1 m beside the midpoint is discarded") {
        auto d = snap_detector(g, offset(kOrigin, 200, 20.1), cfg);
        CHECK(d.action == SnapAction::kDiscard);
    }
    SUBCASE("projection within 40 m of an endpoint assigns to the endpoint") {
        // 40.85 m from A, projection 38 m along the road
        auto e = snap_detector(g, offset(kOrigin, 38, 15), cfg);
        CHECK(e.action == SnapAction::kAssignEndpoint);
        CHECK(e.node == 1);
    }
}

TEST_CASE("snap examples and errors") {
    const RoadGraph g = long_road();
    CHECK(snap_detector(g, offset(kOrigin, 400, 10)).node == 2);
    CHECK(snap_detector(g, offset(kOrigin, 200, 5)).action == SnapAction::kSplitEdge);
    CHECK(snap_detector(g, offset(kOrigin, 200, 30)).action == SnapAction::kDiscard);
    CHECK_THROWS_AS(snap_detector(RoadGraph{}, kOrigin), std::invalid_argument);
}

TEST_CASE("split_edge conserves length and geometry") {
    RoadGraph g = long_road();
    g.edges[0].length_m = 100.0;
    auto r = split_edge(g, 0, 0.25);
    CHECK(g.edges[r.first].length_m == doctest::Approx(25.0));
    CHECK(g.edges[r.second].length_m == doctest::Approx(75.0));
    CHECK(g.node(r.node).origin == std::string(kOriginDetectorSplit));
    CHECK(g.edges[r.first].geometry.back() == g.node(r.node).position());
    CHECK(g.edges[r.second].geometry.front() == g.node(r.node).position());
    CHECK(g.edges.size() == 3);

    RoadGraph h = long_road();
    auto m = split_edge(h, 0, 0.5);
    const LatLon mid = geo::lerp(kOrigin, offset(kOrigin, 400, 0), 0.5);
    CHECK(geo::haversine_m(h.node(m.node).position(), mid) < 0.01);

    CHECK_THROWS_AS(split_edge(h, 0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(split_edge(h, 0, 1.0), std::invalid_argument);
}

TEST_CASE("repeated splits of one edge sum to the original length") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        RoadGraph g = long_road();
        const double total = g.total_length_m();
        for (int i = 0; i < 8; ++i) {
            split_edge(g, uniform_below(rng, g.edges.size()), testing::uniform(rng, 0.05, 0.95));
        }
        CHECK(std::abs(g.total_length_m() - total) < 0.01);
    }
}

TEST_CASE("co-located detectors add up") {
    BinCounts a, b, c;
    a[0] = 3;
    b[0] = 4;
    a[1] = 3;
    c.fill(std::nullopt);
    auto rows = aggregate_colocated({{5, "b", "2022-01-03", b}, {5, "a", "2022-01-03", a}});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].counts[0] == 7.0);
    CHECK(rows[0].counts[1] == 3.0);
    CHECK_FALSE(rows[0].counts[2].has_value());
    CHECK(rows[0].detectors == std::vector<std::string>{"a", "b"});

    auto single = aggregate_colocated({{5, "a", "2022-01-03", a}});
    CHECK(single[0].counts == a);
}

TEST_CASE("split_value") {
    CHECK(split_value(12.0, 3) == 4.0);
    CHECK(split_value(12.0, 1) == 12.0);
    CHECK_FALSE(split_value(std::nullopt, 3).has_value());
    CHECK_THROWS_AS(split_value(1.0, 0), std::invalid_argument);
}

TEST_CASE("merged detector splits its value across the nodes it reaches") {
    RoadGraph g = long_road();
    DetectorDay s1, s2;
    s1.detector_id = s2.detector_id = "m";
    s1.day = s2.day = "2022-01-03";
    s1.counts[0] = s2.counts[0] = 12.0;
    const LatLon p1 = offset(kOrigin, 5, 5);
    const LatLon p2 = offset(kOrigin, 395, 5);
    s1.lat = p1.lat;
    s1.lon = p1.lon;
    s2.lat = p2.lat;
    s2.lon = p2.lon;
    auto r = attach_detectors(g, {s1, s2});
    REQUIRE(r.mapping.at("m").size() == 2);
    for (const auto& row : r.node_counts) CHECK(row.counts[0] == 6.0);
    CHECK(r.graph.node(1).num_assigned == 2);
    CHECK(r.graph.node(1).counter_info == std::vector<std::string>{"m"});
}

TEST_CASE("random placements conserve counts and length") {
    std::mt19937_64 rng(19);
    for (int rep = 0; rep < 50; ++rep) {
        RoadGraph g = testing::random_messy_graph(rng, 40);
        const double length_before = g.total_length_m();
        const auto dets = testing::random_detectors(rng, 15);
        auto r = attach_detectors(g, dets);
        CHECK(std::abs(testing::attach_count_gap(dets, r)) <= 1e-9);
        CHECK(r.mapping.size() + r.discarded.size() == dets.size());
        CHECK(std::abs(r.graph.total_length_m() - length_before) <= 0.01);

        for (const auto& s : r.sites) {
            if (!s.node) continue;
            const double d = geo::haversine_m(s.location, r.graph.node(*s.node).position());
            if (s.decision.action == SnapAction::kAssignNode) CHECK(d < 40.0);
            else CHECK(s.decision.distance_m <= 20.0);
        }
        // deterministic
        CHECK(attach_detectors(g, dets).graph == r.graph);
    }
}

TEST_CASE("duplicate detector rows are rejected") {
    DetectorDay d;
    d.detector_id = "x";
    d.day = "2022-01-03";
    d.lat = kOrigin.lat;
    d.lon = kOrigin.lon;
    CHECK_THROWS_AS(attach_detectors(long_road(), {d, d}), ValidationError);
}
