#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "t4c/supersegments.hpp"

using namespace t4c;
using namespace t4c::supersegments;
using testing::kOrigin;
using testing::offset;

using testing::keys_of;
using testing::log_of;
using testing::oracle_weight;
using testing::star;

TEST_CASE("edge weight") {
    Edge e;
    e.length_m = 100.0;
    e.importance = 5;
    CHECK(edge_weight(e) == 50.0);
    e.importance = 0;
    CHECK(edge_weight(e) == 300.0);
    e.length_m = 0.0;
    CHECK(edge_weight(e) == 0.0);
}

TEST_CASE("key intersection selection") {
    // Star: center 1 with 4 two-way spokes.
    RoadGraph g;
    g.nodes.emplace(1, testing::make_node(1, kOrigin));
    for (NodeId i = 2; i <= 5; ++i) {
        g.nodes.emplace(i, testing::make_node(i, offset(kOrigin, 100.0 * (i - 1), 50.0 * (i % 2))));
        testing::add_pair(g, 1, i);
    }
    std::vector<double> vol(g.edges.size(), 10.0);
    vol[0] = 100.0;  // 1 -> 2
    auto k = select_key_intersections(g, vol, {});
    CHECK(k.node_ids == std::vector<NodeId>{1});
    CHECK(k.scores.size() == 1);
    CHECK(k.scores.at(1) == doctest::Approx(100.0 * 1.0 / 6.0));

    SUBCASE("degree 2 everywhere gives nothing but the whitelist") {
        RoadGraph path;
        for (NodeId i = 1; i <= 4; ++i) path.nodes.emplace(i, testing::make_node(i, offset(kOrigin, 100.0 * i, 0)));
        for (NodeId i = 1; i < 4; ++i) testing::add_pair(path, i, i + 1);
        auto kk = select_key_intersections(path, std::vector<double>(path.edges.size(), 50.0), {3, 77});
        CHECK(kk.node_ids == std::vector<NodeId>{3});
        CHECK(kk.whitelisted == 1);
    }
    SUBCASE("neighbors of chosen nodes are dropped") {
        RoadGraph two = g;
        for (NodeId i = 6; i <= 8; ++i) {
            two.nodes.emplace(i, testing::make_node(i, offset(kOrigin, 500.0, 100.0 * i)));
            testing::add_pair(two, 2, i);
        }
        std::vector<double> v2(two.edges.size(), 10.0);
        v2[0] = 100.0;
        auto kk = select_key_intersections(two, v2, {});
        // node 2 has 4 neighbors and ties node 1 on volume; 1 wins, 2 is its neighbor
        CHECK(kk.node_ids == std::vector<NodeId>{1});
    }
}

TEST_CASE("two keys joined by a single path") {
    RoadGraph g;
    for (NodeId i = 1; i <= 3; ++i) g.nodes.emplace(i, testing::make_node(i, offset(kOrigin, 200.0 * i, 0)));
    g.edges.push_back(testing::make_edge(g, 1, 2));
    g.edges.push_back(testing::make_edge(g, 2, 3));
    auto r = sample_supersegments(g, keys_of({1, 3}));
    REQUIRE(r.supersegments.size() == 1);
    CHECK(r.supersegments[0].ssid == "ss_1_3");
    CHECK(r.supersegments[0].edges == std::vector<EdgeKey>{{1, 2}, {2, 3}});
    CHECK_THROWS_AS(sample_supersegments(g, keys_of({})), std::invalid_argument);
}

TEST_CASE("equal-weight paths resolve to the smallest node sequence") {
    // 1 -> 2 -> 4 and 1 -> 3 -> 4 have the same weight.
    RoadGraph g;
    g.nodes.emplace(1, testing::make_node(1, kOrigin));
    g.nodes.emplace(3, testing::make_node(3, offset(kOrigin, 100, 100)));
    g.nodes.emplace(2, testing::make_node(2, offset(kOrigin, 100, -100)));
    g.nodes.emplace(4, testing::make_node(4, offset(kOrigin, 200, 0)));
    for (auto [u, v] : std::vector<std::pair<NodeId, NodeId>>{{1, 3}, {3, 4}, {1, 2}, {2, 4}}) {
        g.edges.push_back(testing::make_edge(g, u, v));
        g.edges.back().length_m = 100.0;
    }
    ShortestPaths sp(g, 1);
    CHECK(sp.nodes(4) == std::vector<NodeId>{1, 2, 4});
    CHECK(sp.weight(4) == 600.0);
}

TEST_CASE("sampled super-segments are optimal on random small graphs") {
    std::mt19937_64 rng(99);
    for (int rep = 0; rep < 100; ++rep) {
        RoadGraph g = testing::random_small_graph(rng);
        std::vector<NodeId> ids;
        for (const auto& [id, _] : g.nodes) {
            if (uniform01(rng) < 0.7) ids.push_back(id);
        }
        if (ids.empty()) ids.push_back(g.nodes.begin()->first);
        auto r = sample_supersegments(g, keys_of(ids));
        std::set<std::pair<NodeId, NodeId>> pairs;
        for (const auto& ss : r.supersegments) {
            REQUIRE_FALSE(ss.edges.empty());
            CHECK(testing::is_simple_chain(ss.edges));
            CHECK(pairs.emplace(ss.source(), ss.target()).second);
            const double brute = testing::brute_force_min_weight(g, ss.source(), ss.target(), oracle_weight);
            CHECK(testing::path_weight(g, ss.edges) == doctest::Approx(brute).epsilon(1e-12));
        }
        // Dijkstra itself against brute force for every pair
        for (NodeId s : ids) {
            ShortestPaths sp(g, s);
            for (const auto& [t, _] : g.nodes) {
                if (t == s) continue;
                const double brute = testing::brute_force_min_weight(g, s, t, oracle_weight);
                CHECK(sp.reachable(t) == std::isfinite(brute));
                if (sp.reachable(t)) CHECK(sp.weight(t) == doctest::Approx(brute).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("more than three found ends the search") {
    std::vector<std::pair<LatLon, double>> leaves;
    for (int i = 0; i < 5; ++i) leaves.push_back({offset(kOrigin, 100.0 + 50.0 * i, 0), 100.0 + 50.0 * i});
    RoadGraph g = star(leaves);
    auto r = sample_supersegments(g, keys_of({1, 2, 3, 4, 5, 6}));
    const auto& l = log_of(r, 1);
    CHECK(l.found == 4);
    CHECK(l.reason == StopReason::kTooMany);
    std::vector<std::string> from1;
    for (const auto& ss : r.supersegments) {
        if (ss.source() == 1) from1.push_back(ss.ssid);
    }
    CHECK(from1 == std::vector<std::string>{"ss_1_2", "ss_1_3", "ss_1_4", "ss_1_5"});
}

TEST_CASE("a super-segment longer than 10 km ends the search") {
    // Both targets fall in the last circle; the nearer one by beeline has a
    // 12 km path and is taken first.
    RoadGraph g = star({{offset(kOrigin, 6000, 0), 12000.0}, {offset(kOrigin, -8000, 0), 8500.0}});
    auto r = sample_supersegments(g, keys_of({1, 2, 3}));
    const auto& l = log_of(r, 1);
    CHECK(l.found == 1);
    CHECK(l.reason == StopReason::kTooFar);
    bool has_12 = false, has_13 = false;
    for (const auto& ss : r.supersegments) {
        has_12 |= ss.ssid == "ss_1_2";
        has_13 |= ss.ssid == "ss_1_3";
    }
    CHECK(has_12);
    CHECK_FALSE(has_13);
}

TEST_CASE("search stops after the fourth circle") {
    // 12 km beeline is beyond every circle.
    RoadGraph g = star({{offset(kOrigin, 1800, 0), 2000.0}, {offset(kOrigin, 12000, 0), 12000.0}});
    auto r = sample_supersegments(g, keys_of({1, 2, 3}));
    const auto& l = log_of(r, 1);
    CHECK(l.found == 1);
    CHECK(l.reason == StopReason::kCirclesExhausted);

    SearchConfig two;
    two.max_circles = 2;
    RoadGraph h = star({{offset(kOrigin, 4000, 0), 4500.0}, {offset(kOrigin, 2000, 0), 2100.0}});
    auto r2 = sample_supersegments(h, keys_of({1, 2, 3}), two);
    CHECK(log_of(r2, 1).found == 1);
    CHECK(r2.supersegments.front().ssid == "ss_1_3");
}

TEST_CASE("whitelist super-segments") {
    RoadGraph g;
    for (NodeId i = 1; i <= 3; ++i) g.nodes.emplace(i, testing::make_node(i, offset(kOrigin, 200.0 * i, 0)));
    testing::add_pair(g, 1, 2);
    testing::add_pair(g, 2, 3);
    std::vector<SuperSegment> wl{{"custom", {{3, 2}, {2, 1}}},  // duplicate pair of ss_3_1
                                 {"missing", {{1, 3}}},
                                 {"ok", {{2, 3}}}};
    auto r = sample_supersegments(g, keys_of({1, 3}), {}, wl);
    CHECK(r.skipped_whitelist == std::vector<std::string>{"custom", "missing"});
    CHECK(r.supersegments.back().ssid == "ok");
    CHECK(r.supersegments.size() == 3);
}

TEST_CASE("sampling is deterministic") {
    std::mt19937_64 rng(5);
    RoadGraph g = testing::random_small_graph(rng);
    std::vector<NodeId> ids;
    for (const auto& [id, _] : g.nodes) ids.push_back(id);
    auto a = sample_supersegments(g, keys_of(ids));
    auto b = sample_supersegments(g, keys_of(ids));
    CHECK(a.supersegments == b.supersegments);
}
