#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "t4c/clean.hpp"

using namespace t4c;
using namespace t4c::clean;
using testing::kOrigin;
using testing::offset;

namespace {

RoadGraph nodes_only(int n, double spacing = 200.0) {
    RoadGraph g;
    for (int i = 1; i <= n; ++i) g.nodes.emplace(i, testing::make_node(i, offset(kOrigin, spacing * i, 0)));
    return g;
}

void add(RoadGraph& g, NodeId u, NodeId v, const std::string& cls = "primary") {
    g.edges.push_back(testing::make_edge(g, u, v, cls));
}

// rows x cols grid of two-way primary roads, ids row-major from 1.
RoadGraph grid(int rows, int cols, double spacing = 200.0) {
    RoadGraph g;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const NodeId id = r * cols + c + 1;
            g.nodes.emplace(id, testing::make_node(id, offset(kOrigin, c * spacing, -r * spacing)));
        }
    }
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const NodeId id = r * cols + c + 1;
            if (c + 1 < cols) testing::add_pair(g, id, id + 1, "primary");
            if (r + 1 < rows) testing::add_pair(g, id, id + cols, "primary");
        }
    }
    return g;
}

Edge self_loop(const RoadGraph& g, NodeId n, double side_m) {
    Edge e = testing::make_edge(g, n, n, "tertiary");
    const LatLon p = g.node(n).position();
    e.geometry = {p, offset(p, side_m, 0), offset(p, side_m, side_m), offset(p, 0, side_m), p};
    e.length_m = 4 * side_m;
    return e;
}

std::size_t count_key(const RoadGraph& g, NodeId u, NodeId v) {
    std::size_t n = 0;
    for (const auto& e : g.edges) n += e.u == u && e.v == v;
    return n;
}

}  // namespace

TEST_CASE("no_access removes forbidden tags only") {
    RoadGraph g = nodes_only(2);
    add(g, 1, 2);
    add(g, 2, 1);
    add(g, 1, 2);
    g.edges[0].access = "private";
    g.edges[1].access = std::nullopt;
    g.edges[2].access = "yes";
    auto c = clean_no_access(g);
    CHECK(c.removed_edges == 1);
    CHECK(g.edges.size() == 2);
    for (const auto& e : g.edges) CHECK(e.access != std::optional<std::string>("private"));
}

TEST_CASE("low_volume thresholds") {
    RoadGraph g;
    g.nodes.emplace(1, testing::make_node(1, kOrigin));
    g.nodes.emplace(2, testing::make_node(2, offset(kOrigin, 80, 0)));
    g.nodes.emplace(3, testing::make_node(3, offset(kOrigin, 80, 40)));
    g.nodes.emplace(4, testing::make_node(4, offset(kOrigin, 80, -300)));
    add(g, 1, 2, "residential");  // 80 m
    add(g, 2, 3, "residential");  // 40 m
    add(g, 2, 4, "primary");

    SUBCASE("volume 9") {
        auto hm = testing::flat_heatmap(9.0);
        auto c = clean_low_volume(g, hm);
        CHECK(c.removed_edges == 1);
        CHECK(count_key(g, 1, 2) == 0);
        CHECK(count_key(g, 2, 3) == 1);
        CHECK(count_key(g, 2, 4) == 1);
    }
    SUBCASE("volume 10 is enough") {
        auto hm = testing::flat_heatmap(10.0);
        CHECK(clean_low_volume(g, hm).removed_edges == 0);
    }
    SUBCASE("counter node protects its edges") {
        g.node(1).counter_info = {"det"};
        auto hm = testing::flat_heatmap(0.0);
        CHECK(clean_low_volume(g, hm).removed_edges == 0);
    }
    SUBCASE("outside the heatmap reads as zero") {
        heatmap::VolumeHeatmap far({10.0, 10.1, 10.0, 10.1});
        std::fill(far.data().begin(), far.data().end(), 100.0);
        auto c = clean_low_volume(g, far);
        CHECK(c.removed_edges == 1);
        CHECK(c.outside_heatmap >= 1);
    }
}

TEST_CASE("dead ends cascade along a one-way path") {
    RoadGraph g = nodes_only(3);
    add(g, 1, 2);
    add(g, 2, 3);
    clean_dead_ends(g);
    CHECK(g.edges.empty());
    clean_isolates(g);
    CHECK(g.nodes.empty());
}

TEST_CASE("two-way cul-de-sac is removed, the loop it hangs off is kept") {
    RoadGraph g = nodes_only(4);
    for (auto [u, v] : std::vector<std::pair<NodeId, NodeId>>{{1, 2}, {2, 3}, {3, 1}}) add(g, u, v);
    add(g, 1, 4);
    add(g, 4, 1);
    auto c = clean_dead_ends(g);
    CHECK(c.removed_edges == 2);
    CHECK(g.edges.size() == 3);
    clean_isolates(g);
    CHECK_FALSE(g.has_node(4));
}

TEST_CASE("self-loops below 300 m") {
    RoadGraph g = nodes_only(2);
    g.edges.push_back(self_loop(g, 1, 62.5));   // 250 m
    g.edges.push_back(self_loop(g, 2, 100.0));  // 400 m
    auto c = clean_self_loops(g);
    CHECK(c.removed_edges == 1);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].u == 2);
}

TEST_CASE("no_neighbors drops nodes with only self-loops") {
    RoadGraph g = nodes_only(3);
    g.edges.push_back(self_loop(g, 1, 100.0));
    add(g, 2, 3);
    add(g, 3, 2);
    auto c = clean_no_neighbors(g);
    CHECK(c.removed_nodes == 1);
    CHECK(c.removed_edges == 1);
    CHECK_FALSE(g.has_node(1));
}

TEST_CASE("largest component") {
    SUBCASE("5 vs 3") {
        RoadGraph g = nodes_only(8);
        for (NodeId i = 1; i < 5; ++i) add(g, i, i + 1);
        add(g, 6, 7);
        add(g, 7, 8);
        largest_component(g);
        CHECK(g.nodes.size() == 5);
        CHECK(g.has_node(1));
    }
    SUBCASE("tie goes to the smallest id") {
        RoadGraph g = nodes_only(6);
        add(g, 4, 5);
        add(g, 5, 1);
        add(g, 2, 3);
        add(g, 3, 6);
        largest_component(g);
        CHECK(g.nodes.size() == 3);
        CHECK(g.has_node(1));
        CHECK(g.has_node(4));
    }
    SUBCASE("connected graph is unchanged") {
        RoadGraph g = grid(3, 3);
        const RoadGraph before = g;
        CHECK_FALSE(largest_component(g).changed());
        CHECK(g == before);
    }
    SUBCASE("empty graph") {
        RoadGraph g;
        CHECK_THROWS_AS(largest_component(g), std::invalid_argument);
    }
}

TEST_CASE("circle ramps") {
    SUBCASE("bypass node removed") {
        RoadGraph g = nodes_only(3);
        add(g, 1, 3);
        add(g, 3, 2);
        add(g, 1, 2);
        auto c = clean_circle_ramps(g);
        CHECK(c.removed_nodes == 1);
        CHECK_FALSE(g.has_node(3));
        CHECK(g.edges.size() == 1);
    }
    SUBCASE("no shortcut, node kept") {
        RoadGraph g = nodes_only(3);
        add(g, 1, 3);
        add(g, 3, 2);
        CHECK_FALSE(clean_circle_ramps(g).changed());
    }
    SUBCASE("two ramp nodes go after iteration") {
        // 4 bypasses 1->3; once it is gone 3 bypasses 1->2.
        RoadGraph g = nodes_only(4);
        add(g, 1, 2);
        add(g, 1, 3);
        add(g, 3, 2);
        add(g, 1, 4);
        add(g, 4, 3);
        auto c = clean_circle_ramps(g);
        CHECK(c.removed_nodes == 2);
        CHECK(g.edges.size() == 1);
        CHECK(count_key(g, 1, 2) == 1);
    }
    SUBCASE("counter node kept") {
        RoadGraph g = nodes_only(3);
        add(g, 1, 3);
        add(g, 3, 2);
        add(g, 1, 2);
        g.node(3).counter_info = {"d"};
        CHECK_FALSE(clean_circle_ramps(g).changed());
    }
}

TEST_CASE("multi-edges") {
    SUBCASE("longer duplicate split at its midpoint") {
        RoadGraph g = nodes_only(2, 100.0);
        add(g, 1, 2);
        Edge longer = testing::make_edge(g, 1, 2);
        const LatLon a = g.node(1).position();
        const LatLon b = g.node(2).position();
        longer.geometry = {a, offset(geo::lerp(a, b, 0.5), 0, 33.166), b};
        longer.length_m = 120.0;
        g.edges.push_back(longer);
        g.edges[0].length_m = 100.0;
        auto c = clean_multi_edges(g);
        CHECK(c.added_nodes == 1);
        CHECK(g.edges.size() == 3);
        CHECK(count_key(g, 1, 2) == 1);
        CHECK(g.edges[g.find_edge(1, 2).value()].length_m == 100.0);
        double split_total = 0.0;
        for (const auto& e : g.edges) {
            if (e.u == 1 && e.v == 2) continue;
            CHECK(e.length_m == doctest::Approx(60.0));
            split_total += e.length_m;
        }
        CHECK(split_total == doctest::Approx(120.0));
        for (const auto& [id, n] : g.nodes) {
            if (id > 2) CHECK(n.origin == std::string(kOriginMultiEdgeSplit));
        }
    }
    SUBCASE("triple") {
        RoadGraph g = nodes_only(2, 100.0);
        for (double len : {130.0, 100.0, 120.0}) {
            add(g, 1, 2);
            g.edges.back().length_m = len;
        }
        clean_multi_edges(g);
        CHECK(count_key(g, 1, 2) == 1);
        CHECK(g.nodes.size() == 4);
        std::set<std::pair<NodeId, NodeId>> keys;
        for (const auto& e : g.edges) CHECK(keys.emplace(e.u, e.v).second);
    }
    SUBCASE("single edge unchanged") {
        RoadGraph g = nodes_only(2);
        add(g, 1, 2);
        CHECK_FALSE(clean_multi_edges(g).changed());
    }
}

TEST_CASE("clean graph passes through unchanged") {
    const RoadGraph g = grid(4, 4);
    CleanReport rep;
    RoadGraph out = clean_pipeline(g, testing::flat_heatmap(50.0), &rep);
    CHECK(out == g);
    CHECK(rep.all_zero());
}

TEST_CASE("hand-built messy fixture") {
    RoadGraph g = grid(3, 3);
    // private diagonal, residential diagonal on a quiet heatmap, spur,
    // short self-loop, isolate, detached pair and a bent parallel edge
    add(g, 1, 9, "primary");
    g.edges.back().access = "private";
    testing::add_pair(g, 4, 8, "residential");
    g.nodes.emplace(10, testing::make_node(10, offset(kOrigin, -150, 0)));
    testing::add_pair(g, 1, 10, "tertiary");
    g.edges.push_back(self_loop(g, 5, 25.0));
    g.nodes.emplace(11, testing::make_node(11, offset(kOrigin, 1000, 1000)));
    g.nodes.emplace(12, testing::make_node(12, offset(kOrigin, 2000, 0)));
    g.nodes.emplace(13, testing::make_node(13, offset(kOrigin, 2200, 0)));
    testing::add_pair(g, 12, 13, "primary");
    Edge bent = testing::make_edge(g, 2, 3, "primary");
    bent.geometry = {g.node(2).position(), offset(g.node(2).position(), 100, 60), g.node(3).position()};
    bent.length_m = geo::polyline_length_m(bent.geometry);
    g.edges.push_back(bent);

    CleanReport rep;
    RoadGraph out = clean_pipeline(g, testing::flat_heatmap(5.0), &rep);

    CHECK(out.nodes.size() == 10);
    CHECK(out.edges.size() == 26);
    for (NodeId id = 1; id <= 9; ++id) CHECK(out.has_node(id));
    std::size_t split_nodes = 0;
    for (const auto& [_, n] : out.nodes) split_nodes += n.origin == std::string(kOriginMultiEdgeSplit);
    CHECK(split_nodes == 1);
    CHECK(count_key(out, 1, 9) == 0);
    CHECK(count_key(out, 4, 8) == 0);
    CHECK(count_key(out, 2, 3) == 1);
    CHECK(out.total_length_m() == doctest::Approx(grid(3, 3).total_length_m() + bent.length_m).epsilon(1e-9));

    const auto steps = rep.totals();
    std::map<std::string, StepCounts> totals(steps.begin(), steps.end());
    CHECK(totals["clean_no_access"].removed_edges == 1);
    CHECK(totals["clean_low_volume"].removed_edges == 2);
    CHECK(totals["clean_multi_edges"].added_nodes == 1);
    CHECK(rep.nodes_before == 13);
    CHECK(rep.nodes_after == 10);
}

TEST_CASE("random messy graphs satisfy the post-clean invariants") {
    std::mt19937_64 rng(2024);
    const CleanConfig cfg;
    for (int rep = 0; rep < 20; ++rep) {
        heatmap::VolumeHeatmap hm;
        RoadGraph g = testing::random_messy_graph(rng, testing::uniform_int(rng, 20, 200), &hm);
        std::set<NodeId> original;
        for (const auto& [id, _] : g.nodes) original.insert(id);

        CleanReport report;
        RoadGraph out = clean_pipeline(g, hm, &report);
        CHECK(testing::clean_violations(out, original, cfg).empty());
        CHECK(report.nodes_after == out.nodes.size());
        CHECK(clean_pipeline(out, hm) == out);
    }
}
