#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "t4c/geo.hpp"
#include "t4c/heatmap.hpp"
#include "t4c/rng.hpp"
#include "t4c/types.hpp"

namespace testing {

using namespace t4c;

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("t4c_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return lo + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

inline const LatLon kOrigin{48.2, 16.37};

inline LatLon offset(LatLon from, double east_m, double north_m) {
    const double dlat = north_m / geo::kEarthRadiusM * 180.0 / M_PI;
    const double dlon = east_m / (geo::kEarthRadiusM * std::cos(from.lat * M_PI / 180.0)) * 180.0 / M_PI;
    return {from.lat + dlat, from.lon + dlon};
}

inline Node make_node(NodeId id, LatLon p) {
    Node n;
    n.node_id = id;
    n.lat = p.lat;
    n.lon = p.lon;
    return n;
}

inline Edge make_edge(const RoadGraph& g, NodeId u, NodeId v, const std::string& highway = "residential") {
    Edge e;
    e.u = u;
    e.v = v;
    e.highway_class = highway;
    e.importance = importance_for_highway(highway);
    e.maxspeed_kph = 50.0;
    e.geometry = {g.node(u).position(), g.node(v).position()};
    e.length_m = std::max(0.5, geo::haversine_m(e.geometry.front(), e.geometry.back()));
    return e;
}

inline void add_pair(RoadGraph& g, NodeId a, NodeId b, const std::string& highway = "residential") {
    g.edges.push_back(make_edge(g, a, b, highway));
    g.edges.push_back(make_edge(g, b, a, highway));
}

/// A heatmap whose bounding box spans `extent_m` around kOrigin and holds
/// `value` in every cell.
inline heatmap::VolumeHeatmap flat_heatmap(double value, double extent_m = 4000.0) {
    const LatLon sw = offset(kOrigin, -extent_m, -extent_m);
    const LatLon ne = offset(kOrigin, extent_m, extent_m);
    heatmap::VolumeHeatmap hm({sw.lat, ne.lat, sw.lon, ne.lon});
    std::fill(hm.data().begin(), hm.data().end(), value);
    return hm;
}

/// Random road graph with the defects cleaning is meant to remove: dead
/// ends, isolates, forbidden access, short self-loops, parallel edges,
/// detached pieces and low-volume residential edges (nodes west of kOrigin
/// sit in a zero-volume half of `hm`).
inline RoadGraph random_messy_graph(std::mt19937_64& rng, int n_nodes, heatmap::VolumeHeatmap* hm = nullptr) {
    RoadGraph g;
    for (int i = 0; i < n_nodes; ++i) {
        const NodeId id = static_cast<NodeId>(i) + 1 + static_cast<NodeId>(uniform_below(rng, 3)) * 1000;
        if (g.has_node(id)) continue;
        g.nodes.emplace(id, make_node(id, offset(kOrigin, uniform(rng, -1500, 1500), uniform(rng, -1500, 1500))));
    }
    std::vector<NodeId> ids;
    for (const auto& [id, _] : g.nodes) ids.push_back(id);
    static const std::vector<std::string> classes{"primary", "secondary", "tertiary", "residential", "unclassified",
                                                  "service", "motorway_link"};
    for (NodeId a : ids) {
        // Connect to 1..3 nearest neighbors.
        std::vector<std::pair<double, NodeId>> near;
        for (NodeId b : ids) {
            if (a != b) near.emplace_back(geo::haversine_m(g.node(a).position(), g.node(b).position()), b);
        }
        std::sort(near.begin(), near.end());
        const int k = uniform_int(rng, 1, 3);
        for (int j = 0; j < k && j < static_cast<int>(near.size()); ++j) {
            const NodeId b = near[j].second;
            const std::string& cls = classes[uniform_below(rng, classes.size())];
            Edge e = make_edge(g, a, b, cls);
            const double r = uniform01(rng);
            if (r < 0.05) e.access = "private";
            else if (r < 0.08) e.access = "yes";
            g.edges.push_back(e);
            if (uniform01(rng) < 0.8) {
                Edge back = make_edge(g, b, a, cls);
                back.access = e.access;
                g.edges.push_back(back);
            } else {
                g.edges.back().oneway = true;
            }
        }
    }
    // Two-way primary ring through every third node in angular order, so
    // that some core survives cleaning.
    std::vector<std::pair<double, NodeId>> ring;
    for (std::size_t i = 0; i < ids.size(); i += 3) {
        const LatLon p = g.node(ids[i]).position();
        ring.emplace_back(std::atan2(p.lat - kOrigin.lat, p.lon - kOrigin.lon), ids[i]);
    }
    std::sort(ring.begin(), ring.end());
    if (ring.size() >= 5) {
        for (std::size_t i = 0; i < ring.size(); ++i) {
            add_pair(g, ring[i].second, ring[(i + 1) % ring.size()].second, "primary");
        }
    }
    const int extras = std::max(1, n_nodes / 10);
    for (int i = 0; i < extras; ++i) {
        const NodeId a = ids[uniform_below(rng, ids.size())];
        Edge loop = make_edge(g, a, a, "tertiary");
        const LatLon p = g.node(a).position();
        const double r = uniform(rng, 10.0, 120.0);
        loop.geometry = {p, offset(p, r, 0), offset(p, r, r), p};
        loop.length_m = geo::polyline_length_m(loop.geometry);
        g.edges.push_back(loop);
        if (!g.edges.empty()) {
            Edge par = g.edges[uniform_below(rng, g.edges.size())];
            if (!par.is_self_loop()) {
                const LatLon mid = geo::lerp(par.geometry.front(), par.geometry.back(), 0.5);
                par.geometry = {par.geometry.front(), offset(mid, 20.0, 20.0), par.geometry.back()};
                par.length_m = geo::polyline_length_m(par.geometry);
                g.edges.push_back(par);
            }
        }
        // dead-end spur
        const NodeId s = g.next_node_id();
        g.nodes.emplace(s, make_node(s, offset(g.node(a).position(), 60.0, -45.0)));
        add_pair(g, a, s, "tertiary");
        // isolate
        const NodeId iso = g.next_node_id();
        g.nodes.emplace(iso, make_node(iso, offset(kOrigin, uniform(rng, -1000, 1000), 1700)));
    }
    if (hm) {
        *hm = flat_heatmap(40.0);
        // Western half reads as zero volume.
        for (int r = 0; r < heatmap::kRows; ++r) {
            for (int c = 0; c < heatmap::kCols / 2; ++c) {
                for (int ch = 0; ch < heatmap::kChannels; ++ch) hm->at(r, c, ch) = 0.0;
            }
        }
    }
    return g;
}

/// Brute force minimum path weight over all simple paths s -> t, using the
/// cheapest of any parallel edges at each step. Infinity when unreachable.
inline double brute_force_min_weight(const RoadGraph& g, NodeId s, NodeId t,
                                     double (*weight)(const Edge&)) {
    std::map<NodeId, std::map<NodeId, double>> adj;
    for (const auto& e : g.edges) {
        if (e.is_self_loop()) continue;
        auto [it, inserted] = adj[e.u].emplace(e.v, weight(e));
        if (!inserted) it->second = std::min(it->second, weight(e));
    }
    double best = std::numeric_limits<double>::infinity();
    std::set<NodeId> on_path{s};
    std::function<void(NodeId, double)> dfs = [&](NodeId x, double w) {
        if (x == t) {
            best = std::min(best, w);
            return;
        }
        for (const auto& [y, ew] : adj[x]) {
            if (on_path.count(y)) continue;
            on_path.insert(y);
            dfs(y, w + ew);
            on_path.erase(y);
        }
    };
    dfs(s, 0.0);
    return best;
}

/// Number of weakly connected components.
inline std::size_t weak_components(const RoadGraph& g) {
    std::map<NodeId, NodeId> parent;
    for (const auto& [id, _] : g.nodes) parent[id] = id;
    std::function<NodeId(NodeId)> find = [&](NodeId x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
    for (const auto& e : g.edges) parent[find(e.u)] = find(e.v);
    std::set<NodeId> roots;
    for (const auto& [id, _] : g.nodes) roots.insert(find(id));
    return roots.size();
}

}  // namespace testing
