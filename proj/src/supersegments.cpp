#include "t4c/supersegments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <set>
#include <stdexcept>
#include <tuple>

#include <fmt/format.h>

#include "t4c/errors.hpp"
#include "t4c/geo.hpp"

namespace t4c::supersegments {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
constexpr double kInf = std::numeric_limits<double>::infinity();

std::map<NodeId, std::set<NodeId>> neighbor_sets(const RoadGraph& g) {
    std::map<NodeId, std::set<NodeId>> nbrs;
    for (const auto& e : g.edges) {
        if (e.is_self_loop()) continue;
        nbrs[e.u].insert(e.v);
        nbrs[e.v].insert(e.u);
    }
    return nbrs;
}

}  // namespace

// ---------------------------------------------------------------- config

void SearchConfig::validate() const {
    if (circles.empty()) throw ValidationError("search config needs at least one circle");
    for (std::size_t i = 0; i < circles.size(); ++i) {
        const Circle& c = circles[i];
        if (!(c.beeline_m > 0.0) || !(c.path_m > 0.0) || c.segments <= 0) {
            throw ValidationError(fmt::format("search circle {} must have positive radii", i + 1));
        }
        if (i > 0) {
            const Circle& p = circles[i - 1];
            if (c.beeline_m < p.beeline_m || c.path_m < p.path_m || c.segments < p.segments) {
                throw ValidationError(fmt::format("search circle {} shrinks relative to circle {}", i + 1, i));
            }
        }
    }
    if (!(max_path_m > 0.0) || max_supersegments_per_source < 0 || max_circles <= 0 || min_neighbors < 0) {
        throw ValidationError("search limits must be positive");
    }
}

SearchConfig SearchConfig::from_json(const nlohmann::ordered_json& j) {
    SearchConfig cfg;
    try {
        if (j.contains("circles")) {
            cfg.circles.clear();
            for (const auto& c : j.at("circles")) {
                cfg.circles.push_back(
                    {c.at("beeline_m").get<double>(), c.at("path_m").get<double>(), c.at("segments").get<int>()});
            }
        }
        cfg.max_path_m = j.value("max_path_m", cfg.max_path_m);
        cfg.max_supersegments_per_source = j.value("max_supersegments_per_source", cfg.max_supersegments_per_source);
        cfg.max_circles = j.value("max_circles", cfg.max_circles);
        cfg.key_intersection_count = j.value("key_intersection_count", cfg.key_intersection_count);
        cfg.min_neighbors = j.value("min_neighbors", cfg.min_neighbors);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("invalid search config: {}", e.what()));
    }
    cfg.validate();
    return cfg;
}

nlohmann::ordered_json SearchConfig::to_json() const {
    nlohmann::ordered_json j;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& c : circles) {
        nlohmann::ordered_json cj;
        cj["beeline_m"] = c.beeline_m;
        cj["path_m"] = c.path_m;
        cj["segments"] = c.segments;
        arr.push_back(std::move(cj));
    }
    j["circles"] = std::move(arr);
    j["max_path_m"] = max_path_m;
    j["max_supersegments_per_source"] = max_supersegments_per_source;
    j["max_circles"] = max_circles;
    j["key_intersection_count"] = key_intersection_count;
    j["min_neighbors"] = min_neighbors;
    return j;
}

double edge_weight(const Edge& e) { return ((6.0 - e.importance) / 2.0) * e.length_m; }

// ---------------------------------------------------------------- key intersections

KeyIntersectionSet select_key_intersections(const RoadGraph& graph, const std::vector<double>& edge_volumes,
                                            const std::vector<NodeId>& whitelist, const SearchConfig& cfg) {
    if (edge_volumes.size() != graph.edges.size()) {
        throw std::invalid_argument("select_key_intersections: one volume per edge expected");
    }
    std::map<NodeId, double> max_volume;
    std::map<NodeId, int> max_importance;
    for (std::size_t i = 0; i < graph.edges.size(); ++i) {
        const Edge& e = graph.edges[i];
        for (NodeId n : {e.u, e.v}) {
            max_volume[n] = std::max(max_volume[n], edge_volumes[i]);
            auto [it, inserted] = max_importance.emplace(n, e.importance);
            if (!inserted) it->second = std::max(it->second, e.importance);
        }
    }
    const auto nbrs = neighbor_sets(graph);

    KeyIntersectionSet out;
    std::vector<std::pair<double, NodeId>> ranked;
    for (const auto& [n, vol] : max_volume) {
        auto it = nbrs.find(n);
        if (it == nbrs.end() || static_cast<int>(it->second.size()) < cfg.min_neighbors) continue;
        const double score = vol * (max_importance.at(n) + 1) / 6.0;
        out.scores[n] = score;
        ranked.emplace_back(score, n);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    if (ranked.size() > cfg.key_intersection_count) ranked.resize(cfg.key_intersection_count);

    std::set<NodeId> excluded;
    for (const auto& [_, n] : ranked) {
        if (excluded.count(n)) continue;
        out.node_ids.push_back(n);
        excluded.insert(n);
        for (NodeId m : nbrs.at(n)) excluded.insert(m);
    }
    for (NodeId w : whitelist) {
        if (!graph.has_node(w)) continue;
        if (std::find(out.node_ids.begin(), out.node_ids.end(), w) != out.node_ids.end()) continue;
        out.node_ids.push_back(w);
        ++out.whitelisted;
    }
    return out;
}

KeyIntersectionSet select_key_intersections(const RoadGraph& graph, const heatmap::VolumeHeatmap& hm,
                                            const std::vector<NodeId>& whitelist, const SearchConfig& cfg) {
    std::vector<double> volumes;
    volumes.reserve(graph.edges.size());
    for (const auto& e : graph.edges) volumes.push_back(heatmap::edge_max_volume(hm, e).max_volume);
    return select_key_intersections(graph, volumes, whitelist, cfg);
}

// ---------------------------------------------------------------- shortest paths

ShortestPaths::ShortestPaths(const RoadGraph& graph, NodeId source) : source_(source) {
    ids_.reserve(graph.nodes.size());
    for (const auto& [id, _] : graph.nodes) {
        index_.emplace(id, ids_.size());
        ids_.push_back(id);
    }
    const std::size_t n = ids_.size();
    const std::size_t s = index_of(source);

    struct Arc {
        std::size_t to;
        double weight;
        double length;
    };
    std::vector<std::vector<Arc>> adj(n);
    for (const auto& e : graph.edges) {
        if (e.is_self_loop()) continue;
        const std::size_t a = index_.at(e.u);
        const std::size_t b = index_.at(e.v);
        const double w = edge_weight(e);
        auto it = std::find_if(adj[a].begin(), adj[a].end(), [&](const Arc& x) { return x.to == b; });
        if (it == adj[a].end()) {
            adj[a].push_back({b, w, e.length_m});
        } else if (w < it->weight) {
            *it = {b, w, e.length_m};
        }
    }

    dist_.assign(n, kInf);
    length_.assign(n, kInf);
    segments_.assign(n, -1);
    pred_.assign(n, kNone);
    std::vector<char> settled(n, 0);

    // Node sequence source..x, used only on exact weight ties.
    auto chain = [&](std::size_t x) {
        std::vector<std::size_t> seq;
        for (; x != kNone; x = pred_[x]) seq.push_back(x);
        std::reverse(seq.begin(), seq.end());
        return seq;
    };

    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
    dist_[s] = 0.0;
    length_[s] = 0.0;
    segments_[s] = 0;
    pq.emplace(0.0, s);
    while (!pq.empty()) {
        const auto [d, u] = pq.top();
        pq.pop();
        if (settled[u] || d > dist_[u]) continue;
        settled[u] = 1;
        for (const Arc& arc : adj[u]) {
            const std::size_t v = arc.to;
            if (settled[v]) continue;
            const double nd = dist_[u] + arc.weight;
            bool take = nd < dist_[v];
            if (!take && nd == dist_[v] && pred_[v] != u) {
                // Index order equals node id order, so comparing index chains
                // compares node id sequences.
                take = chain(u) < chain(pred_[v]);
            }
            if (!take) continue;
            const bool improved = nd < dist_[v];
            dist_[v] = nd;
            length_[v] = length_[u] + arc.length;
            segments_[v] = segments_[u] + 1;
            pred_[v] = u;
            if (improved) pq.emplace(nd, v);
        }
    }
}

std::size_t ShortestPaths::index_of(NodeId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range(fmt::format("node {} not in graph", id));
    return it->second;
}

bool ShortestPaths::reachable(NodeId target) const {
    auto it = index_.find(target);
    return it != index_.end() && dist_[it->second] < kInf;
}

double ShortestPaths::weight(NodeId target) const { return dist_[index_of(target)]; }
double ShortestPaths::length_m(NodeId target) const { return length_[index_of(target)]; }
int ShortestPaths::segments(NodeId target) const { return segments_[index_of(target)]; }

std::vector<NodeId> ShortestPaths::nodes(NodeId target) const {
    std::vector<NodeId> seq;
    if (!reachable(target)) return seq;
    for (std::size_t x = index_of(target); x != kNone; x = pred_[x]) seq.push_back(ids_[x]);
    std::reverse(seq.begin(), seq.end());
    return seq;
}

std::vector<EdgeKey> ShortestPaths::path(NodeId target) const {
    const auto seq = nodes(target);
    std::vector<EdgeKey> out;
    for (std::size_t i = 1; i < seq.size(); ++i) out.push_back({seq[i - 1], seq[i]});
    return out;
}

// ---------------------------------------------------------------- sampling

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::kTooMany: return "too_many";
        case StopReason::kTooFar: return "too_far";
        case StopReason::kCirclesExhausted: return "circles_exhausted";
    }
    return "?";
}

SampleResult sample_supersegments(const RoadGraph& graph, const KeyIntersectionSet& keys, const SearchConfig& cfg,
                                  const std::vector<SuperSegment>& whitelist) {
    if (keys.node_ids.empty()) throw std::invalid_argument("sample_supersegments: no key intersections");
    cfg.validate();

    std::vector<NodeId> sources = keys.node_ids;
    std::sort(sources.begin(), sources.end());
    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
    const int circles = std::min<int>(cfg.max_circles, static_cast<int>(cfg.circles.size()));

    SampleResult out;
    std::set<std::pair<NodeId, NodeId>> pairs;

    struct Candidate {
        int circle;
        double beeline;
        double path_m;
        int segments;
        NodeId target;

        auto order() const { return std::tie(circle, beeline, path_m, segments, target); }
    };

    for (NodeId s : sources) {
        if (!graph.has_node(s)) continue;
        const ShortestPaths sp(graph, s);
        const LatLon origin = graph.node(s).position();

        std::vector<Candidate> candidates;
        for (NodeId t : sources) {
            if (t == s || !sp.reachable(t)) continue;
            Candidate c{-1, geo::haversine_m(origin, graph.node(t).position()), sp.length_m(t), sp.segments(t), t};
            for (int i = 0; i < circles; ++i) {
                const Circle& r = cfg.circles[i];
                if (c.beeline <= r.beeline_m && c.path_m <= r.path_m && c.segments <= r.segments) {
                    c.circle = i;
                    break;
                }
            }
            if (c.circle >= 0) candidates.push_back(c);
        }
        std::sort(candidates.begin(), candidates.end(),
                  [](const Candidate& a, const Candidate& b) { return a.order() < b.order(); });

        SourceLog log{s, 0, StopReason::kCirclesExhausted};
        std::set<NodeId> reached;
        for (const Candidate& c : candidates) {
            if (!reached.insert(c.target).second) continue;
            if (!pairs.emplace(s, c.target).second) continue;
            out.supersegments.push_back({fmt::format("ss_{}_{}", s, c.target), sp.path(c.target)});
            ++log.found;
            if (c.path_m > cfg.max_path_m) {
                log.reason = StopReason::kTooFar;
                break;
            }
            if (log.found > cfg.max_supersegments_per_source) {
                log.reason = StopReason::kTooMany;
                break;
            }
        }
        out.sources.push_back(log);
    }

    std::set<EdgeKey> edge_keys;
    for (const auto& e : graph.edges) edge_keys.insert(e.key());
    std::set<std::string> ids;
    for (const auto& ss : out.supersegments) ids.insert(ss.ssid);
    for (const auto& ss : whitelist) {
        const bool edges_ok = !ss.edges.empty() && std::all_of(ss.edges.begin(), ss.edges.end(),
                                                               [&](const EdgeKey& k) { return edge_keys.count(k); });
        if (!edges_ok || ids.count(ss.ssid) || !pairs.emplace(ss.source(), ss.target()).second) {
            out.skipped_whitelist.push_back(ss.ssid);
            continue;
        }
        ids.insert(ss.ssid);
        out.supersegments.push_back(ss);
    }
    return out;
}

}  // namespace t4c::supersegments
