#include "t4c/attach.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "t4c/errors.hpp"
#include "t4c/geo.hpp"
#include "t4c/io.hpp"

namespace t4c::attach {

namespace {

// A reverse edge is cut at the new node only if it passes this close.
constexpr double kTwinToleranceM = 1.0;

std::optional<std::size_t> find_twin(const RoadGraph& g, NodeId u, NodeId v) {
    if (u == v) return std::nullopt;
    return g.find_edge(v, u);
}

}  // namespace

DetectorDay normalize_counts(const RawDetectorSeries& raw) {
    DetectorDay day;
    day.detector_id = raw.detector_id;
    day.lat = raw.lat;
    day.lon = raw.lon;
    day.heading = raw.heading;
    day.day = raw.day;

    if (raw.interval_minutes == 15) {
        if (raw.values.size() != static_cast<std::size_t>(kBinsPerDay)) {
            throw std::invalid_argument(fmt::format("detector {}: expected {} 15-minute values, got {}",
                                                    raw.detector_id, kBinsPerDay, raw.values.size()));
        }
        std::copy(raw.values.begin(), raw.values.end(), day.counts.begin());
        return day;
    }
    if (raw.interval_minutes != 5 || raw.values.size() != static_cast<std::size_t>(3 * kBinsPerDay)) {
        throw std::invalid_argument(fmt::format("detector {}: expected {} 5-minute values, got {}",
                                                raw.detector_id, 3 * kBinsPerDay, raw.values.size()));
    }
    for (int b = 0; b < kBinsPerDay; ++b) {
        std::optional<double> sum;
        for (int w = 0; w < 3; ++w) {
            if (const auto& v = raw.values[3 * b + w]) sum = sum.value_or(0.0) + *v;
        }
        day.counts[b] = sum;
    }
    return day;
}

const char* to_string(SnapAction action) {
    switch (action) {
        case SnapAction::kAssignNode: return "assign_node";
        case SnapAction::kAssignEndpoint: return "assign_endpoint";
        case SnapAction::kSplitEdge: return "split_edge";
        case SnapAction::kDiscard: return "discard";
    }
    return "?";
}

SnapDecision snap_detector(const RoadGraph& graph, LatLon location, const AttachConfig& cfg) {
    if (graph.nodes.empty()) throw std::invalid_argument("cannot snap a detector onto an empty graph");

    SnapDecision d;
    double best_node_dist = std::numeric_limits<double>::infinity();
    NodeId best_node = 0;
    for (const auto& [id, n] : graph.nodes) {
        const double dist = geo::haversine_m(location, n.position());
        if (dist < best_node_dist) {
            best_node_dist = dist;
            best_node = id;
        }
    }
    if (best_node_dist < cfg.node_snap_m) {
        d.action = SnapAction::kAssignNode;
        d.node = best_node;
        d.point = graph.node(best_node).position();
        d.distance_m = best_node_dist;
        d.reason = fmt::format("node {} at {:.2f} m", best_node, best_node_dist);
        return d;
    }

    std::optional<std::size_t> best_edge;
    geo::Projection best_proj;
    best_proj.distance_m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < graph.edges.size(); ++i) {
        const Edge& e = graph.edges[i];
        const geo::Projection p = geo::project(location, e.geometry);
        const bool closer = p.distance_m < best_proj.distance_m;
        const bool tie_smaller = p.distance_m == best_proj.distance_m && best_edge &&
                                 e.key() < graph.edges[*best_edge].key();
        if (closer || tie_smaller) {
            best_edge = i;
            best_proj = p;
        }
    }
    if (!best_edge) {
        d.action = SnapAction::kDiscard;
        d.distance_m = best_node_dist;
        d.reason = fmt::format("nearest node at {:.2f} m and no edges", best_node_dist);
        return d;
    }

    const Edge& e = graph.edges[*best_edge];
    d.edge_index = *best_edge;
    d.point = best_proj.point;
    d.distance_m = best_proj.distance_m;
    if (best_proj.distance_m > cfg.edge_snap_m) {
        d.action = SnapAction::kDiscard;
        d.reason = fmt::format("nearest edge {}->{} at {:.2f} m", e.u, e.v, best_proj.distance_m);
        return d;
    }

    const double to_u = geo::haversine_m(best_proj.point, graph.node(e.u).position());
    const double to_v = geo::haversine_m(best_proj.point, graph.node(e.v).position());
    if (std::min(to_u, to_v) < cfg.node_snap_m) {
        d.action = SnapAction::kAssignEndpoint;
        d.node = (to_u < to_v || (to_u == to_v && e.u < e.v)) ? e.u : e.v;
        d.reason = fmt::format("projection on {}->{} {:.2f} m from endpoint {}", e.u, e.v,
                               std::min(to_u, to_v), d.node);
        return d;
    }

    const double glen = geo::polyline_length_m(e.geometry);
    d.action = SnapAction::kSplitEdge;
    d.fraction = glen > 0.0 ? best_proj.along_m / glen : 0.5;
    d.reason = fmt::format("split {}->{} at {:.4f}, {:.2f} m off the edge", e.u, e.v, d.fraction,
                           best_proj.distance_m);
    return d;
}

SplitResult split_edge(RoadGraph& graph, std::size_t index, double fraction, std::optional<NodeId> node_id,
                       const std::string& origin) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw std::invalid_argument(fmt::format("split fraction {} outside (0, 1)", fraction));
    }
    if (index >= graph.edges.size()) throw std::out_of_range("split_edge: edge index out of range");

    const Edge original = graph.edges[index];
    const double glen = geo::polyline_length_m(original.geometry);
    auto [head, tail] = geo::cut(original.geometry, fraction * glen);

    const NodeId id = node_id.value_or(graph.next_node_id());
    if (graph.has_node(id)) {
        const LatLon at = graph.node(id).position();
        head.back() = at;
        tail.front() = at;
    } else {
        Node n;
        n.node_id = id;
        n.lat = head.back().lat;
        n.lon = head.back().lon;
        n.origin = origin;
        graph.nodes.emplace(id, std::move(n));
    }

    Edge first = original;
    first.v = id;
    first.length_m = fraction * original.length_m;
    first.geometry = std::move(head);
    Edge second = original;
    second.u = id;
    second.length_m = original.length_m - first.length_m;
    second.geometry = std::move(tail);

    graph.edges[index] = std::move(first);
    graph.edges.insert(graph.edges.begin() + static_cast<std::ptrdiff_t>(index) + 1, std::move(second));
    return {id, index, index + 1};
}

std::optional<double> split_value(std::optional<double> count, int k) {
    if (k < 1) throw std::invalid_argument(fmt::format("cannot split a value across {} nodes", k));
    if (!count) return std::nullopt;
    return *count / k;
}

std::vector<NodeDayCounts> aggregate_colocated(const std::vector<NodeAssignment>& assignments) {
    std::map<std::pair<NodeId, std::string>, NodeDayCounts> acc;
    for (const auto& a : assignments) {
        auto& slot = acc[{a.node_id, a.day}];
        slot.node_id = a.node_id;
        slot.day = a.day;
        slot.detectors.push_back(a.detector_id);
        for (int t = 0; t < kBinsPerDay; ++t) {
            if (a.counts[t]) slot.counts[t] = slot.counts[t].value_or(0.0) + *a.counts[t];
        }
    }
    std::vector<NodeDayCounts> out;
    out.reserve(acc.size());
    for (auto& [_, v] : acc) {
        std::sort(v.detectors.begin(), v.detectors.end());
        v.detectors.erase(std::unique(v.detectors.begin(), v.detectors.end()), v.detectors.end());
        out.push_back(std::move(v));
    }
    return out;
}

AttachmentResult attach_detectors(RoadGraph graph, const std::vector<DetectorDay>& detectors,
                                  const AttachConfig& cfg) {
    AttachmentResult result;

    std::map<std::string, std::vector<LatLon>> sites;
    std::map<std::string, std::map<std::string, BinCounts>> counts;
    std::set<std::tuple<std::string, std::string, double, double>> seen_rows;
    for (const auto& d : detectors) {
        if (!seen_rows.emplace(d.detector_id, d.day, d.lat, d.lon).second) {
            throw ValidationError(fmt::format("duplicate record for detector {} on {}", d.detector_id, d.day));
        }
        auto& s = sites[d.detector_id];
        const LatLon loc{d.lat, d.lon};
        if (std::find(s.begin(), s.end(), loc) == s.end()) s.push_back(loc);
        auto [it, inserted] = counts[d.detector_id].emplace(d.day, d.counts);
        if (!inserted && it->second != d.counts) {
            throw ValidationError(fmt::format("detector {} on {}: sites disagree on counts", d.detector_id, d.day));
        }
    }

    for (const auto& [id, locations] : sites) {
        std::vector<NodeId> nodes;
        std::string last_reason;
        for (const LatLon& loc : locations) {
            SiteDecision site{id, loc, snap_detector(graph, loc, cfg), std::nullopt};
            const SnapDecision& dec = site.decision;
            switch (dec.action) {
                case SnapAction::kAssignNode:
                case SnapAction::kAssignEndpoint:
                    site.node = dec.node;
                    break;
                case SnapAction::kSplitEdge: {
                    const Edge cut_edge = graph.edges[dec.edge_index];
                    const SplitResult split = split_edge(graph, dec.edge_index, dec.fraction);
                    ++result.split_edges;
                    if (auto twin = find_twin(graph, cut_edge.u, cut_edge.v)) {
                        const Edge& te = graph.edges[*twin];
                        const auto proj = geo::project(graph.node(split.node).position(), te.geometry);
                        const double tlen = geo::polyline_length_m(te.geometry);
                        const double f = tlen > 0.0 ? proj.along_m / tlen : 0.0;
                        if (proj.distance_m <= kTwinToleranceM && f > 0.0 && f < 1.0) {
                            split_edge(graph, *twin, f, split.node);
                            ++result.split_edges;
                        }
                    }
                    site.node = split.node;
                    break;
                }
                case SnapAction::kDiscard:
                    last_reason = dec.reason;
                    break;
            }
            if (site.node && std::find(nodes.begin(), nodes.end(), *site.node) == nodes.end()) {
                nodes.push_back(*site.node);
            }
            result.sites.push_back(std::move(site));
        }
        if (nodes.empty()) {
            result.discarded.push_back({id, last_reason});
            continue;
        }
        const int k = static_cast<int>(nodes.size());
        for (NodeId n : nodes) {
            Node& node = graph.node(n);
            node.counter_info.push_back(id);
            node.num_assigned = std::max(node.num_assigned, k);
        }
        result.mapping[id] = nodes;
    }

    std::vector<NodeAssignment> assignments;
    for (const auto& [id, nodes] : result.mapping) {
        const int k = static_cast<int>(nodes.size());
        for (const auto& [day, c] : counts.at(id)) {
            BinCounts share;
            for (int t = 0; t < kBinsPerDay; ++t) share[t] = split_value(c[t], k);
            for (NodeId n : nodes) assignments.push_back({n, id, day, share});
        }
    }
    result.node_counts = aggregate_colocated(assignments);

    for (auto& [_, n] : graph.nodes) {
        std::sort(n.counter_info.begin(), n.counter_info.end());
        n.counter_info.erase(std::unique(n.counter_info.begin(), n.counter_info.end()), n.counter_info.end());
    }
    result.graph = std::move(graph);
    return result;
}

std::vector<nlohmann::ordered_json> report_rows(const AttachmentResult& r) {
    using io::Json;
    std::vector<Json> out;
    for (const auto& s : r.sites) {
        Json j;
        j["detector_id"] = s.detector_id;
        j["lat"] = s.location.lat;
        j["lon"] = s.location.lon;
        j["action"] = to_string(s.decision.action);
        j["node"] = s.node ? Json(*s.node) : Json();
        j["distance_m"] = s.decision.distance_m;
        j["reason"] = s.decision.reason;
        out.push_back(std::move(j));
    }
    for (const auto& d : r.discarded) {
        Json j;
        j["detector_id"] = d.detector_id;
        j["action"] = "discarded";
        j["reason"] = d.reason;
        out.push_back(std::move(j));
    }
    return out;
}

void save_node_counts(const std::vector<NodeDayCounts>& rows, const std::filesystem::path& path) {
    using io::Json;
    std::vector<Json> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        Json j;
        j["node_id"] = r.node_id;
        j["day"] = r.day;
        Json counts = Json::array();
        for (const auto& c : r.counts) counts.push_back(c ? Json(*c) : Json());
        j["counts"] = std::move(counts);
        j["detectors"] = r.detectors;
        out.push_back(std::move(j));
    }
    io::write_jsonl(path, out);
}

}  // namespace t4c::attach
