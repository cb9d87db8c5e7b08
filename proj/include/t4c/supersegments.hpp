#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "t4c/heatmap.hpp"
#include "t4c/types.hpp"

namespace t4c::supersegments {

/// One search circle: a target key intersection belongs to the first circle
/// whose three radii all contain it.
struct Circle {
    double beeline_m = 0.0;
    double path_m = 0.0;
    int segments = 0;
};

struct SearchConfig {
    std::vector<Circle> circles{{1000.0, 2000.0, 8}, {2500.0, 5000.0, 20}, {5000.0, 10000.0, 40},
                                {10000.0, 20000.0, 80}};
    double max_path_m = 10000.0;          // a longer super-segment ends the source's search
    int max_supersegments_per_source = 3;  // finding more than this ends the search
    int max_circles = 4;
    std::size_t key_intersection_count = 400;
    int min_neighbors = 3;

    /// Throws ValidationError for non-positive or non-monotone settings.
    void validate() const;

    static SearchConfig from_json(const nlohmann::ordered_json& j);
    nlohmann::ordered_json to_json() const;
};

/// Dijkstra weight: ((6 - importance) / 2) * length_m.
double edge_weight(const Edge& e);

struct KeyIntersectionSet {
    std::vector<NodeId> node_ids;     // selected in score order, then whitelist additions
    std::map<NodeId, double> scores;  // every scored candidate
    std::size_t whitelisted = 0;      // trailing entries of node_ids that came from the whitelist
};

/// Scores nodes with at least `min_neighbors` distinct neighbors by
/// max incident edge volume * (max incident importance + 1) / 6, keeps the top
/// `key_intersection_count`, walks them by descending score (ties: lower id)
/// dropping graph neighbors of nodes already chosen, then appends whitelist
/// nodes present in the graph. `edge_volumes` is parallel to graph.edges.
KeyIntersectionSet select_key_intersections(const RoadGraph& graph, const std::vector<double>& edge_volumes,
                                            const std::vector<NodeId>& whitelist, const SearchConfig& cfg = {});

/// As above with edge volumes read from the heatmap.
KeyIntersectionSet select_key_intersections(const RoadGraph& graph, const heatmap::VolumeHeatmap& hm,
                                            const std::vector<NodeId>& whitelist, const SearchConfig& cfg = {});

/// Single-source shortest paths under edge_weight. Among equal-weight paths
/// the lexicographically smallest node sequence wins.
class ShortestPaths {
public:
    ShortestPaths(const RoadGraph& graph, NodeId source);

    NodeId source() const { return source_; }
    bool reachable(NodeId target) const;
    double weight(NodeId target) const;
    double length_m(NodeId target) const;
    int segments(NodeId target) const;
    std::vector<EdgeKey> path(NodeId target) const;
    std::vector<NodeId> nodes(NodeId target) const;

private:
    std::size_t index_of(NodeId id) const;

    NodeId source_;
    std::vector<NodeId> ids_;
    std::map<NodeId, std::size_t> index_;
    std::vector<double> dist_;
    std::vector<double> length_;
    std::vector<int> segments_;
    std::vector<std::size_t> pred_;
};

enum class StopReason { kTooMany, kTooFar, kCirclesExhausted };

const char* to_string(StopReason r);

struct SourceLog {
    NodeId source = 0;
    int found = 0;
    StopReason reason = StopReason::kCirclesExhausted;
};

struct SampleResult {
    std::vector<SuperSegment> supersegments;
    std::vector<SourceLog> sources;
    std::vector<std::string> skipped_whitelist;  // ssids dropped (missing edge or duplicate pair)
};

/// Expanding-circle super-segment search from every key intersection (in
/// ascending node id), then whitelist super-segments. At most one
/// super-segment per ordered (source, target) pair. Sampled ssids are
/// "ss_<source>_<target>". Throws std::invalid_argument when `keys` is empty.
SampleResult sample_supersegments(const RoadGraph& graph, const KeyIntersectionSet& keys,
                                  const SearchConfig& cfg = {}, const std::vector<SuperSegment>& whitelist = {});

}  // namespace t4c::supersegments
