#pragma once

#include <map>
#include <optional>
#include <string>
#include <filesystem>
#include <vector>

#include "json.hpp"

#include "t4c/types.hpp"

namespace t4c::attach {

struct AttachConfig {
    double node_snap_m = 40.0;  // assign to a node closer than this
    double edge_snap_m = 20.0;  // discard when the nearest edge is farther than this
};

/// A day of detector readings before binning. `interval_minutes` is 5 for
/// 288 sliding-window slots or 15 for data that is already binned.
struct RawDetectorSeries {
    std::string detector_id;
    double lat = 0.0;
    double lon = 0.0;
    std::optional<double> heading;
    std::string day;
    int interval_minutes = 15;
    std::vector<std::optional<double>> values;
};

/// Sums the three 5-minute windows starting at each 15-minute bin. A bin is
/// missing only when all three windows are. 15-minute input passes through.
DetectorDay normalize_counts(const RawDetectorSeries& raw);

enum class SnapAction { kAssignNode, kAssignEndpoint, kSplitEdge, kDiscard };

const char* to_string(SnapAction action);

struct SnapDecision {
    SnapAction action = SnapAction::kDiscard;
    NodeId node = 0;             // kAssignNode / kAssignEndpoint
    std::size_t edge_index = 0;  // kSplitEdge / kAssignEndpoint / edge-based kDiscard
    double fraction = 0.0;       // kSplitEdge: position along the edge in (0, 1)
    LatLon point;                // node position or projection point
    double distance_m = 0.0;     // detector -> chosen node or projection point
    std::string reason;
};

/// Decides where a detector at `location` attaches:
///   1. nearest node closer than node_snap_m (ties: lowest node id);
///   2. else project onto the nearest edge (ties: smallest (u, v)) and discard
///      when the projection is farther than edge_snap_m;
///   3. else assign to an edge endpoint lying within node_snap_m of the
///      projection point, or split the edge there.
/// Throws std::invalid_argument on a graph without nodes.
SnapDecision snap_detector(const RoadGraph& graph, LatLon location, const AttachConfig& cfg = {});

struct SplitResult {
    NodeId node = 0;
    std::size_t first = 0;   // index of u -> node
    std::size_t second = 0;  // index of node -> v
};

/// Splits edge `index` at `fraction` of its geometry. Lengths become
/// fraction * L and L - fraction * L; the remaining attributes are copied.
/// The new node takes `node_id` (default: graph.next_node_id()) and `origin`.
/// Throws std::invalid_argument unless 0 < fraction < 1.
SplitResult split_edge(RoadGraph& graph, std::size_t index, double fraction,
                       std::optional<NodeId> node_id = std::nullopt,
                       const std::string& origin = kOriginDetectorSplit);

struct NodeAssignment {
    NodeId node_id = 0;
    std::string detector_id;
    std::string day;
    BinCounts counts;
};

struct NodeDayCounts {
    NodeId node_id = 0;
    std::string day;
    BinCounts counts;
    std::vector<std::string> detectors;  // sorted, unique

    bool operator==(const NodeDayCounts&) const = default;
};

/// Adds up co-located detectors per (node, day) and bin. Missing values are
/// skipped; a bin stays missing only when every contributor is missing.
std::vector<NodeDayCounts> aggregate_colocated(const std::vector<NodeAssignment>& assignments);

/// Share of a detector value for one of `k` nodes: count / k.
/// Throws std::invalid_argument when k < 1.
std::optional<double> split_value(std::optional<double> count, int k);

struct DiscardedDetector {
    std::string detector_id;
    std::string reason;
};

struct SiteDecision {
    std::string detector_id;
    LatLon location;
    SnapDecision decision;
    std::optional<NodeId> node;  // resolved node after applying the decision
};

struct AttachmentResult {
    RoadGraph graph;
    std::map<std::string, std::vector<NodeId>> mapping;
    std::vector<DiscardedDetector> discarded;
    std::vector<SiteDecision> sites;
    std::vector<NodeDayCounts> node_counts;
    std::size_t split_edges = 0;
};

/// Attaches all detectors to `graph`, processing detector ids in sorted
/// order against the graph as it is being modified. Rows sharing a
/// detector id and day but differing in location are the sites of one merged
/// detector; its value is split evenly across the distinct nodes it reaches.
/// Splits also cut the reverse edge v -> u when its geometry passes within
/// 1 m of the new node.
AttachmentResult attach_detectors(RoadGraph graph, const std::vector<DetectorDay>& detectors,
                                  const AttachConfig& cfg = {});

/// One row per detector site (action, node, distance) followed by one row per
/// discarded detector.
std::vector<nlohmann::ordered_json> report_rows(const AttachmentResult& r);

/// NDJSON rows {node_id, day, counts, detectors}; missing bins are null.
void save_node_counts(const std::vector<NodeDayCounts>& rows, const std::filesystem::path& path);

}  // namespace t4c::attach
