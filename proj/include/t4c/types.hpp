#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace t4c {

using NodeId = std::uint64_t;

/// 15-minute bins per day.
inline constexpr int kBinsPerDay = 96;

/// Non-masked congestion classes (green, yellow, red). Class 0 is the masked one.
inline constexpr int kNumClasses = 3;

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;

    bool operator==(const LatLon&) const = default;
};

/// Values of Node::origin for nodes inserted by this toolkit.
inline constexpr const char* kOriginDetectorSplit = "detector_split";
inline constexpr const char* kOriginMultiEdgeSplit = "multi_edge_split";

struct Node {
    NodeId node_id = 0;
    double lat = 0.0;
    double lon = 0.0;
    std::vector<std::string> counter_info;  // city-specific detector IDs
    int num_assigned = 1;
    // Set only on nodes created by edge splitting.
    std::optional<std::string> origin;

    LatLon position() const { return {lat, lon}; }
    bool has_counter() const { return !counter_info.empty(); }
    bool operator==(const Node&) const = default;
};

struct EdgeKey {
    NodeId u = 0;
    NodeId v = 0;

    auto operator<=>(const EdgeKey&) const = default;
};

struct Edge {
    NodeId u = 0;
    NodeId v = 0;
    double length_m = 0.0;
    int importance = 0;  // 0 (residential) .. 5 (motorway)
    double maxspeed_kph = 0.0;
    std::string highway_class;
    std::optional<std::string> access;
    bool oneway = false;
    std::vector<LatLon> geometry;

    EdgeKey key() const { return {u, v}; }
    bool is_self_loop() const { return u == v; }
    bool operator==(const Edge&) const = default;
};

/// Directed road graph. Before cleaning it may hold parallel edges, so edges
/// are a sequence rather than a map keyed by (u, v).
struct RoadGraph {
    std::map<NodeId, Node> nodes;
    std::vector<Edge> edges;

    bool has_node(NodeId id) const { return nodes.count(id) != 0; }
    const Node& node(NodeId id) const;
    Node& node(NodeId id);

    /// Index of the first edge u->v, if any.
    std::optional<std::size_t> find_edge(NodeId u, NodeId v) const;

    /// One past the largest node id in use.
    NodeId next_node_id() const;

    double total_length_m() const;

    bool operator==(const RoadGraph&) const = default;
};

/// Importance for an OSM highway class; unknown classes map to 0.
///
///   motorway 5, trunk 4, primary 3, secondary 2, tertiary 1,
///   everything else (residential, unclassified, service, ...) 0.
/// `*_link` classes take the importance of their parent class.
int importance_for_highway(const std::string& highway_class);

using BinCounts = std::array<std::optional<double>, kBinsPerDay>;

struct DetectorDay {
    std::string detector_id;
    double lat = 0.0;
    double lon = 0.0;
    std::optional<double> heading;
    std::string day;  // YYYY-MM-DD
    BinCounts counts;

    bool operator==(const DetectorDay&) const = default;
};

struct SegmentSpeedStats {
    NodeId u = 0;
    NodeId v = 0;
    int t = 0;
    double median_speed_kph = 0.0;
    std::int64_t volume = 0;
    // Encoded median speed; 0 and 255 flag corrupted bins.
    int raw_median_speed = 0;
    // Optional; lets one file carry several days.
    std::string day;

    EdgeKey key() const { return {u, v}; }
    bool operator==(const SegmentSpeedStats&) const = default;
};

struct FreeFlow {
    NodeId u = 0;
    NodeId v = 0;
    double free_flow_kph = 0.0;

    EdgeKey key() const { return {u, v}; }
    bool operator==(const FreeFlow&) const = default;
};

struct CongestionLabel {
    NodeId u = 0;
    NodeId v = 0;
    int t = 0;
    int cc = 0;  // 0 masked, 1 green, 2 yellow, 3 red
    std::string day;

    EdgeKey key() const { return {u, v}; }
    bool operator==(const CongestionLabel&) const = default;
};

struct SuperSegment {
    std::string ssid;
    std::vector<EdgeKey> edges;

    NodeId source() const { return edges.front().u; }
    NodeId target() const { return edges.back().v; }
    bool operator==(const SuperSegment&) const = default;
};

struct EtaLabel {
    std::string ssid;
    int t = 0;
    double eta_s = 0.0;
    std::string day;

    bool operator==(const EtaLabel&) const = default;
};

using Logits = std::array<double, kNumClasses>;

struct CcPrediction {
    NodeId u = 0;
    NodeId v = 0;
    int t = 0;
    std::string day;
    Logits logits{};

    EdgeKey key() const { return {u, v}; }
    bool operator==(const CcPrediction&) const = default;
};

struct EtaPrediction {
    std::string ssid;
    int t = 0;
    std::string day;
    double eta_s = 0.0;

    bool operator==(const EtaPrediction&) const = default;
};

/// Hour of day for a 15-minute bin.
constexpr int hour_of_bin(int t) { return t / 4; }

}  // namespace t4c
