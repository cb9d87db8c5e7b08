#pragma once

#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "t4c/heatmap.hpp"
#include "t4c/types.hpp"

namespace t4c::clean {

struct CleanConfig {
    std::set<std::string> forbidden_access{"no",         "private",    "official", "permit",
                                           "delivery",   "designated", "emergency"};
    std::set<std::string> low_volume_classes{"residential", "unclassified"};
    double low_volume_threshold = 10.0;
    double low_volume_min_length_m = 50.0;  // shorter edges are never removed for low volume
    double self_loop_min_m = 300.0;         // shorter self-loops are removed
    double raster_step_m = 10.0;
};

struct StepCounts {
    std::size_t removed_nodes = 0;
    std::size_t removed_edges = 0;
    std::size_t added_nodes = 0;
    std::size_t added_edges = 0;

    bool changed() const { return removed_nodes || removed_edges || added_nodes || added_edges; }
    StepCounts& operator+=(const StepCounts& o);
    bool operator==(const StepCounts&) const = default;
};

StepCounts clean_no_access(RoadGraph& g, const CleanConfig& cfg = {});

struct LowVolumeCounts : StepCounts {
    std::size_t outside_heatmap = 0;  // edges partly outside the grid (read as volume 0)
};

/// Drops low-volume residential/unclassified edges. Kept regardless: edges
/// shorter than low_volume_min_length_m, edges touching a counter node, and
/// edges touching a node inserted by multi-edge splitting.
LowVolumeCounts clean_low_volume(RoadGraph& g, const heatmap::VolumeHeatmap& hm, const CleanConfig& cfg = {});

/// Removes dead-end edges until none remain. Edge a->b (a != b) is a dead end
/// when b has no outgoing edge to a node other than a, or a has no incoming
/// edge from a node other than b.
StepCounts clean_dead_ends(RoadGraph& g);

/// Removes nodes without any incident edge.
StepCounts clean_isolates(RoadGraph& g);

/// Removes self-loops shorter than self_loop_min_m.
StepCounts clean_self_loops(RoadGraph& g, const CleanConfig& cfg = {});

/// Removes nodes whose only edges are self-loops, with those loops.
StepCounts clean_no_neighbors(RoadGraph& g);

/// Keeps the largest weakly connected component (by node count); ties go to
/// the component holding the smallest node id. Throws std::invalid_argument
/// on an empty graph.
StepCounts largest_component(RoadGraph& g);

/// Removes bypass nodes m, in ascending id order until none remain: m has
/// exactly two neighbors a and b, a and b share a direct edge, and every
/// traversal x->m->y (x != y) is matched by an edge x->y, with at least one
/// such traversal. Counter nodes and multi-edge split nodes are kept.
StepCounts clean_circle_ramps(RoadGraph& g);

/// For each group of parallel edges keeps the shortest (first on ties) and
/// splits every other one at its midpoint through a new node. Parallel
/// self-loops are split in thirds so that no dead end appears.
StepCounts clean_multi_edges(RoadGraph& g);

struct StepRecord {
    std::string step;
    int iteration = 0;
    StepCounts counts;
};

struct CleanReport {
    std::vector<StepRecord> log;
    int iterations = 0;
    std::size_t low_volume_outside_heatmap = 0;
    std::size_t nodes_before = 0;
    std::size_t edges_before = 0;
    std::size_t nodes_after = 0;
    std::size_t edges_after = 0;
    double length_before_m = 0.0;
    double length_after_m = 0.0;

    /// Per-step totals in first-execution order.
    std::vector<std::pair<std::string, StepCounts>> totals() const;
    bool all_zero() const;
    nlohmann::ordered_json to_json() const;
};

/// Full cleaning pipeline:
///   no_access, low_volume, then repeated until nothing changes
///     [dead_ends, isolates,
///      self_loops + isolates + dead_ends + isolates,
///      no_neighbors,
///      largest_component + dead_ends + isolates,
///      circle_ramps + isolates],
///   and finally multi_edges.
/// The result is a fixed point: running the pipeline on it changes nothing.
RoadGraph clean_pipeline(RoadGraph g, const heatmap::VolumeHeatmap& hm, CleanReport* report = nullptr,
                         const CleanConfig& cfg = {});

}  // namespace t4c::clean
