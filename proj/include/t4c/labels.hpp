#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "t4c/types.hpp"

namespace t4c::labels {

constexpr double kMinSpeedKph = 0.5;
constexpr double kLongEdgeEtaS = 1800.0;
constexpr double kRedFactor = 0.4;
constexpr double kGreenFactor = 0.8;
constexpr std::int64_t kRedMinVolume = 5;
constexpr std::int64_t kYellowMinVolume = 3;

/// Congestion class 0..3 for one bin. Sentinel raw speeds (0, 255) give 0
/// before the free-flow check. Throws std::invalid_argument when
/// free_flow_kph <= 0.
int extract_cc(const SegmentSpeedStats& stats, double free_flow_kph);

enum class SpeedSource { kCurrent, kFreeFlow, kMaxspeed };

const char* to_string(SpeedSource s);

struct EdgeSpeeds {
    double length_m = 0.0;
    std::array<double, kBinsPerDay> speeds{};
    std::array<SpeedSource, kBinsPerDay> sources{};
};

struct EdgeSpeedSchedule {
    std::map<EdgeKey, EdgeSpeeds> edges;
    std::size_t maxspeed_only = 0;     // edges without a free-flow speed
    std::size_t unknown_stats = 0;     // stats rows whose edge is not in the graph
    std::size_t zero_speed_stats = 0;  // stats rows with median 0 kph, left at the default

    const EdgeSpeeds* find(const EdgeKey& k) const;
};

/// Every bin starts at the free-flow speed (else maxspeed) and is overwritten
/// by the current median speed where a stats row exists. Stats rows must
/// belong to one day; duplicate (u, v, t) rows raise ValidationError.
EdgeSpeedSchedule build_edge_speed_schedule(const std::vector<Edge>& edges, const std::vector<FreeFlow>& free_flow,
                                            const std::vector<SegmentSpeedStats>& stats);

/// Travel time over one edge at bin t with the 0.5 km/h clip and the
/// long-edge fallback: 1800 + length over the mean of the unclipped speeds at
/// max(t-1, 0)..min(t+1, 95). Throws std::domain_error if that mean is not
/// positive.
double edge_eta(const EdgeSpeeds& e, int t);

/// Sum of edge_eta over the super-segment. Throws std::out_of_range for t
/// outside 0..95 and std::invalid_argument for an edge without a schedule.
double compute_eta(const SuperSegment& ss, const EdgeSpeedSchedule& schedule, int t);

struct LabelResult {
    std::vector<CongestionLabel> cc_labels;  // every edge x 96 bins, 0 where unclassified
    std::vector<EtaLabel> eta_labels;        // every super-segment x 96 bins
    EdgeSpeedSchedule schedule;
    std::size_t stats_without_free_flow = 0;  // bins left at 0 since no free-flow speed exists
};

/// Labels one day. Throws ValidationError when a super-segment references an
/// edge that is not in the graph.
LabelResult label_city(const RoadGraph& graph, const std::vector<SuperSegment>& supersegments,
                       const std::vector<SegmentSpeedStats>& stats, const std::vector<FreeFlow>& free_flow,
                       const std::string& day = "");

/// Distinct days in the stats ("" for rows without a day), sorted.
std::vector<std::string> stats_days(const std::vector<SegmentSpeedStats>& stats);

std::vector<SegmentSpeedStats> stats_for_day(const std::vector<SegmentSpeedStats>& stats, const std::string& day);

}  // namespace t4c::labels
