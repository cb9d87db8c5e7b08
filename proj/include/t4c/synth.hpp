#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "t4c/heatmap.hpp"
#include "t4c/types.hpp"

namespace t4c::synth {

using ClassDistribution = std::array<double, kNumClasses>;

/// Grid city used for tests and demos. Row 0 is the northern row of nodes;
/// lines whose index is a multiple of 4 are primary roads, the rest
/// residential.
struct SyntheticCitySpec {
    std::string city = "synthetic";
    int rows = 6;
    int cols = 6;
    double spacing_m = 200.0;
    double origin_lat = 51.5;
    double origin_lon = -0.12;
    double bbox_margin_m = 500.0;

    int days = 4;
    std::string first_day = "2022-01-03";

    /// Fraction of (edge, bin) pairs per day carrying a classified label.
    double coverage = 0.32;
    /// Per highway class overrides of `coverage`.
    std::map<std::string, double> coverage_by_class;
    /// Fraction of edges without a free-flow speed.
    double missing_free_flow = 0.05;

    /// Fraction of grid nodes with a detector placed a few meters off.
    double detector_density = 0.25;
    int mid_edge_detectors = 2;  // placed 5 m beside an edge midpoint (split)
    int far_detectors = 1;       // placed in a block interior (discarded)

    /// Adds dead ends, a private edge, a short self-loop, a parallel edge,
    /// a low-volume diagonal, an isolated node and a detached triangle.
    bool messy = false;

    /// Named class distributions and the regime of each zone per hour.
    std::map<std::string, ClassDistribution> regimes{
        {"free", {0.9, 0.08, 0.02}}, {"moderate", {0.1, 0.8, 0.1}}, {"congested", {0.05, 0.15, 0.8}}};
    std::map<std::string, std::array<std::string, 24>> zone_schedule;

    SyntheticCitySpec();

    /// Throws ValidationError for out-of-range settings.
    void validate() const;

    static SyntheticCitySpec from_json(const nlohmann::ordered_json& j);
    nlohmann::ordered_json to_json() const;
};

struct SyntheticCity {
    SyntheticCitySpec spec;
    RoadGraph graph;
    std::vector<DetectorDay> detectors;
    std::vector<SegmentSpeedStats> stats;  // all days, each row carries its day
    std::vector<FreeFlow> free_flow;
    std::vector<heatmap::DailyVolumes> daily_volumes;
    heatmap::BoundingBox bbox;
    std::vector<std::string> days;
    std::map<EdgeKey, std::string> edge_zone;  // grid edges only
};

/// Zone of a grid node: "center" for the middle half of rows and columns,
/// else "outer".
std::string zone_of(const SyntheticCitySpec& spec, int row, int col);

/// Node id of grid position (row, col).
NodeId grid_node(const SyntheticCitySpec& spec, int row, int col);

/// Planted class distribution of an edge at an hour.
ClassDistribution planted(const SyntheticCity& city, const EdgeKey& e, int hour);

/// `count` consecutive ISO days starting at `first`.
std::vector<std::string> consecutive_days(const std::string& first, int count);

SyntheticCity generate_synthetic_city(const SyntheticCitySpec& spec, std::uint64_t seed);

struct WrittenCity {
    std::filesystem::path graph_dir;
    std::filesystem::path detectors;
    std::filesystem::path speed_stats;
    std::filesystem::path free_flow;
    std::filesystem::path daily_volumes;
    std::filesystem::path heatmap;
    std::filesystem::path spec;
};

/// Writes every artifact under `dir` and returns the paths.
WrittenCity write_synthetic_city(const SyntheticCity& city, const std::filesystem::path& dir);

}  // namespace t4c::synth
