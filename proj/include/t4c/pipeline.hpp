#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "t4c/attach.hpp"
#include "t4c/clean.hpp"
#include "t4c/heatmap.hpp"
#include "t4c/supersegments.hpp"

namespace t4c::pipeline {

namespace fs = std::filesystem;

inline const std::vector<std::string> kStages{"attach", "clean", "sample_supersegments", "label", "score"};

struct Paths {
    fs::path graph_dir;
    fs::path detectors;
    fs::path heatmap;
    fs::path daily_volumes;  // with bbox, replaces heatmap
    fs::path speed_stats;
    fs::path free_flow;
    fs::path key_intersection_whitelist;
    fs::path supersegment_whitelist;
    fs::path supersegments;   // input when sampling is off
    fs::path cc_labels;       // input when labeling is off
    fs::path eta_labels;      // input when labeling is off
    fs::path cc_predictions;  // optional; the historic baseline is used otherwise
    fs::path eta_predictions;
    fs::path out_dir;
};

struct Thresholds {
    attach::AttachConfig attach;
    clean::CleanConfig clean;
};

struct Manifest {
    std::string city = "city";
    std::optional<std::uint64_t> seed;
    Paths paths;
    std::map<std::string, bool> stages;  // every entry of kStages
    supersegments::SearchConfig search;
    Thresholds thresholds;
    std::optional<heatmap::BoundingBox> bbox;
    int heatmap_sample_days = 30;
    bool overall_any_city_count = false;
    // Paths as written in the manifest file; echoed in the summary so that the
    // output does not depend on where the manifest lives.
    nlohmann::ordered_json paths_as_given;

    Manifest();

    bool enabled(const std::string& stage) const { return stages.at(stage); }

    /// Checks required inputs for the enabled stages, distinct paths and the
    /// seed. Throws ValidationError before anything runs.
    void validate() const;

    /// Relative paths are resolved against `base_dir`.
    static Manifest from_json(const nlohmann::ordered_json& j, const fs::path& base_dir = {});
    nlohmann::ordered_json to_json() const;
};

Manifest load_manifest(const fs::path& path);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct RunResult {
    nlohmann::ordered_json summary;  // also written to out_dir/summary.json
    std::vector<StageTiming> timings;
};

/// Runs the enabled stages in order, each reading only declared inputs or
/// earlier stage outputs and writing under out_dir/<stage>/. On failure the
/// summary is written with status "failed" and the stage name, and a
/// StageError is thrown.
RunResult run_pipeline(const Manifest& m);

}  // namespace t4c::pipeline
