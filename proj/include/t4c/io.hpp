#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "json.hpp"
#include "t4c/types.hpp"

// Newline-delimited JSON readers and writers for every record type.
// Readers validate each record and report failures as
// ValidationError("<file>:<line>: <reason>"). Missing values are JSON null.

namespace t4c::io {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline constexpr const char* kNodesFile = "nodes.jsonl";
inline constexpr const char* kEdgesFile = "edges.jsonl";

// Record <-> JSON. The parsers throw ValidationError without location;
// the file readers add it.
Json to_json(const Node& n);
Json to_json(const Edge& e);
Json to_json(const DetectorDay& d);
Json to_json(const SegmentSpeedStats& s);
Json to_json(const FreeFlow& f);
Json to_json(const CongestionLabel& l);
Json to_json(const SuperSegment& s);
Json to_json(const EtaLabel& l);
Json to_json(const CcPrediction& p);
Json to_json(const EtaPrediction& p);

Node parse_node(const Json& j);
Edge parse_edge(const Json& j);
DetectorDay parse_detector_day(const Json& j);
SegmentSpeedStats parse_speed_stats(const Json& j);
FreeFlow parse_free_flow(const Json& j);
CongestionLabel parse_cc_label(const Json& j);
SuperSegment parse_supersegment(const Json& j);
EtaLabel parse_eta_label(const Json& j);
CcPrediction parse_cc_prediction(const Json& j);
EtaPrediction parse_eta_prediction(const Json& j);

/// Checks node/edge invariants and endpoint references.
void validate_graph(const RoadGraph& g);

/// Reads `dir/nodes.jsonl` and `dir/edges.jsonl`.
RoadGraph load_graph(const fs::path& dir);
void save_graph(const RoadGraph& g, const fs::path& dir);

std::vector<DetectorDay> load_detectors(const fs::path& path);
std::vector<SegmentSpeedStats> load_speed_stats(const fs::path& path);
std::vector<FreeFlow> load_free_flow(const fs::path& path);
std::vector<CongestionLabel> load_cc_labels(const fs::path& path);
std::vector<SuperSegment> load_supersegments(const fs::path& path);
std::vector<EtaLabel> load_eta_labels(const fs::path& path);
std::vector<CcPrediction> load_cc_predictions(const fs::path& path);
std::vector<EtaPrediction> load_eta_predictions(const fs::path& path);
/// One node id per line, either a bare integer or {"node_id": int}.
std::vector<NodeId> load_node_list(const fs::path& path);

void save_detectors(const std::vector<DetectorDay>& rows, const fs::path& path);
void save_speed_stats(const std::vector<SegmentSpeedStats>& rows, const fs::path& path);
void save_free_flow(const std::vector<FreeFlow>& rows, const fs::path& path);
void save_cc_labels(const std::vector<CongestionLabel>& rows, const fs::path& path);
void save_supersegments(const std::vector<SuperSegment>& rows, const fs::path& path);
void save_eta_labels(const std::vector<EtaLabel>& rows, const fs::path& path);
void save_cc_predictions(const std::vector<CcPrediction>& rows, const fs::path& path);
void save_eta_predictions(const std::vector<EtaPrediction>& rows, const fs::path& path);

/// Writes one compact JSON document per line.
void write_jsonl(const fs::path& path, const std::vector<Json>& rows);
/// Calls `fn(json, line_number)` for every non-blank line.
void for_each_record(const fs::path& path, const std::function<void(const Json&, std::size_t)>& fn);

Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& doc);

}  // namespace t4c::io
