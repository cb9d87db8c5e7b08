#include "t4c/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "t4c/errors.hpp"
#include "t4c/geo.hpp"

namespace t4c::io {

namespace {

// Geometry endpoints may sit this far from their node.
constexpr double kEndpointToleranceM = 1.0;

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

const Json& field(const Json& j, const char* name) {
    if (!j.is_object()) fail("record is not a JSON object");
    auto it = j.find(name);
    if (it == j.end()) fail(fmt::format("missing field '{}'", name));
    return *it;
}

bool has_value(const Json& j, const char* name) {
    auto it = j.find(name);
    return it != j.end() && !it->is_null();
}

double get_number(const Json& j, const char* name) {
    const Json& v = field(j, name);
    if (!v.is_number()) fail(fmt::format("field '{}' must be a number", name));
    return v.get<double>();
}

std::int64_t get_integer(const Json& j, const char* name) {
    const Json& v = field(j, name);
    if (!v.is_number_integer()) fail(fmt::format("field '{}' must be an integer", name));
    return v.get<std::int64_t>();
}

NodeId get_node_id(const Json& j, const char* name) {
    const std::int64_t v = get_integer(j, name);
    if (v < 0) fail(fmt::format("field '{}' must be a non-negative node id", name));
    return static_cast<NodeId>(v);
}

std::string get_string(const Json& j, const char* name) {
    const Json& v = field(j, name);
    if (!v.is_string()) fail(fmt::format("field '{}' must be a string", name));
    return v.get<std::string>();
}

std::optional<std::string> get_optional_string(const Json& j, const char* name) {
    if (!has_value(j, name)) return std::nullopt;
    return get_string(j, name);
}

std::string get_day_or_empty(const Json& j) {
    if (!has_value(j, "day")) return {};
    return get_string(j, "day");
}

int get_bin(const Json& j) {
    const std::int64_t t = get_integer(j, "t");
    if (t < 0 || t >= kBinsPerDay) fail(fmt::format("bin t={} outside [0, {}]", t, kBinsPerDay - 1));
    return static_cast<int>(t);
}

void check_day(const std::string& day) {
    static const std::regex kIsoDay(R"(\d{4}-\d{2}-\d{2})");
    if (!std::regex_match(day, kIsoDay)) fail(fmt::format("day '{}' is not YYYY-MM-DD", day));
}

void put_day(Json& j, const std::string& day) {
    if (!day.empty()) j["day"] = day;
}

Json nullable(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

// JSON has no NaN; null stands for a non-finite value.
Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double number_or_nan(const Json& v, const char* what) {
    if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (!v.is_number()) fail(fmt::format("{} must be a number or null", what));
    return v.get<double>();
}

EdgeKey parse_edge_key(const Json& v) {
    if (v.is_array() && v.size() == 2 && v[0].is_number_integer() && v[1].is_number_integer()) {
        return {v[0].get<NodeId>(), v[1].get<NodeId>()};
    }
    if (v.is_object()) return {get_node_id(v, "u"), get_node_id(v, "v")};
    fail("edge key must be [u, v] or {\"u\":..,\"v\":..}");
}

template <class T, class Parse>
std::vector<T> read_all(const fs::path& path, Parse parse) {
    std::vector<T> out;
    for_each_record(path, [&](const Json& j, std::size_t) { out.push_back(parse(j)); });
    return out;
}

template <class T>
void write_all(const std::vector<T>& rows, const fs::path& path) {
    std::vector<Json> docs;
    docs.reserve(rows.size());
    for (const auto& r : rows) docs.push_back(to_json(r));
    write_jsonl(path, docs);
}

}  // namespace

// ---------------------------------------------------------------- to_json

Json to_json(const Node& n) {
    Json j;
    j["node_id"] = n.node_id;
    j["lat"] = n.lat;
    j["lon"] = n.lon;
    j["counter_info"] = n.counter_info;
    j["num_assigned"] = n.num_assigned;
    if (n.origin) j["origin"] = *n.origin;
    return j;
}

Json to_json(const Edge& e) {
    Json j;
    j["u"] = e.u;
    j["v"] = e.v;
    j["length_m"] = e.length_m;
    j["importance"] = e.importance;
    j["maxspeed_kph"] = e.maxspeed_kph;
    j["highway_class"] = e.highway_class;
    j["access"] = e.access ? Json(*e.access) : Json(nullptr);
    j["oneway"] = e.oneway;
    Json geom = Json::array();
    for (const auto& p : e.geometry) geom.push_back(Json::array({p.lat, p.lon}));
    j["geometry"] = std::move(geom);
    return j;
}

Json to_json(const DetectorDay& d) {
    Json j;
    j["detector_id"] = d.detector_id;
    j["lat"] = d.lat;
    j["lon"] = d.lon;
    j["heading"] = nullable(d.heading);
    j["day"] = d.day;
    Json counts = Json::array();
    for (const auto& c : d.counts) counts.push_back(nullable(c));
    j["counts"] = std::move(counts);
    return j;
}

Json to_json(const SegmentSpeedStats& s) {
    Json j;
    j["u"] = s.u;
    j["v"] = s.v;
    j["t"] = s.t;
    j["median_speed_kph"] = s.median_speed_kph;
    j["volume"] = s.volume;
    j["raw_median_speed"] = s.raw_median_speed;
    put_day(j, s.day);
    return j;
}

Json to_json(const FreeFlow& f) {
    Json j;
    j["u"] = f.u;
    j["v"] = f.v;
    j["free_flow_kph"] = f.free_flow_kph;
    return j;
}

Json to_json(const CongestionLabel& l) {
    Json j;
    j["u"] = l.u;
    j["v"] = l.v;
    j["t"] = l.t;
    j["cc"] = l.cc;
    put_day(j, l.day);
    return j;
}

Json to_json(const SuperSegment& s) {
    Json j;
    j["ssid"] = s.ssid;
    Json edges = Json::array();
    for (const auto& k : s.edges) edges.push_back(Json::array({k.u, k.v}));
    j["edges"] = std::move(edges);
    return j;
}

Json to_json(const EtaLabel& l) {
    Json j;
    j["ssid"] = l.ssid;
    j["t"] = l.t;
    j["eta_s"] = l.eta_s;
    put_day(j, l.day);
    return j;
}

Json to_json(const CcPrediction& p) {
    Json j;
    j["u"] = p.u;
    j["v"] = p.v;
    j["t"] = p.t;
    put_day(j, p.day);
    j["logits"] = Json::array({finite_or_null(p.logits[0]), finite_or_null(p.logits[1]),
                               finite_or_null(p.logits[2])});
    return j;
}

Json to_json(const EtaPrediction& p) {
    Json j;
    j["ssid"] = p.ssid;
    j["t"] = p.t;
    put_day(j, p.day);
    j["eta_s"] = finite_or_null(p.eta_s);
    return j;
}

// ---------------------------------------------------------------- parsers

Node parse_node(const Json& j) {
    Node n;
    n.node_id = get_node_id(j, "node_id");
    n.lat = get_number(j, "lat");
    n.lon = get_number(j, "lon");
    if (!(n.lat >= -90.0 && n.lat <= 90.0)) fail(fmt::format("lat {} outside [-90, 90]", n.lat));
    if (!(n.lon >= -180.0 && n.lon <= 180.0)) fail(fmt::format("lon {} outside [-180, 180]", n.lon));
    if (has_value(j, "counter_info")) {
        const Json& ci = j["counter_info"];
        if (!ci.is_array()) fail("field 'counter_info' must be a list of strings");
        for (const auto& s : ci) {
            if (!s.is_string()) fail("field 'counter_info' must be a list of strings");
            n.counter_info.push_back(s.get<std::string>());
        }
    }
    if (has_value(j, "num_assigned")) {
        const std::int64_t k = get_integer(j, "num_assigned");
        if (k < 1) fail(fmt::format("num_assigned {} must be >= 1", k));
        n.num_assigned = static_cast<int>(k);
    }
    n.origin = get_optional_string(j, "origin");
    return n;
}

Edge parse_edge(const Json& j) {
    Edge e;
    e.u = get_node_id(j, "u");
    e.v = get_node_id(j, "v");
    e.length_m = get_number(j, "length_m");
    if (!(e.length_m > 0.0) || !std::isfinite(e.length_m)) fail(fmt::format("length_m {} must be > 0", e.length_m));
    const std::int64_t imp = get_integer(j, "importance");
    if (imp < 0 || imp > 5) fail(fmt::format("importance {} outside [0, 5]", imp));
    e.importance = static_cast<int>(imp);
    e.maxspeed_kph = get_number(j, "maxspeed_kph");
    if (!(e.maxspeed_kph > 0.0)) fail(fmt::format("maxspeed_kph {} must be > 0", e.maxspeed_kph));
    e.highway_class = get_string(j, "highway_class");
    e.access = get_optional_string(j, "access");
    if (has_value(j, "oneway")) {
        const Json& ow = j["oneway"];
        if (!ow.is_boolean()) fail("field 'oneway' must be a boolean");
        e.oneway = ow.get<bool>();
    }
    if (has_value(j, "geometry")) {
        const Json& g = j["geometry"];
        if (!g.is_array()) fail("field 'geometry' must be a list of [lat, lon]");
        for (const auto& p : g) {
            if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
                fail("field 'geometry' must be a list of [lat, lon]");
            }
            e.geometry.push_back({p[0].get<double>(), p[1].get<double>()});
        }
        if (e.geometry.size() == 1) fail("geometry needs at least two points");
    }
    return e;
}

DetectorDay parse_detector_day(const Json& j) {
    DetectorDay d;
    d.detector_id = get_string(j, "detector_id");
    d.lat = get_number(j, "lat");
    d.lon = get_number(j, "lon");
    if (!(d.lat >= -90.0 && d.lat <= 90.0) || !(d.lon >= -180.0 && d.lon <= 180.0)) {
        fail(fmt::format("detector {} has invalid coordinates", d.detector_id));
    }
    if (has_value(j, "heading")) d.heading = get_number(j, "heading");
    d.day = get_string(j, "day");
    check_day(d.day);
    const Json& counts = field(j, "counts");
    if (!counts.is_array() || counts.size() != static_cast<std::size_t>(kBinsPerDay)) {
        fail(fmt::format("detector {} day {}: expected {} count slots, got {}", d.detector_id, d.day,
                         kBinsPerDay, counts.is_array() ? counts.size() : 0));
    }
    for (int t = 0; t < kBinsPerDay; ++t) {
        const Json& c = counts[t];
        if (c.is_null()) continue;
        if (!c.is_number()) fail(fmt::format("count slot {} must be a number or null", t));
        const double v = c.get<double>();
        if (!(v >= 0.0) || !std::isfinite(v)) fail(fmt::format("count slot {} is negative", t));
        d.counts[t] = v;
    }
    return d;
}

SegmentSpeedStats parse_speed_stats(const Json& j) {
    SegmentSpeedStats s;
    s.u = get_node_id(j, "u");
    s.v = get_node_id(j, "v");
    s.t = get_bin(j);
    s.median_speed_kph = get_number(j, "median_speed_kph");
    if (!(s.median_speed_kph >= 0.0)) fail("median_speed_kph must be >= 0");
    s.volume = get_integer(j, "volume");
    if (s.volume < 0) fail("volume must be >= 0");
    s.raw_median_speed = static_cast<int>(get_integer(j, "raw_median_speed"));
    s.day = get_day_or_empty(j);
    return s;
}

FreeFlow parse_free_flow(const Json& j) {
    FreeFlow f;
    f.u = get_node_id(j, "u");
    f.v = get_node_id(j, "v");
    f.free_flow_kph = get_number(j, "free_flow_kph");
    if (!(f.free_flow_kph > 0.0)) fail(fmt::format("free_flow_kph {} must be > 0", f.free_flow_kph));
    return f;
}

CongestionLabel parse_cc_label(const Json& j) {
    CongestionLabel l;
    l.u = get_node_id(j, "u");
    l.v = get_node_id(j, "v");
    l.t = get_bin(j);
    const std::int64_t cc = get_integer(j, "cc");
    if (cc < 0 || cc > 3) fail(fmt::format("cc {} outside {{0, 1, 2, 3}}", cc));
    l.cc = static_cast<int>(cc);
    l.day = get_day_or_empty(j);
    return l;
}

SuperSegment parse_supersegment(const Json& j) {
    SuperSegment s;
    const Json& id = field(j, "ssid");
    if (id.is_string()) {
        s.ssid = id.get<std::string>();
    } else if (id.is_number_integer()) {
        s.ssid = std::to_string(id.get<std::int64_t>());
    } else {
        fail("field 'ssid' must be a string or integer");
    }
    const Json& edges = field(j, "edges");
    if (!edges.is_array() || edges.empty()) fail(fmt::format("super-segment {} has no edges", s.ssid));
    for (const auto& e : edges) s.edges.push_back(parse_edge_key(e));
    for (std::size_t i = 1; i < s.edges.size(); ++i) {
        if (s.edges[i - 1].v != s.edges[i].u) {
            fail(fmt::format("super-segment {}: edge {} does not continue edge {}", s.ssid, i, i - 1));
        }
    }
    std::set<NodeId> seen{s.edges.front().u};
    for (const auto& e : s.edges) {
        if (!seen.insert(e.v).second) fail(fmt::format("super-segment {} is not a simple path", s.ssid));
    }
    return s;
}

EtaLabel parse_eta_label(const Json& j) {
    EtaLabel l;
    l.ssid = field(j, "ssid").is_string() ? get_string(j, "ssid") : std::to_string(get_integer(j, "ssid"));
    l.t = get_bin(j);
    l.eta_s = get_number(j, "eta_s");
    if (!(l.eta_s > 0.0)) fail(fmt::format("eta_s {} must be > 0", l.eta_s));
    l.day = get_day_or_empty(j);
    return l;
}

CcPrediction parse_cc_prediction(const Json& j) {
    CcPrediction p;
    p.u = get_node_id(j, "u");
    p.v = get_node_id(j, "v");
    p.t = get_bin(j);
    p.day = get_day_or_empty(j);
    const Json& logits = field(j, "logits");
    if (!logits.is_array() || logits.size() != static_cast<std::size_t>(kNumClasses)) {
        fail(fmt::format("field 'logits' must hold {} values", kNumClasses));
    }
    for (int c = 0; c < kNumClasses; ++c) p.logits[c] = number_or_nan(logits[c], "logit");
    return p;
}

EtaPrediction parse_eta_prediction(const Json& j) {
    EtaPrediction p;
    p.ssid = field(j, "ssid").is_string() ? get_string(j, "ssid") : std::to_string(get_integer(j, "ssid"));
    p.t = get_bin(j);
    p.day = get_day_or_empty(j);
    p.eta_s = number_or_nan(field(j, "eta_s"), "eta_s");
    return p;
}

// ---------------------------------------------------------------- graph

void validate_graph(const RoadGraph& g) {
    for (const auto& [id, n] : g.nodes) {
        if (id != n.node_id) fail(fmt::format("node map key {} != node_id {}", id, n.node_id));
    }
    for (const auto& e : g.edges) {
        for (NodeId end : {e.u, e.v}) {
            if (!g.has_node(end)) fail(fmt::format("edge {}->{} references unknown node {}", e.u, e.v, end));
        }
        if (e.geometry.size() >= 2) {
            const double du = geo::haversine_m(e.geometry.front(), g.node(e.u).position());
            const double dv = geo::haversine_m(e.geometry.back(), g.node(e.v).position());
            if (du > kEndpointToleranceM || dv > kEndpointToleranceM) {
                fail(fmt::format("edge {}->{} geometry endpoints are {:.2f} m / {:.2f} m from its nodes",
                                 e.u, e.v, du, dv));
            }
        }
    }
}

RoadGraph load_graph(const fs::path& dir) {
    RoadGraph g;
    const fs::path nodes_path = dir / kNodesFile;
    for_each_record(nodes_path, [&](const Json& j, std::size_t line) {
        Node n = parse_node(j);
        if (!g.nodes.emplace(n.node_id, n).second) {
            fail(fmt::format("{}:{}: duplicate node_id {}", nodes_path.string(), line, n.node_id));
        }
    });
    const fs::path edges_path = dir / kEdgesFile;
    for_each_record(edges_path, [&](const Json& j, std::size_t line) {
        Edge e = parse_edge(j);
        for (NodeId end : {e.u, e.v}) {
            if (!g.has_node(end)) {
                fail(fmt::format("{}:{}: edge {}->{} references unknown node {}", edges_path.string(), line,
                                 e.u, e.v, end));
            }
        }
        if (e.geometry.empty()) e.geometry = {g.node(e.u).position(), g.node(e.v).position()};
        g.edges.push_back(std::move(e));
    });
    validate_graph(g);
    return g;
}

void save_graph(const RoadGraph& g, const fs::path& dir) {
    fs::create_directories(dir);
    std::vector<Json> nodes;
    nodes.reserve(g.nodes.size());
    for (const auto& [_, n] : g.nodes) nodes.push_back(to_json(n));
    write_jsonl(dir / kNodesFile, nodes);
    write_all(g.edges, dir / kEdgesFile);
}

// ---------------------------------------------------------------- files

void for_each_record(const fs::path& path, const std::function<void(const Json&, std::size_t)>& fn) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open {}", path.string()));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(fmt::format("{}:{}: invalid JSON: {}", path.string(), line_no, e.what()));
        }
        try {
            fn(j, line_no);
        } catch (const ValidationError& e) {
            const std::string what = e.what();
            // Already located by a nested reader.
            if (what.rfind(path.string() + ":", 0) == 0) throw;
            throw ValidationError(fmt::format("{}:{}: {}", path.string(), line_no, what));
        }
    }
}

void write_jsonl(const fs::path& path, const std::vector<Json>& rows) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& r : rows) out << r.dump() << '\n';
}

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(fmt::format("cannot open {}", path.string()));
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
    }
}

void write_json(const fs::path& path, const Json& doc) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

std::vector<DetectorDay> load_detectors(const fs::path& path) {
    return read_all<DetectorDay>(path, parse_detector_day);
}
std::vector<SegmentSpeedStats> load_speed_stats(const fs::path& path) {
    return read_all<SegmentSpeedStats>(path, parse_speed_stats);
}
std::vector<FreeFlow> load_free_flow(const fs::path& path) { return read_all<FreeFlow>(path, parse_free_flow); }
std::vector<CongestionLabel> load_cc_labels(const fs::path& path) {
    return read_all<CongestionLabel>(path, parse_cc_label);
}
std::vector<SuperSegment> load_supersegments(const fs::path& path) {
    return read_all<SuperSegment>(path, parse_supersegment);
}
std::vector<EtaLabel> load_eta_labels(const fs::path& path) { return read_all<EtaLabel>(path, parse_eta_label); }
std::vector<CcPrediction> load_cc_predictions(const fs::path& path) {
    return read_all<CcPrediction>(path, parse_cc_prediction);
}
std::vector<EtaPrediction> load_eta_predictions(const fs::path& path) {
    return read_all<EtaPrediction>(path, parse_eta_prediction);
}

std::vector<NodeId> load_node_list(const fs::path& path) {
    return read_all<NodeId>(path, [](const Json& j) -> NodeId {
        if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return j.get<NodeId>();
        return get_node_id(j, "node_id");
    });
}

void save_detectors(const std::vector<DetectorDay>& rows, const fs::path& path) { write_all(rows, path); }
void save_speed_stats(const std::vector<SegmentSpeedStats>& rows, const fs::path& path) { write_all(rows, path); }
void save_free_flow(const std::vector<FreeFlow>& rows, const fs::path& path) { write_all(rows, path); }
void save_cc_labels(const std::vector<CongestionLabel>& rows, const fs::path& path) { write_all(rows, path); }
void save_supersegments(const std::vector<SuperSegment>& rows, const fs::path& path) { write_all(rows, path); }
void save_eta_labels(const std::vector<EtaLabel>& rows, const fs::path& path) { write_all(rows, path); }
void save_cc_predictions(const std::vector<CcPrediction>& rows, const fs::path& path) { write_all(rows, path); }
void save_eta_predictions(const std::vector<EtaPrediction>& rows, const fs::path& path) { write_all(rows, path); }

}  // namespace t4c::io
