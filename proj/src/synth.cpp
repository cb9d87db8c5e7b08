#include "t4c/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <regex>
#include <set>

#include <fmt/format.h>

#include "t4c/errors.hpp"
#include "t4c/geo.hpp"
#include "t4c/io.hpp"
#include "t4c/rng.hpp"

namespace t4c::synth {

using io::Json;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Factor ranges (median speed / free flow) that land in each class.
constexpr std::array<std::pair<double, double>, kNumClasses> kFactorRange{
    {{0.85, 1.1}, {0.45, 0.75}, {0.1, 0.35}}};

// Grid edges carry no heatmap paint this close to their end nodes, so that
// edges which only touch grid nodes read as low volume.
constexpr double kPaintGapM = 15.0;

std::array<std::string, 24> schedule(std::initializer_list<std::pair<int, const char*>> from_hour) {
    std::array<std::string, 24> out;
    std::string current = "free";
    auto it = from_hour.begin();
    for (int h = 0; h < 24; ++h) {
        while (it != from_hour.end() && it->first == h) current = (it++)->second;
        out[h] = current;
    }
    return out;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

int sample_class(std::mt19937_64& rng, const ClassDistribution& p) {
    const double x = uniform01(rng) * (p[0] + p[1] + p[2]);
    if (x < p[0]) return 1;
    if (x < p[0] + p[1]) return 2;
    return 3;
}

// k distinct indices from [0, n), partial Fisher-Yates, in draw order.
std::vector<std::size_t> choose(std::mt19937_64& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    k = std::min(k, n);
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + uniform_below(rng, n - i)]);
    idx.resize(k);
    return idx;
}

bool is_primary_line(int index) { return index % 4 == 0; }

Edge make_edge(const RoadGraph& g, NodeId u, NodeId v, const std::string& highway) {
    Edge e;
    e.u = u;
    e.v = v;
    e.highway_class = highway;
    e.importance = importance_for_highway(highway);
    e.maxspeed_kph = highway == "primary" ? 50.0 : 30.0;
    e.geometry = {g.node(u).position(), g.node(v).position()};
    e.length_m = geo::haversine_m(e.geometry.front(), e.geometry.back());
    return e;
}

void add_pair(RoadGraph& g, NodeId a, NodeId b, const std::string& highway) {
    g.edges.push_back(make_edge(g, a, b, highway));
    g.edges.push_back(make_edge(g, b, a, highway));
}

NodeId add_node(RoadGraph& g, LatLon p) {
    const NodeId id = g.next_node_id();
    Node n;
    n.node_id = id;
    n.lat = p.lat;
    n.lon = p.lon;
    g.nodes.emplace(id, n);
    return id;
}

}  // namespace

SyntheticCitySpec::SyntheticCitySpec() {
    zone_schedule["center"] = schedule(
        {{0, "free"}, {6, "moderate"}, {7, "congested"}, {10, "moderate"}, {16, "congested"}, {19, "moderate"},
         {22, "free"}});
    zone_schedule["outer"] =
        schedule({{0, "free"}, {7, "moderate"}, {10, "free"}, {16, "moderate"}, {19, "free"}});
}

void SyntheticCitySpec::validate() const {
    if (rows < 2 || cols < 2) throw ValidationError("synthetic grid needs at least 2 x 2 nodes");
    if (!(spacing_m > 0.0)) throw ValidationError("grid spacing must be > 0");
    if (!(bbox_margin_m >= 0.0)) throw ValidationError("bbox margin must be >= 0");
    if (messy && bbox_margin_m < 400.0) throw ValidationError("messy grids need a bbox margin of at least 400 m");
    if (days < 1) throw ValidationError("synthetic city needs at least one day");
    if (!std::regex_match(first_day, std::regex(R"(\d{4}-\d{2}-\d{2})"))) {
        throw ValidationError(fmt::format("first_day '{}' is not YYYY-MM-DD", first_day));
    }
    auto check_fraction = [](double x, const std::string& what) {
        if (!(x >= 0.0 && x <= 1.0)) throw ValidationError(fmt::format("{} {} outside [0, 1]", what, x));
    };
    check_fraction(coverage, "coverage");
    for (const auto& [cls, c] : coverage_by_class) check_fraction(c, "coverage for " + cls);
    check_fraction(missing_free_flow, "missing_free_flow");
    check_fraction(detector_density, "detector_density");
    if (mid_edge_detectors < 0 || far_detectors < 0) throw ValidationError("detector counts must be >= 0");
    for (const auto& [name, p] : regimes) {
        if (p[0] < 0 || p[1] < 0 || p[2] < 0 || !(p[0] + p[1] + p[2] > 0)) {
            throw ValidationError(fmt::format("regime '{}' needs non-negative, non-zero probabilities", name));
        }
    }
    for (const char* zone : {"center", "outer"}) {
        auto it = zone_schedule.find(zone);
        if (it == zone_schedule.end()) throw ValidationError(fmt::format("zone_schedule lacks zone '{}'", zone));
        for (const auto& r : it->second) {
            if (!regimes.count(r)) throw ValidationError(fmt::format("zone '{}' uses unknown regime '{}'", zone, r));
        }
    }
}

SyntheticCitySpec SyntheticCitySpec::from_json(const Json& j) {
    SyntheticCitySpec s;
    try {
        s.city = j.value("city", s.city);
        s.rows = j.value("rows", s.rows);
        s.cols = j.value("cols", s.cols);
        s.spacing_m = j.value("spacing_m", s.spacing_m);
        s.origin_lat = j.value("origin_lat", s.origin_lat);
        s.origin_lon = j.value("origin_lon", s.origin_lon);
        s.bbox_margin_m = j.value("bbox_margin_m", s.bbox_margin_m);
        s.days = j.value("days", s.days);
        s.first_day = j.value("first_day", s.first_day);
        s.coverage = j.value("coverage", s.coverage);
        if (j.contains("coverage_by_class")) {
            s.coverage_by_class = j.at("coverage_by_class").get<std::map<std::string, double>>();
        }
        s.missing_free_flow = j.value("missing_free_flow", s.missing_free_flow);
        s.detector_density = j.value("detector_density", s.detector_density);
        s.mid_edge_detectors = j.value("mid_edge_detectors", s.mid_edge_detectors);
        s.far_detectors = j.value("far_detectors", s.far_detectors);
        s.messy = j.value("messy", s.messy);
        if (j.contains("regimes")) s.regimes = j.at("regimes").get<std::map<std::string, ClassDistribution>>();
        if (j.contains("zone_schedule")) {
            for (const auto& [zone, hours] : j.at("zone_schedule").items()) {
                s.zone_schedule[zone] = hours.get<std::array<std::string, 24>>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("invalid synthetic city spec: {}", e.what()));
    }
    s.validate();
    return s;
}

Json SyntheticCitySpec::to_json() const {
    Json j;
    j["city"] = city;
    j["rows"] = rows;
    j["cols"] = cols;
    j["spacing_m"] = spacing_m;
    j["origin_lat"] = origin_lat;
    j["origin_lon"] = origin_lon;
    j["bbox_margin_m"] = bbox_margin_m;
    j["days"] = days;
    j["first_day"] = first_day;
    j["coverage"] = coverage;
    j["coverage_by_class"] = coverage_by_class;
    j["missing_free_flow"] = missing_free_flow;
    j["detector_density"] = detector_density;
    j["mid_edge_detectors"] = mid_edge_detectors;
    j["far_detectors"] = far_detectors;
    j["messy"] = messy;
    j["regimes"] = regimes;
    j["zone_schedule"] = zone_schedule;
    return j;
}

std::string zone_of(const SyntheticCitySpec& spec, int row, int col) {
    const bool r = row >= spec.rows / 4 && row < spec.rows - spec.rows / 4;
    const bool c = col >= spec.cols / 4 && col < spec.cols - spec.cols / 4;
    return r && c ? "center" : "outer";
}

NodeId grid_node(const SyntheticCitySpec& spec, int row, int col) {
    return static_cast<NodeId>(row) * spec.cols + col + 1;
}

ClassDistribution planted(const SyntheticCity& city, const EdgeKey& e, int hour) {
    auto it = city.edge_zone.find(e);
    const std::string zone = it == city.edge_zone.end() ? "outer" : it->second;
    return city.spec.regimes.at(city.spec.zone_schedule.at(zone).at(hour));
}

std::vector<std::string> consecutive_days(const std::string& first, int count) {
    using namespace std::chrono;
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(first.c_str(), "%d-%u-%u", &y, &m, &d) != 3) {
        throw ValidationError(fmt::format("day '{}' is not YYYY-MM-DD", first));
    }
    const year_month_day start{year{y}, month{m}, day{d}};
    if (!start.ok()) throw ValidationError(fmt::format("day '{}' is not a calendar date", first));
    std::vector<std::string> out;
    for (int i = 0; i < count; ++i) {
        const year_month_day ymd{sys_days{start} + days{i}};
        out.push_back(fmt::format("{:04}-{:02}-{:02}", int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day())));
    }
    return out;
}

SyntheticCity generate_synthetic_city(const SyntheticCitySpec& spec, std::uint64_t seed) {
    spec.validate();
    SyntheticCity city;
    city.spec = spec;
    city.days = consecutive_days(spec.first_day, spec.days);
    RoadGraph& g = city.graph;

    // ---- grid
    const LatLon origin{spec.origin_lat, spec.origin_lon};
    auto grid_pos = [&](double row, double col) {
        return geo::destination(geo::destination(origin, 180.0, row * spec.spacing_m), 90.0, col * spec.spacing_m);
    };
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            Node n;
            n.node_id = grid_node(spec, r, c);
            const LatLon p = grid_pos(r, c);
            n.lat = p.lat;
            n.lon = p.lon;
            g.nodes.emplace(n.node_id, n);
        }
    }
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            const NodeId a = grid_node(spec, r, c);
            if (c + 1 < spec.cols) {
                const NodeId b = grid_node(spec, r, c + 1);
                add_pair(g, a, b, is_primary_line(r) ? "primary" : "residential");
                city.edge_zone[{a, b}] = zone_of(spec, r, c);
                city.edge_zone[{b, a}] = zone_of(spec, r, c + 1);
            }
            if (r + 1 < spec.rows) {
                const NodeId b = grid_node(spec, r + 1, c);
                add_pair(g, a, b, is_primary_line(c) ? "primary" : "residential");
                city.edge_zone[{a, b}] = zone_of(spec, r, c);
                city.edge_zone[{b, a}] = zone_of(spec, r + 1, c);
            }
        }
    }
    const std::size_t grid_edges = g.edges.size();

    // ---- bounding box
    {
        const LatLon nw = geo::destination(geo::destination(grid_pos(0, 0), 0.0, spec.bbox_margin_m), 270.0,
                                           spec.bbox_margin_m);
        const LatLon se = geo::destination(
            geo::destination(grid_pos(spec.rows - 1, spec.cols - 1), 180.0, spec.bbox_margin_m), 90.0,
            spec.bbox_margin_m);
        city.bbox = {se.lat, nw.lat, nw.lon, se.lon};
        if (!(city.bbox.lat_max > city.bbox.lat_min) || !(city.bbox.lon_max > city.bbox.lon_min)) {
            // Zero margin on a degenerate extent; pad by one meter.
            city.bbox.lat_max += 1e-5;
            city.bbox.lon_max += 1e-5;
        }
    }

    // ---- messy additions
    if (spec.messy) {
        const NodeId corner = grid_node(spec, 0, 0);
        const NodeId spur = add_node(g, geo::destination(g.node(corner).position(), 0.0, 150.0));
        add_pair(g, corner, spur, "residential");

        Edge priv = make_edge(g, grid_node(spec, 0, 0), grid_node(spec, 1, 1), "service");
        priv.access = "private";
        priv.oneway = true;
        g.edges.push_back(priv);

        const NodeId mid = grid_node(spec, spec.rows / 2, spec.cols / 2);
        Edge loop = make_edge(g, mid, mid, "residential");
        const LatLon m = g.node(mid).position();
        loop.geometry = {m, geo::destination(m, 45.0, 35.0), geo::destination(m, 135.0, 35.0), m};
        loop.length_m = geo::polyline_length_m(loop.geometry);
        g.edges.push_back(loop);

        Edge parallel = make_edge(g, grid_node(spec, 0, 0), grid_node(spec, 0, 1), "primary");
        const LatLon bend = geo::destination(geo::lerp(parallel.geometry[0], parallel.geometry[1], 0.5), 0.0, 30.0);
        parallel.geometry = {parallel.geometry[0], bend, parallel.geometry[1]};
        parallel.length_m = geo::polyline_length_m(parallel.geometry);
        g.edges.push_back(parallel);

        add_pair(g, grid_node(spec, 0, 1), grid_node(spec, 1, 2), "residential");

        add_node(g, grid_pos(0.5, 0.5));

        const LatLon east = geo::destination(grid_pos(0, spec.cols - 1), 90.0, 300.0);
        const NodeId t1 = add_node(g, east);
        const NodeId t2 = add_node(g, geo::destination(east, 90.0, 80.0));
        const NodeId t3 = add_node(g, geo::destination(east, 150.0, 80.0));
        add_pair(g, t1, t2, "residential");
        add_pair(g, t2, t3, "residential");
        add_pair(g, t3, t1, "residential");
    }

    // ---- heatmap days
    {
        std::mt19937_64 rng(derive_seed(seed, "synth/volumes"));
        const heatmap::VolumeHeatmap probe(city.bbox);
        for (const auto& day : city.days) {
            std::map<std::uint32_t, double> cells;
            for (std::size_t i = 0; i < grid_edges; ++i) {
                const Edge& e = g.edges[i];
                const double base = e.importance >= 3 ? 200.0 : 30.0;
                const double volume = std::round(base * uniform(rng, 0.8, 1.2));
                const int channel = heatmap::heading_channel(geo::bearing_deg(e.geometry.front(), e.geometry.back()));
                const int steps = static_cast<int>(std::ceil(e.length_m));
                for (int s = 0; s <= steps; ++s) {
                    const double along = e.length_m * s / steps;
                    if (along < kPaintGapM || along > e.length_m - kPaintGapM) continue;
                    const auto cell = probe.cell_of(geo::lerp(e.geometry.front(), e.geometry.back(), double(s) / steps));
                    if (!cell) continue;
                    auto& v = cells[static_cast<std::uint32_t>(heatmap::VolumeHeatmap::index(cell->row, cell->col, channel))];
                    v = std::max(v, volume);
                }
            }
            city.daily_volumes.push_back({day, {cells.begin(), cells.end()}});
        }
    }

    // ---- detectors
    {
        std::mt19937_64 rng(derive_seed(seed, "synth/detectors"));
        struct Site {
            std::string id;
            LatLon p;
        };
        std::vector<Site> sites;
        const std::size_t grid_nodes = static_cast<std::size_t>(spec.rows) * spec.cols;
        const auto picked = choose(rng, grid_nodes, static_cast<std::size_t>(std::llround(spec.detector_density * grid_nodes)));
        std::vector<std::size_t> sorted_pick(picked.begin(), picked.end());
        std::sort(sorted_pick.begin(), sorted_pick.end());
        int serial = 0;
        for (std::size_t i : sorted_pick) {
            const LatLon p = g.node(static_cast<NodeId>(i) + 1).position();
            sites.push_back({fmt::format("D{:03}", ++serial),
                             geo::destination(p, uniform(rng, 0.0, 360.0), uniform(rng, 3.0, 15.0))});
        }
        // East-going grid edges sit at even indices among the grid pairs.
        std::vector<std::size_t> east_edges;
        for (std::size_t i = 0; i < grid_edges; i += 2) {
            const Edge& e = g.edges[i];
            if (e.v == e.u + 1) east_edges.push_back(i);
        }
        for (std::size_t i : choose(rng, east_edges.size(), static_cast<std::size_t>(spec.mid_edge_detectors))) {
            const Edge& e = g.edges[east_edges[i]];
            const LatLon mid = geo::lerp(e.geometry.front(), e.geometry.back(), 0.5);
            sites.push_back({fmt::format("D{:03}", ++serial), geo::destination(mid, 0.0, 5.0)});
        }
        const std::size_t blocks = static_cast<std::size_t>(spec.rows - 1) * (spec.cols - 1);
        for (std::size_t i : choose(rng, blocks, static_cast<std::size_t>(spec.far_detectors))) {
            const double r = static_cast<double>(i / (spec.cols - 1)) + 0.5;
            const double c = static_cast<double>(i % (spec.cols - 1)) + 0.5;
            sites.push_back({fmt::format("D{:03}", ++serial), grid_pos(r, c)});
        }
        for (const auto& day : city.days) {
            for (const auto& s : sites) {
                DetectorDay d;
                d.detector_id = s.id;
                d.lat = s.p.lat;
                d.lon = s.p.lon;
                d.day = day;
                const double base = uniform(rng, 20.0, 120.0);
                for (int t = 0; t < kBinsPerDay; ++t) {
                    const double shape = 0.35 + 0.65 * std::pow(std::sin(kPi * t / kBinsPerDay), 2.0);
                    const double v = std::round(base * shape * uniform(rng, 0.85, 1.15));
                    if (uniform01(rng) >= 0.02) d.counts[t] = v;
                }
                city.detectors.push_back(std::move(d));
            }
        }
    }

    // ---- free flow
    std::vector<std::optional<double>> ff(g.edges.size());
    {
        std::mt19937_64 rng(derive_seed(seed, "synth/free_flow"));
        for (std::size_t i = 0; i < g.edges.size(); ++i) {
            const Edge& e = g.edges[i];
            const double x = uniform01(rng);
            const double speed = std::round(e.maxspeed_kph * uniform(rng, 0.75, 0.95) * 10.0) / 10.0;
            if (x < spec.missing_free_flow || e.is_self_loop()) continue;
            if (std::any_of(city.free_flow.begin(), city.free_flow.end(),
                            [&](const FreeFlow& f) { return f.key() == e.key(); })) {
                continue;
            }
            ff[i] = speed;
            city.free_flow.push_back({e.u, e.v, speed});
        }
    }

    // ---- speed stats with planted coverage
    {
        std::mt19937_64 rng(derive_seed(seed, "synth/stats"));
        std::map<std::string, std::vector<std::size_t>> groups;  // highway class -> edges with free flow
        std::map<std::string, std::size_t> group_size;           // highway class -> all edges
        std::set<EdgeKey> seen;
        std::vector<char> unique(g.edges.size(), 0);
        for (std::size_t i = 0; i < g.edges.size(); ++i) {
            if (!seen.insert(g.edges[i].key()).second) continue;  // parallel duplicates share labels
            unique[i] = 1;
            ++group_size[g.edges[i].highway_class];
            if (ff[i]) groups[g.edges[i].highway_class].push_back(i);
        }
        for (const auto& day : city.days) {
            // bin -> edge -> class for covered pairs
            std::vector<std::map<std::size_t, int>> covered(kBinsPerDay);
            for (const auto& [cls, edges] : groups) {
                auto ov = spec.coverage_by_class.find(cls);
                const double target = ov == spec.coverage_by_class.end() ? spec.coverage : ov->second;
                const auto want = static_cast<std::size_t>(std::llround(target * group_size[cls] * kBinsPerDay));
                const std::size_t avail = edges.size() * kBinsPerDay;
                if (want > avail) {
                    throw ValidationError(fmt::format(
                        "coverage {} for class '{}' needs {} labeled bins but only {} edges have free flow", target,
                        cls, want, edges.size()));
                }
                for (std::size_t pick : choose(rng, avail, want)) {
                    const std::size_t e = edges[pick / kBinsPerDay];
                    const int t = static_cast<int>(pick % kBinsPerDay);
                    covered[t][e] = sample_class(rng, planted(city, g.edges[e].key(), hour_of_bin(t)));
                }
            }
            for (int t = 0; t < kBinsPerDay; ++t) {
                for (std::size_t i = 0; i < g.edges.size(); ++i) {
                    if (!unique[i]) continue;
                    const Edge& e = g.edges[i];
                    const double ref = ff[i].value_or(e.maxspeed_kph);
                    SegmentSpeedStats s;
                    s.u = e.u;
                    s.v = e.v;
                    s.t = t;
                    s.day = day;
                    auto it = covered[t].find(i);
                    if (it != covered[t].end()) {
                        const auto [lo, hi] = kFactorRange[it->second - 1];
                        s.median_speed_kph = std::round(ref * uniform(rng, lo, hi) * 10.0) / 10.0;
                        s.volume = 5 + static_cast<std::int64_t>(uniform_below(rng, 20));
                        s.raw_median_speed = std::clamp(static_cast<int>(std::lround(s.median_speed_kph)), 1, 254);
                        city.stats.push_back(s);
                        continue;
                    }
                    const double x = uniform01(rng);
                    if (x < 0.6) continue;
                    if (x < 0.75) {
                        // corrupted bin
                        s.median_speed_kph = std::round(ref * uniform(rng, 0.5, 1.0) * 10.0) / 10.0;
                        s.volume = 5 + static_cast<std::int64_t>(uniform_below(rng, 10));
                        s.raw_median_speed = 255;
                    } else if (x < 0.85) {
                        s.median_speed_kph = 0.0;
                        s.volume = static_cast<std::int64_t>(uniform_below(rng, 5));
                        s.raw_median_speed = 0;
                    } else {
                        // too few probes for any class
                        s.median_speed_kph = std::round(ref * uniform(rng, 0.3, 1.0) * 10.0) / 10.0;
                        s.volume = 0;
                        s.raw_median_speed = std::clamp(static_cast<int>(std::lround(s.median_speed_kph)), 1, 254);
                    }
                    city.stats.push_back(s);
                }
            }
        }
    }
    return city;
}

WrittenCity write_synthetic_city(const SyntheticCity& city, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    WrittenCity w{dir / "graph",         dir / "detectors.jsonl", dir / "speed_stats.jsonl", dir / "free_flow.jsonl",
                  dir / "daily_volumes.jsonl", dir / "heatmap.json", dir / "spec.json"};
    io::save_graph(city.graph, w.graph_dir);
    io::save_detectors(city.detectors, w.detectors);
    io::save_speed_stats(city.stats, w.speed_stats);
    io::save_free_flow(city.free_flow, w.free_flow);
    heatmap::save_daily_volumes(city.daily_volumes, w.daily_volumes);
    Json spec = city.spec.to_json();
    spec["bbox"] = {{"lat_min", city.bbox.lat_min},
                    {"lat_max", city.bbox.lat_max},
                    {"lon_min", city.bbox.lon_min},
                    {"lon_max", city.bbox.lon_max}};
    spec["days_list"] = city.days;
    io::write_json(w.spec, spec);
    heatmap::save_heatmap(heatmap::build_heatmap(city.daily_volumes, city.bbox, 30, 0), w.heatmap);
    return w;
}

}  // namespace t4c::synth
