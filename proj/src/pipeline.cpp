#include "t4c/pipeline.hpp"

#include <chrono>
#include <set>

#include <fmt/format.h>

#include "t4c/baseline.hpp"
#include "t4c/errors.hpp"
#include "t4c/heatmap.hpp"
#include "t4c/io.hpp"
#include "t4c/labels.hpp"
#include "t4c/metrics.hpp"
#include "t4c/rng.hpp"

namespace t4c::pipeline {

using io::Json;

Manifest::Manifest() {
    for (const auto& s : kStages) stages[s] = true;
}

namespace {

void require(const fs::path& p, const std::string& key, const std::string& stage) {
    if (p.empty()) throw ValidationError(fmt::format("manifest: paths.{} is required by stage '{}'", key, stage));
    if (!fs::exists(p)) throw ValidationError(fmt::format("manifest: paths.{} ({}) does not exist", key, p.string()));
}

void require_existing_if_set(const fs::path& p, const std::string& key) {
    if (!p.empty() && !fs::exists(p)) {
        throw ValidationError(fmt::format("manifest: paths.{} ({}) does not exist", key, p.string()));
    }
}

template <typename P>
auto path_list(P& p) {
    using Ptr = decltype(&p.graph_dir);
    return std::vector<std::pair<std::string, Ptr>>{{"graph_dir", &p.graph_dir},
                                                   {"detectors", &p.detectors},
                                                   {"heatmap", &p.heatmap},
                                                   {"daily_volumes", &p.daily_volumes},
                                                   {"speed_stats", &p.speed_stats},
                                                   {"free_flow", &p.free_flow},
                                                   {"key_intersection_whitelist", &p.key_intersection_whitelist},
                                                   {"supersegment_whitelist", &p.supersegment_whitelist},
                                                   {"supersegments", &p.supersegments},
                                                   {"cc_labels", &p.cc_labels},
                                                   {"eta_labels", &p.eta_labels},
                                                   {"cc_predictions", &p.cc_predictions},
                                                   {"eta_predictions", &p.eta_predictions},
                                                   {"out_dir", &p.out_dir}};
}

void require_heatmap(const Manifest& m, const std::string& stage) {
    if (!m.paths.heatmap.empty()) {
        require(m.paths.heatmap, "heatmap", stage);
        return;
    }
    if (m.paths.daily_volumes.empty()) {
        throw ValidationError(
            fmt::format("manifest: stage '{}' needs paths.heatmap or paths.daily_volumes with a bbox", stage));
    }
    require(m.paths.daily_volumes, "daily_volumes", stage);
    if (!m.bbox) throw ValidationError("manifest: paths.daily_volumes needs a bbox");
    if (!m.seed) throw ValidationError("manifest: building a heatmap from daily volumes needs a seed");
}

}  // namespace

void Manifest::validate() const {
    if (city.empty()) throw ValidationError("manifest: city must not be empty");
    if (paths.out_dir.empty()) throw ValidationError("manifest: paths.out_dir is required");
    require(paths.graph_dir, "graph_dir", "any");

    std::set<fs::path> seen;
    for (const auto& [key, p] : path_list(paths)) {
        if (p->empty()) continue;
        if (!seen.insert(p->lexically_normal()).second) {
            throw ValidationError(fmt::format("manifest: paths.{} ({}) repeats another path", key, p->string()));
        }
    }
    if (!seed && enabled("sample_supersegments")) {
        throw ValidationError("manifest: a seed is required when a sampling stage is enabled");
    }
    if (enabled("attach")) require(paths.detectors, "detectors", "attach");
    if (enabled("clean")) require_heatmap(*this, "clean");
    if (enabled("sample_supersegments")) {
        require_heatmap(*this, "sample_supersegments");
        require_existing_if_set(paths.key_intersection_whitelist, "key_intersection_whitelist");
        require_existing_if_set(paths.supersegment_whitelist, "supersegment_whitelist");
    }
    if (enabled("label")) {
        require(paths.speed_stats, "speed_stats", "label");
        require(paths.free_flow, "free_flow", "label");
        if (!enabled("sample_supersegments")) require(paths.supersegments, "supersegments", "label");
    }
    if (enabled("score")) {
        if (!enabled("label")) {
            require(paths.cc_labels, "cc_labels", "score");
            require(paths.eta_labels, "eta_labels", "score");
        }
        require_existing_if_set(paths.cc_predictions, "cc_predictions");
        require_existing_if_set(paths.eta_predictions, "eta_predictions");
    }
    search.validate();
    if (heatmap_sample_days < 1) throw ValidationError("manifest: heatmap_sample_days must be >= 1");
}

Manifest Manifest::from_json(const Json& j, const fs::path& base_dir) {
    Manifest m;
    auto resolve = [&](const Json& p) -> fs::path {
        fs::path out = p.get<std::string>();
        if (out.empty() || out.is_absolute() || base_dir.empty()) return out;
        return (base_dir / out).lexically_normal();
    };
    try {
        m.city = j.value("city", m.city);
        if (j.contains("seed") && !j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("paths")) {
            const Json& p = j.at("paths");
            m.paths_as_given = p;
            static const std::set<std::string> known = [] {
                std::set<std::string> s;
                const Paths empty;
                for (const auto& [k, _] : path_list(empty)) s.insert(k);
                return s;
            }();
            for (const auto& [k, _] : p.items()) {
                if (!known.count(k)) throw ValidationError(fmt::format("manifest: unknown path key '{}'", k));
            }
            for (const auto& [key, ptr] : path_list(m.paths)) {
                if (p.contains(key)) *ptr = resolve(p.at(key));
            }
        }
        if (j.contains("stages")) {
            for (const auto& [k, v] : j.at("stages").items()) {
                if (!m.stages.count(k)) throw ValidationError(fmt::format("manifest: unknown stage '{}'", k));
                m.stages[k] = v.get<bool>();
            }
        }
        if (j.contains("search")) m.search = supersegments::SearchConfig::from_json(j.at("search"));
        if (j.contains("thresholds")) {
            const Json& t = j.at("thresholds");
            auto& a = m.thresholds.attach;
            auto& c = m.thresholds.clean;
            a.node_snap_m = t.value("node_snap_m", a.node_snap_m);
            a.edge_snap_m = t.value("edge_snap_m", a.edge_snap_m);
            c.self_loop_min_m = t.value("self_loop_min_m", c.self_loop_min_m);
            c.low_volume_threshold = t.value("low_volume_threshold", c.low_volume_threshold);
            c.low_volume_min_length_m = t.value("low_volume_min_length_m", c.low_volume_min_length_m);
            m.search.max_path_m = t.value("max_path_m", m.search.max_path_m);
            for (double x : {a.node_snap_m, a.edge_snap_m, c.self_loop_min_m, c.low_volume_min_length_m}) {
                if (!(x >= 0.0)) throw ValidationError("manifest: thresholds must be >= 0");
            }
        }
        if (j.contains("bbox") && !j.at("bbox").is_null()) {
            const Json& b = j.at("bbox");
            m.bbox = heatmap::BoundingBox{b.at("lat_min").get<double>(), b.at("lat_max").get<double>(),
                                          b.at("lon_min").get<double>(), b.at("lon_max").get<double>()};
        }
        m.heatmap_sample_days = j.value("heatmap_sample_days", m.heatmap_sample_days);
        m.overall_any_city_count = j.value("overall_any_city_count", m.overall_any_city_count);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("manifest: {}", e.what()));
    }
    return m;
}

Json Manifest::to_json() const {
    Json j;
    j["city"] = city;
    j["seed"] = seed ? Json(*seed) : Json();
    if (!paths_as_given.is_null()) {
        j["paths"] = paths_as_given;
    } else {
        Json p = Json::object();
        for (const auto& [key, ptr] : path_list(paths)) {
            if (!ptr->empty()) p[key] = ptr->string();
        }
        j["paths"] = std::move(p);
    }
    Json s;
    for (const auto& name : kStages) s[name] = stages.at(name);
    j["stages"] = std::move(s);
    j["search"] = search.to_json();
    j["thresholds"] = {{"node_snap_m", thresholds.attach.node_snap_m},
                       {"edge_snap_m", thresholds.attach.edge_snap_m},
                       {"self_loop_min_m", thresholds.clean.self_loop_min_m},
                       {"low_volume_threshold", thresholds.clean.low_volume_threshold},
                       {"low_volume_min_length_m", thresholds.clean.low_volume_min_length_m},
                       {"max_path_m", search.max_path_m}};
    if (bbox) {
        j["bbox"] = {{"lat_min", bbox->lat_min}, {"lat_max", bbox->lat_max}, {"lon_min", bbox->lon_min},
                     {"lon_max", bbox->lon_max}};
    }
    j["heatmap_sample_days"] = heatmap_sample_days;
    j["overall_any_city_count"] = overall_any_city_count;
    return j;
}

Manifest load_manifest(const fs::path& path) {
    const Json j = io::read_json(path);
    return Manifest::from_json(j, path.parent_path());
}

namespace {

// Historic mean ETA per (ssid, t) from the training days; falls back to the
// super-segment's mean over all bins, then to the global mean.
std::vector<EtaPrediction> historic_eta(const std::vector<EtaLabel>& train, const std::vector<EtaLabel>& test) {
    std::map<std::pair<std::string, int>, std::pair<double, int>> by_bin;
    std::map<std::string, std::pair<double, int>> by_ss;
    double all = 0.0;
    int n = 0;
    for (const auto& l : train) {
        auto& a = by_bin[{l.ssid, l.t}];
        a.first += l.eta_s;
        ++a.second;
        auto& b = by_ss[l.ssid];
        b.first += l.eta_s;
        ++b.second;
        all += l.eta_s;
        ++n;
    }
    std::vector<EtaPrediction> out;
    out.reserve(test.size());
    for (const auto& l : test) {
        double p = n ? all / n : 0.0;
        if (auto it = by_bin.find({l.ssid, l.t}); it != by_bin.end()) {
            p = it->second.first / it->second.second;
        } else if (auto jt = by_ss.find(l.ssid); jt != by_ss.end()) {
            p = jt->second.first / jt->second.second;
        }
        out.push_back({l.ssid, l.t, l.day, p});
    }
    return out;
}

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_last_day(const std::vector<T>& rows, const std::string& last) {
    std::pair<std::vector<T>, std::vector<T>> out;
    for (const auto& r : rows) (r.day == last ? out.second : out.first).push_back(r);
    return out;
}

}  // namespace

RunResult run_pipeline(const Manifest& m) {
    m.validate();
    const fs::path out = m.paths.out_dir;
    fs::create_directories(out);

    RunResult result;
    Json& summary = result.summary;
    summary["city"] = m.city;
    summary["seed"] = m.seed ? Json(*m.seed) : Json();
    summary["manifest"] = m.to_json();
    summary["status"] = "running";
    Json stages = Json::array();

    std::optional<RoadGraph> graph;
    std::optional<heatmap::VolumeHeatmap> hm;
    std::vector<SuperSegment> sss;
    bool have_sss = false;
    std::vector<CongestionLabel> cc_labels;
    std::vector<EtaLabel> eta_labels;
    bool have_labels = false;

    const std::uint64_t seed = m.seed.value_or(0);
    auto current_graph = [&]() -> RoadGraph& {
        if (!graph) graph = io::load_graph(m.paths.graph_dir);
        return *graph;
    };
    auto current_heatmap = [&]() -> const heatmap::VolumeHeatmap& {
        if (hm) return *hm;
        if (!m.paths.heatmap.empty()) {
            hm = heatmap::load_heatmap(m.paths.heatmap);
        } else {
            const auto days = heatmap::load_daily_volumes(m.paths.daily_volumes);
            hm = heatmap::build_heatmap(days, *m.bbox, static_cast<std::size_t>(m.heatmap_sample_days),
                                        derive_seed(seed, "heatmap"));
        }
        return *hm;
    };

    auto run_stage = [&](const std::string& name, auto&& body) {
        Json st;
        st["stage"] = name;
        if (!m.enabled(name)) {
            st["status"] = "skipped";
            stages.push_back(std::move(st));
            return;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Json counts;
        try {
            body(counts);
        } catch (const std::exception& e) {
            st["status"] = "failed";
            st["error"] = e.what();
            stages.push_back(std::move(st));
            summary["stages"] = stages;
            summary["status"] = "failed";
            summary["failed_stage"] = name;
            summary["partial_outputs"] = true;
            io::write_json(out / "summary.json", summary);
            if (dynamic_cast<const ValidationError*>(&e)) throw;
            throw StageError(name, e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.timings.push_back({name, secs});
        st["status"] = "completed";
        st["counts"] = std::move(counts);
        stages.push_back(std::move(st));
    };

    run_stage("attach", [&](Json& c) {
        const auto detectors = io::load_detectors(m.paths.detectors);
        auto r = attach::attach_detectors(current_graph(), detectors, m.thresholds.attach);
        io::save_graph(r.graph, out / "attach" / "graph");
        attach::save_node_counts(r.node_counts, out / "attach" / "node_counts.jsonl");
        io::write_jsonl(out / "attach" / "attachment_report.jsonl", attach::report_rows(r));
        std::set<std::string> ids;
        for (const auto& d : detectors) ids.insert(d.detector_id);
        c["detector_rows"] = detectors.size();
        c["detectors"] = ids.size();
        c["attached_detectors"] = r.mapping.size();
        c["discarded_detectors"] = r.discarded.size();
        c["split_edges"] = r.split_edges;
        c["node_day_rows"] = r.node_counts.size();
        c["nodes"] = r.graph.nodes.size();
        c["edges"] = r.graph.edges.size();
        graph = std::move(r.graph);
    });

    run_stage("clean", [&](Json& c) {
        clean::CleanReport report;
        RoadGraph cleaned = clean::clean_pipeline(current_graph(), current_heatmap(), &report, m.thresholds.clean);
        io::save_graph(cleaned, out / "clean" / "graph");
        io::write_json(out / "clean" / "clean_report.json", report.to_json());
        c["nodes_before"] = report.nodes_before;
        c["edges_before"] = report.edges_before;
        c["nodes_after"] = report.nodes_after;
        c["edges_after"] = report.edges_after;
        c["iterations"] = report.iterations;
        graph = std::move(cleaned);
    });

    run_stage("sample_supersegments", [&](Json& c) {
        const RoadGraph& g = current_graph();
        std::vector<NodeId> key_whitelist;
        if (!m.paths.key_intersection_whitelist.empty()) {
            key_whitelist = io::load_node_list(m.paths.key_intersection_whitelist);
        }
        std::vector<SuperSegment> ss_whitelist;
        if (!m.paths.supersegment_whitelist.empty()) {
            ss_whitelist = io::load_supersegments(m.paths.supersegment_whitelist);
        }
        const auto keys = supersegments::select_key_intersections(g, current_heatmap(), key_whitelist, m.search);
        if (keys.node_ids.empty()) throw ValidationError("no key intersection qualifies");
        auto r = supersegments::sample_supersegments(g, keys, m.search, ss_whitelist);
        const fs::path dir = out / "supersegments";
        io::save_supersegments(r.supersegments, dir / "supersegments.jsonl");
        Json kj;
        kj["node_ids"] = keys.node_ids;
        kj["whitelisted"] = keys.whitelisted;
        io::write_json(dir / "key_intersections.json", kj);
        Json log = Json::array();
        for (const auto& s : r.sources) {
            log.push_back({{"source", s.source}, {"found", s.found}, {"stop", supersegments::to_string(s.reason)}});
        }
        Json lj;
        lj["sources"] = std::move(log);
        lj["skipped_whitelist"] = r.skipped_whitelist;
        io::write_json(dir / "log.json", lj);
        c["key_intersections"] = keys.node_ids.size();
        c["supersegments"] = r.supersegments.size();
        c["skipped_whitelist"] = r.skipped_whitelist.size();
        sss = std::move(r.supersegments);
        have_sss = true;
    });

    run_stage("label", [&](Json& c) {
        const RoadGraph& g = current_graph();
        if (!have_sss) {
            sss = io::load_supersegments(m.paths.supersegments);
            have_sss = true;
        }
        const auto stats = io::load_speed_stats(m.paths.speed_stats);
        const auto ff = io::load_free_flow(m.paths.free_flow);
        std::size_t unknown = 0, zero_speed = 0, no_ff = 0;
        const auto days = labels::stats_days(stats);
        for (const auto& day : days) {
            auto r = labels::label_city(g, sss, labels::stats_for_day(stats, day), ff, day);
            unknown += r.schedule.unknown_stats;
            zero_speed += r.schedule.zero_speed_stats;
            no_ff += r.stats_without_free_flow;
            cc_labels.insert(cc_labels.end(), r.cc_labels.begin(), r.cc_labels.end());
            eta_labels.insert(eta_labels.end(), r.eta_labels.begin(), r.eta_labels.end());
        }
        have_labels = true;
        const fs::path dir = out / "label";
        io::save_cc_labels(cc_labels, dir / "cc_labels.jsonl");
        io::save_eta_labels(eta_labels, dir / "eta_labels.jsonl");
        const auto dist = baseline::label_distribution_report(cc_labels);
        io::write_json(dir / "distribution.json", baseline::to_json(dist));
        c["days"] = days;
        c["cc_labels"] = cc_labels.size();
        c["eta_labels"] = eta_labels.size();
        c["coverage"] = dist.coverage;
        c["classified_fractions"] = dist.classified_fractions;
        c["stats_unknown_edge"] = unknown;
        c["stats_zero_speed"] = zero_speed;
        c["stats_without_free_flow"] = no_ff;
    });

    run_stage("score", [&](Json& c) {
        if (!have_labels) {
            cc_labels = io::load_cc_labels(m.paths.cc_labels);
            eta_labels = io::load_eta_labels(m.paths.eta_labels);
        }
        std::set<std::string> day_set;
        for (const auto& l : cc_labels) day_set.insert(l.day);
        if (day_set.empty()) throw ValidationError("no congestion labels to score");
        const std::string test_day = *day_set.rbegin();
        auto [cc_train, cc_test] = split_last_day(cc_labels, test_day);
        auto [eta_train, eta_test] = split_last_day(eta_labels, test_day);
        if (cc_train.empty()) {
            // A single day trains and tests on itself.
            cc_train = cc_test;
            eta_train = eta_test;
        }
        const fs::path dir = out / "score";
        const auto weights = metrics::compute_class_weights(cc_train);
        metrics::save_weights(weights, dir / "weights.json");

        std::vector<CcPrediction> cc_pred;
        if (!m.paths.cc_predictions.empty()) {
            cc_pred = io::load_cc_predictions(m.paths.cc_predictions);
            c["cc_predictions"] = "file";
        } else {
            const auto hist = baseline::fit_historic(cc_train);
            std::set<EdgeKey> edges;
            for (const auto& l : cc_test) edges.insert(l.key());
            cc_pred = baseline::predict_day(hist, {edges.begin(), edges.end()}, test_day);
            baseline::save_historic(hist, dir / "historic.json");
            io::save_cc_predictions(cc_pred, dir / "cc_predictions.jsonl");
            c["cc_predictions"] = "historic_baseline";
        }
        const auto score = metrics::score_cc(cc_test, cc_pred, weights);
        Json cc_report = metrics::to_json(score, weights);
        const double city_loss = score.ce.loss;
        if (m.overall_any_city_count) {
            cc_report["overall"] = metrics::overall_score(std::span<const double>(&city_loss, 1), true);
        } else {
            cc_report["overall"] = nullptr;
        }
        io::write_json(dir / "cc_report.json", cc_report);

        std::vector<EtaPrediction> eta_pred;
        if (!m.paths.eta_predictions.empty()) {
            eta_pred = io::load_eta_predictions(m.paths.eta_predictions);
            c["eta_predictions"] = "file";
        } else {
            eta_pred = historic_eta(eta_train, eta_test);
            io::save_eta_predictions(eta_pred, dir / "eta_predictions.jsonl");
            c["eta_predictions"] = "historic_mean";
        }
        Json eta_report;
        if (!eta_test.empty()) {
            eta_report["l1"] = metrics::l1_eta(eta_pred, eta_test);
            eta_report["n"] = eta_test.size();
        } else {
            eta_report["l1"] = nullptr;
            eta_report["n"] = 0;
        }
        io::write_json(dir / "eta_report.json", eta_report);

        c["test_day"] = test_day;
        c["train_days"] = day_set.size() > 1 ? day_set.size() - 1 : 1;
        c["cc_loss"] = city_loss;
        c["eta_l1"] = eta_report["l1"];
        c["weights"] = weights.w;
    });

    summary["stages"] = std::move(stages);
    summary["status"] = "completed";
    io::write_json(out / "summary.json", summary);
    return result;
}

}  // namespace t4c::pipeline
