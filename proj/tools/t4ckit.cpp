// t4ckit: command line front end for the t4c toolkit.

#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "t4c/attach.hpp"
#include "t4c/baseline.hpp"
#include "t4c/clean.hpp"
#include "t4c/errors.hpp"
#include "t4c/heatmap.hpp"
#include "t4c/io.hpp"
#include "t4c/labels.hpp"
#include "t4c/metrics.hpp"
#include "t4c/pipeline.hpp"
#include "t4c/rng.hpp"
#include "t4c/supersegments.hpp"
#include "t4c/synth.hpp"
#include "t4c/validate.hpp"

namespace fs = std::filesystem;
using namespace t4c;
using io::Json;

namespace {

heatmap::BoundingBox parse_bbox(const std::string& s) {
    heatmap::BoundingBox b;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream in(s);
    if (!(in >> b.lat_min >> c1 >> b.lat_max >> c2 >> b.lon_min >> c3 >> b.lon_max) || c1 != ',' || c2 != ',' ||
        c3 != ',') {
        throw ValidationError(fmt::format("--bbox '{}' must be lat_min,lat_max,lon_min,lon_max", s));
    }
    return b;
}

// Heatmap from --heatmap, or built from --daily-volumes with --bbox.
heatmap::VolumeHeatmap heatmap_from(const std::string& path, const std::string& daily, const std::string& bbox,
                                    std::size_t sample_days, std::uint64_t seed) {
    if (!path.empty()) return heatmap::load_heatmap(path);
    if (daily.empty() || bbox.empty()) throw ValidationError("give --heatmap, or --daily-volumes with --bbox");
    return heatmap::build_heatmap(heatmap::load_daily_volumes(daily), parse_bbox(bbox), sample_days,
                                  derive_seed(seed, "heatmap"));
}

void print_json(const Json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"road traffic toolkit: graph preparation, labeling, scoring and analysis"};
    app.require_subcommand(1);
    std::function<void()> action;

    // ---- attach
    auto* attach_cmd = app.add_subcommand("attach", "attach stationary detectors to graph nodes");
    std::string a_graph, a_detectors, a_out;
    attach::AttachConfig a_cfg;
    attach_cmd->add_option("--graph-dir", a_graph, "graph directory (nodes.jsonl, edges.jsonl)")->required();
    attach_cmd->add_option("--detectors", a_detectors, "detector readings, NDJSON")->required();
    attach_cmd->add_option("--out-dir", a_out, "output directory")->required();
    attach_cmd->add_option("--node-snap-m", a_cfg.node_snap_m, "assign to a node closer than this")
        ->capture_default_str();
    attach_cmd->add_option("--edge-snap-m", a_cfg.edge_snap_m, "discard beyond this distance from any edge")
        ->capture_default_str();
    attach_cmd->callback([&] {
        action = [&] {
            const auto r = attach::attach_detectors(io::load_graph(a_graph), io::load_detectors(a_detectors), a_cfg);
            io::save_graph(r.graph, a_out);
            io::write_jsonl(fs::path(a_out) / "attachment_report.jsonl", attach::report_rows(r));
            attach::save_node_counts(r.node_counts, fs::path(a_out) / "node_counts.jsonl");
            std::cout << fmt::format("attached {} detectors, discarded {}, split {} edges\n", r.mapping.size(),
                                     r.discarded.size(), r.split_edges);
        };
    });

    // ---- clean
    auto* clean_cmd = app.add_subcommand("clean", "run the graph cleaning pipeline");
    std::string c_graph, c_heatmap, c_daily, c_bbox, c_out;
    std::uint64_t c_seed = 0;
    std::size_t c_sample_days = 30;
    clean::CleanConfig c_cfg;
    clean_cmd->add_option("--graph-dir", c_graph)->required();
    clean_cmd->add_option("--heatmap", c_heatmap, "volume heatmap JSON");
    clean_cmd->add_option("--daily-volumes", c_daily, "daily volume NDJSON, averaged into a heatmap");
    clean_cmd->add_option("--bbox", c_bbox, "lat_min,lat_max,lon_min,lon_max for --daily-volumes");
    clean_cmd->add_option("--sample-days", c_sample_days)->capture_default_str();
    clean_cmd->add_option("--seed", c_seed, "seed for heatmap day sampling")->capture_default_str();
    clean_cmd->add_option("--out-dir", c_out)->required();
    clean_cmd->add_option("--low-volume-threshold", c_cfg.low_volume_threshold)->capture_default_str();
    clean_cmd->add_option("--low-volume-min-length-m", c_cfg.low_volume_min_length_m)->capture_default_str();
    clean_cmd->add_option("--self-loop-min-m", c_cfg.self_loop_min_m)->capture_default_str();
    clean_cmd->callback([&] {
        action = [&] {
            const auto hm = heatmap_from(c_heatmap, c_daily, c_bbox, c_sample_days, c_seed);
            clean::CleanReport report;
            const auto g = clean::clean_pipeline(io::load_graph(c_graph), hm, &report, c_cfg);
            io::save_graph(g, c_out);
            io::write_json(fs::path(c_out) / "clean_report.json", report.to_json());
            std::cout << fmt::format("nodes {} -> {}, edges {} -> {}, {} iterations\n", report.nodes_before,
                                     report.nodes_after, report.edges_before, report.edges_after, report.iterations);
        };
    });

    // ---- heatmap
    auto* hm_cmd = app.add_subcommand("heatmap", "average sampled daily volumes into a heatmap");
    std::string h_daily, h_bbox, h_out;
    std::size_t h_days = 30;
    std::uint64_t h_seed = 0;
    hm_cmd->add_option("--daily-volumes", h_daily)->required();
    hm_cmd->add_option("--bbox", h_bbox, "lat_min,lat_max,lon_min,lon_max")->required();
    hm_cmd->add_option("--sample-days", h_days)->capture_default_str();
    hm_cmd->add_option("--seed", h_seed)->capture_default_str();
    hm_cmd->add_option("--out", h_out)->required();
    hm_cmd->callback([&] {
        action = [&] { heatmap::save_heatmap(heatmap_from("", h_daily, h_bbox, h_days, h_seed), h_out); };
    });

    // ---- sample-supersegments
    auto* ss_cmd = app.add_subcommand("sample-supersegments", "pick key intersections and sample super-segments");
    std::string s_graph, s_heatmap, s_wl_nodes, s_wl_ss, s_out, s_config, s_log;
    ss_cmd->add_option("--graph-dir", s_graph)->required();
    ss_cmd->add_option("--heatmap", s_heatmap)->required();
    ss_cmd->add_option("--whitelist-nodes", s_wl_nodes, "node ids always used as key intersections");
    ss_cmd->add_option("--whitelist-ss", s_wl_ss, "super-segments always included");
    ss_cmd->add_option("--out", s_out, "super-segments NDJSON")->required();
    ss_cmd->add_option("--config", s_config, "search config JSON");
    ss_cmd->add_option("--log", s_log, "per-source search log JSON");
    ss_cmd->callback([&] {
        action = [&] {
            const auto g = io::load_graph(s_graph);
            const auto hm = heatmap::load_heatmap(s_heatmap);
            const auto cfg = s_config.empty() ? supersegments::SearchConfig{}
                                              : supersegments::SearchConfig::from_json(io::read_json(s_config));
            const auto wl_nodes = s_wl_nodes.empty() ? std::vector<NodeId>{} : io::load_node_list(s_wl_nodes);
            const auto wl_ss = s_wl_ss.empty() ? std::vector<SuperSegment>{} : io::load_supersegments(s_wl_ss);
            const auto keys = supersegments::select_key_intersections(g, hm, wl_nodes, cfg);
            if (keys.node_ids.empty()) throw ValidationError("no key intersection qualifies");
            const auto r = supersegments::sample_supersegments(g, keys, cfg, wl_ss);
            io::save_supersegments(r.supersegments, s_out);
            if (!s_log.empty()) {
                Json log = Json::array();
                for (const auto& s : r.sources) {
                    log.push_back(
                        {{"source", s.source}, {"found", s.found}, {"stop", supersegments::to_string(s.reason)}});
                }
                io::write_json(s_log, {{"key_intersections", keys.node_ids},
                                       {"sources", log},
                                       {"skipped_whitelist", r.skipped_whitelist}});
            }
            std::cout << fmt::format("{} key intersections, {} super-segments, {} whitelist entries skipped\n",
                                     keys.node_ids.size(), r.supersegments.size(), r.skipped_whitelist.size());
        };
    });

    // ---- label
    auto* label_cmd = app.add_subcommand("label", "derive congestion classes and ETAs");
    std::string l_graph, l_stats, l_ff, l_ss, l_out, l_day;
    label_cmd->add_option("--graph-dir", l_graph)->required();
    label_cmd->add_option("--stats", l_stats, "segment speed stats NDJSON")->required();
    label_cmd->add_option("--free-flow", l_ff)->required();
    label_cmd->add_option("--supersegments", l_ss)->required();
    label_cmd->add_option("--out-dir", l_out)->required();
    label_cmd->add_option("--day", l_day, "label only this day (default: every day in the stats)");
    label_cmd->callback([&] {
        action = [&] {
            const auto g = io::load_graph(l_graph);
            const auto stats = io::load_speed_stats(l_stats);
            const auto ff = io::load_free_flow(l_ff);
            const auto sss = io::load_supersegments(l_ss);
            std::vector<std::string> days;
            if (!l_day.empty()) {
                days = {l_day};
            } else {
                days = labels::stats_days(stats);
            }
            std::vector<CongestionLabel> cc;
            std::vector<EtaLabel> eta;
            for (const auto& day : days) {
                auto day_stats = labels::stats_for_day(stats, day);
                // Rows without a day belong to whichever day is requested.
                if (!l_day.empty()) {
                    for (const auto& s : stats) {
                        if (s.day.empty()) day_stats.push_back(s);
                    }
                }
                auto r = labels::label_city(g, sss, day_stats, ff, day);
                cc.insert(cc.end(), r.cc_labels.begin(), r.cc_labels.end());
                eta.insert(eta.end(), r.eta_labels.begin(), r.eta_labels.end());
                std::cout << fmt::format("{}: {} edges only have maxspeed, {} stats on unknown edges\n",
                                         day.empty() ? "(no day)" : day, r.schedule.maxspeed_only,
                                         r.schedule.unknown_stats);
            }
            io::save_cc_labels(cc, fs::path(l_out) / "cc_labels.jsonl");
            io::save_eta_labels(eta, fs::path(l_out) / "eta_labels.jsonl");
        };
    });

    // ---- score-cc
    auto* scc_cmd = app.add_subcommand("score-cc", "weighted masked cross entropy of congestion predictions");
    std::vector<std::string> sc_labels, sc_pred, sc_weights;
    std::string sc_out;
    bool sc_any = false;
    double sc_bin = 0.05;
    scc_cmd->add_option("--labels", sc_labels, "labels NDJSON; repeat once per city")->required();
    scc_cmd->add_option("--pred", sc_pred, "predictions NDJSON; one per --labels")->required();
    scc_cmd->add_option("--weights", sc_weights, "class weights JSON; one per --labels")->required();
    scc_cmd->add_option("--out", sc_out, "report JSON")->required();
    scc_cmd->add_option("--coverage-bin-width", sc_bin)->capture_default_str();
    scc_cmd->add_flag("--any-city-count", sc_any, "average any number of cities (default requires 3)");
    scc_cmd->callback([&] {
        action = [&] {
            if (sc_pred.size() != sc_labels.size() || sc_weights.size() != sc_labels.size()) {
                throw ValidationError("--labels, --pred and --weights must be given the same number of times");
            }
            Json report;
            Json cities = Json::array();
            std::vector<double> losses;
            for (std::size_t i = 0; i < sc_labels.size(); ++i) {
                const auto w = metrics::load_weights(sc_weights[i]);
                const auto s = metrics::score_cc(io::load_cc_labels(sc_labels[i]),
                                                 io::load_cc_predictions(sc_pred[i]), w, sc_bin);
                Json cj = metrics::to_json(s, w);
                cj["labels"] = sc_labels[i];
                cities.push_back(std::move(cj));
                losses.push_back(s.ce.loss);
            }
            if (sc_any || losses.size() == 3) {
                report["overall"] = metrics::overall_score(losses, sc_any);
            } else {
                report["overall"] = nullptr;
                report["note"] = fmt::format("overall needs 3 cities, got {}; pass --any-city-count", losses.size());
            }
            report["cities"] = std::move(cities);
            io::write_json(sc_out, report);
            std::cout << fmt::format("overall {}\n", report["overall"].dump());
        };
    });

    // ---- score-eta
    auto* se_cmd = app.add_subcommand("score-eta", "mean absolute ETA error");
    std::vector<std::string> se_labels, se_pred;
    std::string se_out;
    bool se_any = false;
    se_cmd->add_option("--labels", se_labels, "ETA labels NDJSON; repeat once per city")->required();
    se_cmd->add_option("--pred", se_pred, "ETA predictions NDJSON; one per --labels")->required();
    se_cmd->add_option("--out", se_out)->required();
    se_cmd->add_flag("--any-city-count", se_any);
    se_cmd->callback([&] {
        action = [&] {
            if (se_pred.size() != se_labels.size()) throw ValidationError("one --pred per --labels");
            Json report;
            Json cities = Json::array();
            std::vector<double> losses;
            for (std::size_t i = 0; i < se_labels.size(); ++i) {
                const auto labels = io::load_eta_labels(se_labels[i]);
                const double l1 = metrics::l1_eta(io::load_eta_predictions(se_pred[i]), labels);
                cities.push_back({{"labels", se_labels[i]}, {"l1", l1}, {"n", labels.size()}});
                losses.push_back(l1);
            }
            report["overall"] =
                se_any || losses.size() == 3 ? Json(metrics::overall_score(losses, se_any)) : Json();
            report["cities"] = std::move(cities);
            io::write_json(se_out, report);
            std::cout << fmt::format("overall {}\n", report["overall"].dump());
        };
    });

    // ---- weights
    auto* w_cmd = app.add_subcommand("weights", "class weights");
    auto* w_compute = w_cmd->add_subcommand("compute", "macro-averaged weights from training labels");
    w_cmd->require_subcommand(1);
    std::string w_train, w_out;
    w_compute->add_option("--train-labels", w_train)->required();
    w_compute->add_option("--out", w_out)->required();
    w_compute->callback([&] {
        action = [&] {
            const auto w = metrics::compute_class_weights(io::load_cc_labels(w_train));
            metrics::save_weights(w, w_out);
            std::cout << fmt::format("weights {:.6f} {:.6f} {:.6f}\n", w.w[0], w.w[1], w.w[2]);
        };
    });

    // ---- baseline
    auto* b_cmd = app.add_subcommand("baseline", "historic hourly distribution baseline");
    b_cmd->require_subcommand(1);
    auto* b_fit = b_cmd->add_subcommand("fit", "fit per edge and hour class frequencies");
    std::string b_train, b_out;
    double b_alpha = 1.0;
    b_fit->add_option("--train-labels", b_train)->required();
    b_fit->add_option("--alpha", b_alpha, "additive smoothing")->capture_default_str();
    b_fit->add_option("--out", b_out)->required();
    b_fit->callback([&] {
        action = [&] { baseline::save_historic(baseline::fit_historic(io::load_cc_labels(b_train), b_alpha), b_out); };
    });
    auto* b_pred = b_cmd->add_subcommand("predict", "logits for every edge and bin of a day");
    std::string bp_hist, bp_graph, bp_day, bp_out;
    b_pred->add_option("--historic", bp_hist)->required();
    b_pred->add_option("--graph-dir", bp_graph)->required();
    b_pred->add_option("--day", bp_day)->required();
    b_pred->add_option("--out", bp_out)->required();
    b_pred->callback([&] {
        action = [&] {
            const auto d = baseline::load_historic(bp_hist);
            const auto g = io::load_graph(bp_graph);
            std::set<EdgeKey> keys;
            for (const auto& e : g.edges) keys.insert(e.key());
            io::save_cc_predictions(baseline::predict_day(d, {keys.begin(), keys.end()}, bp_day), bp_out);
        };
    });

    // ---- analyze
    auto* an_cmd = app.add_subcommand("analyze", "re-weighting, historic comparison and label distributions");
    an_cmd->require_subcommand(1);
    auto* an_rw = an_cmd->add_subcommand("reweight", "re-weighted class probabilities from logits");
    std::string ar_pred, ar_weights, ar_out;
    an_rw->add_option("--pred", ar_pred)->required();
    an_rw->add_option("--weights", ar_weights)->required();
    an_rw->add_option("--out", ar_out, "CSV")->required();
    an_rw->callback([&] {
        action = [&] {
            const auto w = metrics::load_weights(ar_weights);
            std::ofstream f(ar_out);
            if (!f) throw std::runtime_error("cannot write " + ar_out);
            f << "u,v,day,t,p1,p2,p3,b\n";
            for (const auto& p : io::load_cc_predictions(ar_pred)) {
                const auto r = baseline::reweight_logits(p.logits, w);
                f << fmt::format("{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", p.u, p.v, p.day, p.t, r.p[0],
                                 r.p[1], r.p[2], r.b);
            }
        };
    });
    auto* an_cmp = an_cmd->add_subcommand("compare", "pair predictions with the historic distribution");
    std::string ac_pred, ac_hist, ac_weights, ac_out;
    int ac_from = 14, ac_to = 18;
    int ac_bins = 20;
    an_cmp->add_option("--pred", ac_pred)->required();
    an_cmp->add_option("--historic", ac_hist)->required();
    an_cmp->add_option("--weights", ac_weights, "class weights (default: unit)");
    an_cmp->add_option("--hour-from", ac_from)->capture_default_str();
    an_cmp->add_option("--hour-to", ac_to, "exclusive")->capture_default_str();
    an_cmp->add_option("--bins", ac_bins, "density grid size")->capture_default_str();
    an_cmp->add_option("--out-dir", ac_out)->required();
    an_cmp->callback([&] {
        action = [&] {
            const auto w = ac_weights.empty() ? metrics::ClassWeights::unit() : metrics::load_weights(ac_weights);
            const auto c = baseline::compare_to_historic(io::load_cc_predictions(ac_pred),
                                                         baseline::load_historic(ac_hist), w, ac_from, ac_to);
            const fs::path dir = ac_out;
            io::write_json(dir / "comparison.json", baseline::to_json(c));
            baseline::write_pairs_csv(c, dir / "pairs.csv");
            baseline::write_density_csv(c, dir / "density.csv", ac_bins);
            print_json(baseline::to_json(c));
        };
    });
    auto* an_dist = an_cmd->add_subcommand("distribution", "class fractions and coverage histogram");
    std::string ad_labels, ad_out;
    an_dist->add_option("--labels", ad_labels)->required();
    an_dist->add_option("--out-dir", ad_out)->required();
    an_dist->callback([&] {
        action = [&] {
            const auto r = baseline::label_distribution_report(io::load_cc_labels(ad_labels));
            io::write_json(fs::path(ad_out) / "distribution.json", baseline::to_json(r));
            baseline::write_coverage_csv(r, fs::path(ad_out) / "coverage.csv");
            print_json(baseline::to_json(r));
        };
    });

    // ---- validate
    auto* v_cmd = app.add_subcommand("validate", "check a graph and optionally a prediction file");
    std::string v_graph, v_cc, v_eta, v_ss;
    v_cmd->add_option("--graph-dir", v_graph)->required();
    v_cmd->add_option("--cc-pred", v_cc);
    v_cmd->add_option("--eta-pred", v_eta);
    v_cmd->add_option("--supersegments", v_ss, "needed with --eta-pred");
    v_cmd->callback([&] {
        action = [&] {
            const auto g = io::load_graph(v_graph);
            std::cout << fmt::format("graph ok: {} nodes, {} edges\n", g.nodes.size(), g.edges.size());
            PredictionReport report;
            if (!v_cc.empty()) {
                const auto r = validate_cc_prediction(io::load_cc_predictions(v_cc), g, all_bins());
                report.issues.insert(report.issues.end(), r.issues.begin(), r.issues.end());
            }
            if (!v_eta.empty()) {
                if (v_ss.empty()) throw ValidationError("--eta-pred needs --supersegments");
                const auto r = validate_eta_prediction(io::load_eta_predictions(v_eta),
                                                                 io::load_supersegments(v_ss), all_bins());
                report.issues.insert(report.issues.end(), r.issues.begin(), r.issues.end());
            }
            for (const auto& i : report.issues) {
                std::cout << fmt::format("{} {} day={} t={}\n", t4c::to_string(i.kind), i.key, i.day, i.t);
            }
            if (!report.empty()) {
                throw ValidationError(fmt::format("{} prediction issues", report.issues.size()));
            }
        };
    });

    // ---- synth
    auto* sy_cmd = app.add_subcommand("synth", "generate a synthetic city and a manifest for it");
    std::string sy_spec, sy_out;
    std::uint64_t sy_seed = 42;
    std::optional<int> sy_rows, sy_cols, sy_days;
    std::optional<double> sy_cov;
    bool sy_messy = false;
    sy_cmd->add_option("--spec", sy_spec, "synthetic city spec JSON");
    sy_cmd->add_option("--seed", sy_seed)->capture_default_str();
    sy_cmd->add_option("--out-dir", sy_out)->required();
    sy_cmd->add_option("--rows", sy_rows);
    sy_cmd->add_option("--cols", sy_cols);
    sy_cmd->add_option("--days", sy_days);
    sy_cmd->add_option("--coverage", sy_cov);
    sy_cmd->add_flag("--messy", sy_messy, "add dead ends, loops, parallel edges and strays");
    sy_cmd->callback([&] {
        action = [&] {
            auto spec = sy_spec.empty() ? synth::SyntheticCitySpec{}
                                        : synth::SyntheticCitySpec::from_json(io::read_json(sy_spec));
            if (sy_rows) spec.rows = *sy_rows;
            if (sy_cols) spec.cols = *sy_cols;
            if (sy_days) spec.days = *sy_days;
            if (sy_cov) spec.coverage = *sy_cov;
            if (sy_messy) spec.messy = true;
            const auto city = synth::generate_synthetic_city(spec, sy_seed);
            const auto w = synth::write_synthetic_city(city, sy_out);
            Json m;
            m["city"] = spec.city;
            m["seed"] = sy_seed;
            m["paths"] = {{"graph_dir", "graph"},
                          {"detectors", "detectors.jsonl"},
                          {"heatmap", "heatmap.json"},
                          {"speed_stats", "speed_stats.jsonl"},
                          {"free_flow", "free_flow.jsonl"},
                          {"out_dir", "run"}};
            m["overall_any_city_count"] = true;
            io::write_json(fs::path(sy_out) / "manifest.json", m);
            std::cout << fmt::format("{} nodes, {} edges, {} days -> {}\n", city.graph.nodes.size(),
                                     city.graph.edges.size(), city.days.size(), sy_out);
        };
    });

    // ---- run
    auto* run_cmd = app.add_subcommand("run", "run the manifest-driven pipeline");
    std::string r_manifest, r_timings;
    run_cmd->add_option("--manifest", r_manifest)->required();
    run_cmd->add_option("--timings", r_timings, "write stage timings JSON here (kept out of the output tree)");
    run_cmd->callback([&] {
        action = [&] {
            const auto m = pipeline::load_manifest(r_manifest);
            const auto r = pipeline::run_pipeline(m);
            Json t = Json::array();
            for (const auto& s : r.timings) {
                std::cout << fmt::format("{:<22} {:8.3f} s\n", s.stage, s.seconds);
                t.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
            }
            if (!r_timings.empty()) io::write_json(r_timings, t);
            std::cout << fmt::format("summary: {}\n", (m.paths.out_dir / "summary.json").string());
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (action) action();
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const StageError& e) {
        std::cerr << "stage '" << e.stage() << "' failed: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
