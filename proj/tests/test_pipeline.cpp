#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "support.hpp"
#include "t4c/errors.hpp"
#include "t4c/io.hpp"
#include "t4c/labels.hpp"
#include "t4c/metrics.hpp"
#include "t4c/pipeline.hpp"
#include "t4c/synth.hpp"

using namespace t4c;
namespace fs = std::filesystem;
using io::Json;

namespace {

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        files[fs::relative(e.path(), root).string()] = ss.str();
    }
    return files;
}

Json manifest_json(const std::string& out = "run") {
    return Json{{"city", "synthetic"},
                {"seed", 7},
                {"paths",
                 {{"graph_dir", "graph"},
                  {"detectors", "detectors.jsonl"},
                  {"heatmap", "heatmap.json"},
                  {"speed_stats", "speed_stats.jsonl"},
                  {"free_flow", "free_flow.jsonl"},
                  {"out_dir", out}}},
                {"overall_any_city_count", true}};
}

fs::path write_city(const std::string& name, synth::SyntheticCitySpec spec, std::uint64_t seed = 42) {
    const fs::path dir = testing::temp_dir(name);
    synth::write_synthetic_city(synth::generate_synthetic_city(spec, seed), dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(T4CKIT_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("5x5 grid has 25 nodes and 80 directed edges") {
    synth::SyntheticCitySpec spec;
    spec.rows = 5;
    spec.cols = 5;
    auto city = synth::generate_synthetic_city(spec, 1);
    CHECK(city.graph.nodes.size() == 25);
    CHECK(city.graph.edges.size() == 80);
    CHECK(synth::grid_node(spec, 0, 0) == 1);
    CHECK(synth::grid_node(spec, 4, 4) == 25);
}

TEST_CASE("synthetic coverage target is realized") {
    for (double target : {0.16, 0.32, 0.42}) {
        synth::SyntheticCitySpec spec;
        spec.rows = 8;
        spec.cols = 8;
        spec.days = 2;
        spec.coverage = target;
        auto city = synth::generate_synthetic_city(spec, 3);
        for (const auto& day : city.days) {
            auto r = labels::label_city(city.graph, {}, labels::stats_for_day(city.stats, day), city.free_flow, day);
            CHECK(metrics::city_coverage(metrics::coverage(r.cc_labels)) == doctest::Approx(target).epsilon(0.02 / target));
        }
    }
}

TEST_CASE("synthetic city is reproducible per seed") {
    synth::SyntheticCitySpec spec;
    spec.messy = true;
    auto a = synth::generate_synthetic_city(spec, 9);
    auto b = synth::generate_synthetic_city(spec, 9);
    auto c = synth::generate_synthetic_city(spec, 10);
    CHECK(a.graph == b.graph);
    CHECK(a.stats == b.stats);
    CHECK(a.detectors == b.detectors);
    CHECK_FALSE(a.stats == c.stats);
    CHECK(synth::consecutive_days("2022-02-27", 3) == std::vector<std::string>{"2022-02-27", "2022-02-28", "2022-03-01"});
}

TEST_CASE("full pipeline on the synthetic fixture") {
    synth::SyntheticCitySpec spec;
    spec.messy = true;
    const fs::path dir = write_city("pipe_full", spec);
    io::write_json(dir / "manifest.json", manifest_json());
    auto m = pipeline::load_manifest(dir / "manifest.json");
    auto r = pipeline::run_pipeline(m);
    CHECK(r.summary["status"] == "completed");
    int completed = 0;
    for (const auto& st : r.summary["stages"]) completed += st["status"] == "completed";
    CHECK(completed == 5);
    CHECK(r.timings.size() == 5);
    for (const char* f : {"attach/graph/nodes.jsonl", "clean/clean_report.json", "supersegments/supersegments.jsonl",
                          "label/cc_labels.jsonl", "score/cc_report.json", "score/eta_report.json", "summary.json"}) {
        CHECK_MESSAGE(fs::exists(dir / "run" / f), f);
    }
    // the cleaned graph satisfies the cleaning invariants
    const RoadGraph g = io::load_graph(dir / "run" / "clean" / "graph");
    CHECK(testing::weak_components(g) == 1);
    // every super-segment references cleaned edges
    std::set<EdgeKey> keys;
    for (const auto& e : g.edges) keys.insert(e.key());
    for (const auto& ss : io::load_supersegments(dir / "run" / "supersegments" / "supersegments.jsonl")) {
        for (const auto& k : ss.edges) CHECK(keys.count(k));
    }

    SUBCASE("rerun is byte-identical") {
        const auto first = read_tree(dir / "run");
        fs::remove_all(dir / "run");
        pipeline::run_pipeline(m);
        CHECK(read_tree(dir / "run") == first);
    }
    SUBCASE("disabling later stages leaves earlier outputs alone") {
        Json j = manifest_json("run_partial");
        j["stages"] = {{"sample_supersegments", false}, {"label", false}, {"score", false}};
        io::write_json(dir / "partial.json", j);
        auto partial = pipeline::run_pipeline(pipeline::load_manifest(dir / "partial.json"));
        CHECK(partial.summary["status"] == "completed");
        auto full_tree = read_tree(dir / "run");
        auto part_tree = read_tree(dir / "run_partial");
        for (const auto& [name, bytes] : part_tree) {
            if (name == "summary.json") continue;
            CHECK_MESSAGE(full_tree.at(name) == bytes, name);
        }
        CHECK_FALSE(fs::exists(dir / "run_partial" / "label"));
    }
}

TEST_CASE("zero detector density still completes") {
    synth::SyntheticCitySpec spec;
    spec.detector_density = 0.0;
    spec.mid_edge_detectors = 0;
    spec.far_detectors = 0;
    const fs::path dir = write_city("pipe_nodet", spec);
    io::write_json(dir / "manifest.json", manifest_json());
    auto r = pipeline::run_pipeline(pipeline::load_manifest(dir / "manifest.json"));
    CHECK(r.summary["status"] == "completed");
    CHECK(r.summary["stages"][0]["counts"]["attached_detectors"] == 0);
}

TEST_CASE("manifest validation happens before anything runs") {
    const fs::path dir = write_city("pipe_invalid", synth::SyntheticCitySpec{});
    SUBCASE("missing stats path with labeling on") {
        Json j = manifest_json();
        j["paths"].erase("speed_stats");
        io::write_json(dir / "m.json", j);
        auto m = pipeline::load_manifest(dir / "m.json");
        CHECK_THROWS_AS(pipeline::run_pipeline(m), ValidationError);
        CHECK_FALSE(fs::exists(dir / "run"));
    }
    SUBCASE("seed is required for sampling") {
        Json j = manifest_json();
        j.erase("seed");
        io::write_json(dir / "m.json", j);
        CHECK_THROWS_AS(pipeline::load_manifest(dir / "m.json").validate(), ValidationError);
    }
    SUBCASE("repeated paths") {
        Json j = manifest_json();
        j["paths"]["free_flow"] = "speed_stats.jsonl";
        io::write_json(dir / "m.json", j);
        CHECK_THROWS_AS(pipeline::load_manifest(dir / "m.json").validate(), ValidationError);
    }
    SUBCASE("unknown keys") {
        Json j = manifest_json();
        j["stages"] = {{"teleport", true}};
        io::write_json(dir / "m.json", j);
        CHECK_THROWS_AS(pipeline::load_manifest(dir / "m.json"), ValidationError);
    }
}

TEST_CASE("a failing stage is named in the summary") {
    const fs::path dir = write_city("pipe_fail", synth::SyntheticCitySpec{});
    // a super-segment over an edge that does not exist breaks labeling
    io::save_supersegments({{"bogus", {{999999, 1}}}}, dir / "ss.jsonl");
    Json j = manifest_json();
    j["paths"]["supersegments"] = "ss.jsonl";
    j["stages"] = {{"attach", false}, {"clean", false}, {"sample_supersegments", false}};
    io::write_json(dir / "m.json", j);
    CHECK_THROWS(pipeline::run_pipeline(pipeline::load_manifest(dir / "m.json")));
    const Json summary = io::read_json(dir / "run" / "summary.json");
    CHECK(summary["status"] == "failed");
    CHECK(summary["failed_stage"] == "label");
    CHECK(summary["partial_outputs"] == true);
}

TEST_CASE("command line exit codes") {
    const fs::path dir = testing::temp_dir("pipe_cli");
    CHECK(run_cli("synth --out-dir " + (dir / "city").string() + " --rows 5 --cols 5 --days 2") == 0);
    CHECK(fs::exists(dir / "city" / "manifest.json"));
    CHECK(run_cli("run --manifest " + (dir / "city" / "manifest.json").string()) == 0);
    CHECK(fs::exists(dir / "city" / "run" / "summary.json"));

    // validation error -> 2
    io::write_json(dir / "bad.json", Json{{"paths", {{"graph_dir", "nowhere"}, {"out_dir", "o"}}}});
    CHECK(run_cli("run --manifest " + (dir / "bad.json").string()) == 2);
    CHECK(run_cli("no-such-subcommand") == 2);

    // malformed input file -> 2
    Json m = io::read_json(dir / "city" / "manifest.json");
    std::ofstream(dir / "city" / "broken_heatmap.json") << "{\"rows\": 1}";
    m["paths"]["heatmap"] = "broken_heatmap.json";
    m["paths"]["out_dir"] = "run_broken";
    io::write_json(dir / "city" / "broken.json", m);
    CHECK(run_cli("run --manifest " + (dir / "city" / "broken.json").string()) == 2);

    // bad super-segment references are input errors too
    io::save_supersegments({{"bogus", {{999999, 1}}}}, dir / "city" / "ss.jsonl");
    m = io::read_json(dir / "city" / "manifest.json");
    m["paths"]["supersegments"] = "ss.jsonl";
    m["paths"]["out_dir"] = "run_fail";
    m["stages"] = {{"attach", false}, {"clean", false}, {"sample_supersegments", false}};
    io::write_json(dir / "city" / "fail.json", m);
    CHECK(run_cli("run --manifest " + (dir / "city" / "fail.json").string()) == 2);

    // stage failure -> 1: the output directory cannot be created
    std::ofstream(dir / "city" / "blocker") << "x";
    m = io::read_json(dir / "city" / "manifest.json");
    m["paths"]["out_dir"] = "blocker/run";
    io::write_json(dir / "city" / "blocked.json", m);
    CHECK(run_cli("run --manifest " + (dir / "city" / "blocked.json").string()) == 1);

    CHECK(run_cli("weights compute --train-labels " + (dir / "city" / "run" / "label" / "cc_labels.jsonl").string() +
                  " --out " + (dir / "w.json").string()) == 0);
    CHECK(fs::exists(dir / "w.json"));
}
