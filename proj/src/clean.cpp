#include "t4c/clean.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "t4c/attach.hpp"

namespace t4c::clean {

namespace {

struct Incidence {
    std::unordered_map<NodeId, std::vector<std::size_t>> out;
    std::unordered_map<NodeId, std::vector<std::size_t>> in;

    explicit Incidence(const RoadGraph& g) {
        for (std::size_t i = 0; i < g.edges.size(); ++i) {
            out[g.edges[i].u].push_back(i);
            in[g.edges[i].v].push_back(i);
        }
    }

    const std::vector<std::size_t>& outgoing(NodeId n) const { return lookup(out, n); }
    const std::vector<std::size_t>& incoming(NodeId n) const { return lookup(in, n); }

private:
    static const std::vector<std::size_t>& lookup(const std::unordered_map<NodeId, std::vector<std::size_t>>& m,
                                                   NodeId n) {
        static const std::vector<std::size_t> kEmpty;
        auto it = m.find(n);
        return it == m.end() ? kEmpty : it->second;
    }
};

std::size_t erase_edges(RoadGraph& g, const std::vector<char>& keep) {
    std::size_t removed = 0;
    std::vector<Edge> kept;
    kept.reserve(g.edges.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        if (keep[i]) {
            kept.push_back(std::move(g.edges[i]));
        } else {
            ++removed;
        }
    }
    g.edges = std::move(kept);
    return removed;
}

template <class Pred>
StepCounts remove_edges_if(RoadGraph& g, Pred pred) {
    std::vector<char> keep(g.edges.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) keep[i] = !pred(g.edges[i]);
    StepCounts c;
    c.removed_edges = erase_edges(g, keep);
    return c;
}

bool is_multi_edge_split(const Node& n) { return n.origin && *n.origin == kOriginMultiEdgeSplit; }

}  // namespace

StepCounts& StepCounts::operator+=(const StepCounts& o) {
    removed_nodes += o.removed_nodes;
    removed_edges += o.removed_edges;
    added_nodes += o.added_nodes;
    added_edges += o.added_edges;
    return *this;
}

StepCounts clean_no_access(RoadGraph& g, const CleanConfig& cfg) {
    return remove_edges_if(g, [&](const Edge& e) { return e.access && cfg.forbidden_access.count(*e.access); });
}

LowVolumeCounts clean_low_volume(RoadGraph& g, const heatmap::VolumeHeatmap& hm, const CleanConfig& cfg) {
    LowVolumeCounts counts;
    auto protected_node = [&](NodeId n) {
        const Node& node = g.node(n);
        return node.has_counter() || is_multi_edge_split(node);
    };
    const StepCounts removed = remove_edges_if(g, [&](const Edge& e) {
        if (!cfg.low_volume_classes.count(e.highway_class)) return false;
        if (e.length_m < cfg.low_volume_min_length_m) return false;
        if (protected_node(e.u) || protected_node(e.v)) return false;
        const auto vol = heatmap::edge_max_volume(hm, e, cfg.raster_step_m);
        if (vol.outside) ++counts.outside_heatmap;
        return vol.max_volume < cfg.low_volume_threshold;
    });
    static_cast<StepCounts&>(counts) = removed;
    return counts;
}

StepCounts clean_dead_ends(RoadGraph& g) {
    const Incidence inc(g);
    const std::size_t n = g.edges.size();
    std::vector<char> alive(n, 1);

    auto is_dead = [&](std::size_t i) {
        const Edge& e = g.edges[i];
        if (e.u == e.v) return false;
        const auto& head_out = inc.outgoing(e.v);
        const bool continues = std::any_of(head_out.begin(), head_out.end(),
                                           [&](std::size_t j) { return alive[j] && g.edges[j].v != e.u; });
        if (!continues) return true;
        const auto& tail_in = inc.incoming(e.u);
        return std::none_of(tail_in.begin(), tail_in.end(),
                            [&](std::size_t j) { return alive[j] && g.edges[j].u != e.v; });
    };

    std::deque<std::size_t> work(n);
    std::iota(work.begin(), work.end(), 0);
    std::vector<char> queued(n, 1);
    auto enqueue = [&](const std::vector<std::size_t>& ids) {
        for (std::size_t j : ids) {
            if (alive[j] && !queued[j]) {
                queued[j] = 1;
                work.push_back(j);
            }
        }
    };
    while (!work.empty()) {
        const std::size_t i = work.front();
        work.pop_front();
        queued[i] = 0;
        if (!alive[i] || !is_dead(i)) continue;
        alive[i] = 0;
        // Edges whose test reads out(u) or in(v) of the removed edge.
        enqueue(inc.incoming(g.edges[i].u));
        enqueue(inc.outgoing(g.edges[i].v));
    }
    StepCounts c;
    c.removed_edges = erase_edges(g, alive);
    return c;
}

StepCounts clean_isolates(RoadGraph& g) {
    std::unordered_map<NodeId, int> degree;
    for (const auto& e : g.edges) {
        ++degree[e.u];
        ++degree[e.v];
    }
    StepCounts c;
    for (auto it = g.nodes.begin(); it != g.nodes.end();) {
        if (!degree.count(it->first)) {
            it = g.nodes.erase(it);
            ++c.removed_nodes;
        } else {
            ++it;
        }
    }
    return c;
}

StepCounts clean_self_loops(RoadGraph& g, const CleanConfig& cfg) {
    return remove_edges_if(g, [&](const Edge& e) { return e.is_self_loop() && e.length_m < cfg.self_loop_min_m; });
}

StepCounts clean_no_neighbors(RoadGraph& g) {
    std::unordered_map<NodeId, bool> has_neighbor;
    for (const auto& e : g.edges) {
        has_neighbor[e.u] |= !e.is_self_loop();
        has_neighbor[e.v] |= !e.is_self_loop();
    }
    StepCounts c;
    for (auto it = g.nodes.begin(); it != g.nodes.end();) {
        auto h = has_neighbor.find(it->first);
        if (h == has_neighbor.end() || !h->second) {
            it = g.nodes.erase(it);
            ++c.removed_nodes;
        } else {
            ++it;
        }
    }
    c += remove_edges_if(g, [&](const Edge& e) { return !g.has_node(e.u); });
    return c;
}

StepCounts largest_component(RoadGraph& g) {
    if (g.nodes.empty()) throw std::invalid_argument("largest_component: empty graph");

    std::vector<NodeId> ids;
    ids.reserve(g.nodes.size());
    std::unordered_map<NodeId, std::size_t> pos;
    for (const auto& [id, _] : g.nodes) {
        pos[id] = ids.size();
        ids.push_back(id);
    }
    std::vector<std::size_t> parent(ids.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (const auto& e : g.edges) {
        const std::size_t a = find(pos.at(e.u));
        const std::size_t b = find(pos.at(e.v));
        // Root at the smaller index, which is also the smaller node id.
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
    std::vector<std::size_t> size(ids.size(), 0);
    for (std::size_t i = 0; i < ids.size(); ++i) ++size[find(i)];
    // Roots are the smallest member, so scanning in id order breaks ties
    // toward the component holding the smallest node id.
    std::size_t best = find(0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (size[i] > size[best]) best = i;
    }

    StepCounts c;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (find(i) != best) {
            g.nodes.erase(ids[i]);
            ++c.removed_nodes;
        }
    }
    c += remove_edges_if(g, [&](const Edge& e) { return !g.has_node(e.u); });
    return c;
}

StepCounts clean_circle_ramps(RoadGraph& g) {
    const Incidence inc(g);
    std::vector<char> alive(g.edges.size(), 1);
    std::set<NodeId> removed_nodes;

    auto has_edge = [&](NodeId x, NodeId y) {
        const auto& out = inc.outgoing(x);
        return std::any_of(out.begin(), out.end(), [&](std::size_t j) { return alive[j] && g.edges[j].v == y; });
    };

    // Returns the two neighbors when `m` is a removable ramp node.
    auto ramp_neighbors = [&](NodeId m) -> std::optional<std::pair<NodeId, NodeId>> {
        const Node& node = g.node(m);
        if (node.has_counter() || is_multi_edge_split(node)) return std::nullopt;
        std::set<NodeId> nbrs;
        std::vector<NodeId> preds;
        std::vector<NodeId> succs;
        for (std::size_t j : inc.outgoing(m)) {
            if (!alive[j]) continue;
            if (g.edges[j].v == m) return std::nullopt;
            nbrs.insert(g.edges[j].v);
            succs.push_back(g.edges[j].v);
        }
        for (std::size_t j : inc.incoming(m)) {
            if (!alive[j]) continue;
            nbrs.insert(g.edges[j].u);
            preds.push_back(g.edges[j].u);
        }
        if (nbrs.size() != 2) return std::nullopt;
        const NodeId a = *nbrs.begin();
        const NodeId b = *nbrs.rbegin();
        if (!has_edge(a, b) && !has_edge(b, a)) return std::nullopt;
        bool through = false;
        for (NodeId x : preds) {
            for (NodeId y : succs) {
                if (x == y) continue;
                if (!has_edge(x, y)) return std::nullopt;
                through = true;
            }
        }
        if (!through) return std::nullopt;
        return std::pair{a, b};
    };

    std::set<NodeId> work;
    for (const auto& [id, _] : g.nodes) work.insert(id);
    while (!work.empty()) {
        const NodeId m = *work.begin();
        work.erase(work.begin());
        if (removed_nodes.count(m)) continue;
        const auto pair = ramp_neighbors(m);
        if (!pair) continue;
        for (std::size_t j : inc.outgoing(m)) alive[j] = 0;
        for (std::size_t j : inc.incoming(m)) alive[j] = 0;
        removed_nodes.insert(m);
        work.insert(pair->first);
        work.insert(pair->second);
    }

    StepCounts c;
    c.removed_edges = erase_edges(g, alive);
    for (NodeId m : removed_nodes) g.nodes.erase(m);
    c.removed_nodes = removed_nodes.size();
    return c;
}

StepCounts clean_multi_edges(RoadGraph& g) {
    std::map<EdgeKey, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < g.edges.size(); ++i) groups[g.edges[i].key()].push_back(i);

    std::vector<char> keep(g.edges.size(), 1);
    std::vector<Edge> to_split;
    for (auto& [_, idx] : groups) {
        if (idx.size() < 2) continue;
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return g.edges[a].length_m < g.edges[b].length_m; });
        for (std::size_t k = 1; k < idx.size(); ++k) {
            keep[idx[k]] = 0;
            to_split.push_back(g.edges[idx[k]]);
        }
    }
    StepCounts c;
    if (to_split.empty()) return c;
    c.removed_edges = erase_edges(g, keep);

    for (auto& e : to_split) {
        const bool loop = e.is_self_loop();
        g.edges.push_back(std::move(e));
        const auto first = attach::split_edge(g, g.edges.size() - 1, loop ? 1.0 / 3.0 : 0.5, std::nullopt,
                                              kOriginMultiEdgeSplit);
        c.added_nodes += 1;
        c.added_edges += 2;
        if (loop) {
            attach::split_edge(g, first.second, 0.5, std::nullopt, kOriginMultiEdgeSplit);
            c.added_nodes += 1;
            c.added_edges += 1;
        }
    }
    return c;
}

// ---------------------------------------------------------------- pipeline

std::vector<std::pair<std::string, StepCounts>> CleanReport::totals() const {
    std::vector<std::pair<std::string, StepCounts>> out;
    for (const auto& r : log) {
        auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == r.step; });
        if (it == out.end()) {
            out.emplace_back(r.step, r.counts);
        } else {
            it->second += r.counts;
        }
    }
    return out;
}

bool CleanReport::all_zero() const {
    return std::none_of(log.begin(), log.end(), [](const StepRecord& r) { return r.counts.changed(); });
}

nlohmann::ordered_json CleanReport::to_json() const {
    using J = nlohmann::ordered_json;
    auto counts_json = [](const StepCounts& c) {
        J j;
        j["removed_nodes"] = c.removed_nodes;
        j["removed_edges"] = c.removed_edges;
        j["added_nodes"] = c.added_nodes;
        j["added_edges"] = c.added_edges;
        return j;
    };
    J j;
    j["nodes_before"] = nodes_before;
    j["edges_before"] = edges_before;
    j["nodes_after"] = nodes_after;
    j["edges_after"] = edges_after;
    j["length_before_m"] = length_before_m;
    j["length_after_m"] = length_after_m;
    j["iterations"] = iterations;
    j["low_volume_edges_outside_heatmap"] = low_volume_outside_heatmap;
    J totals_json = J::array();
    for (const auto& [step, c] : totals()) {
        J t = counts_json(c);
        t["step"] = step;
        totals_json.push_back(std::move(t));
    }
    j["totals"] = std::move(totals_json);
    J steps = J::array();
    for (const auto& r : log) {
        J s;
        s["step"] = r.step;
        s["iteration"] = r.iteration;
        s.update(counts_json(r.counts));
        steps.push_back(std::move(s));
    }
    j["steps"] = std::move(steps);
    return j;
}

RoadGraph clean_pipeline(RoadGraph g, const heatmap::VolumeHeatmap& hm, CleanReport* report,
                         const CleanConfig& cfg) {
    CleanReport local;
    CleanReport& r = report ? *report : local;
    r = CleanReport{};
    r.nodes_before = g.nodes.size();
    r.edges_before = g.edges.size();
    r.length_before_m = g.total_length_m();

    int iteration = 0;
    bool changed = false;
    auto run = [&](const char* name, StepCounts c) {
        changed |= c.changed();
        r.log.push_back({name, iteration, c});
    };

    run("clean_no_access", clean_no_access(g, cfg));
    const LowVolumeCounts low = clean_low_volume(g, hm, cfg);
    r.low_volume_outside_heatmap = low.outside_heatmap;
    run("clean_low_volume", low);

    do {
        ++iteration;
        changed = false;
        run("clean_dead_ends", clean_dead_ends(g));
        run("clean_isolates", clean_isolates(g));
        run("clean_self_loops", clean_self_loops(g, cfg));
        run("clean_isolates", clean_isolates(g));
        run("clean_dead_ends", clean_dead_ends(g));
        run("clean_isolates", clean_isolates(g));
        run("clean_no_neighbors", clean_no_neighbors(g));
        run("largest_component", largest_component(g));
        run("clean_dead_ends", clean_dead_ends(g));
        run("clean_isolates", clean_isolates(g));
        run("clean_circle_ramps", clean_circle_ramps(g));
        run("clean_isolates", clean_isolates(g));
    } while (changed);
    r.iterations = iteration;

    run("clean_multi_edges", clean_multi_edges(g));

    r.nodes_after = g.nodes.size();
    r.edges_after = g.edges.size();
    r.length_after_m = g.total_length_m();
    return g;
}

}  // namespace t4c::clean
