#include "t4c/labels.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "t4c/errors.hpp"

namespace t4c::labels {

int extract_cc(const SegmentSpeedStats& stats, double free_flow_kph) {
    if (stats.raw_median_speed == 0 || stats.raw_median_speed == 255) return 0;
    if (!(free_flow_kph > 0.0)) {
        throw std::invalid_argument(fmt::format("free flow speed {} must be > 0", free_flow_kph));
    }
    const double factor = stats.median_speed_kph / free_flow_kph;
    if (factor < kRedFactor && stats.volume >= kRedMinVolume) return 3;
    if (factor >= kRedFactor && factor < kGreenFactor && stats.volume >= kYellowMinVolume) return 2;
    if (factor >= kGreenFactor && stats.volume > 0) return 1;
    return 0;
}

const char* to_string(SpeedSource s) {
    switch (s) {
        case SpeedSource::kCurrent: return "current";
        case SpeedSource::kFreeFlow: return "free_flow";
        case SpeedSource::kMaxspeed: return "maxspeed";
    }
    return "?";
}

const EdgeSpeeds* EdgeSpeedSchedule::find(const EdgeKey& k) const {
    auto it = edges.find(k);
    return it == edges.end() ? nullptr : &it->second;
}

EdgeSpeedSchedule build_edge_speed_schedule(const std::vector<Edge>& edges, const std::vector<FreeFlow>& free_flow,
                                            const std::vector<SegmentSpeedStats>& stats) {
    std::map<EdgeKey, double> ff;
    for (const auto& f : free_flow) ff[f.key()] = f.free_flow_kph;

    EdgeSpeedSchedule out;
    for (const auto& e : edges) {
        EdgeSpeeds es;
        es.length_m = e.length_m;
        auto it = ff.find(e.key());
        if (it != ff.end()) {
            es.speeds.fill(it->second);
            es.sources.fill(SpeedSource::kFreeFlow);
        } else {
            es.speeds.fill(e.maxspeed_kph);
            es.sources.fill(SpeedSource::kMaxspeed);
        }
        if (out.edges.emplace(e.key(), es).second && it == ff.end()) ++out.maxspeed_only;
    }

    std::set<std::pair<EdgeKey, int>> seen;
    for (const auto& s : stats) {
        if (!seen.emplace(s.key(), s.t).second) {
            throw ValidationError(fmt::format("duplicate speed stats for edge ({}, {}) at t={}", s.u, s.v, s.t));
        }
        auto it = out.edges.find(s.key());
        if (it == out.edges.end()) {
            ++out.unknown_stats;
            continue;
        }
        if (!(s.median_speed_kph > 0.0)) {
            ++out.zero_speed_stats;
            continue;
        }
        it->second.speeds[s.t] = s.median_speed_kph;
        it->second.sources[s.t] = SpeedSource::kCurrent;
    }
    return out;
}

double edge_eta(const EdgeSpeeds& e, int t) {
    if (t < 0 || t >= kBinsPerDay) throw std::out_of_range(fmt::format("time bin {} outside 0..95", t));
    const double speed = std::max(e.speeds[t], kMinSpeedKph);
    const double eta = e.length_m / (speed / 3.6);
    if (eta <= kLongEdgeEtaS) return eta;
    const int lo = std::max(t - 1, 0);
    const int hi = std::min(t + 1, kBinsPerDay - 1);
    double sum = 0.0;
    for (int i = lo; i <= hi; ++i) sum += e.speeds[i];
    const double mean = sum / (hi - lo + 1);
    if (!(mean > 0.0)) throw std::domain_error(fmt::format("mean speed {} around bin {} is not positive", mean, t));
    return kLongEdgeEtaS + e.length_m / (mean / 3.6);
}

double compute_eta(const SuperSegment& ss, const EdgeSpeedSchedule& schedule, int t) {
    if (t < 0 || t >= kBinsPerDay) throw std::out_of_range(fmt::format("time bin {} outside 0..95", t));
    double total = 0.0;
    for (const auto& k : ss.edges) {
        const EdgeSpeeds* e = schedule.find(k);
        if (!e) {
            throw std::invalid_argument(
                fmt::format("super-segment {} edge ({}, {}) has no speed schedule", ss.ssid, k.u, k.v));
        }
        total += edge_eta(*e, t);
    }
    return total;
}

LabelResult label_city(const RoadGraph& graph, const std::vector<SuperSegment>& supersegments,
                       const std::vector<SegmentSpeedStats>& stats, const std::vector<FreeFlow>& free_flow,
                       const std::string& day) {
    LabelResult out;
    out.schedule = build_edge_speed_schedule(graph.edges, free_flow, stats);

    for (const auto& ss : supersegments) {
        for (const auto& k : ss.edges) {
            if (!out.schedule.find(k)) {
                throw ValidationError(
                    fmt::format("super-segment {} references edge ({}, {}) not in the graph", ss.ssid, k.u, k.v));
            }
        }
    }

    std::map<EdgeKey, double> ff;
    for (const auto& f : free_flow) ff[f.key()] = f.free_flow_kph;
    std::map<EdgeKey, std::array<int, kBinsPerDay>> cc;
    for (const auto& [k, _] : out.schedule.edges) cc[k].fill(0);
    for (const auto& s : stats) {
        auto it = cc.find(s.key());
        if (it == cc.end()) continue;
        auto f = ff.find(s.key());
        if (f == ff.end()) {
            if (s.raw_median_speed != 0 && s.raw_median_speed != 255) ++out.stats_without_free_flow;
            continue;
        }
        it->second[s.t] = extract_cc(s, f->second);
    }

    out.cc_labels.reserve(cc.size() * kBinsPerDay);
    for (const auto& [k, bins] : cc) {
        for (int t = 0; t < kBinsPerDay; ++t) out.cc_labels.push_back({k.u, k.v, t, bins[t], day});
    }
    out.eta_labels.reserve(supersegments.size() * kBinsPerDay);
    for (const auto& ss : supersegments) {
        for (int t = 0; t < kBinsPerDay; ++t) out.eta_labels.push_back({ss.ssid, t, compute_eta(ss, out.schedule, t), day});
    }
    return out;
}

std::vector<std::string> stats_days(const std::vector<SegmentSpeedStats>& stats) {
    std::set<std::string> days;
    for (const auto& s : stats) days.insert(s.day);
    return {days.begin(), days.end()};
}

std::vector<SegmentSpeedStats> stats_for_day(const std::vector<SegmentSpeedStats>& stats, const std::string& day) {
    std::vector<SegmentSpeedStats> out;
    for (const auto& s : stats) {
        if (s.day == day) out.push_back(s);
    }
    return out;
}

}  // namespace t4c::labels
