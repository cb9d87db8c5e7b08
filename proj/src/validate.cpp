#include "t4c/validate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

namespace t4c {

namespace {

std::string edge_name(EdgeKey k) { return std::to_string(k.u) + "->" + std::to_string(k.v); }

// Shared bookkeeping for both prediction kinds, keyed by a string id.
template <class Pred, class KeyOf, class CheckValue>
PredictionReport validate(const std::vector<Pred>& preds, const std::set<std::string>& known,
                          const std::vector<int>& bins, KeyOf key_of, CheckValue check_value) {
    PredictionReport report;
    std::set<std::tuple<std::string, std::string, int>> seen;
    std::set<std::string> days;
    for (const auto& p : preds) {
        const std::string key = key_of(p);
        days.insert(p.day);
        if (!known.count(key)) {
            report.issues.push_back({IssueKind::kUnknownKey, key, p.day, p.t});
            continue;
        }
        if (!seen.emplace(p.day, key, p.t).second) {
            report.issues.push_back({IssueKind::kDuplicate, key, p.day, p.t});
        }
        check_value(p, key, report);
    }
    if (days.empty()) days.insert("");
    for (const auto& day : days) {
        for (const auto& key : known) {
            for (int t : bins) {
                if (!seen.count({day, key, t})) report.issues.push_back({IssueKind::kMissingPair, key, day, t});
            }
        }
    }
    return report;
}

}  // namespace

const char* to_string(IssueKind kind) {
    switch (kind) {
        case IssueKind::kUnknownKey: return "unknown_key";
        case IssueKind::kMissingPair: return "missing_pair";
        case IssueKind::kNonFinite: return "non_finite";
        case IssueKind::kNegative: return "negative";
        case IssueKind::kDuplicate: return "duplicate";
    }
    return "?";
}

std::size_t PredictionReport::count(IssueKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(issues.begin(), issues.end(), [&](const PredictionIssue& i) { return i.kind == kind; }));
}

std::vector<int> all_bins() {
    std::vector<int> bins(kBinsPerDay);
    std::iota(bins.begin(), bins.end(), 0);
    return bins;
}

PredictionReport validate_cc_prediction(const std::vector<CcPrediction>& preds, const RoadGraph& graph,
                                        const std::vector<int>& bins) {
    std::set<std::string> known;
    for (const auto& e : graph.edges) known.insert(edge_name(e.key()));
    return validate(
        preds, known, bins, [](const CcPrediction& p) { return edge_name(p.key()); },
        [](const CcPrediction& p, const std::string& key, PredictionReport& report) {
            if (!std::all_of(p.logits.begin(), p.logits.end(), [](double x) { return std::isfinite(x); })) {
                report.issues.push_back({IssueKind::kNonFinite, key, p.day, p.t});
            }
        });
}

PredictionReport validate_eta_prediction(const std::vector<EtaPrediction>& preds,
                                         const std::vector<SuperSegment>& supersegments,
                                         const std::vector<int>& bins) {
    std::set<std::string> known;
    for (const auto& s : supersegments) known.insert(s.ssid);
    return validate(
        preds, known, bins, [](const EtaPrediction& p) { return p.ssid; },
        [](const EtaPrediction& p, const std::string& key, PredictionReport& report) {
            if (!std::isfinite(p.eta_s)) {
                report.issues.push_back({IssueKind::kNonFinite, key, p.day, p.t});
            } else if (p.eta_s < 0.0) {
                report.issues.push_back({IssueKind::kNegative, key, p.day, p.t});
            }
        });
}

}  // namespace t4c
