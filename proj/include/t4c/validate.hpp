#pragma once

#include <string>
#include <vector>

#include "t4c/types.hpp"

namespace t4c {

enum class IssueKind { kUnknownKey, kMissingPair, kNonFinite, kNegative, kDuplicate };

const char* to_string(IssueKind kind);

struct PredictionIssue {
    IssueKind kind;
    std::string key;  // "u->v" or the ssid
    std::string day;
    int t = 0;
};

struct PredictionReport {
    std::vector<PredictionIssue> issues;

    bool empty() const { return issues.empty(); }
    std::size_t count(IssueKind kind) const;
};

/// Diagnoses CC predictions against the edges of `graph` for the given bins.
/// Missing pairs are reported per day present in `preds`.
PredictionReport validate_cc_prediction(const std::vector<CcPrediction>& preds, const RoadGraph& graph,
                                        const std::vector<int>& bins);

PredictionReport validate_eta_prediction(const std::vector<EtaPrediction>& preds,
                                         const std::vector<SuperSegment>& supersegments,
                                         const std::vector<int>& bins);

/// 0, 1, ..., 95.
std::vector<int> all_bins();

}  // namespace t4c
