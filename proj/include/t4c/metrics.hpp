#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "json.hpp"
#include "t4c/types.hpp"

namespace t4c::metrics {

using Rational = boost::rational<std::int64_t>;

/// Macro-averaged class weights w_c = N / (3 N_c) over classes 1..3.
struct ClassWeights {
    std::array<double, kNumClasses> w{1.0, 1.0, 1.0};
    std::array<std::int64_t, kNumClasses> counts{};  // training samples per class 1..3
    std::int64_t total = 0;

    /// Weight of class 1..3.
    double of(int cls) const { return w.at(cls - 1); }
    /// The same weight as an exact fraction (needs counts).
    Rational exact(int cls) const;

    static ClassWeights unit();
    nlohmann::ordered_json to_json() const;
    static ClassWeights from_json(const nlohmann::ordered_json& j);
};

/// Throws ValidationError when any class count is 0.
ClassWeights compute_class_weights(const std::array<std::int64_t, kNumClasses>& counts);
ClassWeights compute_class_weights(const std::vector<CongestionLabel>& training_labels);

ClassWeights load_weights(const std::filesystem::path& path);
void save_weights(const ClassWeights& w, const std::filesystem::path& path);

/// Pairwise summation; fixed order so results are reproducible.
double pairwise_sum(std::span<const double> xs);

/// log softmax(logits)[cls - 1] with max subtraction.
double log_softmax(const Logits& logits, int cls);

struct CeResult {
    double loss = 0.0;
    double k = 0.0;                   // sum of weights over unmasked samples
    std::vector<double> per_sample;  // l_n, 0 for masked samples
};

/// Weighted masked cross entropy. Targets are 0..3 with 0 masked. Throws
/// std::invalid_argument on size mismatch or a target outside 0..3, and
/// ValidationError("no classified samples") when k = 0.
CeResult weighted_masked_ce(std::span<const Logits> logits, std::span<const int> targets, const ClassWeights& w);

/// Mean absolute error. Throws std::invalid_argument on size mismatch or
/// empty input.
double l1_eta(std::span<const double> pred, std::span<const double> labels);

/// Joins by (day, ssid, t). Every label needs a prediction, else
/// ValidationError.
double l1_eta(const std::vector<EtaPrediction>& pred, const std::vector<EtaLabel>& labels);

/// Mean of the city losses. Requires exactly three unless any_count is set;
/// throws std::invalid_argument otherwise or on an empty list.
double overall_score(std::span<const double> city_losses, bool any_count = false);

struct ClassLoss {
    std::int64_t count = 0;     // N_c
    double summed = 0.0;        // (1/k) sum of l_n over class c
    std::optional<double> mean;  // (1/N_c) sum of l_n over class c, missing when N_c = 0
};

std::array<ClassLoss, kNumClasses> loss_by_ground_truth(std::span<const double> per_sample,
                                                        std::span<const int> targets, const ClassWeights& w);

struct CoverageBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t edges = 0;
    std::size_t samples = 0;  // unmasked samples
    double summed = 0.0;      // (1/k) sum of l_n in the bin
    std::optional<double> mean;
    double cumulative = 0.0;  // running sum of `summed`
};

/// Bins samples by the coverage of their edge. Bins are right-open with
/// width `bin_width`; coverage 1.0 lands in the last bin. Edges missing from
/// `edge_coverage` count as coverage 0.
std::vector<CoverageBin> loss_by_coverage(std::span<const double> per_sample, std::span<const int> targets,
                                          std::span<const EdgeKey> sample_edges,
                                          const std::map<EdgeKey, double>& edge_coverage, const ClassWeights& w,
                                          double bin_width = 0.05);

/// Fraction of labeled bins with cc != 0, per edge.
std::map<EdgeKey, double> coverage(const std::vector<CongestionLabel>& labels);

/// Mean of the per-edge coverage (0 for no edges).
double city_coverage(const std::map<EdgeKey, double>& per_edge);

struct CcScore {
    CeResult ce;
    std::int64_t n = 0;  // all labeled samples
    std::array<ClassLoss, kNumClasses> by_class;
    std::vector<CoverageBin> by_coverage;
    double coverage = 0.0;
};

/// Scores one city: joins predictions to labels by (day, u, v, t). Masked
/// labels need no prediction; a missing prediction for a classified label is
/// a ValidationError, as is a non-finite logit.
CcScore score_cc(const std::vector<CongestionLabel>& labels, const std::vector<CcPrediction>& preds,
                 const ClassWeights& w, double bin_width = 0.05);

nlohmann::ordered_json to_json(const CcScore& s, const ClassWeights& w);

}  // namespace t4c::metrics
