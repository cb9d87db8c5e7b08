#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "t4c/metrics.hpp"
#include "t4c/types.hpp"

namespace t4c::baseline {

constexpr int kHours = 24;

using ClassCounts = std::array<std::int64_t, kNumClasses>;
using Probabilities = std::array<double, kNumClasses>;

std::int64_t total(const ClassCounts& c);

/// Class counts of classified bins per (edge, hour of day), with city-level
/// aggregates for fallback.
struct HistoricDistribution {
    double alpha = 1.0;
    std::map<EdgeKey, std::array<ClassCounts, kHours>> edges;
    std::array<ClassCounts, kHours> city_hour{};
    ClassCounts city_global{};

    /// Empirical frequencies, nullopt when the edge has no classified bin in
    /// that hour.
    std::optional<Probabilities> empirical(const EdgeKey& e, int hour) const;

    nlohmann::ordered_json to_json() const;
    static HistoricDistribution from_json(const nlohmann::ordered_json& j);
};

HistoricDistribution fit_historic(const std::vector<CongestionLabel>& train_labels, double alpha = 1.0);

void save_historic(const HistoricDistribution& d, const std::filesystem::path& path);
HistoricDistribution load_historic(const std::filesystem::path& path);

enum class Fallback { kEdgeHour, kCityHour, kCityGlobal, kUniform };

const char* to_string(Fallback f);

struct HistoricPrediction {
    Logits logits{};
    Fallback level = Fallback::kEdgeHour;
};

/// Logits are log((n_c + alpha) / (n + 3 alpha)) from the first non-empty
/// level of edge-hour, city-hour, city-global; uniform when all are empty.
HistoricPrediction predict_historic(const HistoricDistribution& d, const EdgeKey& e, int t);

/// Predictions for every edge and bin of one day.
std::vector<CcPrediction> predict_day(const HistoricDistribution& d, const std::vector<EdgeKey>& edges,
                                      const std::string& day);

struct Reweighted {
    Probabilities p{};
    double b = 0.0;  // normalizer: p_c = b * exp(logit_c * w_c)
};

/// p_c proportional to exp(logit_c * w_c), evaluated with max subtraction.
/// Throws std::invalid_argument for non-finite logits.
Reweighted reweight_logits(const Logits& logits, const metrics::ClassWeights& w);

/// Pearson correlation, nullopt when either side has zero variance or fewer
/// than two points.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct ComparePair {
    NodeId u = 0;
    NodeId v = 0;
    std::string day;
    int t = 0;
    Probabilities historic{};
    Probabilities predicted{};
};

struct Comparison {
    std::vector<ComparePair> pairs;
    std::array<std::optional<double>, kNumClasses> pearson;
    std::size_t skipped_no_history = 0;
};

/// Pairs re-weighted predictions with the historic empirical distribution of
/// the same edge and hour, for hours in [hour_from, hour_to).
Comparison compare_to_historic(const std::vector<CcPrediction>& preds, const HistoricDistribution& d,
                               const metrics::ClassWeights& w, int hour_from = 0, int hour_to = kHours);

nlohmann::ordered_json to_json(const Comparison& c);
void write_pairs_csv(const Comparison& c, const std::filesystem::path& path);
/// 2D histogram of (historic, predicted) per class on a bins x bins grid.
void write_density_csv(const Comparison& c, const std::filesystem::path& path, int bins = 20);

struct DistributionReport {
    std::array<std::int64_t, kNumClasses + 1> counts{};  // classes 0..3
    std::array<double, kNumClasses + 1> fractions{};     // over all labels
    std::array<double, kNumClasses> classified_fractions{};  // classes 1..3 over classified labels
    double coverage = 0.0;
    std::vector<std::size_t> coverage_histogram;  // edges per coverage bin
    double bin_width = 0.05;
};

DistributionReport label_distribution_report(const std::vector<CongestionLabel>& labels, double bin_width = 0.05);

nlohmann::ordered_json to_json(const DistributionReport& r);
void write_coverage_csv(const DistributionReport& r, const std::filesystem::path& path);

}  // namespace t4c::baseline
