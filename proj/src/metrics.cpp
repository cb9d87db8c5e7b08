#include "t4c/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include <fmt/format.h>

#include "t4c/errors.hpp"
#include "t4c/io.hpp"

namespace t4c::metrics {

using io::Json;

Rational ClassWeights::exact(int cls) const {
    const std::int64_t n = counts.at(cls - 1);
    if (n <= 0) throw std::invalid_argument("exact weights need positive class counts");
    return Rational(total, kNumClasses * n);
}

ClassWeights ClassWeights::unit() { return ClassWeights{}; }

Json ClassWeights::to_json() const {
    Json j;
    j["weights"] = w;
    j["counts"] = counts;
    j["total"] = total;
    if (total > 0) {
        Json ex = Json::array();
        for (int c = 1; c <= kNumClasses; ++c) {
            const Rational r = exact(c);
            ex.push_back(fmt::format("{}/{}", r.numerator(), r.denominator()));
        }
        j["exact"] = std::move(ex);
    }
    return j;
}

ClassWeights ClassWeights::from_json(const Json& j) {
    ClassWeights out;
    try {
        const Json& w = j.at("weights");
        if (!w.is_array() || w.size() != kNumClasses) throw ValidationError("'weights' must hold 3 numbers");
        for (int c = 0; c < kNumClasses; ++c) {
            out.w[c] = w[c].get<double>();
            if (!(out.w[c] > 0.0) || !std::isfinite(out.w[c])) throw ValidationError("class weights must be > 0");
        }
        if (j.contains("counts")) {
            const Json& n = j.at("counts");
            if (!n.is_array() || n.size() != kNumClasses) throw ValidationError("'counts' must hold 3 integers");
            for (int c = 0; c < kNumClasses; ++c) out.counts[c] = n[c].get<std::int64_t>();
            out.total = j.value("total", out.counts[0] + out.counts[1] + out.counts[2]);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("invalid weights: {}", e.what()));
    }
    return out;
}

ClassWeights compute_class_weights(const std::array<std::int64_t, kNumClasses>& counts) {
    ClassWeights out;
    out.counts = counts;
    out.total = 0;
    for (int c = 0; c < kNumClasses; ++c) {
        if (counts[c] <= 0) {
            throw ValidationError(fmt::format("class {} has no training samples; weights undefined", c + 1));
        }
        out.total += counts[c];
    }
    for (int c = 0; c < kNumClasses; ++c) {
        out.w[c] = static_cast<double>(out.total) / (kNumClasses * static_cast<double>(counts[c]));
    }
    return out;
}

ClassWeights compute_class_weights(const std::vector<CongestionLabel>& training_labels) {
    std::array<std::int64_t, kNumClasses> counts{};
    for (const auto& l : training_labels) {
        if (l.cc > 0) ++counts[l.cc - 1];
    }
    return compute_class_weights(counts);
}

ClassWeights load_weights(const std::filesystem::path& path) {
    try {
        return ClassWeights::from_json(io::read_json(path));
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

void save_weights(const ClassWeights& w, const std::filesystem::path& path) { io::write_json(path, w.to_json()); }

double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

double log_softmax(const Logits& logits, int cls) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double x : logits) s += std::exp(x - m);
    return logits.at(cls - 1) - m - std::log(s);
}

CeResult weighted_masked_ce(std::span<const Logits> logits, std::span<const int> targets, const ClassWeights& w) {
    if (logits.size() != targets.size()) throw std::invalid_argument("logits and targets differ in length");
    CeResult out;
    out.per_sample.assign(targets.size(), 0.0);
    std::vector<double> weights(targets.size(), 0.0);
    for (std::size_t n = 0; n < targets.size(); ++n) {
        const int y = targets[n];
        if (y < 0 || y > kNumClasses) throw std::invalid_argument(fmt::format("target {} outside 0..3", y));
        if (y == 0) continue;
        weights[n] = w.of(y);
        out.per_sample[n] = -w.of(y) * log_softmax(logits[n], y);
    }
    out.k = pairwise_sum(weights);
    if (!(out.k > 0.0)) throw ValidationError("no classified samples");
    out.loss = pairwise_sum(out.per_sample) / out.k;
    return out;
}

double l1_eta(std::span<const double> pred, std::span<const double> labels) {
    if (pred.size() != labels.size()) throw std::invalid_argument("predictions and labels differ in length");
    if (labels.empty()) throw std::invalid_argument("no ETA labels");
    std::vector<double> diff(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) diff[i] = std::abs(pred[i] - labels[i]);
    return pairwise_sum(diff) / static_cast<double>(labels.size());
}

double l1_eta(const std::vector<EtaPrediction>& pred, const std::vector<EtaLabel>& labels) {
    std::map<std::tuple<std::string, std::string, int>, double> by_key;
    for (const auto& p : pred) by_key[{p.day, p.ssid, p.t}] = p.eta_s;
    std::vector<double> a, b;
    a.reserve(labels.size());
    b.reserve(labels.size());
    for (const auto& l : labels) {
        auto it = by_key.find({l.day, l.ssid, l.t});
        if (it == by_key.end()) {
            throw ValidationError(fmt::format("no ETA prediction for super-segment {} at t={}{}", l.ssid, l.t,
                                              l.day.empty() ? "" : " on " + l.day));
        }
        if (!std::isfinite(it->second)) {
            throw ValidationError(fmt::format("non-finite ETA prediction for super-segment {} at t={}", l.ssid, l.t));
        }
        a.push_back(it->second);
        b.push_back(l.eta_s);
    }
    return l1_eta(a, b);
}

double overall_score(std::span<const double> city_losses, bool any_count) {
    if (city_losses.empty()) throw std::invalid_argument("no city losses");
    if (!any_count && city_losses.size() != 3) {
        throw std::invalid_argument(fmt::format("overall score needs 3 cities, got {}", city_losses.size()));
    }
    double s = 0.0;
    for (double x : city_losses) s += x;
    return s / static_cast<double>(city_losses.size());
}

namespace {

double mask_weight_sum(std::span<const int> targets, const ClassWeights& w) {
    std::vector<double> ws;
    ws.reserve(targets.size());
    for (int y : targets) ws.push_back(y > 0 ? w.of(y) : 0.0);
    return pairwise_sum(ws);
}

}  // namespace

std::array<ClassLoss, kNumClasses> loss_by_ground_truth(std::span<const double> per_sample,
                                                        std::span<const int> targets, const ClassWeights& w) {
    if (per_sample.size() != targets.size()) throw std::invalid_argument("losses and targets differ in length");
    const double k = mask_weight_sum(targets, w);
    std::array<std::vector<double>, kNumClasses> parts;
    for (std::size_t n = 0; n < targets.size(); ++n) {
        if (targets[n] > 0) parts[targets[n] - 1].push_back(per_sample[n]);
    }
    std::array<ClassLoss, kNumClasses> out;
    for (int c = 0; c < kNumClasses; ++c) {
        const double s = pairwise_sum(parts[c]);
        out[c].count = static_cast<std::int64_t>(parts[c].size());
        out[c].summed = k > 0.0 ? s / k : 0.0;
        if (!parts[c].empty()) out[c].mean = s / static_cast<double>(parts[c].size());
    }
    return out;
}

std::vector<CoverageBin> loss_by_coverage(std::span<const double> per_sample, std::span<const int> targets,
                                          std::span<const EdgeKey> sample_edges,
                                          const std::map<EdgeKey, double>& edge_coverage, const ClassWeights& w,
                                          double bin_width) {
    if (per_sample.size() != targets.size() || sample_edges.size() != targets.size()) {
        throw std::invalid_argument("losses, targets and edges differ in length");
    }
    if (!(bin_width > 0.0) || bin_width > 1.0) throw std::invalid_argument("bin width must be in (0, 1]");
    const std::size_t nbins = static_cast<std::size_t>(std::ceil(1.0 / bin_width - 1e-9));
    auto bin_of = [&](double cov) {
        if (!(cov >= 0.0 && cov <= 1.0)) throw std::invalid_argument(fmt::format("coverage {} outside [0, 1]", cov));
        return std::min(nbins - 1, static_cast<std::size_t>(std::floor(cov / bin_width + 1e-12)));
    };
    auto coverage_of = [&](const EdgeKey& e) {
        auto it = edge_coverage.find(e);
        return it == edge_coverage.end() ? 0.0 : it->second;
    };

    std::vector<CoverageBin> bins(nbins);
    for (std::size_t b = 0; b < nbins; ++b) {
        bins[b].lo = b * bin_width;
        bins[b].hi = std::min(1.0, (b + 1) * bin_width);
    }
    for (const auto& [e, cov] : edge_coverage) ++bins[bin_of(cov)].edges;

    const double k = mask_weight_sum(targets, w);
    std::vector<std::vector<double>> parts(nbins);
    for (std::size_t n = 0; n < targets.size(); ++n) {
        if (targets[n] == 0) continue;
        parts[bin_of(coverage_of(sample_edges[n]))].push_back(per_sample[n]);
    }
    double running = 0.0;
    for (std::size_t b = 0; b < nbins; ++b) {
        const double s = pairwise_sum(parts[b]);
        bins[b].samples = parts[b].size();
        bins[b].summed = k > 0.0 ? s / k : 0.0;
        if (!parts[b].empty()) bins[b].mean = s / static_cast<double>(parts[b].size());
        running += bins[b].summed;
        bins[b].cumulative = running;
    }
    return bins;
}

std::map<EdgeKey, double> coverage(const std::vector<CongestionLabel>& labels) {
    std::map<EdgeKey, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& l : labels) {
        auto& [classified, all] = counts[l.key()];
        ++all;
        if (l.cc != 0) ++classified;
    }
    std::map<EdgeKey, double> out;
    for (const auto& [k, c] : counts) out[k] = static_cast<double>(c.first) / static_cast<double>(c.second);
    return out;
}

double city_coverage(const std::map<EdgeKey, double>& per_edge) {
    if (per_edge.empty()) return 0.0;
    std::vector<double> xs;
    xs.reserve(per_edge.size());
    for (const auto& [_, c] : per_edge) xs.push_back(c);
    return pairwise_sum(xs) / static_cast<double>(xs.size());
}

CcScore score_cc(const std::vector<CongestionLabel>& labels, const std::vector<CcPrediction>& preds,
                 const ClassWeights& w, double bin_width) {
    using Key = std::tuple<std::string, NodeId, NodeId, int>;
    std::map<Key, const Logits*> by_key;
    for (const auto& p : preds) by_key[{p.day, p.u, p.v, p.t}] = &p.logits;

    std::vector<Logits> logits;
    std::vector<int> targets;
    std::vector<EdgeKey> edges;
    logits.reserve(labels.size());
    targets.reserve(labels.size());
    edges.reserve(labels.size());
    for (const auto& l : labels) {
        auto it = by_key.find({l.day, l.u, l.v, l.t});
        if (l.cc == 0) {
            logits.push_back(it == by_key.end() ? Logits{} : *it->second);
        } else {
            if (it == by_key.end()) {
                throw ValidationError(fmt::format("no prediction for edge ({}, {}) at t={}{}", l.u, l.v, l.t,
                                                  l.day.empty() ? "" : " on " + l.day));
            }
            for (double x : *it->second) {
                if (!std::isfinite(x)) {
                    throw ValidationError(
                        fmt::format("non-finite logit for edge ({}, {}) at t={}", l.u, l.v, l.t));
                }
            }
            logits.push_back(*it->second);
        }
        targets.push_back(l.cc);
        edges.push_back(l.key());
    }

    CcScore out;
    out.n = static_cast<std::int64_t>(labels.size());
    out.ce = weighted_masked_ce(logits, targets, w);
    out.by_class = loss_by_ground_truth(out.ce.per_sample, targets, w);
    const auto cov = coverage(labels);
    out.coverage = city_coverage(cov);
    out.by_coverage = loss_by_coverage(out.ce.per_sample, targets, edges, cov, w, bin_width);
    return out;
}

Json to_json(const CcScore& s, const ClassWeights& w) {
    Json j;
    j["loss"] = s.ce.loss;
    j["k"] = s.ce.k;
    j["n"] = s.n;
    j["coverage"] = s.coverage;
    j["weights"] = w.w;
    Json classes = Json::array();
    for (int c = 0; c < kNumClasses; ++c) {
        Json cj;
        cj["class"] = c + 1;
        cj["n"] = s.by_class[c].count;
        cj["summed_loss"] = s.by_class[c].summed;
        cj["mean_loss"] = s.by_class[c].mean ? Json(*s.by_class[c].mean) : Json();
        classes.push_back(std::move(cj));
    }
    j["by_class"] = std::move(classes);
    Json bins = Json::array();
    for (const auto& b : s.by_coverage) {
        Json bj;
        bj["lo"] = b.lo;
        bj["hi"] = b.hi;
        bj["edges"] = b.edges;
        bj["samples"] = b.samples;
        bj["summed_loss"] = b.summed;
        bj["mean_loss"] = b.mean ? Json(*b.mean) : Json();
        bj["cumulative_loss"] = b.cumulative;
        bins.push_back(std::move(bj));
    }
    j["by_coverage"] = std::move(bins);
    return j;
}

}  // namespace t4c::metrics
