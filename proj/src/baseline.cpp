#include "t4c/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "t4c/errors.hpp"
#include "t4c/io.hpp"

namespace t4c::baseline {

using io::Json;

std::int64_t total(const ClassCounts& c) { return c[0] + c[1] + c[2]; }

namespace {

Probabilities frequencies(const ClassCounts& c) {
    const double n = static_cast<double>(total(c));
    return {c[0] / n, c[1] / n, c[2] / n};
}

Logits smoothed_logits(const ClassCounts& c, double alpha) {
    const double n = static_cast<double>(total(c)) + kNumClasses * alpha;
    Logits out;
    for (int i = 0; i < kNumClasses; ++i) out[i] = std::log((c[i] + alpha) / n);
    return out;
}

void check_hour(int hour) {
    if (hour < 0 || hour >= kHours) throw std::out_of_range(fmt::format("hour {} outside 0..23", hour));
}

}  // namespace

std::optional<Probabilities> HistoricDistribution::empirical(const EdgeKey& e, int hour) const {
    check_hour(hour);
    auto it = edges.find(e);
    if (it == edges.end() || total(it->second[hour]) == 0) return std::nullopt;
    return frequencies(it->second[hour]);
}

Json HistoricDistribution::to_json() const {
    Json j;
    j["alpha"] = alpha;
    j["city_global"] = city_global;
    j["city_hour"] = city_hour;
    Json rows = Json::array();
    for (const auto& [k, hours] : edges) {
        for (int h = 0; h < kHours; ++h) {
            if (total(hours[h]) == 0) continue;
            rows.push_back(Json::array({k.u, k.v, h, hours[h][0], hours[h][1], hours[h][2]}));
        }
    }
    j["edges"] = std::move(rows);
    return j;
}

HistoricDistribution HistoricDistribution::from_json(const Json& j) {
    HistoricDistribution d;
    try {
        d.alpha = j.at("alpha").get<double>();
        if (!(d.alpha > 0.0)) throw ValidationError("smoothing alpha must be > 0");
        for (const auto& row : j.at("edges")) {
            if (!row.is_array() || row.size() != 6) throw ValidationError("edge rows must be [u, v, hour, n1, n2, n3]");
            const int h = row[2].get<int>();
            check_hour(h);
            ClassCounts c{row[3].get<std::int64_t>(), row[4].get<std::int64_t>(), row[5].get<std::int64_t>()};
            if (c[0] < 0 || c[1] < 0 || c[2] < 0) throw ValidationError("class counts must be >= 0");
            auto& hours = d.edges[{row[0].get<NodeId>(), row[1].get<NodeId>()}];
            hours[h] = c;
            for (int i = 0; i < kNumClasses; ++i) {
                d.city_hour[h][i] += c[i];
                d.city_global[i] += c[i];
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("invalid historic distribution: {}", e.what()));
    } catch (const std::out_of_range& e) {
        throw ValidationError(fmt::format("invalid historic distribution: {}", e.what()));
    }
    return d;
}

HistoricDistribution fit_historic(const std::vector<CongestionLabel>& train_labels, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("smoothing alpha must be > 0");
    HistoricDistribution d;
    d.alpha = alpha;
    for (const auto& l : train_labels) {
        auto& hours = d.edges[l.key()];
        if (l.cc == 0) continue;
        const int h = hour_of_bin(l.t);
        ++hours[h][l.cc - 1];
        ++d.city_hour[h][l.cc - 1];
        ++d.city_global[l.cc - 1];
    }
    return d;
}

void save_historic(const HistoricDistribution& d, const std::filesystem::path& path) {
    io::write_json(path, d.to_json());
}

HistoricDistribution load_historic(const std::filesystem::path& path) {
    try {
        return HistoricDistribution::from_json(io::read_json(path));
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

const char* to_string(Fallback f) {
    switch (f) {
        case Fallback::kEdgeHour: return "edge_hour";
        case Fallback::kCityHour: return "city_hour";
        case Fallback::kCityGlobal: return "city_global";
        case Fallback::kUniform: return "uniform";
    }
    return "?";
}

HistoricPrediction predict_historic(const HistoricDistribution& d, const EdgeKey& e, int t) {
    if (t < 0 || t >= kBinsPerDay) throw std::out_of_range(fmt::format("time bin {} outside 0..95", t));
    const int h = hour_of_bin(t);
    auto it = d.edges.find(e);
    if (it != d.edges.end() && total(it->second[h]) > 0) {
        return {smoothed_logits(it->second[h], d.alpha), Fallback::kEdgeHour};
    }
    if (total(d.city_hour[h]) > 0) return {smoothed_logits(d.city_hour[h], d.alpha), Fallback::kCityHour};
    if (total(d.city_global) > 0) return {smoothed_logits(d.city_global, d.alpha), Fallback::kCityGlobal};
    return {smoothed_logits({0, 0, 0}, d.alpha), Fallback::kUniform};
}

std::vector<CcPrediction> predict_day(const HistoricDistribution& d, const std::vector<EdgeKey>& edges,
                                      const std::string& day) {
    std::vector<CcPrediction> out;
    out.reserve(edges.size() * kBinsPerDay);
    for (const auto& e : edges) {
        for (int t = 0; t < kBinsPerDay; ++t) out.push_back({e.u, e.v, t, day, predict_historic(d, e, t).logits});
    }
    return out;
}

Reweighted reweight_logits(const Logits& logits, const metrics::ClassWeights& w) {
    std::array<double, kNumClasses> z;
    for (int c = 0; c < kNumClasses; ++c) {
        if (!std::isfinite(logits[c])) throw std::invalid_argument("reweight_logits needs finite logits");
        z[c] = logits[c] * w.w[c];
    }
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    Reweighted out;
    for (int c = 0; c < kNumClasses; ++c) {
        out.p[c] = std::exp(z[c] - m);
        s += out.p[c];
    }
    for (double& p : out.p) p /= s;
    // b_n relative to the unshifted exponentials.
    out.b = std::exp(-m) / s;
    return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    const std::size_t n = x.size();
    if (n < 2) return std::nullopt;
    const double mx = metrics::pairwise_sum(x) / n;
    const double my = metrics::pairwise_sum(y) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

Comparison compare_to_historic(const std::vector<CcPrediction>& preds, const HistoricDistribution& d,
                               const metrics::ClassWeights& w, int hour_from, int hour_to) {
    if (hour_from < 0 || hour_to > kHours || hour_from >= hour_to) {
        throw std::invalid_argument(fmt::format("hour range [{}, {}) invalid", hour_from, hour_to));
    }
    Comparison out;
    for (const auto& p : preds) {
        const int h = hour_of_bin(p.t);
        if (h < hour_from || h >= hour_to) continue;
        const auto hist = d.empirical(p.key(), h);
        if (!hist) {
            ++out.skipped_no_history;
            continue;
        }
        out.pairs.push_back({p.u, p.v, p.day, p.t, *hist, reweight_logits(p.logits, w).p});
    }
    for (int c = 0; c < kNumClasses; ++c) {
        std::vector<double> a, b;
        a.reserve(out.pairs.size());
        b.reserve(out.pairs.size());
        for (const auto& pr : out.pairs) {
            a.push_back(pr.historic[c]);
            b.push_back(pr.predicted[c]);
        }
        out.pearson[c] = pearson(a, b);
    }
    return out;
}

Json to_json(const Comparison& c) {
    Json j;
    j["pairs"] = c.pairs.size();
    j["skipped_no_history"] = c.skipped_no_history;
    Json r;
    for (int k = 0; k < kNumClasses; ++k) {
        r[std::to_string(k + 1)] = c.pearson[k] ? Json(*c.pearson[k]) : Json("undefined");
    }
    j["pearson"] = std::move(r);
    return j;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
    return f;
}

}  // namespace

void write_pairs_csv(const Comparison& c, const std::filesystem::path& path) {
    auto f = open_out(path);
    f << "u,v,day,t,class,historic,predicted\n";
    for (const auto& p : c.pairs) {
        for (int k = 0; k < kNumClasses; ++k) {
            f << fmt::format("{},{},{},{},{},{:.17g},{:.17g}\n", p.u, p.v, p.day, p.t, k + 1, p.historic[k],
                             p.predicted[k]);
        }
    }
}

void write_density_csv(const Comparison& c, const std::filesystem::path& path, int bins) {
    if (bins <= 0) throw std::invalid_argument("density needs at least one bin");
    std::vector<std::int64_t> grid(static_cast<std::size_t>(kNumClasses) * bins * bins, 0);
    auto bin = [&](double p) { return std::clamp(static_cast<int>(p * bins), 0, bins - 1); };
    for (const auto& p : c.pairs) {
        for (int k = 0; k < kNumClasses; ++k) {
            ++grid[(static_cast<std::size_t>(k) * bins + bin(p.historic[k])) * bins + bin(p.predicted[k])];
        }
    }
    auto f = open_out(path);
    f << "class,historic_lo,historic_hi,predicted_lo,predicted_hi,count\n";
    for (int k = 0; k < kNumClasses; ++k) {
        for (int i = 0; i < bins; ++i) {
            for (int j = 0; j < bins; ++j) {
                f << fmt::format("{},{:g},{:g},{:g},{:g},{}\n", k + 1, double(i) / bins, double(i + 1) / bins,
                                 double(j) / bins, double(j + 1) / bins,
                                 grid[(static_cast<std::size_t>(k) * bins + i) * bins + j]);
            }
        }
    }
}

DistributionReport label_distribution_report(const std::vector<CongestionLabel>& labels, double bin_width) {
    if (!(bin_width > 0.0) || bin_width > 1.0) throw std::invalid_argument("bin width must be in (0, 1]");
    DistributionReport r;
    r.bin_width = bin_width;
    const std::size_t nbins = static_cast<std::size_t>(std::ceil(1.0 / bin_width - 1e-9));
    r.coverage_histogram.assign(nbins, 0);
    for (const auto& l : labels) ++r.counts[l.cc];
    const double all = static_cast<double>(labels.size());
    const double classified = all - static_cast<double>(r.counts[0]);
    for (int c = 0; c <= kNumClasses; ++c) r.fractions[c] = all > 0 ? r.counts[c] / all : 0.0;
    for (int c = 1; c <= kNumClasses; ++c) {
        r.classified_fractions[c - 1] = classified > 0 ? r.counts[c] / classified : 0.0;
    }
    const auto cov = metrics::coverage(labels);
    r.coverage = metrics::city_coverage(cov);
    for (const auto& [_, v] : cov) {
        ++r.coverage_histogram[std::min(nbins - 1, static_cast<std::size_t>(std::floor(v / bin_width + 1e-12)))];
    }
    return r;
}

Json to_json(const DistributionReport& r) {
    Json j;
    j["counts"] = r.counts;
    j["fractions"] = r.fractions;
    j["classified_fractions"] = r.classified_fractions;
    j["coverage"] = r.coverage;
    j["bin_width"] = r.bin_width;
    j["coverage_histogram"] = r.coverage_histogram;
    return j;
}

void write_coverage_csv(const DistributionReport& r, const std::filesystem::path& path) {
    auto f = open_out(path);
    f << "coverage_lo,coverage_hi,edges\n";
    for (std::size_t b = 0; b < r.coverage_histogram.size(); ++b) {
        f << fmt::format("{:g},{:g},{}\n", b * r.bin_width, std::min(1.0, (b + 1) * r.bin_width),
                         r.coverage_histogram[b]);
    }
}

}  // namespace t4c::baseline
