#include "t4c/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "t4c/errors.hpp"
#include "t4c/geo.hpp"
#include "t4c/io.hpp"
#include "t4c/rng.hpp"

namespace t4c::heatmap {

using io::Json;

int heading_channel(double bearing_deg) {
    double b = std::fmod(bearing_deg, 360.0);
    if (b < 0.0) b += 360.0;
    return std::min(3, static_cast<int>(b / 90.0));
}

VolumeHeatmap::VolumeHeatmap(BoundingBox bbox) : bbox_(bbox) {
    if (!(bbox.lat_max > bbox.lat_min) || !(bbox.lon_max > bbox.lon_min)) {
        throw std::invalid_argument("heatmap bounding box must have positive extent");
    }
}

std::optional<Cell> VolumeHeatmap::cell_of(LatLon p) const {
    const double fr = (bbox_.lat_max - p.lat) / (bbox_.lat_max - bbox_.lat_min);
    const double fc = (p.lon - bbox_.lon_min) / (bbox_.lon_max - bbox_.lon_min);
    if (!(fr >= 0.0 && fr < 1.0 && fc >= 0.0 && fc < 1.0)) return std::nullopt;
    return Cell{std::min(kRows - 1, static_cast<int>(fr * kRows)), std::min(kCols - 1, static_cast<int>(fc * kCols))};
}

std::vector<std::size_t> sample_day_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (k >= n) return idx;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + uniform_below(rng, n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

VolumeHeatmap build_heatmap(const std::vector<DailyVolumes>& days, const BoundingBox& bbox,
                            std::size_t sample_days, std::uint64_t seed) {
    if (days.empty()) throw std::invalid_argument("build_heatmap needs at least one day");
    if (sample_days == 0) throw std::invalid_argument("build_heatmap needs sample_days >= 1");
    const auto chosen = sample_day_indices(days.size(), sample_days, seed);
    VolumeHeatmap hm(bbox);
    auto& data = hm.data();
    for (std::size_t d : chosen) {
        for (const auto& [index, value] : days[d].cells) {
            if (index >= kCells) throw ValidationError(fmt::format("heatmap cell index {} out of range", index));
            data[index] += value;
        }
    }
    const double n = static_cast<double>(chosen.size());
    for (double& v : data) v /= n;
    return hm;
}

EdgeVolume edge_max_volume(const VolumeHeatmap& hm, const Edge& edge, double step_m) {
    EdgeVolume out;
    const auto& g = edge.geometry;
    auto visit = [&](LatLon p, int channel) {
        const auto cell = hm.cell_of(p);
        if (!cell) {
            out.outside = true;
            return;
        }
        out.max_volume = std::max(out.max_volume, hm.at(cell->row, cell->col, channel));
        if (!edge.oneway) {
            out.max_volume = std::max(out.max_volume, hm.at(cell->row, cell->col, (channel + 2) % kChannels));
        }
    };
    for (std::size_t i = 1; i < g.size(); ++i) {
        const double seg = geo::haversine_m(g[i - 1], g[i]);
        const int channel = heading_channel(geo::bearing_deg(g[i - 1], g[i]));
        const int steps = std::max(1, static_cast<int>(std::ceil(seg / step_m)));
        for (int s = 0; s <= steps; ++s) visit(geo::lerp(g[i - 1], g[i], double(s) / steps), channel);
    }
    return out;
}

namespace {

Json bbox_json(const BoundingBox& b) {
    Json j;
    j["lat_min"] = b.lat_min;
    j["lat_max"] = b.lat_max;
    j["lon_min"] = b.lon_min;
    j["lon_max"] = b.lon_max;
    return j;
}

Json sparse_cells(const std::vector<std::pair<std::uint32_t, double>>& cells) {
    Json out = Json::array();
    for (const auto& [index, value] : cells) {
        const int ch = static_cast<int>(index % kChannels);
        const int col = static_cast<int>((index / kChannels) % kCols);
        const int row = static_cast<int>(index / kChannels / kCols);
        out.push_back(Json::array({row, col, ch, value}));
    }
    return out;
}

std::vector<std::pair<std::uint32_t, double>> parse_cells(const Json& cells) {
    if (!cells.is_array()) throw ValidationError("'cells' must be a list of [row, col, channel, value]");
    std::vector<std::pair<std::uint32_t, double>> out;
    for (const auto& c : cells) {
        if (!c.is_array() || c.size() != 4 || !c[3].is_number()) {
            throw ValidationError("'cells' entries must be [row, col, channel, value]");
        }
        const int r = c[0].get<int>();
        const int col = c[1].get<int>();
        const int ch = c[2].get<int>();
        const double v = c[3].get<double>();
        if (r < 0 || r >= kRows || col < 0 || col >= kCols || ch < 0 || ch >= kChannels) {
            throw ValidationError(fmt::format("heatmap cell ({}, {}, {}) outside 495x436x4", r, col, ch));
        }
        if (!(v >= 0.0)) throw ValidationError("heatmap values must be >= 0");
        out.emplace_back(static_cast<std::uint32_t>(VolumeHeatmap::index(r, col, ch)), v);
    }
    return out;
}

}  // namespace

VolumeHeatmap load_heatmap(const std::filesystem::path& path) {
    const Json j = io::read_json(path);
    try {
        if (j.at("rows").get<int>() != kRows || j.at("cols").get<int>() != kCols ||
            j.at("channels").get<int>() != kChannels) {
            throw ValidationError(fmt::format("{}: heatmap must be {}x{}x{}", path.string(), kRows, kCols, kChannels));
        }
        const Json& b = j.at("bbox");
        VolumeHeatmap hm(BoundingBox{b.at("lat_min").get<double>(), b.at("lat_max").get<double>(),
                                     b.at("lon_min").get<double>(), b.at("lon_max").get<double>()});
        for (const auto& [index, value] : parse_cells(j.at("cells"))) hm.data()[index] = value;
        return hm;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    } catch (const std::invalid_argument& e) {
        throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

void save_heatmap(const VolumeHeatmap& hm, const std::filesystem::path& path) {
    std::vector<std::pair<std::uint32_t, double>> cells;
    for (std::size_t i = 0; i < hm.data().size(); ++i) {
        if (hm.data()[i] != 0.0) cells.emplace_back(static_cast<std::uint32_t>(i), hm.data()[i]);
    }
    Json j;
    j["rows"] = kRows;
    j["cols"] = kCols;
    j["channels"] = kChannels;
    j["bbox"] = bbox_json(hm.bbox());
    j["cells"] = sparse_cells(cells);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    io::write_jsonl(path, {j});
}

std::vector<DailyVolumes> load_daily_volumes(const std::filesystem::path& path) {
    std::vector<DailyVolumes> out;
    io::for_each_record(path, [&](const Json& j, std::size_t) {
        if (!j.contains("day") || !j["day"].is_string()) throw ValidationError("missing field 'day'");
        if (!j.contains("cells")) throw ValidationError("missing field 'cells'");
        out.push_back({j["day"].get<std::string>(), parse_cells(j["cells"])});
    });
    return out;
}

void save_daily_volumes(const std::vector<DailyVolumes>& days, const std::filesystem::path& path) {
    std::vector<Json> rows;
    for (const auto& d : days) {
        Json j;
        j["day"] = d.day;
        j["cells"] = sparse_cells(d.cells);
        rows.push_back(std::move(j));
    }
    io::write_jsonl(path, rows);
}

}  // namespace t4c::heatmap
