#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "t4c/types.hpp"

namespace t4c::heatmap {

inline constexpr int kRows = 495;
inline constexpr int kCols = 436;
inline constexpr int kChannels = 4;  // heading quadrants NE, SE, SW, NW
inline constexpr std::size_t kCells = std::size_t(kRows) * kCols * kChannels;

/// Georeference of the grid. Row 0 is the northern edge, column 0 the western.
struct BoundingBox {
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_min = 0.0;
    double lon_max = 0.0;

    bool operator==(const BoundingBox&) const = default;
};

/// Quadrant channel for a movement bearing: [0,90) NE=0, [90,180) SE=1,
/// [180,270) SW=2, [270,360) NW=3.
int heading_channel(double bearing_deg);

struct Cell {
    int row = 0;
    int col = 0;
};

/// Average daily probe volume per cell and heading quadrant, 495 x 436 x 4.
class VolumeHeatmap {
public:
    VolumeHeatmap() = default;
    explicit VolumeHeatmap(BoundingBox bbox);

    const BoundingBox& bbox() const { return bbox_; }
    double at(int row, int col, int channel) const { return data_[index(row, col, channel)]; }
    double& at(int row, int col, int channel) { return data_[index(row, col, channel)]; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    /// Cell holding `p`, or nullopt outside the bounding box.
    std::optional<Cell> cell_of(LatLon p) const;

    static std::size_t index(int row, int col, int channel) {
        return (std::size_t(row) * kCols + col) * kChannels + channel;
    }

    bool operator==(const VolumeHeatmap&) const = default;

private:
    BoundingBox bbox_;
    std::vector<double> data_ = std::vector<double>(kCells, 0.0);
};

/// One day of volumes in sparse form: (flat index, value) pairs.
struct DailyVolumes {
    std::string day;
    std::vector<std::pair<std::uint32_t, double>> cells;
};

/// Indices of `k` days drawn without replacement from `n` (partial
/// Fisher-Yates on std::mt19937_64 seeded with `seed`), sorted ascending.
/// All indices when k >= n.
std::vector<std::size_t> sample_day_indices(std::size_t n, std::size_t k, std::uint64_t seed);

/// Cellwise mean over `sample_days` seeded-randomly chosen days.
/// Throws std::invalid_argument on empty input.
VolumeHeatmap build_heatmap(const std::vector<DailyVolumes>& days, const BoundingBox& bbox,
                            std::size_t sample_days = 30, std::uint64_t seed = 0);

struct EdgeVolume {
    double max_volume = 0.0;
    bool outside = false;  // some sample fell outside the grid (counted as 0)
};

/// Highest volume among the cells the edge geometry crosses, sampled every
/// `step_m` meters, in the edge's heading channel; non-oneway edges also
/// read the opposite channel.
EdgeVolume edge_max_volume(const VolumeHeatmap& hm, const Edge& edge, double step_m = 10.0);

VolumeHeatmap load_heatmap(const std::filesystem::path& path);
void save_heatmap(const VolumeHeatmap& hm, const std::filesystem::path& path);
std::vector<DailyVolumes> load_daily_volumes(const std::filesystem::path& path);
void save_daily_volumes(const std::vector<DailyVolumes>& days, const std::filesystem::path& path);

}  // namespace t4c::heatmap
