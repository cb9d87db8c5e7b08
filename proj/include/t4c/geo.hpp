#pragma once

#include <span>
#include <vector>

#include "t4c/types.hpp"

namespace t4c::geo {

inline constexpr double kEarthRadiusM = 6371000.0;

/// Great-circle distance in meters (haversine).
double haversine_m(LatLon a, LatLon b);

/// Initial bearing from a to b in degrees, [0, 360).
double bearing_deg(LatLon a, LatLon b);

/// Point reached from `origin` after `distance_m` along `bearing` (degrees).
LatLon destination(LatLon origin, double bearing, double distance_m);

/// Linear interpolation in lat/lon; adequate for segments of a few km.
LatLon lerp(LatLon a, LatLon b, double f);

double polyline_length_m(std::span<const LatLon> line);

struct Projection {
    LatLon point;               // closest point on the polyline
    double distance_m = 0.0;    // haversine distance query -> point
    double along_m = 0.0;       // polyline distance from start to point
    std::size_t segment = 0;    // index of the segment holding the point
};

/// Orthogonal projection of `q` onto a polyline, computed in a local
/// equirectangular frame centered on `q`.
Projection project(LatLon q, std::span<const LatLon> line);

/// The point at `along_m` meters from the start of the polyline, clamped.
LatLon point_along(std::span<const LatLon> line, double along_m);

/// Cut a polyline at `along_m`. The cut point ends the first part and starts
/// the second; each part has at least two points.
std::pair<std::vector<LatLon>, std::vector<LatLon>> cut(std::span<const LatLon> line,
                                                        double along_m);

}  // namespace t4c::geo
