#include "t4c/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace t4c::geo {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

double haversine_m(LatLon a, LatLon b) {
    const double phi1 = a.lat * kDeg;
    const double phi2 = b.lat * kDeg;
    const double dphi = (b.lat - a.lat) * kDeg;
    const double dlambda = (b.lon - a.lon) * kDeg;
    const double s = std::sin(dphi / 2.0);
    const double t = std::sin(dlambda / 2.0);
    const double h = s * s + std::cos(phi1) * std::cos(phi2) * t * t;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double bearing_deg(LatLon a, LatLon b) {
    const double phi1 = a.lat * kDeg;
    const double phi2 = b.lat * kDeg;
    const double dlambda = (b.lon - a.lon) * kDeg;
    const double y = std::sin(dlambda) * std::cos(phi2);
    const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlambda);
    double deg = std::atan2(y, x) / kDeg;
    if (deg < 0.0) deg += 360.0;
    if (deg >= 360.0) deg -= 360.0;
    return deg;
}

LatLon destination(LatLon origin, double bearing, double distance_m) {
    const double delta = distance_m / kEarthRadiusM;
    const double theta = bearing * kDeg;
    const double phi1 = origin.lat * kDeg;
    const double lambda1 = origin.lon * kDeg;
    const double phi2 = std::asin(std::sin(phi1) * std::cos(delta) +
                                  std::cos(phi1) * std::sin(delta) * std::cos(theta));
    const double lambda2 =
        lambda1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                             std::cos(delta) - std::sin(phi1) * std::sin(phi2));
    return {phi2 / kDeg, lambda2 / kDeg};
}

LatLon lerp(LatLon a, LatLon b, double f) {
    return {a.lat + (b.lat - a.lat) * f, a.lon + (b.lon - a.lon) * f};
}

double polyline_length_m(std::span<const LatLon> line) {
    double total = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) total += haversine_m(line[i - 1], line[i]);
    return total;
}

Projection project(LatLon q, std::span<const LatLon> line) {
    Projection best;
    best.distance_m = std::numeric_limits<double>::infinity();
    if (line.empty()) return best;
    if (line.size() == 1) {
        best.point = line[0];
        best.distance_m = haversine_m(q, line[0]);
        return best;
    }

    const double kx = std::cos(q.lat * kDeg) * kDeg * kEarthRadiusM;
    const double ky = kDeg * kEarthRadiusM;
    auto to_xy = [&](LatLon p) { return std::pair{(p.lon - q.lon) * kx, (p.lat - q.lat) * ky}; };

    double along_before = 0.0;
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
        const auto [ax, ay] = to_xy(line[i]);
        const auto [bx, by] = to_xy(line[i + 1]);
        const double dx = bx - ax;
        const double dy = by - ay;
        const double len2 = dx * dx + dy * dy;
        double f = len2 > 0.0 ? -(ax * dx + ay * dy) / len2 : 0.0;
        f = std::clamp(f, 0.0, 1.0);
        const LatLon p = lerp(line[i], line[i + 1], f);
        const double d = haversine_m(q, p);
        if (d < best.distance_m) {
            best.point = p;
            best.distance_m = d;
            best.segment = i;
            best.along_m = along_before + haversine_m(line[i], p);
        }
        along_before += haversine_m(line[i], line[i + 1]);
    }
    return best;
}

LatLon point_along(std::span<const LatLon> line, double along_m) {
    if (line.empty()) return {};
    if (along_m <= 0.0) return line.front();
    double walked = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) {
        const double seg = haversine_m(line[i - 1], line[i]);
        if (walked + seg >= along_m && seg > 0.0) {
            return lerp(line[i - 1], line[i], (along_m - walked) / seg);
        }
        walked += seg;
    }
    return line.back();
}

std::pair<std::vector<LatLon>, std::vector<LatLon>> cut(std::span<const LatLon> line,
                                                        double along_m) {
    std::vector<LatLon> head;
    std::vector<LatLon> tail;
    if (line.size() < 2) return {head, tail};

    const LatLon at = point_along(line, along_m);
    double walked = 0.0;
    std::size_t i = 1;
    head.push_back(line[0]);
    for (; i < line.size(); ++i) {
        const double seg = haversine_m(line[i - 1], line[i]);
        if (walked + seg >= along_m) break;
        walked += seg;
        head.push_back(line[i]);
    }
    head.push_back(at);
    tail.push_back(at);
    for (; i < line.size(); ++i) tail.push_back(line[i]);
    if (tail.size() < 2) tail.push_back(line.back());
    return {head, tail};
}

}  // namespace t4c::geo
