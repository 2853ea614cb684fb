#pragma once

// Coordinates and the local planar frame used for every distance computation.
// River-scale maps (< 50 km) tolerate an equirectangular projection, so there is
// no geodesic machinery here.

#include <cmath>
#include <numbers>
#include <span>

namespace riverhelm {

/// Mean Earth radius in meters.
inline constexpr double kEarthRadiusM = 6371008.8;

struct GeoCoordinate {
  double lat = 0.0;    // degrees, WGS-84
  double lon = 0.0;    // degrees
  double depth = 0.0;  // meters below surface

  friend bool operator==(const GeoCoordinate&, const GeoCoordinate&) = default;
};

/// True when lat/lon/depth are finite and inside their legal ranges.
inline bool is_valid(const GeoCoordinate& c) {
  return std::isfinite(c.lat) && std::isfinite(c.lon) && std::isfinite(c.depth) && c.lat >= -90.0 &&
         c.lat <= 90.0 && c.lon >= -180.0 && c.lon <= 180.0 && c.depth >= 0.0;
}

/// East/north pair; used both for planar positions (m) and velocities (m/s).
struct Vec2 {
  double east = 0.0;
  double north = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.east + b.east, a.north + b.north}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.east - b.east, a.north - b.north}; }
  friend Vec2 operator*(double s, Vec2 v) { return {s * v.east, s * v.north}; }
};

inline double dot(Vec2 a, Vec2 b) { return a.east * b.east + a.north * b.north; }
inline double norm(Vec2 v) { return std::hypot(v.east, v.north); }

/// Equirectangular projection about a fixed origin.
class LocalFrame {
 public:
  explicit LocalFrame(GeoCoordinate origin)
      : origin_(origin), cos_lat_(std::cos(origin.lat * kDegToRad)) {}

  /// Frame centred on the arithmetic mean of the given points.
  static LocalFrame centroid_of(std::span<const GeoCoordinate> points) {
    GeoCoordinate c;
    for (const auto& p : points) {
      c.lat += p.lat;
      c.lon += p.lon;
    }
    if (!points.empty()) {
      c.lat /= static_cast<double>(points.size());
      c.lon /= static_cast<double>(points.size());
    }
    return LocalFrame(c);
  }

  Vec2 to_local(const GeoCoordinate& p) const {
    return {kEarthRadiusM * (p.lon - origin_.lon) * kDegToRad * cos_lat_,
            kEarthRadiusM * (p.lat - origin_.lat) * kDegToRad};
  }

  GeoCoordinate to_geo(Vec2 v, double depth = 0.0) const {
    return {origin_.lat + v.north / kEarthRadiusM / kDegToRad,
            origin_.lon + v.east / (kEarthRadiusM * cos_lat_) / kDegToRad, depth};
  }

  const GeoCoordinate& origin() const { return origin_; }

 private:
  static constexpr double kDegToRad = std::numbers::pi / 180.0;
  GeoCoordinate origin_;
  double cos_lat_;
};

/// Planar distance between two points in a frame centred on their midpoint.
inline double planar_distance_m(const GeoCoordinate& a, const GeoCoordinate& b) {
  const GeoCoordinate pts[] = {a, b};
  const auto frame = LocalFrame::centroid_of(pts);
  return norm(frame.to_local(a) - frame.to_local(b));
}

/// Moves `p` by a planar displacement (meters east/north) using the frame at `p`.
inline GeoCoordinate displace(const GeoCoordinate& p, Vec2 delta_m) {
  return LocalFrame(p).to_geo(delta_m, p.depth);
}

}  // namespace riverhelm
