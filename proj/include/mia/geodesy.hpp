#pragma once

#include <cstdint>
#include <optional>
#include <utility>

namespace mia {

// WGS-84 latitude/longitude in degrees. Longitude is normalized to
// [-180, 180) on construction so equal positions compare equal.
class GeoPoint {
 public:
  GeoPoint() = default;
  // Throws DomainError if lat is outside [-90, 90] or either value is not
  // finite.
  GeoPoint(double lat, double lon);

  double lat() const { return lat_; }
  double lon() const { return lon_; }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;

 private:
  double lat_ = 0.0;
  double lon_ = 0.0;
};

struct TileId {
  int zoom = 0;
  std::int64_t x = 0;
  std::int64_t y = 0;

  bool valid() const;
  friend auto operator<=>(const TileId&, const TileId&) = default;
};

enum class Hemisphere { kNorth, kSouth };

struct UtmPoint {
  double easting = 0.0;
  double northing = 0.0;
  int zone = 1;
  Hemisphere hemisphere = Hemisphere::kNorth;
};

// Compass heading, degrees clockwise from true north, normalized to [0, 360).
class Heading {
 public:
  Heading() = default;
  explicit Heading(double degrees);

  double degrees() const { return deg_; }
  friend bool operator==(const Heading&, const Heading&) = default;

 private:
  double deg_ = 0.0;
};

inline constexpr int kCandidateTileZoom = 14;
inline constexpr double kMercatorMaxLat = 85.0511287798066;
inline constexpr double kUtmMaxAbsLat = 84.0;
inline constexpr double kMeanEarthRadiusM = 6371008.8;

double normalize_lon(double lon);
double normalize_heading(double degrees);

// Slippy-map tile containing p. Throws DomainError outside the Web-Mercator
// latitude range.
TileId wgs84_to_tile(const GeoPoint& p, int zoom);

// North-west and south-east corners of a tile. The east edge of the last
// column is reported as +180 (not normalized) so the box stays well formed.
struct TileBounds {
  double north = 0.0;
  double west = 0.0;
  double south = 0.0;
  double east = 0.0;
};
TileBounds tile_bounds(const TileId& t);

// Zone whose 6-degree band contains lon.
int utm_zone_for(double lon);
double utm_central_meridian(int zone);

// Transverse Mercator (Krueger series, 6th order in n) on WGS-84. When
// zone is given the point is projected into that zone even if it lies
// outside the zone's band.
UtmPoint wgs84_to_utm(const GeoPoint& p, std::optional<int> zone = std::nullopt);
GeoPoint utm_to_wgs84(const UtmPoint& u);

double haversine_m(const GeoPoint& a, const GeoPoint& b);

// Smallest absolute angle between two headings, in [0, 180].
double bearing_diff_deg(Heading a, Heading b);

}  // namespace mia
