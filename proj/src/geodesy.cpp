#include "mia/geodesy.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "mia/errors.hpp"

namespace mia {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

// WGS-84
constexpr double kA = 6378137.0;
constexpr double kF = 1.0 / 298.257223563;
constexpr double kK0 = 0.9996;
constexpr double kFalseEasting = 500000.0;
constexpr double kFalseNorthingSouth = 10000000.0;

struct KruegerSeries {
  double e;      // first eccentricity
  double scale;  // k0 * rectifying radius
  std::array<double, 6> alpha;
  std::array<double, 6> beta;
};

KruegerSeries make_series() {
  const double n = kF / (2.0 - kF);
  const double n2 = n * n, n3 = n2 * n, n4 = n3 * n, n5 = n4 * n, n6 = n5 * n;
  KruegerSeries s{};
  s.e = std::sqrt(kF * (2.0 - kF));
  s.scale = kK0 * kA / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
  s.alpha = {
      n / 2 - 2 * n2 / 3 + 5 * n3 / 16 + 41 * n4 / 180 - 127 * n5 / 288 +
          7891 * n6 / 37800,
      13 * n2 / 48 - 3 * n3 / 5 + 557 * n4 / 1440 + 281 * n5 / 630 -
          1983433 * n6 / 1935360,
      61 * n3 / 240 - 103 * n4 / 140 + 15061 * n5 / 26880 +
          167603 * n6 / 181440,
      49561 * n4 / 161280 - 179 * n5 / 168 + 6601661 * n6 / 7257600,
      34729 * n5 / 80640 - 3418889 * n6 / 1995840,
      212378941 * n6 / 319334400,
  };
  s.beta = {
      n / 2 - 2 * n2 / 3 + 37 * n3 / 96 - n4 / 360 - 81 * n5 / 512 +
          96199 * n6 / 604800,
      n2 / 48 + n3 / 15 - 437 * n4 / 1440 + 46 * n5 / 105 -
          1118711 * n6 / 3870720,
      17 * n3 / 480 - 37 * n4 / 840 - 209 * n5 / 4480 + 5569 * n6 / 90720,
      4397 * n4 / 161280 - 11 * n5 / 504 - 830251 * n6 / 7257600,
      4583 * n5 / 161280 - 108847 * n6 / 3991680,
      20648693 * n6 / 638668800,
  };
  return s;
}

const KruegerSeries& series() {
  static const KruegerSeries s = make_series();
  return s;
}

// tan(conformal latitude) from tan(geodetic latitude).
double conformal_tan(double tau, double e) {
  const double sigma = std::sinh(e * std::atanh(e * tau / std::hypot(1.0, tau)));
  return tau * std::hypot(1.0, sigma) - sigma * std::hypot(1.0, tau);
}

// Inverse of conformal_tan by Newton iteration.
double geodetic_tan(double taup, double e) {
  const double e2m = 1.0 - e * e;
  double tau = taup / e2m;
  for (int i = 0; i < 8; ++i) {
    const double tau1 = std::hypot(1.0, tau);
    const double dtau = (taup - conformal_tan(tau, e)) * (1.0 + e2m * tau * tau) /
                        (e2m * tau1 * std::hypot(1.0, conformal_tan(tau, e)));
    tau += dtau;
    if (std::abs(dtau) < 1e-15 * std::max(1.0, std::abs(tau))) break;
  }
  return tau;
}

}  // namespace

double normalize_lon(double lon) {
  double r = std::fmod(lon + 180.0, 360.0);
  if (r < 0) r += 360.0;
  r -= 180.0;
  // fmod of a value a hair below 360 can round back up to exactly 180.
  return r >= 180.0 ? -180.0 : r;
}

double normalize_heading(double degrees) {
  double r = std::fmod(degrees, 360.0);
  if (r < 0) r += 360.0;
  return r >= 360.0 ? 0.0 : r;
}

GeoPoint::GeoPoint(double lat, double lon) {
  if (!std::isfinite(lat) || !std::isfinite(lon) || lat < -90.0 || lat > 90.0) {
    throw DomainError("invalid WGS-84 coordinate (" + std::to_string(lat) + ", " +
                      std::to_string(lon) + ")");
  }
  lat_ = lat;
  lon_ = normalize_lon(lon);
}

Heading::Heading(double degrees) {
  if (!std::isfinite(degrees)) throw DomainError("non-finite heading");
  deg_ = normalize_heading(degrees);
}

bool TileId::valid() const {
  if (zoom < 0 || zoom > 30) return false;
  const std::int64_t n = std::int64_t{1} << zoom;
  return x >= 0 && x < n && y >= 0 && y < n;
}

TileId wgs84_to_tile(const GeoPoint& p, int zoom) {
  if (zoom < 0 || zoom > 30) throw DomainError("zoom out of range");
  if (std::abs(p.lat()) > kMercatorMaxLat) {
    throw DomainError("latitude " + std::to_string(p.lat()) +
                      " outside Web-Mercator range");
  }
  const std::int64_t n = std::int64_t{1} << zoom;
  const double scale = static_cast<double>(n);
  const double fx = (p.lon() + 180.0) / 360.0 * scale;
  const double lat = p.lat() * kDeg;
  const double fy = (1.0 - std::asinh(std::tan(lat)) / kPi) / 2.0 * scale;
  auto clamp = [n](double v) {
    auto i = static_cast<std::int64_t>(std::floor(v));
    return std::min<std::int64_t>(std::max<std::int64_t>(i, 0), n - 1);
  };
  return TileId{zoom, clamp(fx), clamp(fy)};
}

namespace {
double tile_lat(std::int64_t y, int zoom) {
  const double scale = std::ldexp(1.0, zoom);
  return std::atan(std::sinh(kPi * (1.0 - 2.0 * static_cast<double>(y) / scale))) /
         kDeg;
}
double tile_lon(std::int64_t x, int zoom) {
  return static_cast<double>(x) / std::ldexp(1.0, zoom) * 360.0 - 180.0;
}
}  // namespace

TileBounds tile_bounds(const TileId& t) {
  if (!t.valid()) throw DomainError("invalid tile id");
  return TileBounds{tile_lat(t.y, t.zoom), tile_lon(t.x, t.zoom),
                    tile_lat(t.y + 1, t.zoom), tile_lon(t.x + 1, t.zoom)};
}

int utm_zone_for(double lon) {
  const int zone = static_cast<int>(std::floor((normalize_lon(lon) + 180.0) / 6.0)) + 1;
  return std::min(std::max(zone, 1), 60);
}

double utm_central_meridian(int zone) { return -183.0 + 6.0 * zone; }

UtmPoint wgs84_to_utm(const GeoPoint& p, std::optional<int> zone) {
  if (std::abs(p.lat()) > kUtmMaxAbsLat) {
    throw DomainError("latitude " + std::to_string(p.lat()) + " outside UTM range");
  }
  const int z = zone.value_or(utm_zone_for(p.lon()));
  if (z < 1 || z > 60) throw DomainError("UTM zone out of range");
  const auto& s = series();

  const double lam = normalize_lon(p.lon() - utm_central_meridian(z)) * kDeg;
  const double phi = p.lat() * kDeg;
  const double taup = conformal_tan(std::tan(phi), s.e);
  const double xip = std::atan2(taup, std::cos(lam));
  const double etap = std::asinh(std::sin(lam) / std::hypot(taup, std::cos(lam)));

  double xi = xip, eta = etap;
  for (int j = 1; j <= 6; ++j) {
    const double a = s.alpha[j - 1];
    xi += a * std::sin(2 * j * xip) * std::cosh(2 * j * etap);
    eta += a * std::cos(2 * j * xip) * std::sinh(2 * j * etap);
  }

  UtmPoint u;
  u.zone = z;
  u.hemisphere = p.lat() < 0 ? Hemisphere::kSouth : Hemisphere::kNorth;
  u.easting = kFalseEasting + s.scale * eta;
  u.northing = s.scale * xi +
               (u.hemisphere == Hemisphere::kSouth ? kFalseNorthingSouth : 0.0);
  return u;
}

GeoPoint utm_to_wgs84(const UtmPoint& u) {
  if (u.zone < 1 || u.zone > 60) throw DomainError("UTM zone out of range");
  const auto& s = series();
  const double north =
      u.northing - (u.hemisphere == Hemisphere::kSouth ? kFalseNorthingSouth : 0.0);
  const double xi = north / s.scale;
  const double eta = (u.easting - kFalseEasting) / s.scale;

  double xip = xi, etap = eta;
  for (int j = 1; j <= 6; ++j) {
    const double b = s.beta[j - 1];
    xip -= b * std::sin(2 * j * xi) * std::cosh(2 * j * eta);
    etap -= b * std::cos(2 * j * xi) * std::sinh(2 * j * eta);
  }
  const double taup = std::sin(xip) / std::hypot(std::sinh(etap), std::cos(xip));
  const double lam = std::atan2(std::sinh(etap), std::cos(xip));
  const double phi = std::atan(geodetic_tan(taup, s.e));
  return GeoPoint(phi / kDeg, utm_central_meridian(u.zone) + lam / kDeg);
}

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  const double dlat = (b.lat() - a.lat()) * kDeg;
  const double dlon = (b.lon() - a.lon()) * kDeg;
  const double sa = std::sin(dlat / 2.0);
  const double so = std::sin(dlon / 2.0);
  const double h = sa * sa + std::cos(a.lat() * kDeg) * std::cos(b.lat() * kDeg) * so * so;
  return 2.0 * kMeanEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

double bearing_diff_deg(Heading a, Heading b) {
  const double d = std::abs(a.degrees() - b.degrees());
  return d > 180.0 ? 360.0 - d : d;
}

}  // namespace mia
