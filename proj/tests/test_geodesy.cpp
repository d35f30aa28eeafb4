#include <cmath>
#include <random>

#include <doctest.h>

#include "mia/errors.hpp"
#include "mia/geodesy.hpp"

using namespace mia;

namespace {

// Reference projections computed with PROJ (via pyproj), +proj=utm +datum=WGS84.
struct UtmCase {
  double lat, lon;
  int zone;
  char hemi;
  double easting, northing;
};

constexpr UtmCase kUtmCases[] = {
    {40.4406, -79.9959, 17, 'N', 585156.96230588, 4477145.419980212},
    {-33.8688, 151.2093, 56, 'S', 334368.633648097, 6250948.345385009},
    {40.0, -75.0, 17, 'N', 1012321.623750125, 4445034.640295607},  // forced out-of-zone
    {60.1699, 24.9384, 35, 'N', 385611.3166863595, 6672118.380325005},
    {0.0, -81.0, 17, 'N', 500000.0, 0.0},
    {83.5, 10.0, 32, 'N', 512637.88883933227, 9272385.451320967},
    {-45.0, 170.5, 59, 'S', 460592.3509830789, 5016928.01240759},
};

}  // namespace

TEST_CASE("GeoPoint normalizes longitude and rejects bad latitude") {
  CHECK(GeoPoint(10, 180).lon() == -180.0);
  CHECK(GeoPoint(10, 190).lon() == doctest::Approx(-170.0));
  CHECK(GeoPoint(10, -180).lon() == -180.0);
  CHECK(GeoPoint(10, 540).lon() == -180.0);
  CHECK(GeoPoint(10, 180) == GeoPoint(10, -180));
  CHECK_THROWS_AS(GeoPoint(90.5, 0), DomainError);
  CHECK_THROWS_AS(GeoPoint(NAN, 0), DomainError);
  CHECK_THROWS_AS(GeoPoint(0, INFINITY), DomainError);
}

TEST_CASE("Heading normalizes to [0, 360)") {
  CHECK(Heading(360).degrees() == 0.0);
  CHECK(Heading(-90).degrees() == 270.0);
  CHECK(Heading(725).degrees() == doctest::Approx(5.0));
  CHECK(Heading(-1e-20).degrees() < 360.0);
}

TEST_CASE("wgs84_to_tile: known tiles") {
  CHECK(wgs84_to_tile(GeoPoint(0, 0), 14) == TileId{14, 8192, 8192});
  CHECK(wgs84_to_tile(GeoPoint(0, -180), 14) == TileId{14, 0, 8192});
  // Log-tan form of the slippy formula, evaluated in Python.
  CHECK(wgs84_to_tile(GeoPoint(40.4406, -79.9959), 14) == TileId{14, 4551, 6176});
  CHECK(wgs84_to_tile(GeoPoint(48.8566, 2.3522), 14) == TileId{14, 8299, 5636});
  CHECK(wgs84_to_tile(GeoPoint(-33.8688, 151.2093), 14) == TileId{14, 15073, 9831});
  CHECK(wgs84_to_tile(GeoPoint(35.6762, 139.6503), 14) == TileId{14, 14547, 6451});
  CHECK(wgs84_to_tile(GeoPoint(-22.9068, -43.1729), 14) == TileId{14, 6227, 9263});
  CHECK(wgs84_to_tile(GeoPoint(10, 10), 0) == TileId{0, 0, 0});
}

TEST_CASE("wgs84_to_tile: outside Mercator range") {
  CHECK_THROWS_AS(wgs84_to_tile(GeoPoint(85.06, 0), 14), DomainError);
  CHECK_THROWS_AS(wgs84_to_tile(GeoPoint(-89, 0), 14), DomainError);
}

TEST_CASE("tile_bounds") {
  const TileBounds b = tile_bounds({14, 8192, 8192});
  CHECK(b.north == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(b.west == doctest::Approx(0.0));
  CHECK(b.south == doctest::Approx(-0.021972655711418845).epsilon(1e-12));
  CHECK(b.east == doctest::Approx(0.02197265625).epsilon(1e-12));

  const TileBounds w = tile_bounds({0, 0, 0});
  CHECK(w.north == doctest::Approx(kMercatorMaxLat).epsilon(1e-12));
  CHECK(w.south == doctest::Approx(-kMercatorMaxLat).epsilon(1e-12));
  CHECK(w.west == -180.0);
  CHECK(w.east == 180.0);

  CHECK_THROWS_AS(tile_bounds({14, 16384, 0}), DomainError);
}

TEST_CASE("tile round trip: center maps back, bounds contain the point") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lat(-85.0, 85.0), lon(-180.0, 180.0);
  std::uniform_int_distribution<int> zoom(0, 18);
  for (int i = 0; i < 2000; ++i) {
    const GeoPoint p(lat(rng), lon(rng));
    const int z = zoom(rng);
    const TileId t = wgs84_to_tile(p, z);
    REQUIRE(t.valid());
    const TileBounds b = tile_bounds(t);
    CHECK(p.lat() <= b.north);
    CHECK(p.lat() >= b.south);
    CHECK(p.lon() >= b.west);
    CHECK(p.lon() <= b.east);
    const GeoPoint center((b.north + b.south) / 2, (b.west + b.east) / 2);
    CHECK(wgs84_to_tile(center, z) == t);
  }
}

TEST_CASE("UTM matches the PROJ reference") {
  for (const auto& c : kUtmCases) {
    CAPTURE(c.lat);
    CAPTURE(c.lon);
    const UtmPoint u = wgs84_to_utm(GeoPoint(c.lat, c.lon), c.zone);
    CHECK(u.zone == c.zone);
    CHECK(u.hemisphere == (c.hemi == 'N' ? Hemisphere::kNorth : Hemisphere::kSouth));
    CHECK(std::abs(u.easting - c.easting) < 1e-3);
    CHECK(std::abs(u.northing - c.northing) < 1e-3);

    const GeoPoint back = utm_to_wgs84({c.easting, c.northing, c.zone, u.hemisphere});
    CHECK(std::abs(back.lat() - c.lat) < 1e-9);
    CHECK(std::abs(back.lon() - c.lon) < 1e-9);
  }
}

TEST_CASE("UTM zone selection and edge values") {
  CHECK(utm_zone_for(-79.9959) == 17);
  CHECK(utm_zone_for(-180.0) == 1);
  CHECK(utm_zone_for(179.999) == 60);
  CHECK(utm_zone_for(0.0) == 31);
  CHECK(utm_central_meridian(17) == -81.0);
  const UtmPoint u = wgs84_to_utm(GeoPoint(0.0, utm_central_meridian(33)));
  CHECK(u.easting == doctest::Approx(500000.0));
  CHECK(u.northing == doctest::Approx(0.0));
  const GeoPoint g = utm_to_wgs84({500000.0, 0.0, 33, Hemisphere::kNorth});
  CHECK(g.lat() == doctest::Approx(0.0));
  CHECK(g.lon() == doctest::Approx(15.0));
  CHECK_THROWS_AS(wgs84_to_utm(GeoPoint(84.5, 0)), DomainError);
  CHECK_THROWS_AS(wgs84_to_utm(GeoPoint(-84.5, 0)), DomainError);
  CHECK_THROWS_AS(wgs84_to_utm(GeoPoint(10, 0), 61), DomainError);
}

TEST_CASE("UTM round trip under 1 mm within 3 degrees of the central meridian") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(-80.0, 84.0), dlon(-3.0, 3.0);
  std::uniform_int_distribution<int> zone(1, 60);
  double worst = 0.0;
  for (int i = 0; i < 5000; ++i) {
    const int z = zone(rng);
    const GeoPoint p(lat(rng), utm_central_meridian(z) + dlon(rng));
    const UtmPoint u = wgs84_to_utm(p, z);
    const GeoPoint back = utm_to_wgs84(u);
    const UtmPoint again = wgs84_to_utm(back, z);
    worst = std::max(worst, std::hypot(again.easting - u.easting, again.northing - u.northing));
    worst = std::max(worst, haversine_m(p, back));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("haversine") {
  const GeoPoint a(40.0, -80.0), b(41.0, -79.0), c(39.5, -78.0);
  CHECK(haversine_m(a, a) == 0.0);
  CHECK(haversine_m(GeoPoint(0, 0), GeoPoint(0, 0.001)) ==
        doctest::Approx(111.19508023353292).epsilon(1e-9));
  CHECK(haversine_m(a, b) == haversine_m(b, a));
  CHECK(haversine_m(a, c) <= (haversine_m(a, b) + haversine_m(b, c)) * (1 + 1e-6));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lat(-89.0, 89.0), lon(-180.0, 180.0);
  for (int i = 0; i < 1000; ++i) {
    const GeoPoint p(lat(rng), lon(rng)), q(lat(rng), lon(rng)), r(lat(rng), lon(rng));
    CHECK(haversine_m(p, r) <= (haversine_m(p, q) + haversine_m(q, r)) * (1 + 1e-6));
  }
}

TEST_CASE("bearing_diff_deg") {
  CHECK(bearing_diff_deg(Heading(350), Heading(10)) == doctest::Approx(20.0));
  CHECK(bearing_diff_deg(Heading(90), Heading(90)) == 0.0);
  CHECK(bearing_diff_deg(Heading(0), Heading(180)) == 180.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> deg(0.0, 360.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = deg(rng), b = deg(rng), c = deg(rng);
    const double d = bearing_diff_deg(Heading(a), Heading(b));
    CHECK(d >= 0.0);
    CHECK(d <= 180.0);
    CHECK(bearing_diff_deg(Heading(a + c), Heading(b + c)) == doctest::Approx(d).epsilon(1e-9));
  }
}
