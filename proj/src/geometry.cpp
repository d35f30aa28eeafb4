#include "mia/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/linestring.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include "mia/errors.hpp"

namespace mia {

namespace bg = boost::geometry;

double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }

double ring_signed_area(std::span<const Vec2> ring) {
  const std::size_t n = ring.size();
  if (n < 3) return 0.0;
  // Relative to the first vertex: UTM-sized coordinates would cancel badly.
  const Vec2 o = ring[0];
  double s = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    s += cross(ring[i] - o, ring[i + 1] - o);
  }
  return 0.5 * s;
}

double polygon_area(const Polygon& poly) {
  double a = std::abs(ring_signed_area(poly.outer));
  for (const auto& h : poly.holes) a -= std::abs(ring_signed_area(h));
  return a;
}

Box bounding_box(std::span<const Vec2> pts) {
  Box b{{INFINITY, INFINITY}, {-INFINITY, -INFINITY}};
  for (const auto& p : pts) {
    b.min.x = std::min(b.min.x, p.x);
    b.min.y = std::min(b.min.y, p.y);
    b.max.x = std::max(b.max.x, p.x);
    b.max.y = std::max(b.max.y, p.y);
  }
  return b;
}

Ring open_ring(std::vector<Vec2> pts) {
  if (pts.size() > 1 && pts.front() == pts.back()) pts.pop_back();
  return pts;
}

bool point_on_segment(Vec2 p, Vec2 a, Vec2 b) {
  if (cross(b - a, p - a) != 0.0) return false;
  return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) &&
         p.y >= std::min(a.y, b.y) && p.y <= std::max(a.y, b.y);
}

namespace {

// Crossing-number parity of a horizontal ray towards +x; edges are
// half-open in y so shared vertices count once.
bool ring_crossing_parity(Vec2 p, std::span<const Vec2> ring) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = ring[j], b = ring[i];
    if ((a.y > p.y) != (b.y > p.y)) {
      // Sign test on (p - a) x (b - a) avoids dividing.
      const double lhs = (p.x - a.x) * (b.y - a.y);
      const double rhs = (p.y - a.y) * (b.x - a.x);
      if (b.y > a.y ? lhs < rhs : lhs > rhs) inside = !inside;
    }
  }
  return inside;
}

bool on_ring(Vec2 p, std::span<const Vec2> ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if (point_on_segment(p, ring[j], ring[i])) return true;
  }
  return false;
}

int orientation(Vec2 a, Vec2 b, Vec2 c) {
  const double v = cross(b - a, c - a);
  return (v > 0) - (v < 0);
}

}  // namespace

bool point_in_polygon(Vec2 p, const Polygon& poly) {
  if (poly.outer.size() < 3) return false;
  if (on_ring(p, poly.outer)) return true;
  for (const auto& h : poly.holes) {
    if (h.size() >= 3 && on_ring(p, h)) return true;
  }
  bool inside = ring_crossing_parity(p, poly.outer);
  if (!inside) return false;
  for (const auto& h : poly.holes) {
    if (h.size() >= 3 && ring_crossing_parity(p, h)) return false;
  }
  return true;
}

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const int o1 = orientation(a, b, c), o2 = orientation(a, b, d);
  const int o3 = orientation(c, d, a), o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && point_on_segment(c, a, b)) return true;
  if (o2 == 0 && point_on_segment(d, a, b)) return true;
  if (o3 == 0 && point_on_segment(a, c, d)) return true;
  if (o4 == 0 && point_on_segment(b, c, d)) return true;
  return false;
}

bool ring_is_simple(std::span<const Vec2> ring) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (ring[i] == ring[(i + 1) % n]) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = ring[i], b = ring[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      // Adjacent edges share exactly one vertex.
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      const Vec2 c = ring[j], d = ring[(j + 1) % n];
      if (adjacent) {
        // Only a collinear fold-back makes adjacent edges overlap.
        const Vec2 shared = (j == i + 1) ? b : a;
        const Vec2 other_ab = (j == i + 1) ? a : b;
        const Vec2 other_cd = (j == i + 1) ? d : c;
        if (orientation(other_ab, shared, other_cd) == 0 &&
            dot(other_ab - shared, other_cd - shared) > 0) {
          return false;
        }
        continue;
      }
      if (segments_intersect(a, b, c, d)) return false;
    }
  }
  return std::abs(ring_signed_area(ring)) > 0.0;
}

bool box_intersects_polygon(const Box& box, const Polygon& poly) {
  const Ring corners = {box.min, {box.max.x, box.min.y}, box.max, {box.min.x, box.max.y}};
  // Any polygon vertex inside the box.
  for (const auto& v : poly.outer) {
    if (v.x >= box.min.x && v.x <= box.max.x && v.y >= box.min.y && v.y <= box.max.y) {
      return true;
    }
  }
  // Any box corner inside the polygon.
  for (const auto& c : corners) {
    if (point_in_polygon(c, poly)) return true;
  }
  // Any edge crossing.
  const std::size_t n = poly.outer.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly.outer[i], b = poly.outer[(i + 1) % n];
    for (std::size_t k = 0; k < 4; ++k) {
      if (segments_intersect(a, b, corners[k], corners[(k + 1) % 4])) return true;
    }
  }
  return false;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return norm(p - a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return norm(p - (a + ab * t));
}

double point_polyline_distance(Vec2 p, std::span<const Vec2> line) {
  if (line.empty()) return INFINITY;
  if (line.size() == 1) return norm(p - line[0]);
  double best = INFINITY;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
  }
  return best;
}

namespace {

using BgPoint = bg::model::d2::point_xy<double>;
using BgLine = bg::model::linestring<BgPoint>;
using BgPolygon = bg::model::polygon<BgPoint>;
using BgMultiPolygon = bg::model::multi_polygon<BgPolygon>;

// Consecutive duplicates confuse the buffer's side generation.
std::vector<Vec2> dedup(std::span<const Vec2> line) {
  std::vector<Vec2> out;
  for (const auto& p : line) {
    if (out.empty() || !(out.back() == p)) out.push_back(p);
  }
  return out;
}

Ring from_bg_ring(const bg::model::ring<BgPoint>& r) {
  std::vector<Vec2> pts;
  pts.reserve(r.size());
  for (const auto& p : r) pts.push_back({p.x(), p.y()});
  return open_ring(std::move(pts));
}

}  // namespace

std::vector<Polygon> expand_centerline(std::span<const Vec2> line, double width) {
  if (!(width > 0.0) || !std::isfinite(width)) {
    throw ValidationError("centerline width must be positive");
  }
  const auto pts = dedup(line);
  if (pts.size() < 2) {
    throw ValidationError("centerline needs at least two distinct points");
  }
  BgLine ls;
  for (const auto& p : pts) ls.push_back(BgPoint(p.x, p.y));

  // Miter limit is relative to the half-width.
  bg::strategy::buffer::distance_symmetric<double> distance(width / 2.0);
  bg::strategy::buffer::join_miter join(5.0);
  bg::strategy::buffer::end_flat end;
  bg::strategy::buffer::point_square point;
  bg::strategy::buffer::side_straight side;

  BgMultiPolygon result;
  bg::buffer(ls, result, distance, side, join, end, point);

  std::vector<Polygon> out;
  for (const auto& bp : result) {
    Polygon poly;
    poly.outer = from_bg_ring(bp.outer());
    for (const auto& h : bp.inners()) poly.holes.push_back(from_bg_ring(h));
    if (polygon_area(poly) > 0.0) out.push_back(std::move(poly));
  }
  return out;
}

std::vector<Vec2> offset_polyline(std::span<const Vec2> line, double offset) {
  const auto pts = dedup(line);
  if (pts.size() < 2) throw ValidationError("polyline needs at least two distinct points");
  auto left_normal = [](Vec2 a, Vec2 b) {
    const Vec2 d = b - a;
    const double len = norm(d);
    return Vec2{-d.y / len, d.x / len};
  };

  std::vector<Vec2> out;
  out.reserve(pts.size());
  out.push_back(pts.front() + left_normal(pts[0], pts[1]) * offset);
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const Vec2 n0 = left_normal(pts[i - 1], pts[i]);
    const Vec2 n1 = left_normal(pts[i], pts[i + 1]);
    const Vec2 bis = n0 + n1;
    const double bl = norm(bis);
    // Near-reversal: fall back to the incoming normal.
    if (bl < 1e-9) {
      out.push_back(pts[i] + n0 * offset);
      continue;
    }
    const Vec2 m = bis * (1.0 / bl);
    const double cos_half = std::max(dot(m, n0), 0.2);
    out.push_back(pts[i] + m * (offset / cos_half));
  }
  out.push_back(pts.back() + left_normal(pts[pts.size() - 2], pts.back()) * offset);
  return out;
}

}  // namespace mia
