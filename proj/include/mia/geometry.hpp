#pragma once

#include <span>
#include <vector>

namespace mia {

// Planar point. In projected frames x is easting and y is northing (meters);
// in geographic frames x is longitude and y latitude.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
};

double dot(Vec2 a, Vec2 b);
double cross(Vec2 a, Vec2 b);
double norm(Vec2 a);

// Open ring: the closing vertex is implicit and never repeated.
using Ring = std::vector<Vec2>;

struct Polygon {
  Ring outer;
  std::vector<Ring> holes;
};

struct Box {
  Vec2 min;
  Vec2 max;
};

double ring_signed_area(std::span<const Vec2> ring);
double polygon_area(const Polygon& poly);
Box bounding_box(std::span<const Vec2> pts);

// Drops a trailing vertex equal to the first one.
Ring open_ring(std::vector<Vec2> pts);

// Closed-set membership: points on any ring edge are inside.
bool point_in_polygon(Vec2 p, const Polygon& poly);
bool point_on_segment(Vec2 p, Vec2 a, Vec2 b);

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d);
bool ring_is_simple(std::span<const Vec2> ring);

// Closed box against closed polygon interior-or-boundary.
bool box_intersects_polygon(const Box& box, const Polygon& poly);

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);
double point_polyline_distance(Vec2 p, std::span<const Vec2> line);

// Flat-capped, miter-joined buffer of half-width width/2 on each side.
// Overlapping pieces are unioned, so the result is normally one polygon.
// Throws ValidationError for fewer than two distinct points or width <= 0.
std::vector<Polygon> expand_centerline(std::span<const Vec2> line, double width);

// Parallel curve at signed distance `offset` (positive to the left of the
// direction of travel) with mitered vertices.
std::vector<Vec2> offset_polyline(std::span<const Vec2> line, double offset);

}  // namespace mia
