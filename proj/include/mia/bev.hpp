#pragma once

#include <array>
#include <span>
#include <vector>

#include "mia/fpv.hpp"
#include "mia/geodesy.hpp"
#include "mia/geometry.hpp"
#include "mia/osm.hpp"
#include "mia/raster.hpp"

namespace mia {

struct BevConfig {
  int alpha_px = 224;  // final BEV side
  int delta_px = 50;   // context margin for elements straddling the box
  double rho = 0.5;    // meters per pixel
};

// Axis-aligned UTM square around the ego pose, large enough that the
// alpha x alpha crop fits under any rotation.
struct BevWindow {
  Vec2 center;  // UTM easting/northing
  int side_px = 0;
  double side_m = 0.0;
  double rho = 0.0;
  Heading heading;

  // UTM position of a (possibly fractional) raster coordinate; pixel (r, c)
  // has its center at (r + 0.5, c + 0.5).
  Vec2 raster_to_utm(double row, double col) const;
  Vec2 utm_to_raster(Vec2 en) const;  // returns (col, row)
};

// Rotation padding: ceil(alpha * sqrt(2)) - alpha.
int rotation_padding_px(int alpha_px);

BevWindow compute_bev_window(Vec2 center, Heading heading, int alpha_px, int delta_px, double rho);

// Geographic box covering the window, for OSM queries.
GeoBox window_geo_box(const BevWindow& w, const UtmFrame& frame);

using ClassPlanes = std::array<BinaryRaster, kNumClasses>;

struct SemanticBev {
  ClassPlanes planes;
  double rho = 0.0;
  int ego_row = 0;
  int ego_col = 0;

  int size() const { return planes[0].rows(); }
  const BinaryRaster& plane(SemanticClass c) const { return planes[static_cast<int>(c)]; }
  friend bool operator==(const SemanticBev&, const SemanticBev&) = default;
};

// Sets plane k at pixel (r, c) iff the pixel center lies in the closed
// polygon of some class-k geometry. North-up.
ClassPlanes rasterize(std::span<const SemanticGeometry> geoms, const BevWindow& window);

// Fills one polygon (in raster coordinates: x = col, y = row) into a plane.
void fill_polygon(BinaryRaster& plane, const Polygon& raster_poly);

// Continuous padded-raster coordinate (col, row) sampled by crop pixel
// (r, c) at `heading`.
Vec2 crop_sample_point(int padded_side, int alpha_px, Heading heading, int r, int c);

// Rotates so the heading points up (decreasing row) and crops alpha x alpha
// around the center, nearest-neighbour. Throws ValidationError when the
// padded raster is too small.
SemanticBev rotate_crop(const ClassPlanes& padded, Heading heading, int alpha_px, double rho);

// classify -> infer_sidewalks -> window -> rasterize -> rotate_crop at the
// image's best pose.
SemanticBev render_bev(const OsmGraph& graph, const RuleTable& rules, const UtmFrame& frame,
                       Vec2 center, Heading heading, const BevConfig& cfg);
SemanticBev render_bev_for_image(const ImageMetadata& meta, const OsmGraph& graph,
                                 const RuleTable& rules, const UtmFrame& frame,
                                 const BevConfig& cfg);

// One byte per pixel, bit k = class ordinal k, bits 6-7 zero.
Grid<std::uint8_t> pack_bev(const SemanticBev& bev);
SemanticBev unpack_bev(const Grid<std::uint8_t>& packed, double rho);

}  // namespace mia
