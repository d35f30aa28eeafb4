#include "mia/bev.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mia/errors.hpp"

namespace mia {

Vec2 BevWindow::raster_to_utm(double row, double col) const {
  const double half = side_m / 2.0;
  return {center.x - half + col * rho, center.y + half - row * rho};
}

Vec2 BevWindow::utm_to_raster(Vec2 en) const {
  const double half = side_m / 2.0;
  return {(en.x - (center.x - half)) / rho, ((center.y + half) - en.y) / rho};
}

int rotation_padding_px(int alpha_px) {
  return static_cast<int>(std::ceil(alpha_px * std::numbers::sqrt2)) - alpha_px;
}

BevWindow compute_bev_window(Vec2 center, Heading heading, int alpha_px, int delta_px, double rho) {
  if (alpha_px <= 0 || delta_px < 0 || !(rho > 0)) {
    throw ValidationError("BEV window needs alpha > 0, delta >= 0, rho > 0");
  }
  BevWindow w;
  w.center = center;
  w.side_px = alpha_px + rotation_padding_px(alpha_px) + delta_px;
  w.rho = rho;
  w.side_m = w.side_px * rho;
  w.heading = heading;
  return w;
}

GeoBox window_geo_box(const BevWindow& w, const UtmFrame& frame) {
  GeoBox box{90, 180, -90, -180};
  for (const auto& [r, c] : {std::pair{0.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}, {1.0, 1.0}}) {
    const GeoPoint p = frame.unproject(w.raster_to_utm(r * w.side_px, c * w.side_px));
    box.south = std::min(box.south, p.lat());
    box.north = std::max(box.north, p.lat());
    box.west = std::min(box.west, p.lon());
    box.east = std::max(box.east, p.lon());
  }
  return box;
}

namespace {

void mark_boundary(BinaryRaster& plane, std::span<const Vec2> ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = ring[j], b = ring[i];
    const double ymin = std::min(a.y, b.y), ymax = std::max(a.y, b.y);
    const int r0 = std::max(0, static_cast<int>(std::ceil(ymin - 0.5)));
    const int r1 = std::min(plane.rows() - 1, static_cast<int>(std::floor(ymax - 0.5)));
    for (int r = r0; r <= r1; ++r) {
      const double y = r + 0.5;
      if (a.y == b.y) {
        const double xmin = std::min(a.x, b.x), xmax = std::max(a.x, b.x);
        const int c0 = std::max(0, static_cast<int>(std::ceil(xmin - 0.5)));
        const int c1 = std::min(plane.cols() - 1, static_cast<int>(std::floor(xmax - 0.5)));
        for (int c = c0; c <= c1; ++c) plane.at(r, c) = 1;
        continue;
      }
      const double x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
      const int c = static_cast<int>(std::lround(x - 0.5));
      if (c < 0 || c >= plane.cols()) continue;
      // Exact on-edge test so the result does not hinge on the division.
      if (cross(b - a, Vec2{c + 0.5, y} - a) == 0.0) plane.at(r, c) = 1;
    }
  }
}

}  // namespace

void fill_polygon(BinaryRaster& plane, const Polygon& poly) {
  if (poly.outer.size() < 3) return;
  std::vector<std::span<const Vec2>> rings{poly.outer};
  for (const auto& h : poly.holes) {
    if (h.size() >= 3) rings.emplace_back(h);
  }
  const Box bb = bounding_box(poly.outer);
  const int r0 = std::max(0, static_cast<int>(std::ceil(bb.min.y - 0.5)));
  const int r1 = std::min(plane.rows() - 1, static_cast<int>(std::floor(bb.max.y - 0.5)));

  std::vector<double> xs;
  for (int r = r0; r <= r1; ++r) {
    const double y = r + 0.5;
    xs.clear();
    for (const auto ring : rings) {
      const std::size_t n = ring.size();
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2 a = ring[j], b = ring[i];
        if ((a.y > y) != (b.y > y)) xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // Centers strictly between the crossings; boundary centers come from
      // mark_boundary.
      const int c0 = std::max(0, static_cast<int>(std::floor(xs[k] - 0.5)) + 1);
      const int c1 = std::min(plane.cols() - 1, static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1);
      for (int c = c0; c <= c1; ++c) plane.at(r, c) = 1;
    }
  }
  for (const auto ring : rings) mark_boundary(plane, ring);
}

ClassPlanes rasterize(std::span<const SemanticGeometry> geoms, const BevWindow& window) {
  ClassPlanes planes;
  for (auto& p : planes) p = BinaryRaster(window.side_px, window.side_px, 0);
  const double half = window.side_m / 2.0;
  const Box view{{window.center.x - half, window.center.y - half},
                 {window.center.x + half, window.center.y + half}};
  auto to_raster = [&](const Ring& ring) {
    Ring out;
    out.reserve(ring.size());
    for (const auto& p : ring) out.push_back(window.utm_to_raster(p));
    return out;
  };
  for (const auto& g : geoms) {
    const Box bb = bounding_box(g.shape.outer);
    if (bb.max.x < view.min.x || bb.min.x > view.max.x || bb.max.y < view.min.y ||
        bb.min.y > view.max.y) {
      continue;
    }
    Polygon rp{to_raster(g.shape.outer), {}};
    for (const auto& h : g.shape.holes) rp.holes.push_back(to_raster(h));
    fill_polygon(planes[static_cast<int>(g.cls)], rp);
  }
  return planes;
}

namespace {

// Heading split into quarter turns plus a remainder in [0, 90) degrees so
// that headings 90 degrees apart share the remainder's trigonometry.
struct SplitRotation {
  int quarter_turns;
  double cos_r;
  double sin_r;
};

SplitRotation split_heading(Heading h) {
  const double deg = h.degrees();
  int q = static_cast<int>(std::floor(deg / 90.0));
  double rem = deg - 90.0 * q;
  if (rem >= 90.0) {
    ++q;
    rem -= 90.0;
  }
  q &= 3;
  if (rem == 0.0) return {q, 1.0, 0.0};
  const double rad = rem * std::numbers::pi / 180.0;
  return {q, std::cos(rad), std::sin(rad)};
}

}  // namespace

Vec2 crop_sample_point(int padded_side, int alpha_px, Heading heading, int r, int c) {
  const SplitRotation rot = split_heading(heading);
  // Offsets from the ego pixel's center, which sits on the window center.
  double du = c - alpha_px / 2;
  double dv = r - alpha_px / 2;
  for (int k = 0; k < rot.quarter_turns; ++k) {
    const double t = du;
    du = -dv;
    dv = t;
  }
  const double center = padded_side / 2.0;
  return {center + du * rot.cos_r - dv * rot.sin_r, center + du * rot.sin_r + dv * rot.cos_r};
}

SemanticBev rotate_crop(const ClassPlanes& padded, Heading heading, int alpha_px, double rho) {
  const int side = padded[0].rows();
  if (alpha_px <= 0 || side < alpha_px + rotation_padding_px(alpha_px)) {
    throw ValidationError("padded raster too small for a rotated crop");
  }
  SemanticBev bev;
  bev.rho = rho;
  bev.ego_row = alpha_px / 2;
  bev.ego_col = alpha_px / 2;
  for (auto& p : bev.planes) p = BinaryRaster(alpha_px, alpha_px, 0);

  for (int r = 0; r < alpha_px; ++r) {
    for (int c = 0; c < alpha_px; ++c) {
      const Vec2 s = crop_sample_point(side, alpha_px, heading, r, c);
      const int sc = std::clamp(static_cast<int>(std::floor(s.x)), 0, side - 1);
      const int sr = std::clamp(static_cast<int>(std::floor(s.y)), 0, side - 1);
      for (int k = 0; k < kNumClasses; ++k) bev.planes[k].at(r, c) = padded[k].at(sr, sc);
    }
  }
  return bev;
}

SemanticBev render_bev(const OsmGraph& graph, const RuleTable& rules, const UtmFrame& frame,
                       Vec2 center, Heading heading, const BevConfig& cfg) {
  auto cls = classify(graph, rules, frame);
  auto inferred = infer_sidewalks(graph, rules, frame);
  cls.geometries.insert(cls.geometries.end(), std::make_move_iterator(inferred.begin()),
                        std::make_move_iterator(inferred.end()));
  const BevWindow window = compute_bev_window(center, heading, cfg.alpha_px, cfg.delta_px, cfg.rho);
  return rotate_crop(rasterize(cls.geometries, window), heading, cfg.alpha_px, cfg.rho);
}

SemanticBev render_bev_for_image(const ImageMetadata& meta, const OsmGraph& graph,
                                 const RuleTable& rules, const UtmFrame& frame,
                                 const BevConfig& cfg) {
  return render_bev(graph, rules, frame, frame.project(meta.pose_point()), meta.pose_heading(), cfg);
}

Grid<std::uint8_t> pack_bev(const SemanticBev& bev) {
  const int n = bev.size();
  Grid<std::uint8_t> out(n, n, 0);
  for (int k = 0; k < kNumClasses; ++k) {
    const auto& src = bev.planes[k].data();
    auto& dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (src[i]) dst[i] |= static_cast<std::uint8_t>(1u << k);
    }
  }
  return out;
}

SemanticBev unpack_bev(const Grid<std::uint8_t>& packed, double rho) {
  if (packed.rows() != packed.cols()) throw ParseError("BEV raster must be square");
  SemanticBev bev;
  bev.rho = rho;
  bev.ego_row = bev.ego_col = packed.rows() / 2;
  for (int k = 0; k < kNumClasses; ++k) {
    bev.planes[k] = BinaryRaster(packed.rows(), packed.cols(), 0);
    auto& dst = bev.planes[k].data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = (packed.data()[i] >> k) & 1u;
  }
  for (auto v : packed.data()) {
    if (v & 0xC0) throw ParseError("BEV raster has bits 6-7 set");
  }
  return bev;
}

}  // namespace mia
