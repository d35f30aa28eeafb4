#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "mia/errors.hpp"
#include "mia/fpv.hpp"
#include "mia/parallel.hpp"

namespace mia {

std::string_view to_string(CameraType t) {
  switch (t) {
    case CameraType::kPerspective: return "perspective";
    case CameraType::kFisheye: return "fisheye";
    case CameraType::kSpherical: return "spherical";
    case CameraType::kOther: return "other";
  }
  return "other";
}

CameraType camera_type_from_string(std::string_view s) {
  if (s == "perspective") return CameraType::kPerspective;
  if (s == "fisheye") return CameraType::kFisheye;
  if (s == "spherical" || s == "equirectangular") return CameraType::kSpherical;
  return CameraType::kOther;
}

const std::vector<std::string>& default_camera_allowlist() {
  static const std::vector<std::string> models = {
      "hdr-as200v", "iphone11pro",   "iphone11",       "iphone12",     "gopromax",
      "iphone12pro", "lm-v405",      "iphone11promax", "hdr-as300",    "iphone13",
      "fdr-x1000v", "sm-g970u",      "sm-g930v",       "iphone13promax", "iphone13pro",
      "iphone12promax", "fdr-x3000",
  };
  return models;
}

FilterConfig FilterConfig::defaults(GeoPolygon boundary) {
  FilterConfig cfg;
  cfg.boundary = std::move(boundary);
  const auto& models = default_camera_allowlist();
  cfg.camera_allowlist = {models.begin(), models.end()};
  return cfg;
}

void FilterConfig::validate() const {
  if (boundary.size() < 3 || !ring_is_simple(boundary)) {
    throw ValidationError("boundary must be a simple polygon with at least 3 vertices");
  }
  if (!(max_angle_discrepancy_deg > 0) || !(max_loc_discrepancy_m > 0) ||
      !(sparsity_radius_m > 0) || recency_cutoff_ms <= 0) {
    throw ValidationError("filter thresholds must be positive");
  }
  if (camera_model_filter_enabled && camera_allowlist.empty()) {
    throw ValidationError("camera allowlist is empty but the model filter is enabled");
  }
  if (allowed_camera_types.empty()) throw ValidationError("no camera types allowed");
}

bool passes_boundary(const ImageMetadata& m, const FilterConfig& cfg) {
  const Polygon poly{cfg.boundary, {}};
  return point_in_polygon({m.recorded_point.lon(), m.recorded_point.lat()}, poly);
}

bool passes_recency(const ImageMetadata& m, const FilterConfig& cfg) {
  return m.captured_at > cfg.recency_cutoff_ms;
}

bool passes_camera(const ImageMetadata& m, const FilterConfig& cfg) {
  if (!cfg.allowed_camera_types.contains(m.camera_type)) return false;
  return !cfg.camera_model_filter_enabled || cfg.camera_allowlist.contains(m.camera_model);
}

bool passes_angle(const ImageMetadata& m, const FilterConfig& cfg) {
  return m.sfm_heading &&
         bearing_diff_deg(m.recorded_heading, *m.sfm_heading) < cfg.max_angle_discrepancy_deg;
}

bool passes_location(const ImageMetadata& m, const FilterConfig& cfg) {
  return m.sfm_point && haversine_m(m.recorded_point, *m.sfm_point) < cfg.max_loc_discrepancy_m;
}

FilterReport make_filter_report(std::size_t initial, std::span<const std::size_t> stage_out) {
  FilterReport report;
  const double base = stage_out.empty() ? 0.0 : static_cast<double>(stage_out[0]);
  std::size_t in = initial;
  for (std::size_t i = 0; i < stage_out.size() && i < kFilterStageNames.size(); ++i) {
    FilterStageCount s;
    s.name = std::string(kFilterStageNames[i]);
    s.images_in = in;
    s.images_out = stage_out[i];
    s.percent_of_initial = base > 0 ? 100.0 * static_cast<double>(stage_out[i]) / base : 0.0;
    report.stages.push_back(s);
    in = stage_out[i];
  }
  return report;
}

namespace {

std::string human_count(std::size_t n) {
  if (n >= 1'000'000) return fmt::format("{:.4g}M", static_cast<double>(n) / 1e6);
  if (n >= 1'000) return fmt::format("{:.4g}K", static_cast<double>(n) / 1e3);
  return std::to_string(n);
}

}  // namespace

std::string FilterReport::to_table() const {
  std::ostringstream out;
  out << fmt::format("{:<16}", "Curation Stage");
  for (const auto& s : stages) out << fmt::format(" | {:>13}", s.name);
  out << "\n" << fmt::format("{:<16}", "# Images");
  for (const auto& s : stages) out << fmt::format(" | {:>13}", human_count(s.images_out));
  out << "\n" << fmt::format("{:<16}", "% Images");
  for (const auto& s : stages) out << fmt::format(" | {:>12.2f}%", s.percent_of_initial);
  out << "\n";
  return out.str();
}

FilterResult run_filter_pipeline(std::vector<ImageMetadata> metas, const FilterConfig& cfg,
                                 int workers) {
  cfg.validate();
  const std::size_t initial = metas.size();

  // Canonical order first so every later step is independent of the input
  // permutation.
  std::sort(metas.begin(), metas.end(),
            [](const ImageMetadata& a, const ImageMetadata& b) { return a.id < b.id; });

  // Stages 1-5 are per-record; record the first failing stage (5 = passed).
  std::vector<int> first_fail(metas.size(), 0);
  parallel_for(metas.size(), workers, [&](std::size_t i) {
    const auto& m = metas[i];
    int stage = 0;
    if (passes_boundary(m, cfg)) {
      stage = 1;
      if (passes_recency(m, cfg)) {
        stage = 2;
        if (passes_camera(m, cfg)) {
          stage = 3;
          if (passes_angle(m, cfg)) {
            stage = 4;
            if (passes_location(m, cfg)) stage = 5;
          }
        }
      }
    }
    first_fail[i] = stage;
  });

  std::array<std::size_t, 6> out{};
  for (int s : first_fail) {
    for (int k = 0; k < s; ++k) ++out[k];
  }

  // Stage 6: sparsity within each sequence, earliest capture first.
  std::map<std::string, std::vector<std::size_t>> by_sequence;
  for (std::size_t i = 0; i < metas.size(); ++i) {
    if (first_fail[i] == 5) by_sequence[metas[i].sequence_id].push_back(i);
  }
  std::vector<std::vector<std::size_t>> groups;
  groups.reserve(by_sequence.size());
  for (auto& [seq, idx] : by_sequence) groups.push_back(std::move(idx));

  std::vector<std::vector<std::size_t>> kept(groups.size());
  parallel_for(groups.size(), workers, [&](std::size_t g) {
    auto& idx = groups[g];
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (metas[a].captured_at != metas[b].captured_at) {
        return metas[a].captured_at < metas[b].captured_at;
      }
      return metas[a].id < metas[b].id;
    });
    auto& keep = kept[g];
    for (std::size_t i : idx) {
      const bool crowded = std::any_of(keep.begin(), keep.end(), [&](std::size_t k) {
        return haversine_m(metas[i].recorded_point, metas[k].recorded_point) <
               cfg.sparsity_radius_m;
      });
      if (!crowded) keep.push_back(i);
    }
  });

  std::vector<std::size_t> retained_idx;
  for (const auto& k : kept) retained_idx.insert(retained_idx.end(), k.begin(), k.end());
  std::sort(retained_idx.begin(), retained_idx.end());
  out[5] = retained_idx.size();

  FilterResult result;
  result.report = make_filter_report(initial, out);
  result.retained.reserve(retained_idx.size());
  for (std::size_t i : retained_idx) result.retained.push_back(std::move(metas[i]));
  return result;
}

std::vector<TileId> enumerate_tiles(const GeoPolygon& boundary, int zoom) {
  if (boundary.size() < 3 || !ring_is_simple(boundary)) {
    throw ValidationError("boundary must be a simple polygon with at least 3 vertices");
  }
  const Box bb = bounding_box(boundary);
  const std::int64_t n = std::int64_t{1} << zoom;
  const TileId nw = wgs84_to_tile(GeoPoint(bb.max.y, bb.min.x), zoom);
  // lon = 180 normalizes to -180; the east edge belongs to the last column.
  const TileId se = bb.max.x >= 180.0 ? TileId{zoom, n - 1, wgs84_to_tile(GeoPoint(bb.min.y, 0), zoom).y}
                                      : wgs84_to_tile(GeoPoint(bb.min.y, bb.max.x), zoom);
  const Polygon poly{boundary, {}};
  std::vector<TileId> tiles;
  // One extra tile on each side catches polygons touching a tile edge.
  for (std::int64_t x = std::max<std::int64_t>(nw.x - 1, 0); x <= std::min(se.x + 1, n - 1); ++x) {
    for (std::int64_t y = std::max<std::int64_t>(nw.y - 1, 0); y <= std::min(se.y + 1, n - 1); ++y) {
      const TileId t{zoom, x, y};
      const TileBounds b = tile_bounds(t);
      if (box_intersects_polygon(Box{{b.west, b.south}, {b.east, b.north}}, poly)) {
        tiles.push_back(t);
      }
    }
  }
  return tiles;
}

}  // namespace mia
