#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mia/geodesy.hpp"
#include "mia/geometry.hpp"
#include "mia/raster.hpp"

namespace mia {

enum class CameraType { kPerspective, kFisheye, kSpherical, kOther };

std::string_view to_string(CameraType t);
// Accepts the metadata API spellings; "equirectangular" is an alias of
// spherical and anything unknown maps to kOther.
CameraType camera_type_from_string(std::string_view s);

struct CameraParams {
  // Focal length normalized by image width (the metadata API convention).
  double focal = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
};

struct ImageMetadata {
  std::string id;
  std::string sequence_id;
  GeoPoint recorded_point;
  std::optional<GeoPoint> sfm_point;
  Heading recorded_heading;
  std::optional<Heading> sfm_heading;
  std::int64_t captured_at = 0;  // epoch milliseconds
  std::string camera_model;      // lowercase
  CameraType camera_type = CameraType::kOther;
  std::optional<CameraParams> camera_params;
  int width = 0;
  int height = 0;
  std::string thumb_url;

  // Best available pose: SfM-rectified when present, recorded otherwise.
  GeoPoint pose_point() const { return sfm_point.value_or(recorded_point); }
  Heading pose_heading() const { return sfm_heading.value_or(recorded_heading); }
};

// Boundary polygon in geographic coordinates (x = lon, y = lat).
using GeoPolygon = Ring;

// 2017-01-01T00:00:00Z
inline constexpr std::int64_t kDefaultRecencyCutoffMs = 1483228800000;

// The camera models enumerated in the curation hyperparameter table.
const std::vector<std::string>& default_camera_allowlist();

struct FilterConfig {
  GeoPolygon boundary;
  std::int64_t recency_cutoff_ms = kDefaultRecencyCutoffMs;
  std::set<std::string> camera_allowlist;
  // Rural collections run with the model filter off.
  bool camera_model_filter_enabled = true;
  double max_angle_discrepancy_deg = 20.0;
  double max_loc_discrepancy_m = 3.0;
  double sparsity_radius_m = 4.0;
  std::set<CameraType> allowed_camera_types = {CameraType::kPerspective, CameraType::kFisheye};

  static FilterConfig defaults(GeoPolygon boundary);
  // Throws ValidationError.
  void validate() const;
};

inline constexpr std::array<std::string_view, 6> kFilterStageNames = {
    "Boundaries", "Recency", "Camera Model", "Angle Discrip", "Loc Discrip", "Spatial"};

struct FilterStageCount {
  std::string name;
  std::size_t images_in = 0;
  std::size_t images_out = 0;
  double percent_of_initial = 0.0;

  friend bool operator==(const FilterStageCount&, const FilterStageCount&) = default;
};

struct FilterReport {
  std::vector<FilterStageCount> stages;

  friend bool operator==(const FilterReport&, const FilterReport&) = default;
  // Fixed-width table in the curation-yield layout: one column per stage,
  // rows "# Images" and "% Images".
  std::string to_table() const;
};

// Builds a report from the count surviving each stage; percentages are
// taken against the first stage's output.
FilterReport make_filter_report(std::size_t initial, std::span<const std::size_t> stage_out);

struct FilterResult {
  std::vector<ImageMetadata> retained;  // sorted by id
  FilterReport report;
};

// Individual predicates, exposed for re-checking retained sets.
bool passes_boundary(const ImageMetadata& m, const FilterConfig& cfg);
bool passes_recency(const ImageMetadata& m, const FilterConfig& cfg);
bool passes_camera(const ImageMetadata& m, const FilterConfig& cfg);
bool passes_angle(const ImageMetadata& m, const FilterConfig& cfg);
bool passes_location(const ImageMetadata& m, const FilterConfig& cfg);

// Six-stage cascade. Output is independent of input order and of `workers`.
FilterResult run_filter_pipeline(std::vector<ImageMetadata> metas, const FilterConfig& cfg,
                                 int workers = 1);

// Zoom-14 tiles whose closed bounds intersect the closed boundary polygon,
// sorted by (x, y). Throws ValidationError for degenerate polygons.
std::vector<TileId> enumerate_tiles(const GeoPolygon& boundary, int zoom = kCandidateTileZoom);

enum class LensModel { kPinhole, kFisheye };

struct CameraIntrinsics {
  int width = 0;
  int height = 0;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  LensModel model = LensModel::kPinhole;
  double k1 = 0.0;
  double k2 = 0.0;

  void validate() const;
  // Pinhole horizontal half field of view in radians.
  double half_hfov() const;
};

CameraIntrinsics intrinsics_from_metadata(const ImageMetadata& m);

// Radial distortion strategies for undistort_fisheye.
enum class RadialModel {
  // r_d = theta * (1 + k1 theta^2 + k2 theta^4), theta = atan(r_u).
  kFisheyeTheta,
  // r_d = r_u * (1 + k1 r_u^2 + k2 r_u^4).
  kPolynomial,
};

double distort_radius(double r_undistorted, double k1, double k2, RadialModel model);
// Newton inversion of distort_radius; nullopt when it fails to reach 1e-6
// residual or the model folds over.
std::optional<double> undistort_radius(double r_distorted, double k1, double k2,
                                       RadialModel model);

// Pinhole camera that undistort_fisheye produces for these intrinsics.
CameraIntrinsics undistorted_intrinsics(const CameraIntrinsics& intr,
                                        RadialModel model = RadialModel::kFisheyeTheta);

struct UndistortResult {
  Image image;
  CameraIntrinsics intrinsics;  // model = pinhole
  std::size_t invalid_pixels = 0;
};

// Reprojects a fisheye image to a pinhole camera with the same size and
// horizontal field of view. Throws ValidationError for pinhole input.
UndistortResult undistort_fisheye(const Image& image, const CameraIntrinsics& intr,
                                  RadialModel model = RadialModel::kFisheyeTheta);

}  // namespace mia
