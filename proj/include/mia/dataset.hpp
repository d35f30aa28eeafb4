#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mia/fpv.hpp"
#include "mia/geodesy.hpp"

namespace mia {

enum class Split { kTrain, kVal, kTest };
inline constexpr int kNumSplits = 3;

std::string_view to_string(Split s);
// Throws ValidationError for anything but train | val | test.
Split split_from_string(std::string_view s);

struct ManifestRecord {
  std::string id;
  std::string sequence_id;
  double lat = 0.0;
  double lon = 0.0;
  UtmPoint utm;
  double heading_deg = 0.0;
  std::int64_t captured_at = 0;
  std::string camera_model;
  std::string camera_type;
  double focal = 0.0;
  Split split = Split::kTrain;
  // Relative to the dataset root.
  std::string fpv_path;
  std::string bev_path;
  std::string mask_path;

  friend bool operator==(const ManifestRecord& a, const ManifestRecord& b);
};

inline constexpr int kManifestVersion = 1;

// Records sorted by id, ids unique.
struct DatasetManifest {
  std::vector<ManifestRecord> records;

  // Sorts by id; throws ValidationError on a duplicate id.
  void normalize();
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

nlohmann::json record_to_json(const ManifestRecord& r);
ManifestRecord record_from_json(const nlohmann::json& doc);

// One JSON object per line; the first line is {"mia_manifest": <version>}.
std::string format_manifest(const DatasetManifest& m);
// Throws ParseError for malformed lines or a version mismatch and
// ValidationError for a duplicate id.
DatasetManifest parse_manifest(std::string_view text);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

// Square UTM grid cell.
struct CellId {
  int zone = 0;
  Hemisphere hemisphere = Hemisphere::kNorth;
  std::int64_t ix = 0;
  std::int64_t iy = 0;

  friend auto operator<=>(const CellId&, const CellId&) = default;
};

CellId cell_of(const UtmPoint& p, double cell_m);

struct SplitAssignment {
  double cell_m = 500.0;
  std::map<CellId, Split> cells;
  std::array<std::size_t, kNumSplits> images{};  // per split

  // Throws ValidationError for a cell that was never assigned.
  Split split_of(const UtmPoint& p) const;
};

struct SplitOptions {
  std::array<double, kNumSplits> ratios = {0.8, 0.1, 0.1};
  double cell_m = 500.0;
  std::uint64_t seed = 0;
};

// Buckets poses into cells, then walks cells from largest to smallest
// (seeded order among equal sizes) and gives each to the split furthest
// below its target image count. Throws ValidationError when the ratios do
// not sum to 1 or there are fewer cells than splits.
SplitAssignment split_geographic(std::span<const UtmPoint> poses, const SplitOptions& opts = {});

inline constexpr double kCoverageRadiusM = 112.0;

// Area of the union of disks around the poses, counted on a 1 m grid of
// cell centers. Poses in different zones are measured separately and
// summed.
double coverage_km2(std::span<const UtmPoint> poses, double radius_m = kCoverageRadiusM);

struct DatasetStats {
  std::size_t images = 0;
  std::size_t sequences = 0;
  double coverage_km2 = 0.0;
  std::array<std::size_t, kNumSplits> per_split{};
  std::map<std::string, std::size_t> per_camera_model;
  std::map<std::string, std::size_t> per_camera_type;
  std::optional<FilterReport> filter_report;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

DatasetStats compute_stats(const DatasetManifest& m);

nlohmann::json filter_report_to_json(const FilterReport& r);
FilterReport filter_report_from_json(const nlohmann::json& doc);

}  // namespace mia
