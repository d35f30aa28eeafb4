#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mia/bev.hpp"
#include "mia/raster.hpp"
#include "mia/visibility.hpp"

namespace mia {

// Binary planes with class names, in any taxonomy.
struct LabeledRaster {
  std::vector<std::pair<std::string, BinaryRaster>> planes;
  double rho = 0.0;
  int ego_row = 0;
  int ego_col = 0;

  const BinaryRaster* find(std::string_view name) const;
  friend bool operator==(const LabeledRaster&, const LabeledRaster&) = default;
};

LabeledRaster labeled(const SemanticBev& bev);

// Ordered (source -> target | N/A) pairs.
class ClassMapping {
 public:
  using Pair = std::pair<std::string, std::optional<std::string>>;

  ClassMapping() = default;
  // Throws ValidationError if two sources share a target.
  explicit ClassMapping(std::vector<Pair> pairs);

  static ClassMapping identity();
  static ClassMapping to_nuscenes();
  static ClassMapping to_kitti360();
  // Built-in name (mia | nuscenes | kitti360) or a JSON file of
  // {"mapping": [["Road", "Drivable"], ["Building", null], ...]}.
  static ClassMapping load(const std::string& name_or_path);

  const std::vector<Pair>& pairs() const { return pairs_; }
  std::optional<std::string> target_of(std::string_view source) const;
  // Mapped pairs reversed; N/A pairs have no inverse.
  ClassMapping inverse() const;

 private:
  std::vector<Pair> pairs_;
};

// value >= threshold -> 1. Throws ValidationError outside [0, 1].
BinaryRaster binarize(const Grid<float>& probabilities, float threshold = 0.5f);

// Target planes in mapping order; N/A sources are dropped. Throws
// ValidationError when a mapped source plane is missing.
LabeledRaster remap_classes(const LabeledRaster& raster, const ClassMapping& mapping);

struct EvalWindow {
  double side_m = 50.0;
  double rho = 0.5;
  // Pixels per side; throws ValidationError unless side_m / rho is integral.
  int side_px() const;
};

struct ClassIou {
  std::string name;
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
  // nullopt when the class is absent from both prediction and ground truth.
  std::optional<double> iou() const;
};

struct IouReport {
  std::vector<ClassIou> classes;
  std::size_t image_count = 0;
  std::string road_name = "Road";
  std::string sidewalk_name = "Sidewalk";
  // Per-image IoUs averaged instead of pooling counts; only set by
  // aggregate_split in that mode.
  std::optional<std::vector<std::optional<double>>> mean_of_images;

  std::optional<double> class_iou(std::string_view name) const;
  // Mean over classes with a defined IoU.
  std::optional<double> macro() const;
  std::optional<double> avg_road_sidewalk() const;

  nlohmann::json to_json() const;
  // One fixed-width row: Method | classes... | Avg. | Avg. {R, S} in
  // percent with two decimals.
  std::string to_table(std::string_view method) const;
};

// Pixel rows/cols of the evaluation window: ego on the bottom row, centered
// horizontally, extending side_px forward.
struct WindowBounds {
  int row0, row1, col0, col1;  // inclusive
};
WindowBounds eval_window_bounds(int ego_row, int ego_col, int side_px, int raster_size);

IouReport masked_iou(const LabeledRaster& pred, const LabeledRaster& gt, const VisibilityMask& mask,
                     const EvalWindow& window = {});

enum class AggregateMode { kPooledCounts, kMeanOfImages };

// Sums counts per class across images, then divides.
IouReport aggregate_split(std::span<const IouReport> reports,
                          AggregateMode mode = AggregateMode::kPooledCounts);

}  // namespace mia
