#include "mia/eval.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mia/errors.hpp"

namespace mia {

using nlohmann::json;

const BinaryRaster* LabeledRaster::find(std::string_view name) const {
  for (const auto& [n, p] : planes) {
    if (n == name) return &p;
  }
  return nullptr;
}

LabeledRaster labeled(const SemanticBev& bev) {
  LabeledRaster out;
  out.rho = bev.rho;
  out.ego_row = bev.ego_row;
  out.ego_col = bev.ego_col;
  for (int k = 0; k < kNumClasses; ++k) out.planes.emplace_back(std::string(kClassNames[k]), bev.planes[k]);
  return out;
}

ClassMapping::ClassMapping(std::vector<Pair> pairs) : pairs_(std::move(pairs)) {
  std::set<std::string> sources, targets;
  for (const auto& [src, dst] : pairs_) {
    if (!sources.insert(src).second) throw ValidationError("class '" + src + "' mapped twice");
    if (dst && !targets.insert(*dst).second) {
      throw ValidationError("target class '" + *dst + "' used twice");
    }
  }
}

ClassMapping ClassMapping::identity() {
  std::vector<Pair> p;
  for (auto n : kClassNames) p.emplace_back(std::string(n), std::string(n));
  return ClassMapping(std::move(p));
}

ClassMapping ClassMapping::to_nuscenes() {
  return ClassMapping({{"Road", "Drivable"},
                       {"Crossing", "Crossing"},
                       {"Sidewalk", "Walkway"},
                       {"Building", std::nullopt},
                       {"Parking", "Carpark"},
                       {"Terrain", std::nullopt}});
}

ClassMapping ClassMapping::to_kitti360() {
  return ClassMapping({{"Road", "Road"},
                       {"Crossing", std::nullopt},
                       {"Sidewalk", "Sidewalk"},
                       {"Building", "Building"},
                       {"Parking", std::nullopt},
                       {"Terrain", "Terrain"}});
}

ClassMapping ClassMapping::load(const std::string& name_or_path) {
  if (name_or_path == "mia" || name_or_path == "identity") return identity();
  if (name_or_path == "nuscenes") return to_nuscenes();
  if (name_or_path == "kitti360") return to_kitti360();
  const json doc = json::parse(read_file_text(name_or_path), nullptr, false);
  if (doc.is_discarded() || !doc.contains("mapping") || !doc["mapping"].is_array()) {
    throw ValidationError("class mapping file " + name_or_path + " is malformed");
  }
  std::vector<Pair> pairs;
  for (const auto& p : doc["mapping"]) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !(p[1].is_string() || p[1].is_null())) {
      throw ValidationError("class mapping entries must be [source, target|null]");
    }
    pairs.emplace_back(p[0].get<std::string>(),
                       p[1].is_null() ? std::nullopt : std::optional(p[1].get<std::string>()));
  }
  return ClassMapping(std::move(pairs));
}

std::optional<std::string> ClassMapping::target_of(std::string_view source) const {
  for (const auto& [src, dst] : pairs_) {
    if (src == source) return dst;
  }
  return std::nullopt;
}

ClassMapping ClassMapping::inverse() const {
  std::vector<Pair> inv;
  for (const auto& [src, dst] : pairs_) {
    if (dst) inv.emplace_back(*dst, src);
  }
  return ClassMapping(std::move(inv));
}

BinaryRaster binarize(const Grid<float>& probabilities, float threshold) {
  BinaryRaster out(probabilities.rows(), probabilities.cols(), 0);
  const auto& in = probabilities.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const float v = in[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw ValidationError(fmt::format("probability {} outside [0, 1] at index {}", v, i));
    }
    out.data()[i] = v >= threshold ? 1 : 0;
  }
  return out;
}

LabeledRaster remap_classes(const LabeledRaster& raster, const ClassMapping& mapping) {
  LabeledRaster out;
  out.rho = raster.rho;
  out.ego_row = raster.ego_row;
  out.ego_col = raster.ego_col;
  for (const auto& [src, dst] : mapping.pairs()) {
    const BinaryRaster* plane = raster.find(src);
    if (!plane) throw ValidationError("raster has no class named '" + src + "'");
    if (dst) out.planes.emplace_back(*dst, *plane);
  }
  return out;
}

int EvalWindow::side_px() const {
  const double px = side_m / rho;
  if (!(rho > 0) || std::abs(px - std::round(px)) > 1e-9 || px < 1) {
    throw ValidationError("evaluation window is not a whole number of pixels");
  }
  return static_cast<int>(std::lround(px));
}

std::optional<double> ClassIou::iou() const {
  if (union_ == 0) return std::nullopt;
  return static_cast<double>(intersection) / static_cast<double>(union_);
}

std::optional<double> IouReport::class_iou(std::string_view name) const {
  if (mean_of_images) {
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (classes[i].name == name) return (*mean_of_images)[i];
    }
    return std::nullopt;
  }
  for (const auto& c : classes) {
    if (c.name == name) return c.iou();
  }
  return std::nullopt;
}

std::optional<double> IouReport::macro() const {
  double sum = 0.0;
  int n = 0;
  for (const auto& c : classes) {
    if (const auto v = class_iou(c.name)) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

std::optional<double> IouReport::avg_road_sidewalk() const {
  double sum = 0.0;
  int n = 0;
  for (const auto& name : {road_name, sidewalk_name}) {
    if (const auto v = class_iou(name)) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

json IouReport::to_json() const {
  auto opt = [](std::optional<double> v) { return v ? json(*v) : json(nullptr); };
  json classes_json = json::object();
  for (const auto& c : classes) {
    classes_json[c.name] = {{"intersection", c.intersection}, {"union", c.union_}, {"iou", opt(class_iou(c.name))}};
  }
  return json{{"classes", classes_json},
              {"class_order", [&] {
                 json order = json::array();
                 for (const auto& c : classes) order.push_back(c.name);
                 return order;
               }()},
              {"macro", opt(macro())},
              {"avg_rs", opt(avg_road_sidewalk())},
              {"image_count", image_count},
              {"aggregation", mean_of_images ? "mean_of_images" : "pooled_counts"}};
}

std::string IouReport::to_table(std::string_view method) const {
  auto cell = [](std::optional<double> v) {
    return v ? fmt::format("{:.2f}", *v * 100.0) : std::string("-");
  };
  std::ostringstream head, row;
  head << fmt::format("{:<12}", "Method");
  row << fmt::format("{:<12}", method);
  for (const auto& c : classes) {
    head << fmt::format(" | {:>9}", c.name);
    row << fmt::format(" | {:>9}", cell(class_iou(c.name)));
  }
  head << fmt::format(" | {:>7} | {:>11}", "Avg.", "Avg. {R, S}");
  row << fmt::format(" | {:>7} | {:>11}", cell(macro()), cell(avg_road_sidewalk()));
  return head.str() + "\n" + row.str() + "\n";
}

WindowBounds eval_window_bounds(int ego_row, int ego_col, int side_px, int raster_size) {
  WindowBounds b{ego_row - side_px + 1, ego_row, ego_col - side_px / 2, ego_col - side_px / 2 + side_px - 1};
  if (b.row0 < 0 || b.col0 < 0 || b.row1 >= raster_size || b.col1 >= raster_size) {
    throw ValidationError("evaluation window does not fit in the raster");
  }
  return b;
}

IouReport masked_iou(const LabeledRaster& pred, const LabeledRaster& gt, const VisibilityMask& mask,
                     const EvalWindow& window) {
  if (pred.rho != window.rho || gt.rho != window.rho) {
    throw ValidationError(fmt::format("resolution mismatch: pred {} m/px, gt {} m/px, window {} m/px",
                                      pred.rho, gt.rho, window.rho));
  }
  if (gt.planes.empty()) throw ValidationError("ground truth has no planes");
  const int n = gt.planes.front().second.rows();
  for (const auto* r : {&pred, &gt}) {
    for (const auto& [name, p] : r->planes) {
      if (p.rows() != n || p.cols() != n) throw ValidationError("plane '" + name + "' has a different shape");
    }
  }
  if (mask.visible.rows() != n || mask.visible.cols() != n) throw ValidationError("mask shape differs");
  const WindowBounds b = eval_window_bounds(gt.ego_row, gt.ego_col, window.side_px(), n);

  IouReport report;
  report.image_count = 1;
  for (const auto& [name, g] : gt.planes) {
    const BinaryRaster* p = pred.find(name);
    if (!p) throw ValidationError("prediction lacks class '" + name + "'");
    ClassIou c{name, 0, 0};
    for (int r = b.row0; r <= b.row1; ++r) {
      for (int col = b.col0; col <= b.col1; ++col) {
        if (!mask.visible.at(r, col)) continue;
        const bool pv = p->at(r, col) != 0, gv = g.at(r, col) != 0;
        c.intersection += (pv && gv) ? 1 : 0;
        c.union_ += (pv || gv) ? 1 : 0;
      }
    }
    report.classes.push_back(std::move(c));
  }
  return report;
}

IouReport aggregate_split(std::span<const IouReport> reports, AggregateMode mode) {
  if (reports.empty()) throw ValidationError("no reports to aggregate");
  IouReport out;
  out.road_name = reports.front().road_name;
  out.sidewalk_name = reports.front().sidewalk_name;
  out.classes = reports.front().classes;
  for (auto& c : out.classes) c.intersection = c.union_ = 0;
  std::vector<double> iou_sum(out.classes.size(), 0.0);
  std::vector<int> iou_n(out.classes.size(), 0);
  for (const auto& r : reports) {
    if (r.classes.size() != out.classes.size()) throw ValidationError("reports use different classes");
    out.image_count += r.image_count;
    for (std::size_t i = 0; i < r.classes.size(); ++i) {
      if (r.classes[i].name != out.classes[i].name) throw ValidationError("reports use different classes");
      out.classes[i].intersection += r.classes[i].intersection;
      out.classes[i].union_ += r.classes[i].union_;
      if (const auto v = r.classes[i].iou()) {
        iou_sum[i] += *v;
        ++iou_n[i];
      }
    }
  }
  if (mode == AggregateMode::kMeanOfImages) {
    std::vector<std::optional<double>> means;
    for (std::size_t i = 0; i < out.classes.size(); ++i) {
      means.push_back(iou_n[i] ? std::optional(iou_sum[i] / iou_n[i]) : std::nullopt);
    }
    out.mean_of_images = std::move(means);
  }
  return out;
}

}  // namespace mia
