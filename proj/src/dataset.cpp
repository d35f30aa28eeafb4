#include "mia/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mia/errors.hpp"
#include "mia/raster.hpp"

namespace mia {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumSplits> kSplitNames = {"train", "val", "test"};

std::string_view hemisphere_code(Hemisphere h) { return h == Hemisphere::kNorth ? "N" : "S"; }

Hemisphere hemisphere_from(std::string_view s) {
  if (s == "N") return Hemisphere::kNorth;
  if (s == "S") return Hemisphere::kSouth;
  throw ParseError("hemisphere must be N or S, got '" + std::string(s) + "'");
}

// splitmix64 finalizer; a stable tie-break key independent of the
// standard library.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string_view to_string(Split s) { return kSplitNames[static_cast<int>(s)]; }

Split split_from_string(std::string_view s) {
  for (int i = 0; i < kNumSplits; ++i) {
    if (kSplitNames[i] == s) return static_cast<Split>(i);
  }
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

bool operator==(const ManifestRecord& a, const ManifestRecord& b) {
  return a.id == b.id && a.sequence_id == b.sequence_id && a.lat == b.lat && a.lon == b.lon &&
         a.utm.easting == b.utm.easting && a.utm.northing == b.utm.northing &&
         a.utm.zone == b.utm.zone && a.utm.hemisphere == b.utm.hemisphere &&
         a.heading_deg == b.heading_deg && a.captured_at == b.captured_at &&
         a.camera_model == b.camera_model && a.camera_type == b.camera_type && a.focal == b.focal &&
         a.split == b.split && a.fpv_path == b.fpv_path && a.bev_path == b.bev_path &&
         a.mask_path == b.mask_path;
}

void DatasetManifest::normalize() {
  std::sort(records.begin(), records.end(),
            [](const ManifestRecord& a, const ManifestRecord& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].id == records[i - 1].id) {
      throw ValidationError("duplicate image id " + records[i].id + " in manifest");
    }
  }
}

namespace {

template <typename T>
T field(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end()) throw ParseError(std::string("manifest record lacks '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("manifest field '") + key + "' has the wrong type");
  }
}

std::string dump_record(const ManifestRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["sequence_id"] = r.sequence_id;
  j["lat"] = r.lat;
  j["lon"] = r.lon;
  j["utm_easting"] = r.utm.easting;
  j["utm_northing"] = r.utm.northing;
  j["utm_zone"] = r.utm.zone;
  j["utm_hemisphere"] = hemisphere_code(r.utm.hemisphere);
  j["heading_deg"] = r.heading_deg;
  j["captured_at"] = r.captured_at;
  j["camera_model"] = r.camera_model;
  j["camera_type"] = r.camera_type;
  j["focal"] = r.focal;
  j["split"] = to_string(r.split);
  j["fpv_path"] = r.fpv_path;
  j["bev_path"] = r.bev_path;
  j["mask_path"] = r.mask_path;
  return j.dump();
}

void check_relative(const std::string& p, const char* key) {
  if (!p.empty() && std::filesystem::path(p).is_absolute()) {
    throw ValidationError(std::string("manifest path '") + key + "' must be relative: " + p);
  }
}

}  // namespace

json record_to_json(const ManifestRecord& r) { return json::parse(dump_record(r)); }

ManifestRecord record_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("manifest record is not an object");
  ManifestRecord r;
  r.id = field<std::string>(doc, "id");
  r.sequence_id = field<std::string>(doc, "sequence_id");
  r.lat = field<double>(doc, "lat");
  r.lon = field<double>(doc, "lon");
  r.utm.easting = field<double>(doc, "utm_easting");
  r.utm.northing = field<double>(doc, "utm_northing");
  r.utm.zone = field<int>(doc, "utm_zone");
  r.utm.hemisphere = hemisphere_from(field<std::string>(doc, "utm_hemisphere"));
  r.heading_deg = field<double>(doc, "heading_deg");
  r.captured_at = field<std::int64_t>(doc, "captured_at");
  r.camera_model = field<std::string>(doc, "camera_model");
  r.camera_type = field<std::string>(doc, "camera_type");
  r.focal = field<double>(doc, "focal");
  try {
    r.split = split_from_string(field<std::string>(doc, "split"));
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
  r.fpv_path = field<std::string>(doc, "fpv_path");
  r.bev_path = field<std::string>(doc, "bev_path");
  r.mask_path = field<std::string>(doc, "mask_path");
  return r;
}

std::string format_manifest(const DatasetManifest& m) {
  DatasetManifest sorted = m;
  sorted.normalize();
  std::string out = fmt::format("{{\"mia_manifest\":{}}}\n", kManifestVersion);
  for (const auto& r : sorted.records) {
    check_relative(r.fpv_path, "fpv_path");
    check_relative(r.bev_path, "bev_path");
    check_relative(r.mask_path, "mask_path");
    out += dump_record(r);
    out += '\n';
  }
  return out;
}

DatasetManifest parse_manifest(std::string_view text) {
  DatasetManifest m;
  std::size_t pos = 0, line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw ParseError(fmt::format("manifest line {} is not valid JSON", line_no));
    if (!header_seen) {
      if (!doc.is_object() || !doc.contains("mia_manifest") || !doc["mia_manifest"].is_number_integer()) {
        throw ParseError("manifest lacks a version header line");
      }
      const int version = doc["mia_manifest"].get<int>();
      if (version != kManifestVersion) {
        throw ParseError(fmt::format("manifest version {} is not supported (expected {})", version,
                                     kManifestVersion));
      }
      header_seen = true;
      continue;
    }
    try {
      m.records.push_back(record_from_json(doc));
    } catch (const ParseError& e) {
      throw ParseError(fmt::format("manifest line {}: {}", line_no, e.what()));
    }
  }
  if (!header_seen) throw ParseError("manifest lacks a version header line");
  m.normalize();
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  write_file_atomic(path, format_manifest(m));
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file_text(path));
}

CellId cell_of(const UtmPoint& p, double cell_m) {
  return {p.zone, p.hemisphere, static_cast<std::int64_t>(std::floor(p.easting / cell_m)),
          static_cast<std::int64_t>(std::floor(p.northing / cell_m))};
}

Split SplitAssignment::split_of(const UtmPoint& p) const {
  const auto it = cells.find(cell_of(p, cell_m));
  if (it == cells.end()) throw ValidationError("pose lies in a cell with no split");
  return it->second;
}

SplitAssignment split_geographic(std::span<const UtmPoint> poses, const SplitOptions& opts) {
  const double sum = std::accumulate(opts.ratios.begin(), opts.ratios.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-9 ||
      std::any_of(opts.ratios.begin(), opts.ratios.end(), [](double r) { return r < 0; })) {
    throw ValidationError("split ratios must be non-negative and sum to 1");
  }
  if (!(opts.cell_m > 0)) throw ValidationError("cell size must be positive");

  std::map<CellId, std::size_t> counts;
  for (const auto& p : poses) ++counts[cell_of(p, opts.cell_m)];
  if (counts.size() < static_cast<std::size_t>(kNumSplits)) {
    throw ValidationError(fmt::format("{} grid cell(s) cannot fill {} splits", counts.size(), kNumSplits));
  }

  struct Entry {
    CellId id;
    std::size_t count;
    std::uint64_t tie;
  };
  std::vector<Entry> order;
  order.reserve(counts.size());
  for (const auto& [id, n] : counts) {
    std::uint64_t h = mix(opts.seed);
    h = mix(h ^ static_cast<std::uint64_t>(id.zone) ^ (id.hemisphere == Hemisphere::kSouth ? 1ULL << 32 : 0));
    h = mix(h ^ static_cast<std::uint64_t>(id.ix));
    h = mix(h ^ static_cast<std::uint64_t>(id.iy));
    order.push_back({id, n, h});
  }
  std::sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.tie != b.tie) return a.tie < b.tie;
    return a.id < b.id;
  });

  SplitAssignment out;
  out.cell_m = opts.cell_m;
  const double total = static_cast<double>(poses.size());
  for (const auto& e : order) {
    int best = 0;
    double best_deficit = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < kNumSplits; ++s) {
      const double deficit = opts.ratios[s] * total - static_cast<double>(out.images[s]);
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = s;
      }
    }
    out.cells.emplace(e.id, static_cast<Split>(best));
    out.images[best] += e.count;
  }
  return out;
}

double coverage_km2(std::span<const UtmPoint> poses, double radius_m) {
  if (!(radius_m > 0)) throw ValidationError("coverage radius must be positive");
  if (poses.empty()) return 0.0;

  std::map<std::pair<int, Hemisphere>, std::vector<const UtmPoint*>> by_zone;
  for (const auto& p : poses) by_zone[{p.zone, p.hemisphere}].push_back(&p);

  std::size_t cells = 0;
  for (const auto& [zone, pts] : by_zone) {
    double min_e = pts.front()->easting, min_n = pts.front()->northing;
    for (const auto* p : pts) {
      min_e = std::min(min_e, p->easting);
      min_n = std::min(min_n, p->northing);
    }
    // 1 m cells; cell (i, j) has its center at origin + (i + 0.5, j + 0.5).
    const double x0 = std::floor(min_e - radius_m) - 1.0;
    const double y0 = std::floor(min_n - radius_m) - 1.0;
    // (row, first col, last col) spans, merged per row afterwards.
    std::vector<std::array<std::int64_t, 3>> spans;
    const double r2 = radius_m * radius_m;
    for (const auto* p : pts) {
      const double px = p->easting - x0, py = p->northing - y0;
      const auto j0 = static_cast<std::int64_t>(std::ceil(py - radius_m - 0.5));
      const auto j1 = static_cast<std::int64_t>(std::floor(py + radius_m - 0.5));
      for (std::int64_t j = j0; j <= j1; ++j) {
        const double dy = j + 0.5 - py;
        const double rem = r2 - dy * dy;
        if (rem < 0) continue;
        const double half = std::sqrt(rem);
        const auto i0 = static_cast<std::int64_t>(std::ceil(px - half - 0.5));
        const auto i1 = static_cast<std::int64_t>(std::floor(px + half - 0.5));
        if (i0 <= i1) spans.push_back({j, i0, i1});
      }
    }
    std::sort(spans.begin(), spans.end());
    std::size_t k = 0;
    while (k < spans.size()) {
      const std::int64_t row = spans[k][0];
      std::int64_t lo = spans[k][1], hi = spans[k][2];
      for (++k; k < spans.size() && spans[k][0] == row; ++k) {
        if (spans[k][1] > hi + 1) {
          cells += static_cast<std::size_t>(hi - lo + 1);
          lo = spans[k][1];
          hi = spans[k][2];
        } else {
          hi = std::max(hi, spans[k][2]);
        }
      }
      cells += static_cast<std::size_t>(hi - lo + 1);
    }
  }
  return static_cast<double>(cells) / 1e6;
}

json filter_report_to_json(const FilterReport& r) {
  json stages = json::array();
  for (const auto& s : r.stages) {
    stages.push_back({{"name", s.name},
                      {"images_in", s.images_in},
                      {"images_out", s.images_out},
                      {"percent_of_initial", s.percent_of_initial}});
  }
  return json{{"stages", stages}};
}

FilterReport filter_report_from_json(const json& doc) {
  FilterReport r;
  try {
    for (const auto& s : doc.at("stages")) {
      r.stages.push_back({s.at("name").get<std::string>(), s.at("images_in").get<std::size_t>(),
                          s.at("images_out").get<std::size_t>(),
                          s.at("percent_of_initial").get<double>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed filter report: ") + e.what());
  }
  return r;
}

DatasetStats compute_stats(const DatasetManifest& m) {
  DatasetStats s;
  s.images = m.records.size();
  std::set<std::string> sequences;
  std::vector<UtmPoint> poses;
  poses.reserve(m.records.size());
  for (const auto& r : m.records) {
    sequences.insert(r.sequence_id);
    poses.push_back(r.utm);
    ++s.per_split[static_cast<int>(r.split)];
    ++s.per_camera_model[r.camera_model.empty() ? "(unknown)" : r.camera_model];
    ++s.per_camera_type[r.camera_type];
  }
  s.sequences = sequences.size();
  s.coverage_km2 = coverage_km2(poses);
  return s;
}

json DatasetStats::to_json() const {
  json j{{"images", images},
         {"sequences", sequences},
         {"coverage_km2", coverage_km2},
         {"splits", {{"train", per_split[0]}, {"val", per_split[1]}, {"test", per_split[2]}}},
         {"camera_models", per_camera_model},
         {"camera_types", per_camera_type}};
  if (filter_report) j["filter_report"] = filter_report_to_json(*filter_report);
  return j;
}

std::string DatasetStats::to_text() const {
  std::ostringstream os;
  os << fmt::format("images       {}\n", images);
  os << fmt::format("sequences    {}\n", sequences);
  os << fmt::format("coverage     {:.4f} km^2\n", coverage_km2);
  os << fmt::format("splits       train {} / val {} / test {}\n", per_split[0], per_split[1], per_split[2]);
  os << "camera models\n";
  for (const auto& [k, v] : per_camera_model) os << fmt::format("  {:<24} {}\n", k, v);
  os << "camera types\n";
  for (const auto& [k, v] : per_camera_type) os << fmt::format("  {:<24} {}\n", k, v);
  if (filter_report) os << "\n" << filter_report->to_table();
  return os.str();
}

}  // namespace mia
