#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mia/geodesy.hpp"
#include "mia/geometry.hpp"

namespace mia {

class ApiClient;

// Raster bit-plane order. Never renumber.
enum class SemanticClass : std::uint8_t {
  kRoad = 0,
  kParking = 1,
  kSidewalk = 2,
  kCrossing = 3,
  kBuilding = 4,
  kTerrain = 5,
};

inline constexpr int kNumClasses = 6;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "Road", "Parking", "Sidewalk", "Crossing", "Building", "Terrain"};

std::string_view to_string(SemanticClass c);
std::optional<SemanticClass> class_from_string(std::string_view name);

using Tags = std::map<std::string, std::string>;
using OsmId = std::int64_t;

struct OsmNode {
  GeoPoint point;
  Tags tags;
  friend bool operator==(const OsmNode&, const OsmNode&) = default;
};

struct OsmWay {
  std::vector<OsmId> nodes;
  Tags tags;
  bool closed() const { return nodes.size() >= 4 && nodes.front() == nodes.back(); }
  friend bool operator==(const OsmWay&, const OsmWay&) = default;
};

struct OsmMember {
  std::string type;  // node | way | relation
  OsmId ref = 0;
  std::string role;
  friend bool operator==(const OsmMember&, const OsmMember&) = default;
};

struct OsmRelation {
  std::vector<OsmMember> members;
  Tags tags;
  friend bool operator==(const OsmRelation&, const OsmRelation&) = default;
};

struct GeoBox {
  double south = 0.0;
  double west = 0.0;
  double north = 0.0;
  double east = 0.0;

  bool contains(const GeoBox& o) const {
    return o.south >= south && o.north <= north && o.west >= west && o.east <= east;
  }
  friend bool operator==(const GeoBox&, const GeoBox&) = default;
};

struct OsmGraph {
  std::map<OsmId, OsmNode> nodes;
  std::map<OsmId, OsmWay> ways;
  std::map<OsmId, OsmRelation> relations;
  std::optional<GeoBox> bounds;

  // Ways, relations, and tagged nodes.
  std::size_t element_count() const;
  friend bool operator==(const OsmGraph&, const OsmGraph&) = default;
};

enum class OsmFormat { kXml, kOverpassJson };

// Throws ParseError with a byte offset for malformed input and with the
// missing ids for dangling way references.
OsmGraph parse_osm(std::string_view document, OsmFormat format);
OsmGraph parse_osm_file(const std::filesystem::path& path);

// Projects geographic points into one fixed UTM zone.
class UtmFrame {
 public:
  explicit UtmFrame(int zone, Hemisphere hemisphere = Hemisphere::kNorth)
      : zone_(zone), hemisphere_(hemisphere) {}
  static UtmFrame for_point(const GeoPoint& p);

  Vec2 project(const GeoPoint& p) const;
  GeoPoint unproject(Vec2 en) const;
  int zone() const { return zone_; }
  Hemisphere hemisphere() const { return hemisphere_; }

 private:
  int zone_;
  Hemisphere hemisphere_;
};

enum class RuleGeometry { kArea, kLine, kNode };

struct TagMatcher {
  std::string key;
  // Empty = any value ("*").
  std::vector<std::string> values;
};

struct TagRule {
  SemanticClass cls = SemanticClass::kRoad;
  RuleGeometry geometry = RuleGeometry::kArea;
  std::vector<TagMatcher> match;  // all must hold

  bool matches(const Tags& tags) const;
};

struct WidthTable {
  double lane_m = 3.5;
  std::map<std::string, double> highway_m;
  double default_road_m = 7.0;
  double sidewalk_m = 2.0;
  double footway_m = 2.0;
  double crossing_way_m = 3.0;
  // Mapped sidewalks within road_width/2 + this suppress inference.
  double sidewalk_suppression_m = 3.0;
};

struct RuleTable {
  int version = 1;
  std::vector<TagRule> rules;  // priority order
  WidthTable widths;

  static RuleTable defaults();
  static RuleTable from_json(const nlohmann::json& doc);
  static RuleTable load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // lanes x lane width when `lanes` is numeric, otherwise the per-type
  // default.
  double road_width(const Tags& tags) const;
};

struct SemanticGeometry {
  SemanticClass cls = SemanticClass::kRoad;
  Polygon shape;  // UTM meters
  OsmId source = 0;
  char source_type = 'w';  // n | w | r
  bool inferred = false;
};

struct ClassificationReport {
  std::size_t elements = 0;
  std::size_t classified = 0;
  std::size_t dropped = 0;
  std::array<std::size_t, kNumClasses> per_class{};
  // Dropped elements by their first tag key ("(untagged)" when none).
  std::map<std::string, std::size_t> dropped_by_key;
};

struct Classification {
  std::vector<SemanticGeometry> geometries;
  ClassificationReport report;
};

Classification classify(const OsmGraph& graph, const RuleTable& rules, const UtmFrame& frame);

// Sidewalk polygons for road ways whose sidewalk tags promise sidewalks no
// mapped way provides.
std::vector<SemanticGeometry> infer_sidewalks(const OsmGraph& graph, const RuleTable& rules,
                                              const UtmFrame& frame);

// Source of OSM data for a geographic box.
class OsmSource {
 public:
  virtual ~OsmSource() = default;
  virtual OsmGraph fetch(const GeoBox& box) = 0;
};

// Serves the first .osm/.json file (in name order) whose declared bounds
// contain the request.
class FixtureOsmSource : public OsmSource {
 public:
  explicit FixtureOsmSource(std::filesystem::path dir);
  OsmGraph fetch(const GeoBox& box) override;

 private:
  std::vector<std::pair<GeoBox, std::shared_ptr<const OsmGraph>>> files_;
};

// OSM API v0.6 `map` call.
class HttpOsmSource : public OsmSource {
 public:
  explicit HttpOsmSource(std::shared_ptr<ApiClient> client) : client_(std::move(client)) {}
  OsmGraph fetch(const GeoBox& box) override;

 private:
  std::shared_ptr<ApiClient> client_;
};

}  // namespace mia
