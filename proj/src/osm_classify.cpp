#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mia/errors.hpp"
#include "mia/mapillary.hpp"
#include "mia/osm.hpp"
#include "mia/raster.hpp"

namespace mia {

using nlohmann::json;

std::string_view to_string(SemanticClass c) { return kClassNames[static_cast<int>(c)]; }

std::optional<SemanticClass> class_from_string(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i) {
    if (kClassNames[i] == name) return static_cast<SemanticClass>(i);
  }
  return std::nullopt;
}

UtmFrame UtmFrame::for_point(const GeoPoint& p) {
  return UtmFrame(utm_zone_for(p.lon()), p.lat() < 0 ? Hemisphere::kSouth : Hemisphere::kNorth);
}

Vec2 UtmFrame::project(const GeoPoint& p) const {
  const UtmPoint u = wgs84_to_utm(p, zone_);
  // Keep one northing origin for the whole frame even across the equator.
  double northing = u.northing;
  if (u.hemisphere != hemisphere_) northing += hemisphere_ == Hemisphere::kSouth ? 1e7 : -1e7;
  return {u.easting, northing};
}

GeoPoint UtmFrame::unproject(Vec2 en) const {
  return utm_to_wgs84(UtmPoint{en.x, en.y, zone_, hemisphere_});
}

bool TagRule::matches(const Tags& tags) const {
  for (const auto& m : match) {
    const auto it = tags.find(m.key);
    if (it == tags.end()) return false;
    if (!m.values.empty() &&
        std::find(m.values.begin(), m.values.end(), it->second) == m.values.end()) {
      return false;
    }
  }
  return !match.empty();
}

namespace {

std::string_view geometry_name(RuleGeometry g) {
  switch (g) {
    case RuleGeometry::kArea: return "area";
    case RuleGeometry::kLine: return "line";
    case RuleGeometry::kNode: return "node";
  }
  return "area";
}

RuleGeometry geometry_from_name(const std::string& s) {
  if (s == "area") return RuleGeometry::kArea;
  if (s == "line") return RuleGeometry::kLine;
  if (s == "node") return RuleGeometry::kNode;
  throw ValidationError("unknown rule geometry '" + s + "'");
}

}  // namespace

RuleTable RuleTable::defaults() {
  auto rule = [](SemanticClass c, RuleGeometry g, std::vector<TagMatcher> m) {
    return TagRule{c, g, std::move(m)};
  };
  using C = SemanticClass;
  using G = RuleGeometry;
  RuleTable t;
  t.rules = {
      rule(C::kCrossing, G::kLine, {{"highway", {"footway"}}, {"footway", {"crossing"}}}),
      rule(C::kCrossing, G::kNode, {{"highway", {"crossing"}}}),
      rule(C::kBuilding, G::kArea, {{"building", {}}}),
      rule(C::kRoad, G::kLine,
           {{"highway",
             {"motorway", "trunk", "primary", "secondary", "tertiary", "unclassified",
              "residential", "service", "living_street", "motorway_link", "trunk_link",
              "primary_link", "secondary_link", "tertiary_link"}}}),
      rule(C::kSidewalk, G::kLine, {{"highway", {"footway", "path", "pedestrian"}}}),
      rule(C::kSidewalk, G::kLine, {{"footway", {"sidewalk"}}}),
      rule(C::kParking, G::kArea, {{"amenity", {"parking"}}}),
      rule(C::kParking, G::kArea, {{"parking", {}}}),
      rule(C::kTerrain, G::kArea, {{"landuse", {"grass", "meadow"}}}),
      rule(C::kTerrain, G::kArea, {{"leisure", {"park"}}}),
      rule(C::kTerrain, G::kArea, {{"natural", {"wood", "scrub"}}}),
  };
  t.widths.highway_m = {
      {"motorway", 14.0},     {"trunk", 12.0},         {"primary", 10.0},
      {"secondary", 9.0},     {"tertiary", 8.0},       {"unclassified", 7.0},
      {"residential", 7.0},   {"service", 4.0},        {"living_street", 6.0},
      {"motorway_link", 7.0}, {"trunk_link", 7.0},     {"primary_link", 7.0},
      {"secondary_link", 7.0}, {"tertiary_link", 7.0},
  };
  return t;
}

RuleTable RuleTable::from_json(const json& doc) {
  try {
    RuleTable t;
    t.version = doc.at("version").get<int>();
    if (t.version != 1) throw ValidationError(fmt::format("unsupported rule table version {}", t.version));
    for (const auto& r : doc.at("rules")) {
      TagRule rule;
      const auto cls = class_from_string(r.at("class").get<std::string>());
      if (!cls) throw ValidationError("unknown class '" + r.at("class").get<std::string>() + "'");
      rule.cls = *cls;
      rule.geometry = geometry_from_name(r.at("geometry").get<std::string>());
      for (const auto& [key, val] : r.at("match").items()) {
        TagMatcher m{key, {}};
        if (val.is_array()) {
          m.values = val.get<std::vector<std::string>>();
        } else if (val.get<std::string>() != "*") {
          m.values = {val.get<std::string>()};
        }
        rule.match.push_back(std::move(m));
      }
      if (rule.match.empty()) throw ValidationError("rule with empty match");
      t.rules.push_back(std::move(rule));
    }
    const auto& w = doc.at("widths");
    t.widths.lane_m = w.at("lane_m").get<double>();
    t.widths.highway_m = w.at("highway_m").get<std::map<std::string, double>>();
    t.widths.default_road_m = w.at("default_road_m").get<double>();
    t.widths.sidewalk_m = w.at("sidewalk_m").get<double>();
    t.widths.footway_m = w.at("footway_m").get<double>();
    t.widths.crossing_way_m = w.at("crossing_way_m").get<double>();
    t.widths.sidewalk_suppression_m = w.at("sidewalk_suppression_m").get<double>();
    return t;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed rule table: ") + e.what());
  }
}

RuleTable RuleTable::load(const std::filesystem::path& path) {
  const json doc = json::parse(read_file_text(path), nullptr, false);
  if (doc.is_discarded()) throw ValidationError("rule table " + path.string() + " is not JSON");
  return from_json(doc);
}

json RuleTable::to_json() const {
  json rules_json = json::array();
  for (const auto& r : rules) {
    // nlohmann's default object type orders keys; rule matchers are
    // conjunctive so order is irrelevant.
    json match = json::object();
    for (const auto& m : r.match) {
      if (m.values.empty()) {
        match[m.key] = "*";
      } else if (m.values.size() == 1) {
        match[m.key] = m.values[0];
      } else {
        match[m.key] = m.values;
      }
    }
    rules_json.push_back({{"class", std::string(to_string(r.cls))},
                          {"geometry", std::string(geometry_name(r.geometry))},
                          {"match", match}});
  }
  return json{{"version", version},
              {"rules", rules_json},
              {"widths",
               {{"lane_m", widths.lane_m},
                {"highway_m", widths.highway_m},
                {"default_road_m", widths.default_road_m},
                {"sidewalk_m", widths.sidewalk_m},
                {"footway_m", widths.footway_m},
                {"crossing_way_m", widths.crossing_way_m},
                {"sidewalk_suppression_m", widths.sidewalk_suppression_m}}}};
}

double RuleTable::road_width(const Tags& tags) const {
  if (const auto it = tags.find("lanes"); it != tags.end()) {
    char* end = nullptr;
    const double lanes = std::strtod(it->second.c_str(), &end);
    if (end != it->second.c_str() && lanes > 0 && std::isfinite(lanes)) {
      return std::floor(lanes) * widths.lane_m;
    }
  }
  if (const auto it = tags.find("highway"); it != tags.end()) {
    if (const auto w = widths.highway_m.find(it->second); w != widths.highway_m.end()) {
      return w->second;
    }
  }
  return widths.default_road_m;
}

namespace {

const TagRule* first_rule(const RuleTable& rules, const Tags& tags, bool is_node, bool closed_way,
                          bool relation) {
  if (tags.empty()) return nullptr;
  for (const auto& r : rules.rules) {
    if (!r.matches(tags)) continue;
    switch (r.geometry) {
      case RuleGeometry::kNode:
        if (is_node) return &r;
        break;
      case RuleGeometry::kLine:
        if (!is_node && !relation) return &r;
        break;
      case RuleGeometry::kArea:
        if (closed_way || relation) return &r;
        break;
    }
  }
  return nullptr;
}

std::vector<Vec2> way_points(const OsmGraph& g, const OsmWay& w, const UtmFrame& frame) {
  std::vector<Vec2> pts;
  pts.reserve(w.nodes.size());
  for (OsmId id : w.nodes) pts.push_back(frame.project(g.nodes.at(id).point));
  return pts;
}

// Joins member ways into closed rings by matching endpoints.
std::vector<Ring> assemble_rings(const OsmGraph& g, const OsmRelation& rel, std::string_view role,
                                 const UtmFrame& frame) {
  std::vector<std::vector<OsmId>> open;
  std::vector<Ring> rings;
  for (const auto& m : rel.members) {
    if (m.type != "way" || (m.role != role && !(role == "outer" && m.role.empty()))) continue;
    const auto it = g.ways.find(m.ref);
    if (it == g.ways.end() || it->second.nodes.size() < 2) continue;
    open.push_back(it->second.nodes);
  }
  while (!open.empty()) {
    std::vector<OsmId> chain = std::move(open.back());
    open.pop_back();
    bool grew = true;
    while (chain.front() != chain.back() && grew) {
      grew = false;
      for (std::size_t i = 0; i < open.size(); ++i) {
        auto& seg = open[i];
        if (seg.front() == chain.back()) {
          chain.insert(chain.end(), seg.begin() + 1, seg.end());
        } else if (seg.back() == chain.back()) {
          chain.insert(chain.end(), seg.rbegin() + 1, seg.rend());
        } else {
          continue;
        }
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(i));
        grew = true;
        break;
      }
    }
    if (chain.size() >= 4 && chain.front() == chain.back()) {
      std::vector<Vec2> pts;
      for (OsmId id : chain) pts.push_back(frame.project(g.nodes.at(id).point));
      rings.push_back(open_ring(std::move(pts)));
    }
  }
  return rings;
}

double line_width(const RuleTable& rules, SemanticClass cls, const Tags& tags) {
  switch (cls) {
    case SemanticClass::kRoad: return rules.road_width(tags);
    case SemanticClass::kCrossing: return rules.widths.crossing_way_m;
    case SemanticClass::kSidewalk: {
      const auto it = tags.find("footway");
      return it != tags.end() && it->second == "sidewalk" ? rules.widths.sidewalk_m
                                                          : rules.widths.footway_m;
    }
    default: return rules.widths.footway_m;
  }
}

bool is_area_tagged(const Tags& tags) {
  const auto it = tags.find("area");
  return it != tags.end() && it->second == "yes";
}

std::string first_key(const Tags& tags) { return tags.empty() ? "(untagged)" : tags.begin()->first; }

// Square of side `side` centered at c with one axis along `dir`.
Polygon oriented_square(Vec2 c, Vec2 dir, double side) {
  const double len = norm(dir);
  const Vec2 u = len > 0 ? dir * (1.0 / len) : Vec2{1.0, 0.0};
  const Vec2 v{-u.y, u.x};
  const double h = side / 2.0;
  return Polygon{{c + u * (-h) + v * (-h), c + u * h + v * (-h), c + u * h + v * h, c + u * (-h) + v * h},
                 {}};
}

}  // namespace

Classification classify(const OsmGraph& graph, const RuleTable& rules, const UtmFrame& frame) {
  Classification out;
  auto& report = out.report;
  report.elements = graph.element_count();

  auto emit = [&](SemanticClass cls, Polygon poly, OsmId id, char type) {
    out.geometries.push_back(SemanticGeometry{cls, std::move(poly), id, type, false});
  };
  auto drop = [&](const Tags& tags) {
    ++report.dropped;
    ++report.dropped_by_key[first_key(tags)];
  };
  auto count = [&](SemanticClass cls) {
    ++report.classified;
    ++report.per_class[static_cast<int>(cls)];
  };

  // Road ways by id, for sizing crossing nodes.
  std::map<OsmId, double> road_width_by_node;

  for (const auto& [id, way] : graph.ways) {
    const TagRule* rule = first_rule(rules, way.tags, false, way.closed(), false);
    if (!rule) {
      drop(way.tags);
      continue;
    }
    const auto pts = way_points(graph, way, frame);
    std::size_t before = out.geometries.size();
    if (rule->geometry == RuleGeometry::kArea ||
        (way.closed() && is_area_tagged(way.tags) && rule->cls != SemanticClass::kRoad)) {
      Ring ring = open_ring(pts);
      if (ring.size() >= 3 && std::abs(ring_signed_area(ring)) > 0) {
        emit(rule->cls, Polygon{std::move(ring), {}}, id, 'w');
      }
    } else {
      try {
        for (auto& poly : expand_centerline(pts, line_width(rules, rule->cls, way.tags))) {
          emit(rule->cls, std::move(poly), id, 'w');
        }
      } catch (const ValidationError&) {
        // Zero-length way.
      }
    }
    if (out.geometries.size() == before) {
      drop(way.tags);
      continue;
    }
    count(rule->cls);
    if (rule->cls == SemanticClass::kRoad) {
      const double w = rules.road_width(way.tags);
      for (OsmId n : way.nodes) road_width_by_node.try_emplace(n, w);
    }
  }

  for (const auto& [id, rel] : graph.relations) {
    const auto type = rel.tags.find("type");
    const TagRule* rule =
        type != rel.tags.end() && type->second == "multipolygon"
            ? first_rule(rules, rel.tags, false, false, true)
            : nullptr;
    if (!rule) {
      drop(rel.tags);
      continue;
    }
    auto outers = assemble_rings(graph, rel, "outer", frame);
    auto inners = assemble_rings(graph, rel, "inner", frame);
    std::size_t before = out.geometries.size();
    for (auto& outer : outers) {
      Polygon poly{std::move(outer), {}};
      for (const auto& inner : inners) {
        if (!inner.empty() && point_in_polygon(inner.front(), Polygon{poly.outer, {}})) {
          poly.holes.push_back(inner);
        }
      }
      if (polygon_area(poly) > 0) emit(rule->cls, std::move(poly), id, 'r');
    }
    if (out.geometries.size() == before) {
      drop(rel.tags);
    } else {
      count(rule->cls);
    }
  }

  for (const auto& [id, node] : graph.nodes) {
    if (node.tags.empty()) continue;
    const TagRule* rule = first_rule(rules, node.tags, true, false, false);
    const auto width = road_width_by_node.find(id);
    if (!rule || width == road_width_by_node.end()) {
      drop(node.tags);
      continue;
    }
    // Orient the square along the first road segment through the node.
    Vec2 dir{1.0, 0.0};
    const Vec2 c = frame.project(node.point);
    for (const auto& [wid, way] : graph.ways) {
      const auto pos = std::find(way.nodes.begin(), way.nodes.end(), id);
      if (pos == way.nodes.end() || way.nodes.size() < 2) continue;
      const TagRule* wr = first_rule(rules, way.tags, false, way.closed(), false);
      if (!wr || wr->cls != SemanticClass::kRoad) continue;
      const auto next = pos + 1 != way.nodes.end() ? pos + 1 : pos - 1;
      dir = frame.project(graph.nodes.at(*next).point) - c;
      if (next < pos) dir = dir * -1.0;
      break;
    }
    emit(rule->cls, oriented_square(c, dir, width->second), id, 'n');
    count(rule->cls);
  }
  return out;
}

namespace {

struct SidewalkSides {
  bool left = false;
  bool right = false;
};

SidewalkSides sidewalk_sides(const Tags& tags) {
  SidewalkSides s;
  auto yes = [&](const char* key) {
    const auto it = tags.find(key);
    return it != tags.end() && it->second == "yes";
  };
  if (const auto it = tags.find("sidewalk"); it != tags.end()) {
    s.left = it->second == "both" || it->second == "left";
    s.right = it->second == "both" || it->second == "right";
  }
  if (yes("sidewalk:both")) s.left = s.right = true;
  if (yes("sidewalk:left")) s.left = true;
  if (yes("sidewalk:right")) s.right = true;
  return s;
}

// Side of the polyline p falls on: +1 left, -1 right, 0 on it. Uses the
// nearest segment.
int side_of(Vec2 p, std::span<const Vec2> line, Vec2* seg_dir) {
  double best = INFINITY;
  int side = 0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const double d = point_segment_distance(p, line[i], line[i + 1]);
    if (d < best) {
      best = d;
      const double c = cross(line[i + 1] - line[i], p - line[i]);
      side = (c > 0) - (c < 0);
      *seg_dir = line[i + 1] - line[i];
    }
  }
  return side;
}

// True when some vertex or 1 m sample of `walk` lies within `radius` of
// the road on `side` and runs roughly parallel to it.
bool has_parallel_walk(std::span<const Vec2> road, std::span<const Vec2> walk, int side,
                       double radius) {
  constexpr double kMinParallelCos = 0.866;  // 30 degrees
  for (std::size_t i = 0; i + 1 < walk.size(); ++i) {
    const Vec2 a = walk[i], b = walk[i + 1];
    const double len = norm(b - a);
    if (len == 0) continue;
    const int steps = std::max(1, static_cast<int>(std::ceil(len)));
    for (int k = 0; k <= steps; ++k) {
      const Vec2 p = a + (b - a) * (static_cast<double>(k) / steps);
      if (point_polyline_distance(p, road) > radius) continue;
      Vec2 dir;
      if (side_of(p, road, &dir) != side) continue;
      const double c = std::abs(dot(dir, b - a)) / (norm(dir) * len);
      if (c >= kMinParallelCos) return true;
    }
  }
  return false;
}

}  // namespace

std::vector<SemanticGeometry> infer_sidewalks(const OsmGraph& graph, const RuleTable& rules,
                                              const UtmFrame& frame) {
  std::vector<std::vector<Vec2>> mapped_walks;
  std::vector<std::pair<OsmId, const OsmWay*>> roads;
  for (const auto& [id, way] : graph.ways) {
    const TagRule* rule = first_rule(rules, way.tags, false, way.closed(), false);
    if (!rule || rule->geometry != RuleGeometry::kLine) continue;
    if (rule->cls == SemanticClass::kSidewalk) mapped_walks.push_back(way_points(graph, way, frame));
    if (rule->cls == SemanticClass::kRoad) roads.emplace_back(id, &way);
  }

  std::vector<SemanticGeometry> out;
  const double sw = rules.widths.sidewalk_m;
  for (const auto& [id, way] : roads) {
    const SidewalkSides sides = sidewalk_sides(way->tags);
    if (!sides.left && !sides.right) continue;
    const auto road = way_points(graph, *way, frame);
    const double rw = rules.road_width(way->tags);
    const double radius = rw / 2.0 + rules.widths.sidewalk_suppression_m;
    for (int side : {+1, -1}) {
      if ((side > 0 && !sides.left) || (side < 0 && !sides.right)) continue;
      const bool covered = std::any_of(mapped_walks.begin(), mapped_walks.end(), [&](const auto& w) {
        return has_parallel_walk(road, w, side, radius);
      });
      if (covered) continue;
      try {
        const auto center = offset_polyline(road, side * (rw / 2.0 + sw / 2.0));
        for (auto& poly : expand_centerline(center, sw)) {
          out.push_back(SemanticGeometry{SemanticClass::kSidewalk, std::move(poly), id, 'w', true});
        }
      } catch (const ValidationError&) {
      }
    }
  }
  return out;
}

FixtureOsmSource::FixtureOsmSource(std::filesystem::path dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("OSM fixture directory " + dir.string() + " missing");
  std::vector<std::filesystem::path> paths;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (ext == ".osm" || ext == ".json") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) {
    auto g = std::make_shared<OsmGraph>(parse_osm_file(p));
    GeoBox box;
    if (g->bounds) {
      box = *g->bounds;
    } else {
      box = GeoBox{90, 180, -90, -180};
      for (const auto& [id, n] : g->nodes) {
        box.south = std::min(box.south, n.point.lat());
        box.north = std::max(box.north, n.point.lat());
        box.west = std::min(box.west, n.point.lon());
        box.east = std::max(box.east, n.point.lon());
      }
    }
    files_.emplace_back(box, std::move(g));
  }
}

OsmGraph FixtureOsmSource::fetch(const GeoBox& box) {
  for (const auto& [bounds, graph] : files_) {
    if (bounds.contains(box)) return *graph;
  }
  throw IoError(fmt::format("no OSM fixture covers bbox {:.6f},{:.6f},{:.6f},{:.6f}", box.west,
                            box.south, box.east, box.north));
}

OsmGraph HttpOsmSource::fetch(const GeoBox& box) {
  const auto target = fmt::format("/api/0.6/map?bbox={:.7f},{:.7f},{:.7f},{:.7f}", box.west,
                                  box.south, box.east, box.north);
  return parse_osm(client_->get(target), OsmFormat::kXml);
}

}  // namespace mia
