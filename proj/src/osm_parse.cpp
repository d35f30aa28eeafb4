#include <charconv>
#include <cstring>
#include <set>

#include <expat.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mia/errors.hpp"
#include "mia/osm.hpp"
#include "mia/raster.hpp"

namespace mia {

std::size_t OsmGraph::element_count() const {
  std::size_t tagged_nodes = 0;
  for (const auto& [id, n] : nodes) tagged_nodes += n.tags.empty() ? 0 : 1;
  return tagged_nodes + ways.size() + relations.size();
}

namespace {

struct XmlState {
  XML_Parser parser = nullptr;
  OsmGraph graph;
  enum class Current { kNone, kNode, kWay, kRelation } current = Current::kNone;
  OsmId current_id = 0;
  std::string error;
};

[[noreturn]] void fail_at(XmlState& st, const std::string& what) {
  throw ParseError(fmt::format("OSM XML error at byte {}: {}",
                               XML_GetCurrentByteIndex(st.parser), what));
}

const char* attr(const XML_Char** atts, const char* name) {
  for (int i = 0; atts[i]; i += 2) {
    if (std::strcmp(atts[i], name) == 0) return atts[i + 1];
  }
  return nullptr;
}

OsmId parse_id(XmlState& st, const char* s, const char* what) {
  if (!s) fail_at(st, fmt::format("{} without id", what));
  OsmId v = 0;
  const char* end = s + std::strlen(s);
  auto [ptr, ec] = std::from_chars(s, end, v);
  if (ec != std::errc() || ptr != end) fail_at(st, fmt::format("bad {} id '{}'", what, s));
  return v;
}

double parse_double(XmlState& st, const char* s, const char* what) {
  if (!s) fail_at(st, fmt::format("missing {}", what));
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0') fail_at(st, fmt::format("bad {} '{}'", what, s));
  return v;
}

Tags* current_tags(XmlState& st) {
  switch (st.current) {
    case XmlState::Current::kNode: return &st.graph.nodes[st.current_id].tags;
    case XmlState::Current::kWay: return &st.graph.ways[st.current_id].tags;
    case XmlState::Current::kRelation: return &st.graph.relations[st.current_id].tags;
    default: return nullptr;
  }
}

void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** atts) {
  auto& st = *static_cast<XmlState*>(user);
  try {
    if (std::strcmp(name, "node") == 0) {
      const OsmId id = parse_id(st, attr(atts, "id"), "node");
      const double lat = parse_double(st, attr(atts, "lat"), "lat");
      const double lon = parse_double(st, attr(atts, "lon"), "lon");
      st.graph.nodes[id] = OsmNode{GeoPoint(lat, lon), {}};
      st.current = XmlState::Current::kNode;
      st.current_id = id;
    } else if (std::strcmp(name, "way") == 0) {
      st.current_id = parse_id(st, attr(atts, "id"), "way");
      st.graph.ways[st.current_id] = OsmWay{};
      st.current = XmlState::Current::kWay;
    } else if (std::strcmp(name, "relation") == 0) {
      st.current_id = parse_id(st, attr(atts, "id"), "relation");
      st.graph.relations[st.current_id] = OsmRelation{};
      st.current = XmlState::Current::kRelation;
    } else if (std::strcmp(name, "nd") == 0) {
      if (st.current != XmlState::Current::kWay) fail_at(st, "<nd> outside <way>");
      st.graph.ways[st.current_id].nodes.push_back(parse_id(st, attr(atts, "ref"), "nd"));
    } else if (std::strcmp(name, "member") == 0) {
      if (st.current != XmlState::Current::kRelation) fail_at(st, "<member> outside <relation>");
      const char* type = attr(atts, "type");
      const char* role = attr(atts, "role");
      st.graph.relations[st.current_id].members.push_back(
          OsmMember{type ? type : "", parse_id(st, attr(atts, "ref"), "member"), role ? role : ""});
    } else if (std::strcmp(name, "tag") == 0) {
      const char* k = attr(atts, "k");
      const char* v = attr(atts, "v");
      if (!k || !v) fail_at(st, "<tag> without k/v");
      if (Tags* tags = current_tags(st)) (*tags)[k] = v;
    } else if (std::strcmp(name, "bounds") == 0) {
      st.graph.bounds = GeoBox{parse_double(st, attr(atts, "minlat"), "minlat"),
                               parse_double(st, attr(atts, "minlon"), "minlon"),
                               parse_double(st, attr(atts, "maxlat"), "maxlat"),
                               parse_double(st, attr(atts, "maxlon"), "maxlon")};
    }
  } catch (const DomainError& e) {
    st.error = fmt::format("OSM XML error at byte {}: {}", XML_GetCurrentByteIndex(st.parser), e.what());
    XML_StopParser(st.parser, XML_FALSE);
  } catch (const ParseError& e) {
    st.error = e.what();
    XML_StopParser(st.parser, XML_FALSE);
  }
}

void XMLCALL on_end(void* user, const XML_Char* name) {
  auto& st = *static_cast<XmlState*>(user);
  if (std::strcmp(name, "node") == 0 || std::strcmp(name, "way") == 0 ||
      std::strcmp(name, "relation") == 0) {
    st.current = XmlState::Current::kNone;
  }
}

OsmGraph parse_xml(std::string_view doc) {
  XmlState st;
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
      XML_ParserCreate(nullptr), &XML_ParserFree);
  st.parser = parser.get();
  XML_SetUserData(st.parser, &st);
  XML_SetElementHandler(st.parser, on_start, on_end);
  const auto status = XML_Parse(st.parser, doc.data(), static_cast<int>(doc.size()), XML_TRUE);
  if (!st.error.empty()) throw ParseError(st.error);
  if (status != XML_STATUS_OK) {
    throw ParseError(fmt::format("OSM XML error at byte {}: {}", XML_GetCurrentByteIndex(st.parser),
                                 XML_ErrorString(XML_GetErrorCode(st.parser))));
  }
  return std::move(st.graph);
}

Tags json_tags(const nlohmann::json& el) {
  Tags tags;
  if (el.contains("tags")) {
    for (const auto& [k, v] : el["tags"].items()) {
      tags[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  return tags;
}

OsmGraph parse_overpass_json(std::string_view doc) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(doc);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("OSM JSON error at byte {}: {}", e.byte, e.what()));
  }
  if (!root.is_object() || !root.contains("elements") || !root["elements"].is_array()) {
    throw ParseError("OSM JSON error at byte 0: missing 'elements' array");
  }
  OsmGraph g;
  if (root.contains("bounds")) {
    const auto& b = root["bounds"];
    g.bounds = GeoBox{b.at("minlat").get<double>(), b.at("minlon").get<double>(),
                      b.at("maxlat").get<double>(), b.at("maxlon").get<double>()};
  }
  std::size_t index = 0;
  for (const auto& el : root["elements"]) {
    try {
      const std::string type = el.at("type").get<std::string>();
      const OsmId id = el.at("id").get<OsmId>();
      if (type == "node") {
        g.nodes[id] = OsmNode{GeoPoint(el.at("lat").get<double>(), el.at("lon").get<double>()),
                              json_tags(el)};
      } else if (type == "way") {
        OsmWay w;
        w.nodes = el.at("nodes").get<std::vector<OsmId>>();
        w.tags = json_tags(el);
        g.ways[id] = std::move(w);
      } else if (type == "relation") {
        OsmRelation r;
        for (const auto& m : el.at("members")) {
          r.members.push_back(OsmMember{m.at("type").get<std::string>(), m.at("ref").get<OsmId>(),
                                        m.value("role", "")});
        }
        r.tags = json_tags(el);
        g.relations[id] = std::move(r);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("OSM JSON element {} malformed: {}", index, e.what()));
    } catch (const DomainError& e) {
      throw ParseError(fmt::format("OSM JSON element {}: {}", index, e.what()));
    }
    ++index;
  }
  return g;
}

void check_references(const OsmGraph& g) {
  std::set<OsmId> missing;
  for (const auto& [id, w] : g.ways) {
    for (OsmId ref : w.nodes) {
      if (!g.nodes.contains(ref)) missing.insert(ref);
    }
  }
  if (missing.empty()) return;
  std::string list;
  for (OsmId id : missing) {
    if (!list.empty()) list += ", ";
    list += std::to_string(id);
  }
  throw ParseError("ways reference missing nodes: " + list);
}

}  // namespace

OsmGraph parse_osm(std::string_view document, OsmFormat format) {
  OsmGraph g = format == OsmFormat::kXml ? parse_xml(document) : parse_overpass_json(document);
  check_references(g);
  return g;
}

OsmGraph parse_osm_file(const std::filesystem::path& path) {
  const std::string text = read_file_text(path);
  const auto ext = path.extension().string();
  return parse_osm(text, ext == ".json" ? OsmFormat::kOverpassJson : OsmFormat::kXml);
}

}  // namespace mia
