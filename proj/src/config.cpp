#include "mia/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mia/errors.hpp"
#include "mia/mapillary.hpp"
#include "mia/raster.hpp"

namespace mia {

using nlohmann::json;

CurationConfig CurationConfig::defaults() {
  CurationConfig c;
  c.camera_allowlist = default_camera_allowlist();
  c.api_base = std::string(kDefaultApiBase);
  return c;
}

void CurationConfig::validate() const {
  if (region.empty() == boundary_file.empty()) {
    throw ValidationError("give exactly one of --region or --boundary-file");
  }
  if (!region.empty() && regions_file.empty()) throw ValidationError("--region needs --regions-file");
  if (bev.alpha_px <= 0 || bev.delta_px < 0 || !(bev.rho > 0)) {
    throw ValidationError("BEV needs alpha > 0, delta >= 0, rho > 0");
  }
  if (penetration_px < 0) throw ValidationError("penetration must be non-negative");
  if (workers < 1) throw ValidationError("workers must be at least 1");
  if (!(split_cell_m > 0)) throw ValidationError("split cell size must be positive");
  if (requests_per_second < 0) throw ValidationError("request rate must be non-negative");
  if (out.empty()) throw ValidationError("output root is empty");
  const std::string name = city_name();
  if (name.empty() || name.find_first_of("/\\") != std::string::npos || name == "." || name == "..") {
    throw ValidationError("city name '" + name + "' is not a plain directory name");
  }
}

std::string CurationConfig::city_name() const {
  if (!city.empty()) return city;
  if (!region.empty()) return region;
  return boundary_file.stem().string();
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const std::string t = trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ValidationError(fmt::format("{}: '{}' is not an integer", key, v));
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  char* end = nullptr;
  const double d = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(d)) {
    throw ValidationError(fmt::format("{}: '{}' is not a number", key, v));
  }
  return d;
}

bool parse_bool(const std::string& key, const std::string& v) {
  std::string t = trim(v);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ValidationError(fmt::format("{}: '{}' is not a boolean", key, v));
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    const auto end = std::min(v.find(',', pos), v.size());
    std::string item = trim(std::string_view(v).substr(pos, end - pos));
    if (!item.empty()) out.push_back(std::move(item));
    pos = end + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <typename T>
ConfigField integer_field(std::string key, T CurationConfig::*member) {
  return {key, [key, member](CurationConfig& c, const std::string& v) { c.*member = parse_integer<T>(key, v); },
          [member](const CurationConfig& c) { return fmt::format("{}", c.*member); }};
}

ConfigField double_field(std::string key, double CurationConfig::*member) {
  return {key, [key, member](CurationConfig& c, const std::string& v) { c.*member = parse_double(key, v); },
          [member](const CurationConfig& c) { return fmt::format("{}", c.*member); }};
}

ConfigField bool_field(std::string key, bool CurationConfig::*member) {
  return {key, [key, member](CurationConfig& c, const std::string& v) { c.*member = parse_bool(key, v); },
          [member](const CurationConfig& c) { return fmt_bool(c.*member); }};
}

ConfigField string_field(std::string key, std::string CurationConfig::*member) {
  return {key, [member](CurationConfig& c, const std::string& v) { c.*member = v; },
          [member](const CurationConfig& c) { return c.*member; }};
}

ConfigField path_field(std::string key, std::filesystem::path CurationConfig::*member) {
  return {key, [member](CurationConfig& c, const std::string& v) { c.*member = v; },
          [member](const CurationConfig& c) { return (c.*member).string(); }};
}

std::vector<ConfigField> make_fields() {
  std::vector<ConfigField> f;
  f.push_back(string_field("region", &CurationConfig::region));
  f.push_back(path_field("regions_file", &CurationConfig::regions_file));
  f.push_back(path_field("boundary_file", &CurationConfig::boundary_file));
  f.push_back(string_field("city", &CurationConfig::city));
  f.push_back(path_field("out", &CurationConfig::out));
  f.push_back(integer_field("recency_cutoff_ms", &CurationConfig::recency_cutoff_ms));
  f.push_back({"camera_allowlist",
               [](CurationConfig& c, const std::string& v) { c.camera_allowlist = parse_list(v); },
               [](const CurationConfig& c) { return join(c.camera_allowlist); }});
  f.push_back(bool_field("camera_model_filter", &CurationConfig::camera_model_filter));
  f.push_back(double_field("max_angle_deg", &CurationConfig::max_angle_deg));
  f.push_back(double_field("max_loc_m", &CurationConfig::max_loc_m));
  f.push_back(double_field("sparsity_m", &CurationConfig::sparsity_m));
  f.push_back({"alpha_px",
               [](CurationConfig& c, const std::string& v) { c.bev.alpha_px = parse_integer<int>("alpha_px", v); },
               [](const CurationConfig& c) { return fmt::format("{}", c.bev.alpha_px); }});
  f.push_back({"delta_px",
               [](CurationConfig& c, const std::string& v) { c.bev.delta_px = parse_integer<int>("delta_px", v); },
               [](const CurationConfig& c) { return fmt::format("{}", c.bev.delta_px); }});
  f.push_back({"rho", [](CurationConfig& c, const std::string& v) { c.bev.rho = parse_double("rho", v); },
               [](const CurationConfig& c) { return fmt::format("{}", c.bev.rho); }});
  f.push_back(integer_field("penetration_px", &CurationConfig::penetration_px));
  f.push_back(bool_field("undistort", &CurationConfig::undistort));
  f.push_back(string_field("api_base", &CurationConfig::api_base));
  f.push_back(string_field("osm_base", &CurationConfig::osm_base));
  f.push_back(path_field("fixtures", &CurationConfig::fixtures));
  f.push_back(integer_field("workers", &CurationConfig::workers));
  f.push_back(double_field("requests_per_second", &CurationConfig::requests_per_second));
  f.push_back(integer_field("split_seed", &CurationConfig::split_seed));
  f.push_back(double_field("split_cell_m", &CurationConfig::split_cell_m));
  return f;
}

std::string file_value(const std::string& key, const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return fmt_bool(v.get<bool>());
  if (v.is_number()) return v.dump();
  if (v.is_array()) {
    std::vector<std::string> items;
    for (const auto& e : v) {
      if (!e.is_string()) throw ValidationError("config key '" + key + "' must be a list of strings");
      items.push_back(e.get<std::string>());
    }
    return join(items);
  }
  throw ValidationError("config key '" + key + "' has an unsupported type");
}

}  // namespace

const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = make_fields();
  return fields;
}

std::string env_var_for(std::string_view key) {
  std::string out = "MIA_";
  for (char c : key) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string flag_for(std::string_view key) {
  std::string out = "--";
  for (char c : key) out += c == '_' ? '-' : c;
  return out;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

CurationConfig resolve_config(const std::map<std::string, std::string>& flags, const EnvLookup& env,
                              const json& file) {
  if (!file.is_null() && !file.is_object()) throw ValidationError("config file must hold a JSON object");
  std::set<std::string> known;
  for (const auto& f : config_fields()) known.insert(f.key);
  if (file.is_object()) {
    for (const auto& [k, v] : file.items()) {
      if (!known.count(k)) throw ValidationError("unknown config key '" + k + "'");
    }
  }
  for (const auto& [k, v] : flags) {
    if (!known.count(k)) throw ValidationError("unknown setting '" + k + "'");
  }

  CurationConfig cfg = CurationConfig::defaults();
  for (const auto& f : config_fields()) {
    if (const auto it = flags.find(f.key); it != flags.end()) {
      f.set(cfg, it->second);
    } else if (const auto e = env ? env(env_var_for(f.key)) : std::nullopt) {
      f.set(cfg, *e);
    } else if (file.is_object() && file.contains(f.key)) {
      f.set(cfg, file_value(f.key, file[f.key]));
    }
  }
  return cfg;
}

json load_config_file(const std::filesystem::path& path) {
  const json doc = json::parse(read_file_text(path), nullptr, false);
  if (doc.is_discarded()) throw ValidationError("config file " + path.string() + " is not valid JSON");
  return doc;
}

namespace {

GeoPolygon polygon_from_json(const json& pts, const std::string& what) {
  if (!pts.is_array()) throw ValidationError(what + " must be an array of [lon, lat] pairs");
  std::vector<Vec2> ring;
  for (const auto& p : pts) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw ValidationError(what + " must be an array of [lon, lat] pairs");
    }
    ring.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  GeoPolygon poly = open_ring(std::move(ring));
  validate_boundary(poly);
  return poly;
}

}  // namespace

void validate_boundary(const GeoPolygon& poly) {
  for (const auto& p : poly) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < -180 || p.x > 180 || p.y < -90 || p.y > 90) {
      throw ValidationError("boundary vertex out of range");
    }
  }
  if (poly.size() < 3 || !ring_is_simple(poly) || ring_signed_area(poly) == 0.0) {
    throw ValidationError("boundary must be a simple polygon with at least 3 vertices");
  }
}

GeoPolygon load_region(const std::filesystem::path& regions_file, const std::string& name) {
  const json doc = json::parse(read_file_text(regions_file), nullptr, false);
  if (doc.is_discarded() || !doc.contains("regions") || !doc["regions"].is_object()) {
    throw ValidationError("regions file " + regions_file.string() + " is malformed");
  }
  const auto& regions = doc["regions"];
  if (!regions.contains(name)) throw ValidationError("unknown region '" + name + "'");
  return polygon_from_json(regions[name], "region '" + name + "'");
}

GeoPolygon load_boundary_file(const std::filesystem::path& path) {
  const json doc = json::parse(read_file_text(path), nullptr, false);
  if (doc.is_discarded()) throw ValidationError("boundary file " + path.string() + " is not valid JSON");
  return polygon_from_json(doc.is_object() && doc.contains("boundary") ? doc["boundary"] : doc,
                           "boundary file " + path.string());
}

GeoPolygon resolve_boundary(const CurationConfig& cfg) {
  if (!cfg.region.empty()) return load_region(cfg.regions_file, cfg.region);
  return load_boundary_file(cfg.boundary_file);
}

FilterConfig filter_config(const CurationConfig& cfg, GeoPolygon boundary) {
  FilterConfig f = FilterConfig::defaults(std::move(boundary));
  f.recency_cutoff_ms = cfg.recency_cutoff_ms;
  f.camera_allowlist.clear();
  for (const auto& m : cfg.camera_allowlist) f.camera_allowlist.insert(normalize_camera_model(m));
  f.camera_model_filter_enabled = cfg.camera_model_filter;
  f.max_angle_discrepancy_deg = cfg.max_angle_deg;
  f.max_loc_discrepancy_m = cfg.max_loc_m;
  f.sparsity_radius_m = cfg.sparsity_m;
  f.validate();
  return f;
}

}  // namespace mia
