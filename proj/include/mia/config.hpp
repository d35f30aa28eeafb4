#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mia/bev.hpp"
#include "mia/fpv.hpp"

namespace mia {

struct CurationConfig {
  // Either a named region (looked up in regions_file) or a polygon file.
  std::string region;
  std::filesystem::path regions_file;
  std::filesystem::path boundary_file;
  // Output subdirectory; defaults to the region name or boundary file stem.
  std::string city;
  std::filesystem::path out = "out";

  std::int64_t recency_cutoff_ms = kDefaultRecencyCutoffMs;
  std::vector<std::string> camera_allowlist;
  bool camera_model_filter = true;
  double max_angle_deg = 20.0;
  double max_loc_m = 3.0;
  double sparsity_m = 4.0;

  BevConfig bev;
  int penetration_px = 4;
  bool undistort = true;

  std::string api_base;
  std::string osm_base = "https://api.openstreetmap.org";
  std::filesystem::path fixtures;
  int workers = 1;
  double requests_per_second = 10.0;

  std::uint64_t split_seed = 0;
  double split_cell_m = 500.0;

  static CurationConfig defaults();
  // Throws ValidationError.
  void validate() const;
  std::string city_name() const;
};

// One settable field: its key, and how to read and write it as a string.
// Flag spelling is --key with '_' replaced by '-'; the environment
// variable is MIA_<KEY>.
struct ConfigField {
  std::string key;
  std::function<void(CurationConfig&, const std::string&)> set;
  std::function<std::string(const CurationConfig&)> get;
};

const std::vector<ConfigField>& config_fields();

std::string env_var_for(std::string_view key);
std::string flag_for(std::string_view key);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// Per field: flag, then environment, then config file, then default.
// Throws ValidationError for unknown file keys and unparsable values.
CurationConfig resolve_config(const std::map<std::string, std::string>& flags, const EnvLookup& env,
                              const nlohmann::json& file);

nlohmann::json load_config_file(const std::filesystem::path& path);

// {"regions": {"name": [[lon, lat], ...]}}
GeoPolygon load_region(const std::filesystem::path& regions_file, const std::string& name);
// [[lon, lat], ...] or {"boundary": [[lon, lat], ...]}
GeoPolygon load_boundary_file(const std::filesystem::path& path);
// Throws ValidationError when the polygon is not a simple ring of at least
// three distinct points with valid coordinates.
void validate_boundary(const GeoPolygon& poly);

GeoPolygon resolve_boundary(const CurationConfig& cfg);
FilterConfig filter_config(const CurationConfig& cfg, GeoPolygon boundary);

}  // namespace mia
