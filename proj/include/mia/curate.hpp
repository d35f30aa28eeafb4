#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mia/bev.hpp"
#include "mia/config.hpp"
#include "mia/dataset.hpp"
#include "mia/fpv.hpp"
#include "mia/mapillary.hpp"
#include "mia/osm.hpp"
#include "mia/visibility.hpp"

namespace mia {

struct RenderedSample {
  SemanticBev bev;
  VisibilityMask mask;  // frustum AND raycast
};

// Half horizontal field of view of the camera the FPV is delivered in
// (the undistorted pinhole for fisheye input).
double fpv_half_fov(const ImageMetadata& meta);

// Fetches OSM around the image's pose, renders its BEV and visibility mask.
RenderedSample render_sample(const ImageMetadata& meta, OsmSource& osm, const RuleTable& rules,
                             const BevConfig& bev_cfg, int penetration_px);

struct CurateSummary {
  std::size_t tiles = 0;
  std::size_t candidates = 0;
  std::size_t fetch_failures = 0;
  std::size_t retained = 0;
  std::size_t rendered = 0;
  std::size_t skipped_existing = 0;
  std::size_t render_failures = 0;
  FilterReport filter_report;
  std::filesystem::path dataset_dir;

  nlohmann::json to_json() const;
};

// Network and file wiring for one curation run.
struct CurateServices {
  std::shared_ptr<MapillaryClient> images;
  std::shared_ptr<OsmSource> osm;
  // Returns PNG or other encoded bytes for an image's FPV, or nullopt.
  std::function<std::optional<std::vector<std::uint8_t>>(const ImageMetadata&)> fpv_bytes;
};

// Fixture directory layout: images/<id>.json (+ optional <id>.png),
// osm/*.osm. Otherwise HTTP against the configured endpoints; the image
// endpoint needs MIA_MAPILLARY_TOKEN and throws CredentialError without it.
CurateServices make_services(const CurationConfig& cfg, const EnvLookup& env);

// enumerate -> fetch -> filter -> render -> masks -> manifest under
// <out>/<city>/. Images whose outputs already exist are not re-rendered.
CurateSummary run_curate(const CurationConfig& cfg, CurateServices& services);

}  // namespace mia
