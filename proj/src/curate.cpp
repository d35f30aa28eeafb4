#include "mia/curate.hpp"

#include <algorithm>
#include <mutex>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "mia/errors.hpp"
#include "mia/parallel.hpp"
#include "mia/raster.hpp"

namespace mia {

namespace fs = std::filesystem;
using nlohmann::json;

double fpv_half_fov(const ImageMetadata& meta) {
  CameraIntrinsics intr = intrinsics_from_metadata(meta);
  if (intr.model == LensModel::kFisheye) intr = undistorted_intrinsics(intr);
  return intr.half_hfov();
}

RenderedSample render_sample(const ImageMetadata& meta, OsmSource& osm, const RuleTable& rules,
                             const BevConfig& bev_cfg, int penetration_px) {
  const GeoPoint pose = meta.pose_point();
  const UtmFrame frame = UtmFrame::for_point(pose);
  const Vec2 center = frame.project(pose);
  const BevWindow window =
      compute_bev_window(center, meta.pose_heading(), bev_cfg.alpha_px, bev_cfg.delta_px, bev_cfg.rho);
  const OsmGraph graph = osm.fetch(window_geo_box(window, frame));
  RenderedSample s;
  s.bev = render_bev(graph, rules, frame, center, meta.pose_heading(), bev_cfg);
  s.mask = combined_mask(frustum_mask(fpv_half_fov(meta), bev_cfg.alpha_px),
                         raycast_mask(s.bev, penetration_px));
  return s;
}

json CurateSummary::to_json() const {
  return json{{"tiles", tiles},
              {"candidates", candidates},
              {"fetch_failures", fetch_failures},
              {"retained", retained},
              {"rendered", rendered},
              {"skipped_existing", skipped_existing},
              {"render_failures", render_failures},
              {"filter_report", filter_report_to_json(filter_report)},
              {"dataset_dir", dataset_dir.string()}};
}

namespace {

// "https://host:port/path?q" -> ("https://host:port", "/path?q").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ValidationError("not an absolute URL: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

bool is_png(std::span<const std::uint8_t> b) {
  static constexpr std::uint8_t kSig[] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return b.size() >= 8 && std::equal(std::begin(kSig), std::end(kSig), b.begin());
}

}  // namespace

CurateServices make_services(const CurationConfig& cfg, const EnvLookup& env) {
  CurateServices s;
  if (!cfg.fixtures.empty()) {
    const fs::path images = cfg.fixtures / "images";
    if (!fs::is_directory(images)) throw IoError("fixture directory " + images.string() + " missing");
    s.images = std::make_shared<MapillaryClient>(std::make_shared<FixtureTransport>(images), "fixture");
    s.osm = std::make_shared<FixtureOsmSource>(cfg.fixtures / "osm");
    s.fpv_bytes = [images](const ImageMetadata& m) -> std::optional<std::vector<std::uint8_t>> {
      const fs::path p = images / (m.id + ".png");
      if (!fs::exists(p)) return std::nullopt;
      return read_file_bytes(p);
    };
    return s;
  }
  const auto token = env ? env(std::string(kTokenEnvVar)) : std::nullopt;
  if (!token || token->empty()) {
    throw CredentialError(fmt::format("set {} to a Mapillary access token", kTokenEnvVar));
  }
  s.images = std::make_shared<MapillaryClient>(std::make_shared<HttpTransport>(cfg.api_base), *token,
                                               RetryPolicy{}, cfg.requests_per_second);
  s.osm = std::make_shared<HttpOsmSource>(std::make_shared<ApiClient>(
      std::make_shared<HttpTransport>(cfg.osm_base), RetryPolicy{}, cfg.requests_per_second));
  s.fpv_bytes = [](const ImageMetadata& m) -> std::optional<std::vector<std::uint8_t>> {
    if (m.thumb_url.empty()) return std::nullopt;
    const auto [base, target] = split_url(m.thumb_url);
    ApiClient client(std::make_shared<HttpTransport>(base));
    const std::string body = client.get(target);
    return std::vector<std::uint8_t>(body.begin(), body.end());
  };
  return s;
}

namespace {

struct DatasetPaths {
  fs::path root;
  fs::path meta_dir() const { return root / "meta"; }
  fs::path fpv_dir() const { return root / "fpv"; }
  fs::path bev_dir() const { return root / "bev"; }
  fs::path mask_dir() const { return root / "mask"; }
};

std::vector<std::string> list_candidates(const std::vector<TileId>& tiles, MapillaryClient& client,
                                         int workers) {
  std::vector<std::vector<std::string>> per_tile(tiles.size());
  parallel_for(tiles.size(), workers,
               [&](std::size_t i) { per_tile[i] = fetch_tile_image_ids(tiles[i], client); });
  std::set<std::string> ids;
  for (const auto& v : per_tile) ids.insert(v.begin(), v.end());
  return {ids.begin(), ids.end()};
}

// Cached per-image metadata makes reruns independent of the network.
std::optional<ImageMetadata> load_metadata(const std::string& id, MapillaryClient& client,
                                           const DatasetPaths& paths) {
  const fs::path cache = paths.meta_dir() / (id + ".json");
  if (fs::exists(cache)) return parse_image_metadata(std::string_view(read_file_text(cache)));
  try {
    ImageMetadata m = fetch_image_metadata(id, client);
    write_file_atomic(cache, image_metadata_to_json(m).dump(2) + "\n");
    return m;
  } catch (const CredentialError&) {
    throw;
  } catch (const std::exception& e) {
    spdlog::warn("image {}: metadata unusable: {}", id, e.what());
    return std::nullopt;
  }
}

std::string existing_fpv(const DatasetPaths& paths, const std::string& id) {
  for (const char* ext : {".png", ".jpg"}) {
    const fs::path p = paths.fpv_dir() / (id + ext);
    if (fs::exists(p)) return (fs::path("fpv") / (id + ext)).generic_string();
  }
  return {};
}

// Writes the FPV (undistorted when it is a fisheye PNG) and returns its
// dataset-relative path, or "" when no FPV is available.
std::string write_fpv(const ImageMetadata& meta, const CurationConfig& cfg, CurateServices& services,
                      const DatasetPaths& paths) {
  if (!services.fpv_bytes) return {};
  auto bytes = services.fpv_bytes(meta);
  if (!bytes) return {};
  if (!is_png(*bytes)) {
    write_file_atomic(paths.fpv_dir() / (meta.id + ".jpg"), *bytes);
    return (fs::path("fpv") / (meta.id + ".jpg")).generic_string();
  }
  if (cfg.undistort && meta.camera_type == CameraType::kFisheye) {
    const Image src = decode_png(*bytes);
    ImageMetadata sized = meta;
    sized.width = src.width;
    sized.height = src.height;
    const UndistortResult u = undistort_fisheye(src, intrinsics_from_metadata(sized));
    const auto encoded = encode_png(u.image);
    bytes->assign(encoded.begin(), encoded.end());
  }
  write_file_atomic(paths.fpv_dir() / (meta.id + ".png"), *bytes);
  return (fs::path("fpv") / (meta.id + ".png")).generic_string();
}

ManifestRecord make_record(const ImageMetadata& meta, std::string fpv_path) {
  ManifestRecord r;
  r.id = meta.id;
  r.sequence_id = meta.sequence_id;
  const GeoPoint pose = meta.pose_point();
  r.lat = pose.lat();
  r.lon = pose.lon();
  r.utm = wgs84_to_utm(pose);
  r.heading_deg = meta.pose_heading().degrees();
  r.captured_at = meta.captured_at;
  r.camera_model = meta.camera_model;
  r.camera_type = std::string(to_string(meta.camera_type));
  r.focal = meta.camera_params ? meta.camera_params->focal : 0.0;
  r.fpv_path = std::move(fpv_path);
  r.bev_path = (fs::path("bev") / (meta.id + "_bev.png")).generic_string();
  r.mask_path = (fs::path("mask") / (meta.id + "_vis.png")).generic_string();
  return r;
}

}  // namespace

CurateSummary run_curate(const CurationConfig& cfg, CurateServices& services) {
  cfg.validate();
  const GeoPolygon boundary = resolve_boundary(cfg);
  const FilterConfig filter = filter_config(cfg, boundary);
  const RuleTable rules = RuleTable::defaults();

  CurateSummary summary;
  DatasetPaths paths{cfg.out / cfg.city_name()};
  summary.dataset_dir = paths.root;
  for (const auto& d : {paths.meta_dir(), paths.fpv_dir(), paths.bev_dir(), paths.mask_dir()}) {
    fs::create_directories(d);
  }

  const std::vector<TileId> tiles = enumerate_tiles(boundary);
  summary.tiles = tiles.size();
  spdlog::info("{} tiles at zoom {}", tiles.size(), kCandidateTileZoom);

  const std::vector<std::string> ids = list_candidates(tiles, *services.images, cfg.workers);
  summary.candidates = ids.size();
  spdlog::info("{} candidate images", ids.size());

  std::vector<std::optional<ImageMetadata>> fetched(ids.size());
  parallel_for(ids.size(), cfg.workers,
               [&](std::size_t i) { fetched[i] = load_metadata(ids[i], *services.images, paths); });
  std::vector<ImageMetadata> metas;
  for (auto& m : fetched) {
    if (m) {
      metas.push_back(std::move(*m));
    } else {
      ++summary.fetch_failures;
    }
  }

  FilterResult filtered = run_filter_pipeline(std::move(metas), filter, cfg.workers);
  summary.retained = filtered.retained.size();
  summary.filter_report = filtered.report;
  write_file_atomic(paths.root / "filter_report.json",
                    filter_report_to_json(filtered.report).dump(2) + "\n");
  write_file_atomic(paths.root / "filter_report.txt", filtered.report.to_table());
  spdlog::info("{} images retained after filtering", filtered.retained.size());

  enum class Outcome { kRendered, kSkipped, kFailed };
  std::vector<Outcome> outcomes(filtered.retained.size(), Outcome::kFailed);
  std::vector<std::string> fpv_paths(filtered.retained.size());
  parallel_for(filtered.retained.size(), cfg.workers, [&](std::size_t i) {
    const ImageMetadata& meta = filtered.retained[i];
    const fs::path mask_path = paths.mask_dir() / (meta.id + "_vis.png");
    // The mask is written last, so its presence marks a complete sample.
    if (fs::exists(mask_path)) {
      fpv_paths[i] = existing_fpv(paths, meta.id);
      outcomes[i] = Outcome::kSkipped;
      return;
    }
    try {
      const RenderedSample s = render_sample(meta, *services.osm, rules, cfg.bev, cfg.penetration_px);
      fpv_paths[i] = write_fpv(meta, cfg, services, paths);
      write_file_atomic(paths.bev_dir() / (meta.id + "_bev.png"), encode_png(gray_image(pack_bev(s.bev))));
      write_file_atomic(mask_path, encode_png(gray_image(mask_to_gray(s.mask))));
      outcomes[i] = Outcome::kRendered;
    } catch (const CredentialError&) {
      throw;
    } catch (const std::exception& e) {
      spdlog::warn("image {}: render failed: {}", meta.id, e.what());
    }
  });

  DatasetManifest manifest;
  std::vector<UtmPoint> poses;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    switch (outcomes[i]) {
      case Outcome::kRendered: ++summary.rendered; break;
      case Outcome::kSkipped: ++summary.skipped_existing; break;
      case Outcome::kFailed: ++summary.render_failures; continue;
    }
    manifest.records.push_back(make_record(filtered.retained[i], fpv_paths[i]));
    poses.push_back(manifest.records.back().utm);
  }

  std::optional<SplitAssignment> split;
  try {
    split = split_geographic(poses, {.ratios = {0.8, 0.1, 0.1}, .cell_m = cfg.split_cell_m, .seed = cfg.split_seed});
  } catch (const ValidationError& e) {
    spdlog::warn("geographic split not possible ({}); every image goes to train", e.what());
  }
  for (auto& r : manifest.records) r.split = split ? split->split_of(r.utm) : Split::kTrain;

  write_manifest(paths.root / "manifest.jsonl", manifest);
  spdlog::info("{} rendered, {} already complete, {} failed", summary.rendered, summary.skipped_existing,
               summary.render_failures);
  return summary;
}

}  // namespace mia
